#include "generators.hpp"

#include <algorithm>

namespace aog::testing {

LayerMeta random_layer(Rng& rng, const std::string& name, int min_side, int max_side, int max_channels) {
    LayerMeta m;
    m.name = name;
    m.channels = rng.uniform_int(1, max_channels);
    m.height = m.width = rng.uniform_int(min_side, max_side);
    m.stride_px = static_cast<float>(rng.uniform_int(4, 40));
    m.offset_px = static_cast<float>(rng.uniform_int(0, 20));
    m.rf_px = static_cast<float>(rng.uniform_int(10, 120));
    return m;
}

namespace {

FeatureMapSet empty_maps(const std::string& id, const std::vector<LayerMeta>& layers) {
    FeatureMapSet f;
    f.image_id = id;
    f.image_width = 224;
    f.image_height = 224;
    for (const auto& meta : layers) {
        LayerMaps lm;
        lm.meta = meta;
        lm.raw.assign(meta.value_count(), 0.0f);
        f.layers.push_back(std::move(lm));
    }
    return f;
}

}  // namespace

FeatureMapSet random_raw_maps(Rng& rng, const std::string& id, const std::vector<LayerMeta>& layers) {
    FeatureMapSet f = empty_maps(id, layers);
    for (auto& lm : f.layers)
        for (auto& v : lm.raw) v = static_cast<float>(rng.normal(0.5, 1.0));
    return f;
}

FeatureMapSet random_normalized_maps(Rng& rng, const std::string& id, const std::vector<LayerMeta>& layers) {
    FeatureMapSet f = empty_maps(id, layers);
    for (auto& lm : f.layers) {
        lm.normalized.resize(lm.raw.size());
        for (std::size_t i = 0; i < lm.raw.size(); ++i) {
            const double x = rng.coin(1.0 / 3.0) ? 0.0 : rng.uniform(1e-3, 3.0);
            lm.normalized[i] = x;
            lm.raw[i] = static_cast<float>(x);
        }
    }
    return f;
}

std::vector<LayerMeta> random_tiny_layout(Rng& rng) {
    LayerMeta fine = random_layer(rng, "fine", 3, 8, 8);
    LayerMeta coarse = random_layer(rng, "coarse", 2, fine.height, 8);
    coarse.stride_px = fine.stride_px * 2.0f;
    return {fine, coarse};
}

namespace {

DistanceUnit random_unit(Rng& rng) { return rng.coin(0.5) ? DistanceUnit::Cells : DistanceUnit::Pixels; }

LatentPattern random_pattern(Rng& rng, const std::vector<LayerMeta>& layers, int id) {
    LatentPattern p;
    p.id = id;
    p.layer = rng.uniform_int(0, static_cast<int>(layers.size()) - 1);
    const LayerMeta& meta = layers[p.layer];
    p.channel = rng.uniform_int(0, meta.channels - 1);
    p.row = rng.uniform_int(0, meta.height - 1);
    p.col = rng.uniform_int(0, meta.width - 1);
    p.ideal_center = unit_to_image_region(meta, p.row, p.col).center;
    p.displacement = {static_cast<double>(rng.uniform_int(-60, 60)), static_cast<double>(rng.uniform_int(-60, 60))};
    p.deform_side = deform_side_for(meta);
    return p;
}

}  // namespace

AogModel random_tiny_model(Rng& rng, const std::vector<LayerMeta>& layers, int max_templates, int max_patterns) {
    AogModel m;
    m.layer_metas = layers;
    m.neighbor_k = rng.uniform_int(1, 4);
    m.weights.loc_unit = random_unit(rng);
    m.weights.pair_unit = random_unit(rng);
    m.weights.inf_unit = random_unit(rng);
    const int templates = rng.uniform_int(1, max_templates);
    for (int t = 0; t < templates; ++t) {
        PartTemplate tmpl;
        tmpl.id = t;
        tmpl.name = "t" + std::to_string(t);
        tmpl.scale = {static_cast<double>(rng.uniform_int(8, 80)), static_cast<double>(rng.uniform_int(8, 80))};
        const int n = rng.uniform_int(1, max_patterns);
        for (int i = 0; i < n; ++i) tmpl.patterns.push_back(random_pattern(rng, layers, i));
        std::stable_sort(tmpl.patterns.begin(), tmpl.patterns.end(),
                         [](const LatentPattern& a, const LatentPattern& b) { return a.layer < b.layer; });
        for (std::size_t i = 0; i < tmpl.patterns.size(); ++i) tmpl.patterns[i].id = static_cast<int>(i);
        refresh_neighbors(tmpl, m.neighbor_k);
        m.templates.push_back(std::move(tmpl));
    }
    return m;
}

AogModel random_model(Rng& rng) {
    std::vector<LayerMeta> layers = random_tiny_layout(rng);
    AogModel m = random_tiny_model(rng, layers, 3, 5);
    m.semantic_part = rng.coin(0.5) ? "head" : "";
    m.weights.rsp = rng.uniform(0.1, 3.0);
    m.weights.d_px = rng.uniform(5.0, 60.0);
    m.weights.close_unit = random_unit(rng);
    for (auto& t : m.templates) {
        const int n = rng.uniform_int(1, 3);
        for (int i = 0; i < n; ++i) {
            Annotation a;
            a.image_id = "img" + std::to_string(rng.uniform_int(0, 99));
            a.bbox = {rng.uniform(10, 200), rng.uniform(10, 200), rng.uniform(5, 60), rng.uniform(5, 60)};
            a.template_id = t.id;
            a.flipped = rng.coin(0.3);
            t.annotations.push_back(a);
        }
        t.scale = estimate_template_scale(t.annotations);
    }
    if (rng.coin(0.5)) {
        CorpusStats stats;
        stats.statistic = rng.coin(0.5) ? NormStatistic::MeanPositive : NormStatistic::MedianPositive;
        for (const auto& l : layers) {
            std::vector<double> levels;
            for (int c = 0; c < l.channels; ++c) levels.push_back(rng.coin(0.2) ? 0.0 : rng.uniform(0.01, 5.0));
            stats.channel_level.push_back(levels);
        }
        m.normalization = stats;
    }
    return m;
}

}  // namespace aog::testing
