#include "aog/miner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "aog/error.hpp"
#include "aog/parser.hpp"

namespace aog {

void validate(const MinerConfig& cfg, std::size_t layer_count) {
    if (cfg.valid_layers < 1) throw Error(ErrorCode::InvalidConfig, "K must be at least 1");
    if (cfg.epsilon_cells < 1) throw Error(ErrorCode::InvalidConfig, "epsilon must be at least 1 cell");
    if (layer_count == 0) throw Error(ErrorCode::InvalidConfig, "no layers to mine");
    for (const auto& [layer, n] : cfg.n_k_override) {
        if (layer < 0 || layer >= static_cast<int>(layer_count))
            throw Error(ErrorCode::InvalidConfig, "n_k override for missing layer " + std::to_string(layer));
        if (n < 1) throw Error(ErrorCode::InvalidConfig, "n_k override must be at least 1");
    }
}

std::vector<int> valid_layer_indices(const MinerConfig& cfg, std::size_t layer_count) {
    const int total = static_cast<int>(layer_count);
    const int k = std::min(cfg.valid_layers, total);
    std::vector<int> out;
    for (int l = total - k; l < total; ++l) out.push_back(l);
    return out;
}

std::vector<Candidate> enumerate_candidates(const LayerMeta& meta, int layer_index) {
    std::vector<Candidate> out;
    out.reserve(meta.value_count());
    for (int ch = 0; ch < meta.channels; ++ch)
        for (int r = 0; r < meta.height; ++r)
            for (int c = 0; c < meta.width; ++c)
                out.push_back({layer_index, ch, r, c, unit_to_image_region(meta, r, c).center});
    return out;
}

MiningUnit best_mining_unit(const FeatureMapSet& maps, int layer, int channel, int row, int col,
                            const ScoreWeights& weights) {
    const LayerMaps& lm = maps.layers.at(layer);
    LatentPattern probe;
    probe.layer = layer;
    probe.channel = channel;
    probe.row = row;
    probe.col = col;
    probe.deform_side = deform_side_for(lm.meta);
    probe.ideal_center = unit_to_image_region(lm.meta, row, col).center;
    const UnitAssignment a = infer_latent_pattern(probe, maps, {}, weights);
    return {a.unit.row, a.unit.col, a.unit_center, a.score};
}

Candidate score_candidate(Candidate c, std::span<const AnnotatedView> annotated,
                          std::span<const FeatureMapSet* const> unannotated, const ScoreWeights& weights) {
    if (annotated.empty()) throw Error(ErrorCode::NoAnnotations, "candidate scoring needs annotated images");

    Point mean_gt;
    for (const auto& view : annotated) mean_gt = mean_gt + view.annotation->bbox.center();
    mean_gt = (1.0 / static_cast<double>(annotated.size())) * mean_gt;
    const Point displacement = mean_gt - c.center;

    double ann = 0.0;
    double stride_px = 0.0;
    for (const auto& view : annotated) {
        stride_px = view.maps->layers.at(c.layer).meta.stride_px;
        const MiningUnit u = best_mining_unit(*view.maps, c.layer, c.channel, c.row, c.col, weights);
        ann += u.score +
               inference_compatibility(u.center + displacement, view.annotation->bbox.center(), stride_px, weights);
    }
    c.annotated_term = ann / static_cast<double>(annotated.size());

    double unann = 0.0;
    for (const FeatureMapSet* maps : unannotated)
        unann += best_mining_unit(*maps, c.layer, c.channel, c.row, c.col, weights).score;
    if (!unannotated.empty()) unann /= static_cast<double>(unannotated.size());
    const double close_len = unit_length(weights.close_unit, stride_px);
    c.unannotated_term = weights.unant * (unann - weights.close * squared_norm((1.0 / close_len) * displacement));

    c.score = c.annotated_term + c.unannotated_term;
    return c;
}

std::vector<std::size_t> select_with_suppression(std::span<const Candidate> scored, int n_k, int epsilon_cells) {
    std::vector<std::size_t> order(scored.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Candidate& x = scored[a];
        const Candidate& y = scored[b];
        if (x.score != y.score) return x.score > y.score;
        if (x.channel != y.channel) return x.channel < y.channel;
        if (x.row != y.row) return x.row < y.row;
        return x.col < y.col;
    });

    std::vector<std::size_t> selected;
    std::vector<char> suppressed(scored.size(), 0);
    for (std::size_t idx : order) {
        if (static_cast<int>(selected.size()) >= n_k) break;
        if (suppressed[idx]) continue;
        selected.push_back(idx);
        const Candidate& s = scored[idx];
        for (std::size_t j = 0; j < scored.size(); ++j) {
            const Candidate& o = scored[j];
            if (o.channel == s.channel && o.layer == s.layer &&
                std::max(std::abs(o.row - s.row), std::abs(o.col - s.col)) < epsilon_cells)
                suppressed[j] = 1;
        }
    }
    return selected;
}

namespace {

// Closed-form (alpha, gamma) for a fixed xi; returns the squared error.
double curve_sse(std::span<const double> scores, std::span<const double> sqrt_rank, double log_xi) {
    const double root_xi = std::sqrt(std::pow(10.0, log_xi));
    const double n = static_cast<double>(scores.size());
    double sb = 0.0, sbb = 0.0, ss = 0.0, sbs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double b = std::exp(-root_xi * sqrt_rank[i]);
        sb += b;
        sbb += b * b;
        ss += scores[i];
        sbs += b * scores[i];
    }
    const double det = n * sbb - sb * sb;
    double alpha = 0.0;
    double gamma = ss / n;
    if (std::abs(det) > 1e-300) {
        alpha = (n * sbs - sb * ss) / det;
        gamma = (ss - alpha * sb) / n;
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double e = alpha * std::exp(-root_xi * sqrt_rank[i]) + gamma - scores[i];
        sse += e * e;
    }
    return sse;
}

}  // namespace

std::optional<double> fit_score_decay(std::span<const double> ranked_scores) {
    std::vector<double> distinct(ranked_scores.begin(), ranked_scores.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3) return std::nullopt;

    std::vector<double> sqrt_rank(ranked_scores.size());
    for (std::size_t i = 0; i < sqrt_rank.size(); ++i) sqrt_rank[i] = std::sqrt(static_cast<double>(i + 1));

    constexpr double kLo = -4.0;  // log10 of the xi search range [1e-4, 10]
    constexpr double kHi = 1.0;
    constexpr int kSteps = 500;
    const double step = (kHi - kLo) / kSteps;
    int best = 0;
    double best_sse = curve_sse(ranked_scores, sqrt_rank, kLo);
    for (int i = 1; i <= kSteps; ++i) {
        const double e = curve_sse(ranked_scores, sqrt_rank, kLo + step * i);
        if (e < best_sse) {
            best_sse = e;
            best = i;
        }
    }

    // Golden-section refinement between the neighbouring grid points.
    double a = kLo + step * std::max(best - 1, 0);
    double b = kLo + step * std::min(best + 1, kSteps);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - g * (b - a);
    double x2 = a + g * (b - a);
    double f1 = curve_sse(ranked_scores, sqrt_rank, x1);
    double f2 = curve_sse(ranked_scores, sqrt_rank, x2);
    for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = curve_sse(ranked_scores, sqrt_rank, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = curve_sse(ranked_scores, sqrt_rank, x2);
        }
    }
    double log_xi = 0.5 * (a + b);
    if (best_sse < curve_sse(ranked_scores, sqrt_rank, log_xi)) log_xi = kLo + step * best;
    return std::pow(10.0, log_xi);
}

int fit_layer_pattern_count(std::span<const double> ranked_scores) {
    const auto xi = fit_score_decay(ranked_scores);
    if (!xi) return 1;
    const double raw = std::ceil(0.5 / *xi - 1e-6);
    const double clamped = std::clamp(raw, 1.0, static_cast<double>(ranked_scores.size()));
    return static_cast<int>(clamped);
}

PartTemplate mine_template(int template_id, const std::string& name, std::span<const Annotation> annotations,
                           std::span<const AnnotatedView> annotated, std::span<const FeatureMapSet* const> unannotated,
                           const std::vector<LayerMeta>& layer_metas, const MinerConfig& cfg) {
    if (annotations.empty() || annotated.empty())
        throw Error(ErrorCode::NoAnnotations, "template " + std::to_string(template_id));
    validate(cfg, layer_metas.size());

    PartTemplate tmpl;
    tmpl.id = template_id;
    tmpl.name = name;
    tmpl.annotations.assign(annotations.begin(), annotations.end());
    tmpl.scale = estimate_template_scale(annotations);
    const Point mean_gt = mean_annotated_center(annotations);

    for (int layer : valid_layer_indices(cfg, layer_metas.size())) {
        const LayerMeta& meta = layer_metas[layer];
        std::vector<Candidate> cands = enumerate_candidates(meta, layer);
        for (auto& c : cands) c = score_candidate(c, annotated, unannotated, cfg.weights);

        int n_k = 0;
        if (auto it = cfg.n_k_override.find(layer); it != cfg.n_k_override.end()) {
            n_k = it->second;
        } else {
            std::vector<double> ranked(cands.size());
            std::transform(cands.begin(), cands.end(), ranked.begin(), [](const Candidate& c) { return c.score; });
            std::sort(ranked.begin(), ranked.end(), std::greater<>());
            n_k = fit_layer_pattern_count(ranked);
        }

        for (std::size_t idx : select_with_suppression(cands, n_k, cfg.epsilon_cells)) {
            const Candidate& c = cands[idx];
            LatentPattern p;
            p.id = static_cast<int>(tmpl.patterns.size());
            p.layer = layer;
            p.channel = c.channel;
            p.row = c.row;
            p.col = c.col;
            p.ideal_center = c.center;
            p.displacement = mean_gt - c.center;
            p.deform_side = deform_side_for(meta);
            tmpl.patterns.push_back(p);
        }
    }
    refresh_neighbors(tmpl, cfg.neighbor_k);
    return tmpl;
}

Box mirror_box(const Box& box, double image_width) { return {image_width - box.cx, box.cy, box.w, box.h}; }

AogModel grow_or_refine(const AogModel& model, const Annotation& annotation, const MiningCorpus& corpus,
                        const MinerConfig& cfg, const std::string& new_template_name) {
    auto img = corpus.images.find(annotation.image_id);
    if (img == corpus.images.end()) throw Error(ErrorCode::UnknownImage, annotation.image_id);
    if (annotation.bbox.w <= 0.0 || annotation.bbox.h <= 0.0)
        throw Error(ErrorCode::DegenerateBox, "annotation box on " + annotation.image_id);

    AogModel out = model;
    if (out.templates.empty()) {
        out.weights = cfg.weights;
        out.neighbor_k = cfg.neighbor_k;
    }
    if (out.layer_metas.empty()) {
        for (const auto& l : img->second.layers) out.layer_metas.push_back(l.meta);
    }

    PartTemplate* existing = out.find_template(annotation.template_id);
    std::vector<Annotation> annotations;
    std::string name = new_template_name;
    if (existing) {
        name = existing->name;
        for (const auto& a : existing->annotations)
            if (a.image_id != annotation.image_id) annotations.push_back(a);
    } else if (name.empty()) {
        name = "template-" + std::to_string(annotation.template_id);
    }
    annotations.push_back(annotation);

    std::deque<FeatureMapSet> mirrored;
    std::vector<AnnotatedView> views;
    for (const auto& a : annotations) {
        auto it = corpus.images.find(a.image_id);
        if (it == corpus.images.end()) throw Error(ErrorCode::UnknownImage, a.image_id);
        const FeatureMapSet* maps = &it->second;
        if (a.flipped) maps = &mirrored.emplace_back(mirror_horizontal(it->second));
        views.push_back({maps, &a});
    }

    std::set<std::string> annotated_ids;
    for (const auto& t : out.templates)
        for (const auto& a : t.annotations) annotated_ids.insert(a.image_id);
    for (const auto& a : annotations) annotated_ids.insert(a.image_id);

    std::vector<const FeatureMapSet*> unannotated;
    for (const auto& [id, maps] : corpus.images) {
        if (unannotated.size() >= cfg.unannotated_cap) break;
        if (!annotated_ids.count(id) && !corpus.excluded.count(id)) unannotated.push_back(&maps);
    }

    MinerConfig mining = cfg;
    mining.weights = out.weights;
    mining.neighbor_k = out.neighbor_k;
    PartTemplate mined = mine_template(annotation.template_id, name, annotations, views, unannotated,
                                       out.layer_metas, mining);
    if (existing) {
        *existing = std::move(mined);
    } else {
        out.templates.push_back(std::move(mined));
    }
    return out;
}

AogModel learn_model(std::span<const Annotation> annotations, const MiningCorpus& corpus, const MinerConfig& cfg,
                     const std::string& semantic_part) {
    if (annotations.empty()) throw Error(ErrorCode::NoAnnotations, "learning needs at least one annotation");
    std::map<int, std::map<std::string, Annotation>> by_template;
    for (const auto& a : annotations) {
        if (!corpus.images.count(a.image_id)) throw Error(ErrorCode::UnknownImage, a.image_id);
        if (a.bbox.w <= 0.0 || a.bbox.h <= 0.0)
            throw Error(ErrorCode::DegenerateBox, "annotation box on " + a.image_id);
        by_template[a.template_id][a.image_id] = a;  // later duplicates replace earlier ones
    }

    AogModel model;
    model.semantic_part = semantic_part;
    model.weights = cfg.weights;
    model.neighbor_k = cfg.neighbor_k;
    for (const auto& l : corpus.images.at(annotations.front().image_id).layers) model.layer_metas.push_back(l.meta);

    std::set<std::string> annotated_ids;
    for (const auto& [tid, anns] : by_template)
        for (const auto& [id, a] : anns) annotated_ids.insert(id);
    std::vector<const FeatureMapSet*> unannotated;
    for (const auto& [id, maps] : corpus.images) {
        if (unannotated.size() >= cfg.unannotated_cap) break;
        if (!annotated_ids.count(id) && !corpus.excluded.count(id)) unannotated.push_back(&maps);
    }

    for (const auto& [tid, anns] : by_template) {
        std::vector<Annotation> list;
        for (const auto& [id, a] : anns) list.push_back(a);
        std::deque<FeatureMapSet> mirrored;
        std::vector<AnnotatedView> views;
        for (const auto& a : list) {
            const FeatureMapSet* maps = &corpus.images.at(a.image_id);
            if (a.flipped) maps = &mirrored.emplace_back(mirror_horizontal(*maps));
            views.push_back({maps, &a});
        }
        model.templates.push_back(mine_template(tid, "template-" + std::to_string(tid), list, views, unannotated,
                                                model.layer_metas, cfg));
    }
    return model;
}

}  // namespace aog
