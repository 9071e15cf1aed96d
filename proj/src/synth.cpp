#include "aog/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "aog/error.hpp"

namespace aog {

using nlohmann::json;

void validate(const SynthSpec& spec) {
    if (spec.image_count < 0) throw Error(ErrorCode::InvalidConfig, "image_count must be non-negative");
    if (spec.layers.empty()) throw Error(ErrorCode::InvalidConfig, "synth spec needs at least one layer");
    if (spec.templates.empty()) throw Error(ErrorCode::InvalidConfig, "synth spec needs at least one template");
    if (spec.image_width == 0 || spec.image_height == 0) throw Error(ErrorCode::InvalidConfig, "empty image frame");
    if (!(spec.noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise_sigma must be non-negative");
    if (spec.jitter_steps < 0 || !(spec.jitter_step_px >= 0.0))
        throw Error(ErrorCode::InvalidConfig, "jitter must be non-negative");
    auto probability = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!probability(spec.absent_probability) || !probability(spec.flip_probability))
        throw Error(ErrorCode::InvalidConfig, "probabilities must lie in [0, 1]");
    for (const auto& l : spec.layers) validate(l);
    for (const auto& t : spec.templates) {
        if (!(t.part_size.w > 0.0 && t.part_size.h > 0.0))
            throw Error(ErrorCode::InvalidConfig, "template " + t.name + " needs a positive part size");
        for (const auto& m : t.motif) {
            if (m.layer < 0 || m.layer >= static_cast<int>(spec.layers.size()) || m.channel < 0 ||
                m.channel >= spec.layers[m.layer].channels)
                throw Error(ErrorCode::InvalidConfig, "motif cell of " + t.name + " is outside the layout");
        }
    }
}

SynthSpec default_synth_spec(std::uint64_t seed, int image_count, int template_count, double noise_sigma,
                             int jitter_steps) {
    SynthSpec s;
    s.seed = seed;
    s.image_count = image_count;
    s.noise_sigma = noise_sigma;
    s.jitter_steps = jitter_steps;
    s.layers = {
        {"conv5_2", 8, 14, 14, 16.0f, 8.0f, 64.0f},
        {"conv5_3", 8, 7, 7, 32.0f, 16.0f, 96.0f},
    };
    const Size sizes[] = {{64, 64}, {72, 56}, {56, 72}, {64, 48}};
    // Template t lights one cell in every channel c with c % 3 != t % 3, in every
    // layer, at an offset drawn from a fixed stream: motifs do not depend on `seed`.
    std::uint64_t state = 0x9e3779b97f4a7c15ull;
    auto next = [&state]() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    for (int t = 0; t < template_count; ++t) {
        SynthTemplate tmpl;
        tmpl.name = "pose-" + std::to_string(t);
        tmpl.part_size = sizes[t % 4];
        for (int l = 0; l < static_cast<int>(s.layers.size()); ++l) {
            const int reach = l == 0 ? 2 : 1;
            for (int c = 0; c < s.layers[l].channels; ++c) {
                const int dx = static_cast<int>(next() % (2 * reach + 1)) - reach;
                const int dy = static_cast<int>(next() % (2 * reach + 1)) - reach;
                const double amplitude = 1.0 + static_cast<double>(next() % 1001) / 1000.0;
                if (c % 3 == t % 3) continue;
                tmpl.motif.push_back({l, c, dx, dy, amplitude});
            }
        }
        s.templates.push_back(std::move(tmpl));
    }
    return s;
}

namespace {

json layer_json(const LayerMeta& m) {
    return {{"name", m.name},         {"channels", m.channels},   {"height", m.height}, {"width", m.width},
            {"stride_px", m.stride_px}, {"offset_px", m.offset_px}, {"rf_px", m.rf_px}};
}

LayerMeta layer_from(const json& j) {
    LayerMeta m;
    m.name = j.value("name", std::string("layer"));
    m.channels = j.at("channels").get<int>();
    m.height = j.at("height").get<int>();
    m.width = j.at("width").get<int>();
    m.stride_px = j.at("stride_px").get<float>();
    m.offset_px = j.at("offset_px").get<float>();
    m.rf_px = j.at("rf_px").get<float>();
    return m;
}

int anchor_cell(double pos, float offset, float stride) {
    return static_cast<int>(std::floor((pos - offset) / stride + 0.5));
}

std::string image_id(const std::string& prefix, int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", index);
    return prefix + buf;
}

}  // namespace

json to_json(const SynthSpec& spec) {
    json layers = json::array();
    for (const auto& l : spec.layers) layers.push_back(layer_json(l));
    json templates = json::array();
    for (const auto& t : spec.templates) {
        json motif = json::array();
        for (const auto& m : t.motif)
            motif.push_back({{"layer", m.layer}, {"channel", m.channel}, {"dx", m.dx}, {"dy", m.dy},
                             {"amplitude", m.amplitude}});
        templates.push_back({{"name", t.name}, {"part_w", t.part_size.w}, {"part_h", t.part_size.h}, {"motif", motif}});
    }
    return {{"seed", spec.seed},
            {"image_count", spec.image_count},
            {"id_prefix", spec.id_prefix},
            {"image_width", spec.image_width},
            {"image_height", spec.image_height},
            {"layers", layers},
            {"templates", templates},
            {"noise_sigma", spec.noise_sigma},
            {"jitter_steps", spec.jitter_steps},
            {"jitter_step_px", spec.jitter_step_px},
            {"absent_probability", spec.absent_probability},
            {"flip_probability", spec.flip_probability}};
}

SynthSpec synth_spec_from_json(const json& j) {
    try {
        SynthSpec s = default_synth_spec(j.value("seed", std::uint64_t{1}), 50, 3, 0.0, 0);
        s.image_count = j.value("image_count", s.image_count);
        s.id_prefix = j.value("id_prefix", s.id_prefix);
        s.image_width = j.value("image_width", s.image_width);
        s.image_height = j.value("image_height", s.image_height);
        s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
        s.jitter_steps = j.value("jitter_steps", s.jitter_steps);
        s.jitter_step_px = j.value("jitter_step_px", s.jitter_step_px);
        s.absent_probability = j.value("absent_probability", s.absent_probability);
        s.flip_probability = j.value("flip_probability", s.flip_probability);
        if (j.contains("layers")) {
            s.layers.clear();
            for (const auto& l : j.at("layers")) s.layers.push_back(layer_from(l));
        }
        if (j.contains("templates")) {
            s.templates.clear();
            for (const auto& t : j.at("templates")) {
                SynthTemplate tmpl;
                tmpl.name = t.at("name").get<std::string>();
                tmpl.part_size = {t.at("part_w").get<double>(), t.at("part_h").get<double>()};
                for (const auto& m : t.at("motif"))
                    tmpl.motif.push_back({m.at("layer").get<int>(), m.at("channel").get<int>(), m.value("dx", 0),
                                          m.value("dy", 0), m.value("amplitude", 1.0)});
                s.templates.push_back(std::move(tmpl));
            }
        }
        validate(s);
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("synth spec: ") + e.what());
    }
}

SynthCorpus synth_generate(const SynthSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> pick_template(0, static_cast<int>(spec.templates.size()) - 1);
    std::uniform_int_distribution<int> jitter(-spec.jitter_steps, spec.jitter_steps);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    const double w = spec.image_width;
    const double h = spec.image_height;
    SynthCorpus out;
    for (int i = 0; i < spec.image_count; ++i) {
        // Fixed draw order per image keeps the stream aligned across settings.
        const int t = pick_template(rng);
        const int jx = jitter(rng);
        const int jy = jitter(rng);
        const bool absent = unit(rng) < spec.absent_probability;
        const bool flipped = unit(rng) < spec.flip_probability;
        const SynthTemplate& tmpl = spec.templates[t];

        Point center{0.5 * w + spec.jitter_step_px * jx, 0.5 * h + spec.jitter_step_px * jy};
        // A flipped instance is the mirror image of an upright one planted at the mirrored center.
        const Point planted = flipped ? Point{w - center.x, center.y} : center;

        FeatureMapSet maps;
        maps.image_id = image_id(spec.id_prefix, i);
        maps.image_width = spec.image_width;
        maps.image_height = spec.image_height;
        for (const auto& meta : spec.layers) maps.layers.push_back({meta, std::vector<float>(meta.value_count()), {}});

        if (!absent) {
            for (const auto& m : tmpl.motif) {
                LayerMaps& l = maps.layers[m.layer];
                const int row = anchor_cell(planted.y, l.meta.offset_px, l.meta.stride_px) + m.dy;
                const int col = anchor_cell(planted.x, l.meta.offset_px, l.meta.stride_px) + m.dx;
                if (row < 0 || col < 0 || row >= l.meta.height || col >= l.meta.width) continue;
                float& v = l.raw[l.index(m.channel, row, col)];
                v = std::max(v, static_cast<float>(m.amplitude));
            }
        }
        for (auto& l : maps.layers)
            for (float& v : l.raw)
                v = static_cast<float>(std::max(0.0, v + spec.noise_sigma * noise(rng)));
        if (flipped) maps = mirror_horizontal(maps);

        OracleRecord rec;
        rec.image_id = maps.image_id;
        rec.present = !absent;
        rec.flipped = flipped && !absent;
        if (!absent) {
            rec.gt_bbox = {center.x, center.y, tmpl.part_size.w, tmpl.part_size.h};
            rec.gt_template = tmpl.name;
        }
        rec.image_w = w;
        rec.image_h = h;
        out.maps.push_back(std::move(maps));
        out.oracle.push_back(std::move(rec));
    }
    return out;
}

void write_synth_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus) {
    std::filesystem::create_directories(dir);
    for (const auto& m : corpus.maps) save_fmap_file(dir / (m.image_id + ".fmap"), m);
    save_records(dir / "oracle.jsonl", corpus.oracle);
}

}  // namespace aog
