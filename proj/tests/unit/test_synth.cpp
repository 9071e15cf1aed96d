#include <cmath>
#include <functional>
#include <map>

#include "doctest.h"

#include "aog/error.hpp"
#include "aog/fmap.hpp"
#include "aog/miner.hpp"
#include "aog/synth.hpp"
#include "experiment.hpp"

using namespace aog;
using namespace aog::testing;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an aog::Error");
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("default spec shape") {
    const SynthSpec s = default_synth_spec(4, 10, 3, 0.0, 0);
    REQUIRE(s.layers.size() == 2);
    CHECK(s.layers[0].height == 14);
    CHECK(s.layers[1].stride_px == 32.0f);
    REQUIRE(s.templates.size() == 3);
    for (int t = 0; t < 3; ++t) {
        CHECK(s.templates[t].name == "pose-" + std::to_string(t));
        for (const auto& m : s.templates[t].motif) {
            CHECK(m.channel % 3 != t % 3);
            CHECK(std::abs(m.dx) <= (m.layer == 0 ? 2 : 1));
            CHECK(m.amplitude >= 1.0);
            CHECK(m.amplitude <= 2.0);
        }
    }
    // Motifs are fixed across seeds.
    CHECK(default_synth_spec(99, 10, 3, 0.0, 0).templates == s.templates);
}

TEST_CASE("noise-free motif cells are the unique channel maxima") {
    SynthSpec s = default_synth_spec(5, 30, 3, 0.0, 1);
    const SynthCorpus c = synth_generate(s);
    REQUIRE(c.maps.size() == 30);
    for (std::size_t i = 0; i < c.maps.size(); ++i) {
        const OracleRecord& r = c.oracle[i];
        REQUIRE(r.present);
        const SynthTemplate* tmpl = nullptr;
        for (const auto& t : s.templates)
            if (t.name == r.gt_template) tmpl = &t;
        REQUIRE(tmpl != nullptr);
        for (const auto& m : tmpl->motif) {
            const LayerMaps& l = c.maps[i].layers[m.layer];
            const int row = static_cast<int>(std::floor((r.gt_bbox.cy - l.meta.offset_px) / l.meta.stride_px + 0.5)) + m.dy;
            const int col = static_cast<int>(std::floor((r.gt_bbox.cx - l.meta.offset_px) / l.meta.stride_px + 0.5)) + m.dx;
            CHECK(l.raw[l.index(m.channel, row, col)] == static_cast<float>(m.amplitude));
            int nonzero = 0;
            for (int y = 0; y < l.meta.height; ++y)
                for (int x = 0; x < l.meta.width; ++x) nonzero += l.raw[l.index(m.channel, y, x)] != 0.0f;
            CHECK(nonzero == 1);
        }
    }
}

TEST_CASE("same spec, same bytes") {
    SynthSpec s = default_synth_spec(11, 8, 2, 0.3, 1);
    s.absent_probability = 0.2;
    s.flip_probability = 0.3;
    const SynthCorpus a = synth_generate(s);
    const SynthCorpus b = synth_generate(s);
    REQUIRE(a.maps.size() == b.maps.size());
    for (std::size_t i = 0; i < a.maps.size(); ++i) CHECK(write_fmap(a.maps[i]) == write_fmap(b.maps[i]));
    CHECK(a.oracle == b.oracle);
    s.seed = 12;
    const SynthCorpus other = synth_generate(s);
    bool differs = false;
    for (std::size_t i = 0; i < a.maps.size(); ++i) differs |= write_fmap(a.maps[i]) != write_fmap(other.maps[i]);
    CHECK(differs);
}

TEST_CASE("absent and flipped instances") {
    SynthSpec s = default_synth_spec(3, 60, 2, 0.0, 0);
    s.absent_probability = 0.3;
    s.flip_probability = 0.5;
    const SynthCorpus c = synth_generate(s);
    int absent = 0, flipped = 0;
    for (std::size_t i = 0; i < c.maps.size(); ++i) {
        const OracleRecord& r = c.oracle[i];
        if (!r.present) {
            ++absent;
            CHECK_FALSE(r.flipped);
            for (const auto& l : c.maps[i].layers)
                for (float v : l.raw) CHECK(v == 0.0f);
            continue;
        }
        flipped += r.flipped;
        // Ground truth lives in the frame as stored, so the planted mass sits under the box.
        CHECK(r.gt_bbox.cx == 112.0);
    }
    CHECK(absent > 0);
    CHECK(flipped > 0);
}

TEST_CASE("spec JSON round trip and validation") {
    SynthSpec s = default_synth_spec(21, 7, 4, 0.25, 2);
    s.id_prefix = "bird";
    s.flip_probability = 0.125;
    CHECK(synth_spec_from_json(to_json(s)) == s);
    const SynthSpec partial = synth_spec_from_json(nlohmann::json::parse(R"({"seed":3,"image_count":5})"));
    CHECK(partial.templates.size() == 3);
    CHECK(partial.image_count == 5);

    CHECK(code_of([] { synth_spec_from_json(nlohmann::json::parse(R"({"noise_sigma":-1})")); }) ==
          ErrorCode::InvalidConfig);
    CHECK(code_of([] { synth_spec_from_json(nlohmann::json::parse(R"({"absent_probability":1.5})")); }) ==
          ErrorCode::InvalidConfig);
    CHECK(code_of([] { synth_spec_from_json(nlohmann::json::parse(R"({"image_count":"many"})")); }) ==
          ErrorCode::InvalidConfig);
    SynthSpec bad = s;
    bad.templates[0].motif[0].channel = 8;
    CHECK(code_of([&] { validate(bad); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("a single noise-free template is recovered exactly") {
    for (int seed = 1; seed <= 3; ++seed) {
        const SyntheticSplit split = make_split(seed, 20, 20, 1, 0.0, 0);
        std::vector<Annotation> anns;
        for (const auto& r : split.train_truth) {
            if (anns.size() == 3) break;
            anns.push_back({r.image_id, r.gt_bbox, 0, r.flipped});
        }
        MiningCorpus corpus;
        for (const auto& m : split.train) corpus.images.emplace(m.image_id, m);
        const AogModel model = learn_model(anns, corpus, synthetic_miner_config());
        const HeldOutScore score = score_held_out(model, split);
        CHECK(score.mean_normalized_distance == 0.0);
        CHECK(score.pcp == 1.0);
    }
}
