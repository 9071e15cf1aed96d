#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "aog/fmap.hpp"
#include "aog/model.hpp"
#include "aog/records.hpp"

namespace aog {

/// One planted activation, `dx`/`dy` cells from the part's anchor cell.
struct MotifCell {
    int layer = 0;
    int channel = 0;
    int dx = 0;
    int dy = 0;
    double amplitude = 1.0;
    friend bool operator==(const MotifCell&, const MotifCell&) = default;
};

struct SynthTemplate {
    std::string name;
    Size part_size;
    std::vector<MotifCell> motif;
    friend bool operator==(const SynthTemplate&, const SynthTemplate&) = default;
};

struct SynthSpec {
    std::uint64_t seed = 1;
    int image_count = 50;
    std::string id_prefix = "img";
    std::uint32_t image_width = 224;
    std::uint32_t image_height = 224;
    std::vector<LayerMeta> layers;
    std::vector<SynthTemplate> templates;
    double noise_sigma = 0.0;
    /// Part centers move by whole multiples of jitter_step_px, at most
    /// jitter_steps in each direction from the frame center.
    int jitter_steps = 0;
    double jitter_step_px = 16.0;
    double absent_probability = 0.0;
    double flip_probability = 0.0;
    friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

/// Throws InvalidConfig on an unusable spec.
void validate(const SynthSpec& spec);

/// Two layers shaped like the top of a VGG-16 (14×14 and 7×7, 8 channels) in a
/// 224×224 frame. Template t lights every channel c with c % 3 != t % 3.
SynthSpec default_synth_spec(std::uint64_t seed, int image_count, int template_count, double noise_sigma,
                             int jitter_steps);

nlohmann::json to_json(const SynthSpec& spec);
/// Missing fields take the defaults of default_synth_spec(seed, 50, 3, 0, 0).
SynthSpec synth_spec_from_json(const nlohmann::json& j);

struct SynthCorpus {
    std::vector<FeatureMapSet> maps;  // raw activations only
    std::vector<OracleRecord> oracle;
};

/// Deterministic in `spec`: the same spec gives identical maps and records.
SynthCorpus synth_generate(const SynthSpec& spec);

/// Writes `<id>.fmap` per image and `oracle.jsonl` into `dir`.
void write_synth_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus);

}  // namespace aog
