#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aog/geometry.hpp"

namespace aog {

/// Geometry of one conv-layer and the linear map from its cells to the image
/// plane. Container floats are kept as 32-bit so that a read/write cycle is
/// byte-identical.
struct LayerMeta {
    std::string name;
    int channels = 0;
    int height = 0;
    int width = 0;
    float stride_px = 0.0f;
    float offset_px = 0.0f;
    float rf_px = 0.0f;

    std::size_t cell_count() const { return static_cast<std::size_t>(height) * width; }
    std::size_t value_count() const { return static_cast<std::size_t>(channels) * height * width; }
    friend bool operator==(const LayerMeta&, const LayerMeta&) = default;
};

/// Throws InvalidLayout when the layer violates its invariants.
void validate(const LayerMeta& meta);

struct UnitRegion {
    Point center;
    double side = 0.0;
};

/// Receptive field of cell (row, col) projected back to the image plane.
UnitRegion unit_to_image_region(const LayerMeta& meta, int row, int col);

struct LayerMaps {
    LayerMeta meta;
    std::vector<float> raw;          // channel-major, row-major
    std::vector<double> normalized;  // empty until normalization

    std::size_t index(int channel, int row, int col) const {
        return (static_cast<std::size_t>(channel) * meta.height + row) * meta.width + col;
    }
    float raw_at(int channel, int row, int col) const { return raw[index(channel, row, col)]; }
    double x_at(int channel, int row, int col) const { return normalized[index(channel, row, col)]; }
};

struct FeatureMapSet {
    std::string image_id;
    std::uint32_t image_width = 0;
    std::uint32_t image_height = 0;
    std::vector<LayerMaps> layers;

    bool is_normalized() const;
};

FeatureMapSet read_fmap(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_fmap(const FeatureMapSet& maps);

FeatureMapSet load_fmap_file(const std::filesystem::path& path);
void save_fmap_file(const std::filesystem::path& path, const FeatureMapSet& maps);

/// Loads every `*.fmap` file in `dir`, sorted by image id.
std::vector<FeatureMapSet> load_fmap_dir(const std::filesystem::path& dir);

enum class NormStatistic {
    MeanPositive,    // mean over strictly positive activations (default)
    MeanRelu,        // mean of max(a, 0) over every cell
    MedianPositive,  // median over strictly positive activations
};

/// Per-layer, per-channel divisor computed over a corpus.
struct CorpusStats {
    NormStatistic statistic = NormStatistic::MeanPositive;
    std::vector<std::vector<double>> channel_level;  // [layer][channel], >= 0

    friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

CorpusStats compute_corpus_stats(std::span<const FeatureMapSet> maps,
                                 NormStatistic statistic = NormStatistic::MeanPositive);

/// X = max(a, 0) / level; channels whose level is zero map to X = 0.
void apply_normalization(FeatureMapSet& maps, const CorpusStats& stats);

std::pair<std::vector<FeatureMapSet>, CorpusStats> normalize_activations(
    std::vector<FeatureMapSet> maps, NormStatistic statistic = NormStatistic::MeanPositive);

/// Mirrors every grid left-to-right (raw and normalized).
FeatureMapSet mirror_horizontal(const FeatureMapSet& maps);

}  // namespace aog
