#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aog/fmap.hpp"
#include "aog/geometry.hpp"

namespace aog {

/// Unit in which a displacement is measured before it is squared/normed.
/// Cells means strides of the layer the pattern lives on.
enum class DistanceUnit { Pixels, Cells };

inline double unit_length(DistanceUnit unit, double stride_px) {
    return unit == DistanceUnit::Cells ? stride_px : 1.0;
}

/// Constant weights of the terminal and AND-node scores.
struct ScoreWeights {
    double rsp = 1.5;
    double loc = 1.0 / 3.0;
    double pair = 10.0;
    double inf = 5.0;
    double unant = 5.0;
    double close = 0.4;
    double s_none = -3.0;
    double d_px = 37.0;
    DistanceUnit loc_unit = DistanceUnit::Cells;
    DistanceUnit pair_unit = DistanceUnit::Cells;
    DistanceUnit inf_unit = DistanceUnit::Cells;    // truncation radius d_px stays in pixels
    DistanceUnit close_unit = DistanceUnit::Cells;

    friend bool operator==(const ScoreWeights&, const ScoreWeights&) = default;
};

struct Size {
    double w = 0.0;
    double h = 0.0;
    friend bool operator==(Size, Size) = default;
};

/// Ground-truth part box on one image. `bbox` is stored in the template's
/// canonical frame: flipped annotations were mirrored at ingestion and the
/// miner reads the mirrored feature maps for them.
struct Annotation {
    std::string image_id;
    Box bbox;
    int template_id = 0;
    bool flipped = false;

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct LatentPattern {
    int id = 0;
    int layer = 0;    // index into AogModel::layer_metas
    int channel = 0;
    int row = 0;      // cell at the center of the deformation square
    int col = 0;
    Point ideal_center;   // image-plane center of (row, col)
    Point displacement;   // from the pattern to its template center
    int deform_side = 1;  // cells, before border clipping

    friend bool operator==(const LatentPattern&, const LatentPattern&) = default;
};

struct CellRange {
    int row0 = 0, row1 = 0, col0 = 0, col1 = 0;  // inclusive
    bool empty() const { return row1 < row0 || col1 < col0; }
};

int deform_side_for(const LayerMeta& meta);

/// The pattern's deformation square clipped to the layer grid.
CellRange deformation_range(const LatentPattern& pattern, const LayerMeta& meta);

struct PartTemplate {
    int id = 0;
    std::string name;
    Size scale;
    std::vector<LatentPattern> patterns;  // ordered by layer, then selection order
    std::vector<Annotation> annotations;
    /// neighbors[i]: indices of the up-to-k nearest patterns in layer
    /// patterns[i].layer + 1. Derived; rebuilt by refresh_neighbors.
    std::vector<std::vector<std::size_t>> neighbors;

    friend bool operator==(const PartTemplate&, const PartTemplate&) = default;
};

void refresh_neighbors(PartTemplate& tmpl, int neighbor_k);

struct AogModel {
    std::string semantic_part;
    std::vector<PartTemplate> templates;
    ScoreWeights weights;
    std::vector<LayerMeta> layer_metas;
    int neighbor_k = 15;
    std::optional<CorpusStats> normalization;

    const PartTemplate* find_template(int id) const;
    PartTemplate* find_template(int id);
    int next_template_id() const;

    friend bool operator==(const AogModel&, const AogModel&) = default;
};

/// Mean annotated part center.
Point mean_annotated_center(std::span<const Annotation> annotations);

/// Mean annotated center minus the pattern's ideal center.
Point compute_displacement(std::span<const Annotation> annotations, Point ideal_center);

/// Component-wise mean of the annotated box sizes.
Size estimate_template_scale(std::span<const Annotation> annotations);

/// Throws InvalidConfig describing the first violated model invariant.
void check_invariants(const AogModel& model);

inline constexpr int kModelSchemaVersion = 1;

std::string save_model(const AogModel& model);
AogModel load_model(const std::string& text);

void save_model_file(const std::string& path, const AogModel& model);
AogModel load_model_file(const std::string& path);

}  // namespace aog
