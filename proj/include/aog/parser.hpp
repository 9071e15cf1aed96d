#pragma once

#include <span>
#include <string>
#include <vector>

#include "aog/fmap.hpp"
#include "aog/model.hpp"

namespace aog {

struct UnitRef {
    int layer = 0;
    int channel = 0;
    int row = 0;
    int col = 0;
    friend bool operator==(UnitRef, UnitRef) = default;
};

/// The three additive parts of a terminal-node score.
struct TerminalScore {
    double rsp = 0.0;
    double loc = 0.0;
    double pair = 0.0;
    double total() const { return rsp + loc + pair; }
};

/// An already-inferred pattern one layer up, as seen by a lower pattern.
struct NeighborPlacement {
    Point ideal_center;     // its p̄
    Point assigned_center;  // center of the unit it selected on this image
};

struct UnitAssignment {
    int pattern_id = 0;
    UnitRef unit;
    Point unit_center;
    double stride_px = 0.0;  // of the unit's layer
    double score = 0.0;      // rsp + loc + pair
    TerminalScore parts;
    friend bool operator==(const UnitAssignment& a, const UnitAssignment& b) {
        return a.pattern_id == b.pattern_id && a.unit == b.unit && a.unit_center == b.unit_center &&
               a.stride_px == b.stride_px &&
               a.score == b.score && a.parts.rsp == b.parts.rsp && a.parts.loc == b.parts.loc &&
               a.parts.pair == b.parts.pair;
    }
};

struct TemplatePlacement {
    Point center;
    double score = 0.0;
};

struct TemplateParse {
    int template_id = 0;
    Point center;
    double score = 0.0;
    std::vector<UnitAssignment> assignments;  // aligned with PartTemplate::patterns
    friend bool operator==(const TemplateParse&, const TemplateParse&) = default;
};

struct ParseResult {
    std::string image_id;
    int chosen_template_id = 0;
    Point p_top;
    Box region;
    double s_top = 0.0;
    std::vector<TemplateParse> templates;  // one per model template, model order

    const TemplateParse& chosen() const;
    friend bool operator==(const ParseResult&, const ParseResult&) = default;
};

/// Score of selecting a unit at `unit_pos` with normalized response `x`.
/// `stride_px` converts displacements when a term is configured in cells.
TerminalScore score_terminal(double x, Point unit_pos, Point ideal_center,
                             std::span<const NeighborPlacement> neighbors, double stride_px,
                             const ScoreWeights& weights);

/// Best unit inside the pattern's deformation square; ties go to the
/// lexicographically smallest (row, col).
UnitAssignment infer_latent_pattern(const LatentPattern& pattern, const FeatureMapSet& maps,
                                    std::span<const NeighborPlacement> neighbors, const ScoreWeights& weights);

/// Truncated quadratic compatibility between a pattern's vote and a center.
/// `stride_px` is the stride of the voting pattern's layer.
double inference_compatibility(Point vote, Point center, double stride_px, const ScoreWeights& weights);

/// Center maximizing the summed compatibility of `votes` (aligned with
/// `strides_px`), with ties broken by smallest (x, y). Returns the center and
/// the summed compatibility.
TemplatePlacement best_vote_center(std::span<const Point> votes, std::span<const double> strides_px,
                                   const ScoreWeights& weights);

/// AND-node inference: `assignments` must be aligned with `tmpl.patterns`.
TemplatePlacement infer_part_template(const PartTemplate& tmpl, std::span<const UnitAssignment> assignments,
                                      const ScoreWeights& weights);

/// Infers one template's sub-graph, upper layers first.
TemplateParse parse_template(const PartTemplate& tmpl, const FeatureMapSet& maps, const ScoreWeights& weights);

ParseResult parse_image(const AogModel& model, const FeatureMapSet& maps);

/// parse_image over many images on a small thread pool; result order follows input.
std::vector<ParseResult> parse_corpus(const AogModel& model, std::span<const FeatureMapSet* const> maps);
std::vector<ParseResult> parse_corpus(const AogModel& model, std::span<const FeatureMapSet> maps);

}  // namespace aog
