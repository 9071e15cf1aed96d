#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "aog/fmap.hpp"
#include "aog/model.hpp"

namespace aog {

/// A possible latent pattern: one (channel, cell) of one layer.
struct Candidate {
    int layer = 0;
    int channel = 0;
    int row = 0;
    int col = 0;
    Point center;
    double score = 0.0;
    double annotated_term = 0.0;
    double unannotated_term = 0.0;
};

struct MinerConfig {
    int valid_layers = 9;  // K: the last K layers of the container are mined
    int epsilon_cells = 2;
    /// Per-layer pattern counts keyed by layer index; layers absent here use
    /// the fitted count.
    std::map<int, int> n_k_override;
    std::size_t unannotated_cap = 64;
    ScoreWeights weights;
    int neighbor_k = 15;
};

void validate(const MinerConfig& cfg, std::size_t layer_count);

/// Layer indices mined under `cfg` for a container with `layer_count` layers.
std::vector<int> valid_layer_indices(const MinerConfig& cfg, std::size_t layer_count);

struct AnnotatedView {
    const FeatureMapSet* maps = nullptr;  // already mirrored when the annotation is flipped
    const Annotation* annotation = nullptr;
};

/// One candidate per (channel, row, col), channel-major then row-major.
std::vector<Candidate> enumerate_candidates(const LayerMeta& meta, int layer_index);

/// Best unit of a pattern centered on `center_cell` by S_rsp + S_loc only.
struct MiningUnit {
    int row = 0;
    int col = 0;
    Point center;
    double score = 0.0;
};
MiningUnit best_mining_unit(const FeatureMapSet& maps, int layer, int channel, int row, int col,
                            const ScoreWeights& weights);

/// Fills `score`, `annotated_term` and `unannotated_term` of `c`.
Candidate score_candidate(Candidate c, std::span<const AnnotatedView> annotated,
                          std::span<const FeatureMapSet* const> unannotated, const ScoreWeights& weights);

/// Greedy selection: highest score first, suppressing unselected candidates of
/// the same channel within Chebyshev distance < epsilon. Ties are broken by
/// (channel, row, col). Returns indices into `scored`.
std::vector<std::size_t> select_with_suppression(std::span<const Candidate> scored, int n_k, int epsilon_cells);

/// Pattern count from the ranked score curve alpha*exp(-sqrt(xi*rank)) + gamma.
int fit_layer_pattern_count(std::span<const double> ranked_scores);

/// Fitted decay rate behind fit_layer_pattern_count (exposed for diagnostics).
std::optional<double> fit_score_decay(std::span<const double> ranked_scores);

PartTemplate mine_template(int template_id, const std::string& name, std::span<const Annotation> annotations,
                           std::span<const AnnotatedView> annotated, std::span<const FeatureMapSet* const> unannotated,
                           const std::vector<LayerMeta>& layer_metas, const MinerConfig& cfg);

/// Normalized corpus available to the miner, keyed by image id.
struct MiningCorpus {
    std::map<std::string, FeatureMapSet> images;
    std::set<std::string> excluded;  // images known not to contain the part
};

/// Adds `annotation` to its template (creating the template when its id is
/// new) and re-mines only that template. An existing annotation for the same
/// image and template is replaced. A model without templates adopts the
/// weights and neighbor count of `cfg`; otherwise the model's own are used.
AogModel grow_or_refine(const AogModel& model, const Annotation& annotation, const MiningCorpus& corpus,
                        const MinerConfig& cfg, const std::string& new_template_name = {});

/// Mines every template named by `annotations` in one pass. The unannotated
/// pool excludes every annotated image, so the result does not depend on the
/// order of `annotations`. Flipped annotations must already be mirrored.
AogModel learn_model(std::span<const Annotation> annotations, const MiningCorpus& corpus, const MinerConfig& cfg,
                     const std::string& semantic_part = {});

/// Mirrors a box left-to-right inside an image of the given width.
Box mirror_box(const Box& box, double image_width);

}  // namespace aog
