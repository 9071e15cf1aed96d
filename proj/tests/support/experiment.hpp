#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "aog/fmap.hpp"
#include "aog/miner.hpp"
#include "aog/qa.hpp"
#include "aog/records.hpp"

namespace aog::testing {

/// A normalized training pool plus a held-out set drawn from the same motifs.
struct SyntheticSplit {
    std::vector<FeatureMapSet> train;
    std::vector<OracleRecord> train_truth;
    std::vector<FeatureMapSet> held_out;
    std::vector<OracleRecord> held_out_truth;
    CorpusStats stats;
};

SyntheticSplit make_split(std::uint64_t seed, int train_images, int held_out_images, int templates, double sigma,
                          int jitter_steps);

struct HeldOutScore {
    double mean_normalized_distance = 1.0;
    double pcp = 0.0;
};

HeldOutScore score_held_out(const AogModel& model, const SyntheticSplit& split);

enum class Selection { ActiveKl, Random };

struct CurvePoint {
    int questions = 0;
    int annotations = 0;  // answers of kind 2, 3 or 4
    HeldOutScore score;
};

/// Runs a scripted-oracle session and scores the held-out set after every
/// answer. Random selection draws the next image uniformly from the pool.
std::vector<CurvePoint> run_learning_curve(const SyntheticSplit& split, const QaConfig& cfg, Selection selection,
                                           std::uint64_t random_seed);

/// Miner settings used by the synthetic end-to-end checks.
MinerConfig synthetic_miner_config();

double median(std::vector<double> values);

}  // namespace aog::testing
