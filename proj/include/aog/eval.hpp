#pragma once

#include <span>
#include <string>
#include <vector>

#include "aog/geometry.hpp"
#include "aog/records.hpp"

namespace aog {

/// ‖pred − gt‖ / diagonal. Throws ZeroDiagonal unless diagonal > 0.
double normalized_distance(Point pred, Point gt, double diagonal);

/// Intersection over union; both boxes must have positive area (DegenerateBox).
double iou(const Box& a, const Box& b);

/// IoU ≥ 0.5, inclusive.
bool pcp_correct(const Box& pred, const Box& gt);

struct EvalRecord {
    std::string image_id;
    Box predicted;
    Box ground_truth;
    double normalized_distance = 0.0;
    bool pcp_correct = false;
};

struct EvalSummary {
    std::vector<EvalRecord> records;
    double mean_normalized_distance = 0.0;
    double pcp = 0.0;  // fraction in [0, 1]
    std::size_t missing = 0;  // present ground truth without a parse
};

/// Diagonal of the frame the distance is normalized by: the image frame when
/// the record carries it, otherwise the ground-truth box.
double evaluation_diagonal(const OracleRecord& truth);

/// Joins parses to ground truth by image id. Absent parts and parses without
/// ground truth are skipped; present parts without a parse count as misses
/// (distance 1, incorrect).
EvalSummary evaluate(std::span<const ParseRecord> parses, std::span<const OracleRecord> truth);

}  // namespace aog
