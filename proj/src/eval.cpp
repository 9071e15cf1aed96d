#include "aog/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "aog/error.hpp"

namespace aog {

double normalized_distance(Point pred, Point gt, double diagonal) {
    if (!(diagonal > 0.0)) throw Error(ErrorCode::ZeroDiagonal, "normalization diagonal must be positive");
    return norm(pred - gt) / diagonal;
}

double iou(const Box& a, const Box& b) {
    if (!(a.w > 0.0 && a.h > 0.0 && b.w > 0.0 && b.h > 0.0))
        throw Error(ErrorCode::DegenerateBox, "IoU needs boxes of positive area");
    const double iw = std::max(0.0, std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0()));
    const double ih = std::max(0.0, std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0()));
    const double inter = iw * ih;
    return inter / (a.w * a.h + b.w * b.h - inter);
}

bool pcp_correct(const Box& pred, const Box& gt) { return iou(pred, gt) >= 0.5; }

double evaluation_diagonal(const OracleRecord& truth) {
    if (truth.image_w > 0.0 && truth.image_h > 0.0) return std::hypot(truth.image_w, truth.image_h);
    return std::hypot(truth.gt_bbox.w, truth.gt_bbox.h);
}

EvalSummary evaluate(std::span<const ParseRecord> parses, std::span<const OracleRecord> truth) {
    std::map<std::string, const ParseRecord*> by_id;
    for (const auto& p : parses) by_id[p.image_id] = &p;

    EvalSummary s;
    double nd_sum = 0.0;
    std::size_t correct = 0, total = 0;
    for (const auto& t : truth) {
        if (!t.present) continue;
        ++total;
        auto it = by_id.find(t.image_id);
        if (it == by_id.end()) {
            ++s.missing;
            nd_sum += 1.0;
            continue;
        }
        EvalRecord r;
        r.image_id = t.image_id;
        r.predicted = it->second->box;
        r.ground_truth = t.gt_bbox;
        r.normalized_distance = normalized_distance(r.predicted.center(), t.gt_bbox.center(), evaluation_diagonal(t));
        r.pcp_correct = pcp_correct(r.predicted, r.ground_truth);
        nd_sum += r.normalized_distance;
        correct += r.pcp_correct ? 1 : 0;
        s.records.push_back(r);
    }
    if (total > 0) {
        s.mean_normalized_distance = nd_sum / static_cast<double>(total);
        s.pcp = static_cast<double>(correct) / static_cast<double>(total);
    }
    return s;
}

}  // namespace aog
