#include "aog/oracle.hpp"

#include "aog/error.hpp"
#include "aog/eval.hpp"

namespace aog {

ScriptedOracle::ScriptedOracle(std::span<const OracleRecord> records) {
    for (const auto& r : records) records_[r.image_id] = r;
}

Answer ScriptedOracle::answer(const Question& question, const QaSession& session) {
    return answer(question, session.model());
}

Answer ScriptedOracle::answer(const Question& question, const AogModel& model) const {
    auto it = records_.find(question.image_id);
    if (it == records_.end()) throw Error(ErrorCode::OracleFailure, "no oracle record for " + question.image_id);
    const OracleRecord& r = it->second;

    Answer a;
    if (!r.present) {
        a.kind = AnswerKind::Absent;
        return a;
    }
    a.bbox = r.gt_bbox;
    const PartTemplate* truth = nullptr;
    for (const auto& t : model.templates)
        if (t.name == r.gt_template) truth = &t;
    if (!truth) {
        a.kind = AnswerKind::NewTemplate;
        a.template_name = r.gt_template;
        return a;
    }
    const bool same = question.template_id && *question.template_id == truth->id;
    if (same && question.region && pcp_correct(*question.region, r.gt_bbox)) {
        a.kind = AnswerKind::Correct;
        a.bbox.reset();
    } else if (!same) {
        a.kind = AnswerKind::WrongTemplate;
        a.template_id = truth->id;
        a.flipped = r.flipped;
    } else {
        a.kind = AnswerKind::WrongLocation;
    }
    return a;
}

}  // namespace aog
