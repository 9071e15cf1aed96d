#pragma once

#include <map>
#include <span>
#include <string>

#include "aog/qa.hpp"
#include "aog/records.hpp"

namespace aog {

/// Answers questions from ground-truth records:
/// absent -> 5; ground-truth template not in the model -> 4;
/// predicted template matches and IoU >= 0.5 -> 1; template mismatch -> 3;
/// otherwise -> 2. Templates are matched by name.
class ScriptedOracle : public AnswerSource {
public:
    explicit ScriptedOracle(std::span<const OracleRecord> records);
    Answer answer(const Question& question, const QaSession& session) override;
    Answer answer(const Question& question, const AogModel& model) const;

private:
    std::map<std::string, OracleRecord> records_;
};

}  // namespace aog
