#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "aog/geometry.hpp"
#include "aog/model.hpp"
#include "aog/parser.hpp"
#include "aog/qa.hpp"

namespace aog {

/// Ground truth for one image as seen by the scripted oracle and the evaluator.
struct OracleRecord {
    std::string image_id;
    Box gt_bbox;
    std::string gt_template;
    bool present = true;
    bool flipped = false;
    double image_w = 0.0;  // 0 when unknown
    double image_h = 0.0;
    friend bool operator==(const OracleRecord&, const OracleRecord&) = default;
};

/// One line of a parse export.
struct ParseRecord {
    std::string image_id;
    int template_id = 0;
    Box box;
    double score = 0.0;
    friend bool operator==(const ParseRecord&, const ParseRecord&) = default;
};

ParseRecord to_parse_record(const ParseResult& parse);

nlohmann::json to_json(const Annotation& a);
nlohmann::json to_json(const OracleRecord& r);
nlohmann::json to_json(const ParseRecord& r);
nlohmann::json to_json(const Question& q);
nlohmann::json to_json(const Answer& a);
nlohmann::json to_json(const AnswerRecord& r);

// Decoders throw CorruptPayload on missing or mistyped fields, except
// answer_from_json, which throws MalformedAnswer.
Annotation annotation_from_json(const nlohmann::json& j);
OracleRecord oracle_from_json(const nlohmann::json& j);
ParseRecord parse_record_from_json(const nlohmann::json& j);
Question question_from_json(const nlohmann::json& j);
Answer answer_from_json(const nlohmann::json& j);
AnswerRecord answer_record_from_json(const nlohmann::json& j);

/// Line-delimited JSON: one object per non-blank line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

std::vector<Annotation> load_annotations(const std::filesystem::path& path);
std::vector<OracleRecord> load_oracle(const std::filesystem::path& path);
std::vector<ParseRecord> load_parses(const std::filesystem::path& path);
std::vector<AnswerRecord> load_answer_log(const std::filesystem::path& path);

template <class T>
void save_records(const std::filesystem::path& path, const std::vector<T>& rows) {
    std::vector<nlohmann::json> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(to_json(r));
    write_jsonl(path, out);
}

}  // namespace aog
