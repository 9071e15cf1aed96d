#include "aog/records.hpp"

#include <fstream>

#include "aog/error.hpp"

namespace aog {

using nlohmann::json;

namespace {

json box_json(const Box& b) { return {{"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}}; }
Box box_from(const json& j) {
    return {j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("w").get<double>(), j.at("h").get<double>()};
}

template <class F>
auto decode(const char* what, const json& j, F&& f) {
    try {
        return f(j);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptPayload, std::string(what) + ": " + e.what());
    }
}

}  // namespace

ParseRecord to_parse_record(const ParseResult& parse) {
    return {parse.image_id, parse.chosen_template_id, parse.region, parse.s_top};
}

json to_json(const Annotation& a) {
    return {{"image_id", a.image_id}, {"cx", a.bbox.cx}, {"cy", a.bbox.cy}, {"w", a.bbox.w},
            {"h", a.bbox.h},          {"template_id", a.template_id},      {"flipped", a.flipped}};
}

json to_json(const OracleRecord& r) {
    json j = {{"image_id", r.image_id}, {"gt_bbox", box_json(r.gt_bbox)}, {"gt_template", r.gt_template},
              {"present", r.present},   {"flipped", r.flipped}};
    if (r.image_w > 0.0) j["image_w"] = r.image_w;
    if (r.image_h > 0.0) j["image_h"] = r.image_h;
    return j;
}

json to_json(const ParseRecord& r) {
    return {{"image_id", r.image_id}, {"template_id", r.template_id}, {"cx", r.box.cx}, {"cy", r.box.cy},
            {"w", r.box.w},           {"h", r.box.h},                 {"score", r.score}};
}

json to_json(const Question& q) {
    json j = {{"image_id", q.image_id}, {"template_id", nullptr}, {"region", nullptr}};
    if (q.template_id) j["template_id"] = *q.template_id;
    if (q.region) j["region"] = box_json(*q.region);
    return j;
}

json to_json(const Answer& a) {
    json j = {{"kind", static_cast<int>(a.kind)}};
    if (a.bbox) j["bbox"] = box_json(*a.bbox);
    if (a.template_id) j["template_id"] = *a.template_id;
    if (a.flipped) j["flipped"] = *a.flipped;
    if (a.template_name) j["template_name"] = *a.template_name;
    return j;
}

json to_json(const AnswerRecord& r) {
    return {{"step", r.step}, {"question", to_json(r.question)}, {"answer", to_json(r.answer)}};
}

Annotation annotation_from_json(const json& j) {
    return decode("annotation", j, [](const json& j) {
        Annotation a;
        a.image_id = j.at("image_id").get<std::string>();
        a.bbox = box_from(j);
        a.template_id = j.at("template_id").get<int>();
        a.flipped = j.value("flipped", false);
        return a;
    });
}

OracleRecord oracle_from_json(const json& j) {
    return decode("oracle record", j, [](const json& j) {
        OracleRecord r;
        r.image_id = j.at("image_id").get<std::string>();
        r.present = j.value("present", true);
        if (j.contains("gt_bbox") && !j.at("gt_bbox").is_null()) r.gt_bbox = box_from(j.at("gt_bbox"));
        if (j.contains("gt_template") && !j.at("gt_template").is_null())
            r.gt_template = j.at("gt_template").get<std::string>();
        r.flipped = j.value("flipped", false);
        r.image_w = j.value("image_w", 0.0);
        r.image_h = j.value("image_h", 0.0);
        return r;
    });
}

ParseRecord parse_record_from_json(const json& j) {
    return decode("parse record", j, [](const json& j) {
        return ParseRecord{j.at("image_id").get<std::string>(), j.at("template_id").get<int>(), box_from(j),
                           j.at("score").get<double>()};
    });
}

Question question_from_json(const json& j) {
    return decode("question", j, [](const json& j) {
        Question q;
        q.image_id = j.at("image_id").get<std::string>();
        if (j.contains("template_id") && !j.at("template_id").is_null())
            q.template_id = j.at("template_id").get<int>();
        if (j.contains("region") && !j.at("region").is_null()) q.region = box_from(j.at("region"));
        return q;
    });
}

Answer answer_from_json(const json& j) {
    try {
        if (!j.is_object()) throw Error(ErrorCode::MalformedAnswer, "answer must be an object");
        Answer a;
        const int kind = j.at("kind").get<int>();
        if (kind < 1 || kind > 5) throw Error(ErrorCode::MalformedAnswer, "answer kind must be 1..5");
        a.kind = static_cast<AnswerKind>(kind);
        auto present = [&](const char* key) { return j.contains(key) && !j.at(key).is_null(); };
        if (present("bbox")) a.bbox = box_from(j.at("bbox"));
        if (present("template_id")) a.template_id = j.at("template_id").get<int>();
        if (present("flipped")) a.flipped = j.at("flipped").get<bool>();
        if (present("template_name")) a.template_name = j.at("template_name").get<std::string>();
        return a;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedAnswer, e.what());
    }
}

AnswerRecord answer_record_from_json(const json& j) {
    AnswerRecord r = decode("answer record", j, [](const json& j) {
        AnswerRecord r;
        r.step = j.at("step").get<int>();
        r.question = question_from_json(j.at("question"));
        return r;
    });
    r.answer = answer_from_json(j.at("answer"));
    return r;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::vector<json> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::CorruptPayload, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    for (const auto& r : rows) out << r.dump() << '\n';
    if (!out) throw Error(ErrorCode::Io, "write failed on " + path.string());
}

namespace {
template <class T, class F>
std::vector<T> load_rows(const std::filesystem::path& path, F&& decode_row) {
    std::vector<T> out;
    for (const auto& j : read_jsonl(path)) out.push_back(decode_row(j));
    return out;
}
}  // namespace

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
    return load_rows<Annotation>(path, annotation_from_json);
}
std::vector<OracleRecord> load_oracle(const std::filesystem::path& path) {
    return load_rows<OracleRecord>(path, oracle_from_json);
}
std::vector<ParseRecord> load_parses(const std::filesystem::path& path) {
    return load_rows<ParseRecord>(path, parse_record_from_json);
}
std::vector<AnswerRecord> load_answer_log(const std::filesystem::path& path) {
    return load_rows<AnswerRecord>(path, answer_record_from_json);
}

}  // namespace aog
