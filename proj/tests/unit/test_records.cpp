#include <filesystem>
#include <fstream>
#include <functional>

#include "doctest.h"
#include "json.hpp"

#include "aog/error.hpp"
#include "aog/records.hpp"

using namespace aog;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an aog::Error");
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("annotation records use flat box fields") {
    const Annotation a{"img7", {10.5, 20, 30, 40}, 2, true};
    const json j = to_json(a);
    CHECK(j == json::parse(R"({"image_id":"img7","cx":10.5,"cy":20.0,"w":30.0,"h":40.0,"template_id":2,"flipped":true})"));
    CHECK(annotation_from_json(j) == a);
    const Annotation defaulted = annotation_from_json(json::parse(R"({"image_id":"a","cx":1,"cy":2,"w":3,"h":4,"template_id":0})"));
    CHECK_FALSE(defaulted.flipped);
    CHECK(code_of([] { annotation_from_json(json::parse(R"({"image_id":"a","cx":1})")); }) == ErrorCode::CorruptPayload);
    CHECK(code_of([] { annotation_from_json(json::parse(R"({"image_id":3,"cx":1,"cy":2,"w":3,"h":4,"template_id":0})")); }) ==
          ErrorCode::CorruptPayload);
}

TEST_CASE("oracle records nest the ground-truth box") {
    const OracleRecord r{"img1", {50, 60, 20, 10}, "pose-1", true, false, 224, 224};
    const json j = to_json(r);
    CHECK(j.at("gt_bbox").at("cx") == 50.0);
    CHECK(j.at("gt_template") == "pose-1");
    CHECK(j.at("present") == true);
    CHECK(j.at("image_w") == 224.0);
    CHECK(oracle_from_json(j) == r);

    const OracleRecord absent = oracle_from_json(json::parse(R"({"image_id":"x","present":false,"gt_bbox":null,"gt_template":null})"));
    CHECK_FALSE(absent.present);
    CHECK(absent.image_w == 0.0);
    CHECK_FALSE(to_json(absent).contains("image_w"));
    CHECK(code_of([] { oracle_from_json(json::parse(R"({"present":true})")); }) == ErrorCode::CorruptPayload);
}

TEST_CASE("parse records") {
    const ParseRecord p{"i", 1, {5, 6, 7, 8}, -2.5};
    const json j = to_json(p);
    CHECK(j == json::parse(R"({"image_id":"i","template_id":1,"cx":5.0,"cy":6.0,"w":7.0,"h":8.0,"score":-2.5})"));
    CHECK(parse_record_from_json(j) == p);
    ParseResult r;
    r.image_id = "q";
    r.chosen_template_id = 3;
    r.region = {1, 2, 3, 4};
    r.s_top = 9;
    CHECK(to_parse_record(r) == ParseRecord{"q", 3, {1, 2, 3, 4}, 9});
}

TEST_CASE("questions, answers and answer-log rows") {
    const Question empty{"a", std::nullopt, std::nullopt};
    const json je = to_json(empty);
    CHECK(je.at("template_id").is_null());
    CHECK(je.at("region").is_null());
    CHECK(question_from_json(je) == empty);
    const Question full{"b", 2, Box{1, 2, 3, 4}};
    CHECK(question_from_json(to_json(full)) == full);

    const Answer a3{AnswerKind::WrongTemplate, Box{9, 8, 7, 6}, 1, true, std::nullopt};
    const json ja = to_json(a3);
    CHECK(ja.at("kind") == 3);
    CHECK(ja.at("bbox").at("w") == 7.0);
    CHECK(ja.at("flipped") == true);
    CHECK_FALSE(ja.contains("template_name"));
    CHECK(answer_from_json(ja) == a3);
    const Answer a4{AnswerKind::NewTemplate, Box{9, 8, 7, 6}, std::nullopt, std::nullopt, std::string("wing")};
    CHECK(answer_from_json(to_json(a4)) == a4);

    CHECK(code_of([] { answer_from_json(json::parse(R"({"kind":6})")); }) == ErrorCode::MalformedAnswer);
    CHECK(code_of([] { answer_from_json(json::parse(R"({"bbox":null})")); }) == ErrorCode::MalformedAnswer);
    CHECK(code_of([] { answer_from_json(json::parse(R"([1,2])")); }) == ErrorCode::MalformedAnswer);
    CHECK(code_of([] { answer_from_json(json::parse(R"({"kind":2,"bbox":{"cx":1}})")); }) == ErrorCode::MalformedAnswer);

    const AnswerRecord row{4, full, a3};
    const json jr = to_json(row);
    CHECK(jr.at("step") == 4);
    CHECK(answer_record_from_json(jr) == row);
}

TEST_CASE("line-delimited files") {
    const auto dir = std::filesystem::temp_directory_path() / "aog_records_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const std::vector<Annotation> anns = {{"a", {1, 2, 3, 4}, 0, false}, {"b", {5, 6, 7, 8}, 1, true}};
    save_records(dir / "ann.jsonl", anns);
    CHECK(load_annotations(dir / "ann.jsonl") == anns);

    {
        std::ofstream out(dir / "blank.jsonl");
        out << R"({"image_id":"a","cx":1,"cy":2,"w":3,"h":4,"template_id":0})" << "\n\n   \n";
    }
    CHECK(load_annotations(dir / "blank.jsonl").size() == 1);
    {
        std::ofstream out(dir / "bad.jsonl");
        out << "{not json\n";
    }
    CHECK(code_of([&] { load_annotations(dir / "bad.jsonl"); }) == ErrorCode::CorruptPayload);
    CHECK(code_of([&] { load_oracle(dir / "missing.jsonl"); }) == ErrorCode::Io);

    const std::vector<AnswerRecord> log = {{1, {"a", std::nullopt, std::nullopt}, {AnswerKind::Absent, {}, {}, {}, {}}}};
    save_records(dir / "log.jsonl", log);
    CHECK(load_answer_log(dir / "log.jsonl") == log);
    std::filesystem::remove_all(dir);
}
