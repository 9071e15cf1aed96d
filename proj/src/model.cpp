#include "aog/model.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "aog/error.hpp"
#include "json.hpp"

namespace aog {

using nlohmann::json;

int deform_side_for(const LayerMeta& meta) { return (meta.height + 2) / 3; }

CellRange deformation_range(const LatentPattern& pattern, const LayerMeta& meta) {
    const int side = pattern.deform_side;
    const int row0 = pattern.row - (side - 1) / 2;
    const int col0 = pattern.col - (side - 1) / 2;
    CellRange r;
    r.row0 = std::max(row0, 0);
    r.col0 = std::max(col0, 0);
    r.row1 = std::min(row0 + side - 1, meta.height - 1);
    r.col1 = std::min(col0 + side - 1, meta.width - 1);
    return r;
}

void refresh_neighbors(PartTemplate& tmpl, int neighbor_k) {
    const auto& ps = tmpl.patterns;
    tmpl.neighbors.assign(ps.size(), {});
    for (std::size_t i = 0; i < ps.size(); ++i) {
        std::vector<std::pair<double, std::size_t>> upper;
        for (std::size_t j = 0; j < ps.size(); ++j) {
            if (ps[j].layer == ps[i].layer + 1)
                upper.emplace_back(squared_norm(ps[j].ideal_center - ps[i].ideal_center), j);
        }
        std::sort(upper.begin(), upper.end());
        const std::size_t keep = std::min<std::size_t>(upper.size(), static_cast<std::size_t>(std::max(neighbor_k, 0)));
        for (std::size_t n = 0; n < keep; ++n) tmpl.neighbors[i].push_back(upper[n].second);
    }
}

const PartTemplate* AogModel::find_template(int id) const {
    auto it = std::find_if(templates.begin(), templates.end(), [id](const PartTemplate& t) { return t.id == id; });
    return it == templates.end() ? nullptr : &*it;
}

PartTemplate* AogModel::find_template(int id) {
    return const_cast<PartTemplate*>(std::as_const(*this).find_template(id));
}

int AogModel::next_template_id() const {
    int next = 0;
    for (const auto& t : templates) next = std::max(next, t.id + 1);
    return next;
}

Point mean_annotated_center(std::span<const Annotation> annotations) {
    if (annotations.empty()) throw Error(ErrorCode::NoAnnotations, "template has no annotations");
    Point sum;
    for (const auto& a : annotations) sum = sum + a.bbox.center();
    const double n = static_cast<double>(annotations.size());
    return {sum.x / n, sum.y / n};
}

Point compute_displacement(std::span<const Annotation> annotations, Point ideal_center) {
    return mean_annotated_center(annotations) - ideal_center;
}

Size estimate_template_scale(std::span<const Annotation> annotations) {
    if (annotations.empty()) throw Error(ErrorCode::NoAnnotations, "template has no annotations");
    Size s;
    for (const auto& a : annotations) {
        s.w += a.bbox.w;
        s.h += a.bbox.h;
    }
    const double n = static_cast<double>(annotations.size());
    return {s.w / n, s.h / n};
}

void check_invariants(const AogModel& model) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    std::set<int> ids;
    for (const auto& t : model.templates) {
        if (!ids.insert(t.id).second) fail("duplicate template id " + std::to_string(t.id));
        if (!t.annotations.empty() && (t.scale.w <= 0.0 || t.scale.h <= 0.0))
            fail("template " + std::to_string(t.id) + " has non-positive scale");
        for (const auto& p : t.patterns) {
            if (p.layer < 0 || p.layer >= static_cast<int>(model.layer_metas.size()))
                fail("pattern " + std::to_string(p.id) + " references a missing layer");
            const LayerMeta& meta = model.layer_metas[p.layer];
            if (p.channel < 0 || p.channel >= meta.channels)
                fail("pattern " + std::to_string(p.id) + " channel out of range");
            if (p.row < 0 || p.row >= meta.height || p.col < 0 || p.col >= meta.width)
                fail("pattern " + std::to_string(p.id) + " center cell out of range");
            if (p.deform_side != deform_side_for(meta))
                fail("pattern " + std::to_string(p.id) + " deformation side differs from ceil(h/3)");
        }
        if (t.neighbors.size() != t.patterns.size()) fail("stale neighbor lists");
        for (std::size_t i = 0; i < t.neighbors.size(); ++i) {
            if (static_cast<int>(t.neighbors[i].size()) > model.neighbor_k) fail("too many neighbors");
            for (std::size_t j : t.neighbors[i])
                if (t.patterns[j].layer != t.patterns[i].layer + 1) fail("neighbor outside layer L+1");
        }
    }
}

// ---- serialization -------------------------------------------------------

namespace {

const char* unit_name(DistanceUnit u) { return u == DistanceUnit::Cells ? "cells" : "pixels"; }

DistanceUnit parse_unit(const std::string& s) {
    if (s == "cells") return DistanceUnit::Cells;
    if (s == "pixels") return DistanceUnit::Pixels;
    throw Error(ErrorCode::CorruptPayload, "unknown distance unit " + s);
}

const char* statistic_name(NormStatistic s) {
    switch (s) {
        case NormStatistic::MeanPositive: return "mean_positive";
        case NormStatistic::MeanRelu: return "mean_relu";
        case NormStatistic::MedianPositive: return "median_positive";
    }
    return "mean_positive";
}

NormStatistic parse_statistic(const std::string& s) {
    if (s == "mean_positive") return NormStatistic::MeanPositive;
    if (s == "mean_relu") return NormStatistic::MeanRelu;
    if (s == "median_positive") return NormStatistic::MedianPositive;
    throw Error(ErrorCode::CorruptPayload, "unknown normalization statistic " + s);
}

json point_json(Point p) { return json::array({p.x, p.y}); }
Point point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json annotation_json(const Annotation& a) {
    return {{"image_id", a.image_id}, {"cx", a.bbox.cx}, {"cy", a.bbox.cy}, {"w", a.bbox.w},
            {"h", a.bbox.h},          {"template_id", a.template_id},      {"flipped", a.flipped}};
}

Annotation annotation_from(const json& j) {
    Annotation a;
    a.image_id = j.at("image_id").get<std::string>();
    a.bbox = {j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("w").get<double>(), j.at("h").get<double>()};
    a.template_id = j.at("template_id").get<int>();
    a.flipped = j.at("flipped").get<bool>();
    return a;
}

}  // namespace

std::string save_model(const AogModel& model) {
    const ScoreWeights& w = model.weights;
    json doc;
    doc["schema_version"] = kModelSchemaVersion;
    doc["semantic_part"] = model.semantic_part;
    doc["weights"] = {{"lambda_rsp", w.rsp},     {"lambda_loc", w.loc},     {"lambda_pair", w.pair},
                      {"lambda_inf", w.inf},     {"lambda_unant", w.unant}, {"lambda_close", w.close},
                      {"s_none", w.s_none},      {"d_px", w.d_px},          {"loc_unit", unit_name(w.loc_unit)},
                      {"pair_unit", unit_name(w.pair_unit)}, {"inf_unit", unit_name(w.inf_unit)},
                      {"close_unit", unit_name(w.close_unit)}};
    doc["neighbor_k"] = model.neighbor_k;
    doc["layer_metas"] = json::array();
    for (const auto& m : model.layer_metas) {
        doc["layer_metas"].push_back({{"name", m.name},
                                      {"channels", m.channels},
                                      {"height", m.height},
                                      {"width", m.width},
                                      {"stride_px", static_cast<double>(m.stride_px)},
                                      {"offset_px", static_cast<double>(m.offset_px)},
                                      {"rf_px", static_cast<double>(m.rf_px)}});
    }
    if (model.normalization) {
        doc["normalization"] = {{"statistic", statistic_name(model.normalization->statistic)},
                                {"channel_level", model.normalization->channel_level}};
    }
    doc["templates"] = json::array();
    for (const auto& t : model.templates) {
        json jt = {{"id", t.id}, {"name", t.name}, {"scale", json::array({t.scale.w, t.scale.h})}};
        jt["annotations"] = json::array();
        for (const auto& a : t.annotations) jt["annotations"].push_back(annotation_json(a));
        jt["patterns"] = json::array();
        for (const auto& p : t.patterns) {
            jt["patterns"].push_back({{"id", p.id},
                                      {"layer", p.layer},
                                      {"channel", p.channel},
                                      {"row", p.row},
                                      {"col", p.col},
                                      {"ideal_center", point_json(p.ideal_center)},
                                      {"displacement", point_json(p.displacement)},
                                      {"deform_side", p.deform_side}});
        }
        doc["templates"].push_back(std::move(jt));
    }
    return doc.dump(2) + "\n";
}

AogModel load_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptPayload, e.what());
    }
    if (!doc.is_object() || !doc.contains("schema_version"))
        throw Error(ErrorCode::SchemaMismatch, "missing schema_version");
    if (!doc["schema_version"].is_number_integer() || doc["schema_version"].get<int>() != kModelSchemaVersion)
        throw Error(ErrorCode::SchemaMismatch, "unsupported schema_version " + doc["schema_version"].dump());

    AogModel model;
    try {
        model.semantic_part = doc.at("semantic_part").get<std::string>();
        const json& w = doc.at("weights");
        model.weights.rsp = w.at("lambda_rsp").get<double>();
        model.weights.loc = w.at("lambda_loc").get<double>();
        model.weights.pair = w.at("lambda_pair").get<double>();
        model.weights.inf = w.at("lambda_inf").get<double>();
        model.weights.unant = w.at("lambda_unant").get<double>();
        model.weights.close = w.at("lambda_close").get<double>();
        model.weights.s_none = w.at("s_none").get<double>();
        model.weights.d_px = w.at("d_px").get<double>();
        model.weights.loc_unit = parse_unit(w.at("loc_unit").get<std::string>());
        model.weights.pair_unit = parse_unit(w.at("pair_unit").get<std::string>());
        model.weights.inf_unit = parse_unit(w.at("inf_unit").get<std::string>());
        model.weights.close_unit = parse_unit(w.at("close_unit").get<std::string>());
        model.neighbor_k = doc.at("neighbor_k").get<int>();
        for (const auto& m : doc.at("layer_metas")) {
            LayerMeta meta;
            meta.name = m.at("name").get<std::string>();
            meta.channels = m.at("channels").get<int>();
            meta.height = m.at("height").get<int>();
            meta.width = m.at("width").get<int>();
            meta.stride_px = static_cast<float>(m.at("stride_px").get<double>());
            meta.offset_px = static_cast<float>(m.at("offset_px").get<double>());
            meta.rf_px = static_cast<float>(m.at("rf_px").get<double>());
            model.layer_metas.push_back(std::move(meta));
        }
        if (doc.contains("normalization")) {
            CorpusStats stats;
            stats.statistic = parse_statistic(doc["normalization"].at("statistic").get<std::string>());
            stats.channel_level =
                doc["normalization"].at("channel_level").get<std::vector<std::vector<double>>>();
            model.normalization = std::move(stats);
        }
        for (const auto& jt : doc.at("templates")) {
            PartTemplate t;
            t.id = jt.at("id").get<int>();
            t.name = jt.at("name").get<std::string>();
            t.scale = {jt.at("scale").at(0).get<double>(), jt.at("scale").at(1).get<double>()};
            for (const auto& ja : jt.at("annotations")) t.annotations.push_back(annotation_from(ja));
            for (const auto& jp : jt.at("patterns")) {
                LatentPattern p;
                p.id = jp.at("id").get<int>();
                p.layer = jp.at("layer").get<int>();
                p.channel = jp.at("channel").get<int>();
                p.row = jp.at("row").get<int>();
                p.col = jp.at("col").get<int>();
                p.ideal_center = point_from(jp.at("ideal_center"));
                p.displacement = point_from(jp.at("displacement"));
                p.deform_side = jp.at("deform_side").get<int>();
                t.patterns.push_back(p);
            }
            refresh_neighbors(t, model.neighbor_k);
            model.templates.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptPayload, e.what());
    }
    for (const auto& m : model.layer_metas) {
        try {
            validate(m);
        } catch (const Error& e) {
            throw Error(ErrorCode::CorruptPayload, e.what());
        }
    }
    try {
        check_invariants(model);
    } catch (const Error& e) {
        throw Error(ErrorCode::CorruptPayload, e.what());
    }
    return model;
}

void save_model_file(const std::string& path, const AogModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << save_model(model);
}

AogModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_model(ss.str());
}

}  // namespace aog
