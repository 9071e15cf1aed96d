#include "aog/server.hpp"

#include <fstream>
#include <iterator>
#include <mutex>

#include "httplib.h"

#include "aog/error.hpp"
#include "aog/records.hpp"

namespace aog {

using nlohmann::json;

std::string base64_encode(const std::vector<unsigned char>& bytes) {
    static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    if (i < bytes.size()) {
        const bool two = i + 1 < bytes.size();
        const unsigned v = (bytes[i] << 16) | (two ? bytes[i + 1] << 8 : 0);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += two ? kAlphabet[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

namespace {

json box_json(const Box& b) { return {{"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}}; }

const char* mime_for(const std::filesystem::path& p) {
    const std::string ext = p.extension().string();
    if (ext == ".png") return "image/png";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".bmp") return "image/bmp";
    if (ext == ".webp") return "image/webp";
    return "application/octet-stream";
}

bool is_client_error(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedAnswer:
        case ErrorCode::MissingBbox:
        case ErrorCode::UnknownTemplate:
        case ErrorCode::UnknownImage:
        case ErrorCode::DegenerateBox:
            return true;
        default:
            return false;
    }
}

json error_body(const std::string& message) { return {{"status", "error"}, {"error", message}}; }

json state_json(const QaSession& s) {
    json templates = json::array();
    for (const auto& t : s.model().templates)
        templates.push_back({{"id", t.id},
                             {"name", t.name},
                             {"annotations", t.annotations.size()},
                             {"patterns", t.patterns.size()},
                             {"scale", {t.scale.w, t.scale.h}}});
    return {{"budget", s.config().budget},
            {"questions_asked", s.questions_asked()},
            {"budget_exhausted", s.budget_exhausted()},
            {"pools",
             {{"annotated", s.annotated()}, {"unannotated", s.unannotated()}, {"absent", s.absent()}}},
            {"templates", templates},
            {"pending", s.pending() ? to_json(*s.pending()) : json(nullptr)}};
}

}  // namespace

SessionService::SessionService(QaSession session, std::filesystem::path images_dir)
    : session_(std::move(session)), images_dir_(std::move(images_dir)) {}

SessionService::Reply SessionService::state() const {
    std::shared_lock lock(mutex_);
    return {200, state_json(session_)};
}

std::optional<std::filesystem::path> SessionService::image_path(const std::string& image_id) const {
    if (images_dir_.empty() || !std::filesystem::is_directory(images_dir_)) return std::nullopt;
    for (const char* ext : {".png", ".jpg", ".jpeg", ".bmp", ".webp"}) {
        auto p = images_dir_ / (image_id + ext);
        if (std::filesystem::is_regular_file(p)) return p;
    }
    return std::nullopt;
}

json SessionService::question_json(const Question& q) const {
    const FeatureMapSet& maps = session_.image(q.image_id);
    json j = to_json(q);
    j["status"] = "pending";
    j["template_name"] = nullptr;
    if (q.template_id)
        if (const PartTemplate* t = session_.model().find_template(*q.template_id)) j["template_name"] = t->name;
    j["box"] = q.region ? box_json(*q.region) : json(nullptr);
    j["image_w"] = maps.image_width;
    j["image_h"] = maps.image_height;
    j["image"] = nullptr;
    if (auto path = image_path(q.image_id)) {
        std::ifstream in(*path, std::ios::binary);
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        j["image"] = {{"mime", mime_for(*path)}, {"data", base64_encode(bytes)}};
    }
    return j;
}

SessionService::Reply SessionService::next_question() {
    std::unique_lock lock(mutex_);
    if (session_.pending()) return {200, question_json(*session_.pending())};
    if (session_.budget_exhausted()) return {200, {{"status", "idle"}, {"reason", "budget exhausted"}}};
    if (session_.unannotated().empty()) return {200, {{"status", "idle"}, {"reason", "pool exhausted"}}};
    return {200, question_json(session_.select_question())};
}

SessionService::Reply SessionService::answer(const std::string& body) {
    std::unique_lock lock(mutex_);
    if (!session_.pending()) return {409, error_body("no pending question")};
    const Question q = *session_.pending();
    try {
        const json j = json::parse(body);
        const Answer a = answer_from_json(j);
        if (j.contains("image_id") && !j.at("image_id").is_null() && j.at("image_id") != q.image_id)
            return {422, error_body("answer is for " + j.at("image_id").dump() + ", pending is " + q.image_id)};
        session_.apply_answer(q, a);
    } catch (const json::exception& e) {
        return {422, error_body(e.what())};
    } catch (const Error& e) {
        if (is_client_error(e.code())) return {422, error_body(e.what())};
        throw;
    }
    return {200, {{"status", "applied"}, {"step", session_.log().back().step}, {"state", state_json(session_)}}};
}

std::string SessionService::model_text() const {
    std::shared_lock lock(mutex_);
    return save_model(session_.model());
}

SessionService::Reply SessionService::log() const {
    std::shared_lock lock(mutex_);
    json rows = json::array();
    for (const auto& r : session_.log()) rows.push_back(to_json(r));
    return {200, rows};
}

AogModel SessionService::model() const {
    std::shared_lock lock(mutex_);
    return session_.model();
}

struct HttpSessionServer::Impl {
    explicit Impl(SessionService& s) : service(s) {}
    SessionService& service;
    httplib::Server server;
    bool bound = false;
};

HttpSessionServer::HttpSessionServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) {
    auto& srv = impl_->server;
    auto send = [](httplib::Response& res, const SessionService::Reply& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    SessionService& svc = impl_->service;
    srv.Get("/session/state", [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.state()); });
    srv.Get("/question/next",
            [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.next_question()); });
    srv.Post("/answer", [&svc, send](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.answer(req.body));
    });
    srv.Get("/model", [&svc](const httplib::Request&, httplib::Response& res) {
        res.set_content(svc.model_text(), "application/json");
    });
    srv.Get("/log", [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.log()); });
    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(error_body(message).dump(), "application/json");
    });
}

HttpSessionServer::~HttpSessionServer() { stop(); }

int HttpSessionServer::bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->bound = true;
    return bound;
}

void HttpSessionServer::listen() {
    if (!impl_->bound) throw Error(ErrorCode::Io, "listen before bind");
    impl_->server.listen_after_bind();
}

void HttpSessionServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void HttpSessionServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace aog
