#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "aog/qa.hpp"

namespace aog {

/// Transport-free request handling for one QA session. Mutating calls are
/// serialized; read-only calls may run concurrently.
class SessionService {
public:
    struct Reply {
        int status = 200;
        nlohmann::json body;
    };

    /// `images_dir` may be empty; image bytes are then omitted from questions.
    SessionService(QaSession session, std::filesystem::path images_dir = {});

    Reply state() const;
    /// Returns the pending question, selecting one first when none is pending.
    Reply next_question();
    /// 409 without a pending question, 422 when the answer is malformed or
    /// violates an invariant.
    Reply answer(const std::string& body);
    /// The current model file.
    std::string model_text() const;
    Reply log() const;

    /// Snapshot under the read lock.
    AogModel model() const;

private:
    nlohmann::json question_json(const Question& q) const;
    std::optional<std::filesystem::path> image_path(const std::string& image_id) const;

    mutable std::shared_mutex mutex_;
    QaSession session_;
    std::filesystem::path images_dir_;
};

std::string base64_encode(const std::vector<unsigned char>& bytes);

/// HTTP front of a SessionService: GET /session/state, GET /question/next,
/// POST /answer, GET /model, GET /log.
class HttpSessionServer {
public:
    explicit HttpSessionServer(SessionService& service);
    ~HttpSessionServer();
    HttpSessionServer(const HttpSessionServer&) = delete;
    HttpSessionServer& operator=(const HttpSessionServer&) = delete;

    /// Binds `host:port`; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Requires a successful bind().
    void listen();
    void stop();
    /// Blocks until the server accepts connections.
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace aog
