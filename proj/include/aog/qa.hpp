#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "aog/fmap.hpp"
#include "aog/miner.hpp"
#include "aog/model.hpp"
#include "aog/parser.hpp"

namespace aog {

struct QaConfig {
    double alpha = 4.0;  // similarity decay
    double beta = 1.0;   // score scale inside Q
    int budget = 0;      // maximum number of questions
    MinerConfig miner;
};

void validate(const QaConfig& cfg);

/// Q(y=+1|I) as the logistic of beta * S_top.
double estimate_q(double s_top, const QaConfig& cfg);

/// 1 - cosine(M f_i, M f_j); +inf when the images were parsed with
/// different templates. `weights` is the diagonal of M.
double appearance_distance(std::span<const double> fi, std::span<const double> fj, std::span<const double> weights,
                           bool same_template);

/// sum over images and labels of P log(P / Q), with 0 log 0 = 0. Inputs are
/// P(y=+1|I) and Q(y=+1|I) per image.
double kl_divergence(std::span<const double> p_pos, std::span<const double> q_pos);

struct Question {
    std::string image_id;
    std::optional<int> template_id;  // absent while the model is empty
    std::optional<Box> region;
    friend bool operator==(const Question&, const Question&) = default;
};

enum class AnswerKind : int {
    Correct = 1,
    WrongLocation = 2,
    WrongTemplate = 3,
    NewTemplate = 4,
    Absent = 5,
};

struct Answer {
    AnswerKind kind = AnswerKind::Correct;
    std::optional<Box> bbox;
    std::optional<int> template_id;
    std::optional<bool> flipped;
    std::optional<std::string> template_name;
    friend bool operator==(const Answer&, const Answer&) = default;
};

/// Throws MissingBbox / MalformedAnswer when the fields do not fit the kind.
void validate(const Answer& answer);

struct AnswerRecord {
    int step = 0;
    Question question;
    Answer answer;
    friend bool operator==(const AnswerRecord&, const AnswerRecord&) = default;
};

/// State of one active question-answering run over a fixed corpus.
class QaSession {
public:
    /// `corpus` must be normalized and share one layout.
    QaSession(std::vector<FeatureMapSet> corpus, QaConfig cfg, AogModel initial_model = {});

    const AogModel& model() const { return model_; }
    const QaConfig& config() const { return cfg_; }
    const std::vector<AnswerRecord>& log() const { return log_; }
    const std::optional<Question>& pending() const { return pending_; }
    int questions_asked() const { return static_cast<int>(log_.size()); }
    bool budget_exhausted() const { return questions_asked() >= cfg_.budget; }

    const std::vector<std::string>& image_ids() const { return ids_; }
    const std::set<std::string>& annotated() const { return annotated_; }
    const std::set<std::string>& unannotated() const { return unannotated_; }
    const std::set<std::string>& absent() const { return absent_; }
    const FeatureMapSet& image(const std::string& id) const;

    /// P(y=+1|I).
    double prior(const std::string& id) const;
    /// Q(y=+1|I); 0 before the model has any template.
    double estimate(const std::string& id) const;
    /// Cached S_top; empty while the model is empty.
    std::optional<double> s_top(const std::string& id) const;
    std::optional<int> predicted_template(const std::string& id) const;
    const ParseResult* parse(const std::string& id) const;
    /// Top-layer activations of the image after ReLU, flattened.
    const std::vector<double>& features(const std::string& id) const { return features_.at(id); }
    /// Diagonal of M, rescaled so that its largest entry is 1.
    const std::vector<double>& reliability() const { return reliability_; }

    /// Predicted gain of annotating `candidate` (ranking form of the KL change).
    double predict_selection_gain(const std::string& candidate) const;

    /// Picks the unannotated image with the largest gain and records it as the
    /// pending question.
    Question select_question();

    /// Applies `answer` to `question`, updating priors, model and caches.
    void apply_answer(const Question& question, const Answer& answer);

private:
    void refresh_predictions();
    void refresh_priors();
    Annotation make_annotation(const Question& q, const Answer& a, int template_id) const;

    QaConfig cfg_;
    AogModel model_;
    MiningCorpus corpus_;
    std::vector<std::string> ids_;
    std::set<std::string> annotated_;
    std::set<std::string> unannotated_;
    std::set<std::string> absent_;
    std::map<std::string, double> prior_;
    std::map<std::string, ParseResult> parses_;
    std::map<std::string, std::vector<double>> features_;
    std::vector<double> reliability_;
    std::vector<AnswerRecord> log_;
    std::optional<Question> pending_;
};

/// Source of answers: a human front end or a scripted oracle.
class AnswerSource {
public:
    virtual ~AnswerSource() = default;
    virtual Answer answer(const Question& question, const QaSession& session) = 0;
};

struct QaOutcome {
    AogModel model;
    std::vector<AnswerRecord> log;
};

/// select_question -> oracle -> apply_answer until the budget or the pool runs out.
QaOutcome run_session(std::vector<FeatureMapSet> corpus, AnswerSource& oracle, const QaConfig& cfg,
                      AogModel initial_model = {});

}  // namespace aog
