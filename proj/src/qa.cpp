#include "aog/qa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aog/error.hpp"

namespace aog {

void validate(const QaConfig& cfg) {
    if (!(cfg.alpha > 0.0)) throw Error(ErrorCode::InvalidConfig, "alpha must be positive");
    if (cfg.budget < 0) throw Error(ErrorCode::InvalidConfig, "budget must be non-negative");
}

double estimate_q(double s_top, const QaConfig& cfg) {
    const double z = cfg.beta * s_top;
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double appearance_distance(std::span<const double> fi, std::span<const double> fj, std::span<const double> weights,
                           bool same_template) {
    if (fi.size() != fj.size() || fi.size() != weights.size())
        throw Error(ErrorCode::LengthMismatch, "feature vectors differ in length");
    if (!same_template) return std::numeric_limits<double>::infinity();
    double dot = 0.0, ni = 0.0, nj = 0.0;
    for (std::size_t k = 0; k < fi.size(); ++k) {
        const double a = weights[k] * fi[k];
        const double b = weights[k] * fj[k];
        dot += a * b;
        ni += a * a;
        nj += b * b;
    }
    if (ni == 0.0 || nj == 0.0) return 1.0;
    return std::clamp(1.0 - dot / (std::sqrt(ni) * std::sqrt(nj)), 0.0, 2.0);
}

double kl_divergence(std::span<const double> p_pos, std::span<const double> q_pos) {
    if (p_pos.size() != q_pos.size()) throw Error(ErrorCode::LengthMismatch, "P and Q differ in length");
    auto term = [](double p, double q) {
        if (p == 0.0) return 0.0;
        if (q == 0.0) return std::numeric_limits<double>::infinity();
        return p * std::log(p / q);
    };
    double kl = 0.0;
    for (std::size_t i = 0; i < p_pos.size(); ++i)
        kl += term(p_pos[i], q_pos[i]) + term(1.0 - p_pos[i], 1.0 - q_pos[i]);
    return kl;
}

void validate(const Answer& answer) {
    const int kind = static_cast<int>(answer.kind);
    if (kind < 1 || kind > 5) throw Error(ErrorCode::MalformedAnswer, "answer kind must be 1..5");
    const bool needs_bbox = kind >= 2 && kind <= 4;
    if (needs_bbox && !answer.bbox) throw Error(ErrorCode::MissingBbox, "answer kind " + std::to_string(kind));
    if (answer.bbox && (!(answer.bbox->w > 0.0) || !(answer.bbox->h > 0.0)))
        throw Error(ErrorCode::MalformedAnswer, "answer box must have positive size");
    if (answer.kind == AnswerKind::WrongTemplate) {
        if (!answer.template_id) throw Error(ErrorCode::UnknownTemplate, "kind 3 needs a template id");
        if (!answer.flipped) throw Error(ErrorCode::MalformedAnswer, "kind 3 needs the flipped flag");
    }
}

QaSession::QaSession(std::vector<FeatureMapSet> corpus, QaConfig cfg, AogModel initial_model)
    : cfg_(std::move(cfg)), model_(std::move(initial_model)) {
    validate(cfg_);
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "QA session needs at least one image");
    for (auto& maps : corpus) {
        if (!maps.is_normalized())
            throw Error(ErrorCode::InvalidLayout, "QA corpus image " + maps.image_id + " is not normalized");
        std::string id = maps.image_id;
        if (!corpus_.images.emplace(id, std::move(maps)).second)
            throw Error(ErrorCode::InvalidLayout, "duplicate image id " + id);
    }
    for (const auto& [id, maps] : corpus_.images) {
        ids_.push_back(id);
        unannotated_.insert(id);
        prior_[id] = 1.0;
    }

    // Feature vector: top layer after ReLU; M from its corpus-mean normalized activation.
    const std::size_t top = corpus_.images.begin()->second.layers.size() - 1;
    const std::size_t dims = corpus_.images.begin()->second.layers[top].raw.size();
    reliability_.assign(dims, 0.0);
    for (const auto& [id, maps] : corpus_.images) {
        const LayerMaps& layer = maps.layers.at(top);
        if (layer.raw.size() != dims) throw Error(ErrorCode::InvalidLayout, "top layer size differs on " + id);
        std::vector<double> f(dims);
        for (std::size_t k = 0; k < dims; ++k) {
            f[k] = std::max(static_cast<double>(layer.raw[k]), 0.0);
            reliability_[k] += layer.normalized[k];
        }
        features_.emplace(id, std::move(f));
    }
    const double max_level = *std::max_element(reliability_.begin(), reliability_.end());
    for (double& m : reliability_) m = max_level > 0.0 ? m / max_level : 1.0;

    refresh_predictions();
}

const FeatureMapSet& QaSession::image(const std::string& id) const {
    auto it = corpus_.images.find(id);
    if (it == corpus_.images.end()) throw Error(ErrorCode::UnknownImage, id);
    return it->second;
}

double QaSession::prior(const std::string& id) const {
    auto it = prior_.find(id);
    if (it == prior_.end()) throw Error(ErrorCode::UnknownImage, id);
    return it->second;
}

double QaSession::estimate(const std::string& id) const {
    const auto s = s_top(id);
    return s ? estimate_q(*s, cfg_) : 0.0;
}

std::optional<double> QaSession::s_top(const std::string& id) const {
    if (!prior_.count(id)) throw Error(ErrorCode::UnknownImage, id);
    auto it = parses_.find(id);
    if (it == parses_.end()) return std::nullopt;
    return it->second.s_top;
}

std::optional<int> QaSession::predicted_template(const std::string& id) const {
    if (!prior_.count(id)) throw Error(ErrorCode::UnknownImage, id);
    auto it = parses_.find(id);
    if (it == parses_.end()) return std::nullopt;
    return it->second.chosen_template_id;
}

const ParseResult* QaSession::parse(const std::string& id) const {
    auto it = parses_.find(id);
    return it == parses_.end() ? nullptr : &it->second;
}

double QaSession::predict_selection_gain(const std::string& candidate) const {
    if (!unannotated_.count(candidate)) throw Error(ErrorCode::UnknownImage, candidate + " is not unannotated");
    if (model_.templates.empty()) throw Error(ErrorCode::EmptyModel, "no scores before the first template");

    const ParseResult& cand = parses_.at(candidate);
    double delta = -cand.s_top;
    if (!annotated_.empty()) {
        double mean = 0.0;
        for (const auto& id : annotated_) mean += parses_.at(id).s_top;
        delta += mean / static_cast<double>(annotated_.size());
    }
    if (delta == 0.0) return 0.0;

    const auto& fc = features_.at(candidate);
    double transfer = 0.0;
    auto accumulate = [&](const std::string& id) {
        const ParseResult& other = parses_.at(id);
        const double dist = appearance_distance(features_.at(id), fc, reliability_,
                                                other.chosen_template_id == cand.chosen_template_id);
        transfer += prior_.at(id) * std::exp(-cfg_.alpha * dist);
    };
    for (const auto& id : annotated_) accumulate(id);
    for (const auto& id : unannotated_) accumulate(id);
    return delta * transfer;
}

Question QaSession::select_question() {
    if (unannotated_.empty()) throw Error(ErrorCode::PoolExhausted, "every image has been asked");
    Question q;
    if (model_.templates.empty()) {
        q.image_id = *unannotated_.begin();
    } else {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& id : unannotated_) {
            const double g = predict_selection_gain(id);
            if (q.image_id.empty() || g > best) {
                best = g;
                q.image_id = id;
            }
        }
        const ParseResult& p = parses_.at(q.image_id);
        q.template_id = p.chosen_template_id;
        q.region = p.region;
    }
    pending_ = q;
    return q;
}

Annotation QaSession::make_annotation(const Question& q, const Answer& a, int template_id) const {
    const FeatureMapSet& maps = image(q.image_id);
    const Box& b = *a.bbox;
    const double w = maps.image_width;
    const double h = maps.image_height;
    constexpr double kTol = 1e-9;
    if (b.x0() < -kTol || b.y0() < -kTol || b.x1() > w + kTol || b.y1() > h + kTol)
        throw Error(ErrorCode::MalformedAnswer, "answer box leaves the image frame of " + q.image_id);
    Annotation ann;
    ann.image_id = q.image_id;
    ann.template_id = template_id;
    ann.flipped = a.flipped.value_or(false) && a.kind == AnswerKind::WrongTemplate;
    ann.bbox = ann.flipped ? mirror_box(b, w) : b;
    return ann;
}

void QaSession::apply_answer(const Question& question, const Answer& answer) {
    if (!corpus_.images.count(question.image_id)) throw Error(ErrorCode::UnknownImage, question.image_id);
    if (!unannotated_.count(question.image_id))
        throw Error(ErrorCode::MalformedAnswer, question.image_id + " was already answered");
    validate(answer);

    AogModel next = model_;
    bool model_changed = false;
    switch (answer.kind) {
        case AnswerKind::Correct:
        case AnswerKind::Absent:
            break;
        case AnswerKind::WrongLocation: {
            if (!question.template_id || !model_.find_template(*question.template_id))
                throw Error(ErrorCode::UnknownTemplate, "question carries no predicted template");
            next = grow_or_refine(model_, make_annotation(question, answer, *question.template_id), corpus_,
                                  cfg_.miner);
            model_changed = true;
            break;
        }
        case AnswerKind::WrongTemplate: {
            if (!model_.find_template(*answer.template_id))
                throw Error(ErrorCode::UnknownTemplate, "template " + std::to_string(*answer.template_id));
            next = grow_or_refine(model_, make_annotation(question, answer, *answer.template_id), corpus_,
                                  cfg_.miner);
            model_changed = true;
            break;
        }
        case AnswerKind::NewTemplate: {
            const int id = model_.next_template_id();
            const std::string name = answer.template_name.value_or("template-" + std::to_string(id));
            next = grow_or_refine(model_, make_annotation(question, answer, id), corpus_, cfg_.miner, name);
            model_changed = true;
            break;
        }
    }

    unannotated_.erase(question.image_id);
    if (answer.kind == AnswerKind::Absent) {
        absent_.insert(question.image_id);
        corpus_.excluded.insert(question.image_id);
        parses_.erase(question.image_id);
    } else {
        annotated_.insert(question.image_id);
    }
    log_.push_back({static_cast<int>(log_.size()) + 1, question, answer});
    pending_.reset();
    refresh_priors();
    if (model_changed) {
        model_ = std::move(next);
        refresh_predictions();
    }
}

void QaSession::refresh_priors() {
    const std::size_t asked = annotated_.size() + absent_.size();
    for (const auto& id : annotated_) prior_[id] = 1.0;
    for (const auto& id : absent_) prior_[id] = 0.0;
    if (asked == 0) return;
    const double mean = static_cast<double>(annotated_.size()) / static_cast<double>(asked);
    for (const auto& id : unannotated_) prior_[id] = mean;
}

void QaSession::refresh_predictions() {
    parses_.clear();
    if (model_.templates.empty()) return;
    std::vector<const FeatureMapSet*> live;
    for (const auto& [id, maps] : corpus_.images)
        if (!absent_.count(id)) live.push_back(&maps);
    std::vector<ParseResult> results = parse_corpus(model_, live);
    for (auto& r : results) {
        std::string id = r.image_id;
        parses_.emplace(std::move(id), std::move(r));
    }
}

QaOutcome run_session(std::vector<FeatureMapSet> corpus, AnswerSource& oracle, const QaConfig& cfg,
                      AogModel initial_model) {
    QaSession session(std::move(corpus), cfg, std::move(initial_model));
    while (!session.budget_exhausted() && !session.unannotated().empty()) {
        const Question q = session.select_question();
        Answer a;
        try {
            a = oracle.answer(q, session);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::OracleFailure) throw;
            throw Error(ErrorCode::OracleFailure, e.what());
        } catch (const std::exception& e) {
            throw Error(ErrorCode::OracleFailure, e.what());
        }
        session.apply_answer(q, a);
    }
    return {session.model(), session.log()};
}

}  // namespace aog
