#include "experiment.hpp"

#include <algorithm>
#include <random>

#include "aog/eval.hpp"
#include "aog/oracle.hpp"
#include "aog/parser.hpp"
#include "aog/synth.hpp"

namespace aog::testing {

SyntheticSplit make_split(std::uint64_t seed, int train_images, int held_out_images, int templates, double sigma,
                          int jitter_steps) {
    SynthSpec spec = default_synth_spec(seed, train_images, templates, sigma, jitter_steps);
    SynthCorpus train = synth_generate(spec);
    spec.seed = seed ^ 0x5bd1e995u;
    spec.image_count = held_out_images;
    spec.id_prefix = "held";
    SynthCorpus held = synth_generate(spec);

    SyntheticSplit split;
    auto [maps, stats] = normalize_activations(std::move(train.maps));
    split.train = std::move(maps);
    split.stats = stats;
    split.train_truth = std::move(train.oracle);
    split.held_out = std::move(held.maps);
    for (auto& m : split.held_out) apply_normalization(m, split.stats);
    split.held_out_truth = std::move(held.oracle);
    return split;
}

HeldOutScore score_held_out(const AogModel& model, const SyntheticSplit& split) {
    if (model.templates.empty()) return {};
    std::vector<ParseRecord> rows;
    for (const auto& r : parse_corpus(model, std::span<const FeatureMapSet>(split.held_out)))
        rows.push_back(to_parse_record(r));
    const EvalSummary s = evaluate(rows, split.held_out_truth);
    return {s.mean_normalized_distance, s.pcp};
}

std::vector<CurvePoint> run_learning_curve(const SyntheticSplit& split, const QaConfig& cfg, Selection selection,
                                           std::uint64_t random_seed) {
    ScriptedOracle oracle(split.train_truth);
    QaSession session(split.train, cfg);
    std::mt19937_64 rng(random_seed);
    std::vector<CurvePoint> curve;
    int annotations = 0;
    while (!session.budget_exhausted() && !session.unannotated().empty()) {
        Question q;
        if (selection == Selection::ActiveKl) {
            q = session.select_question();
        } else {
            const auto& pool = session.unannotated();
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            q.image_id = *std::next(pool.begin(), static_cast<std::ptrdiff_t>(pick(rng)));
            if (const ParseResult* p = session.parse(q.image_id)) {
                q.template_id = p->chosen_template_id;
                q.region = p->region;
            }
        }
        const Answer a = oracle.answer(q, session);
        session.apply_answer(q, a);
        const int kind = static_cast<int>(a.kind);
        if (kind >= 2 && kind <= 4) ++annotations;
        curve.push_back({session.questions_asked(), annotations, score_held_out(session.model(), split)});
    }
    return curve;
}

MinerConfig synthetic_miner_config() {
    MinerConfig cfg;
    cfg.n_k_override = {{0, 12}, {1, 6}};
    return cfg;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace aog::testing
