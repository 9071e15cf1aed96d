// One PASS/FAIL line per acceptance criterion. Exit status is 0 unless
// --strict is given and a criterion failed, so a known failure stays visible
// in the output without breaking the test run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "aog/eval.hpp"
#include "aog/miner.hpp"
#include "aog/model.hpp"
#include "aog/oracle.hpp"
#include "aog/parser.hpp"
#include "aog/qa.hpp"
#include "experiment.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace aog;
using namespace aog::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const Verdict& v) {
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << name << "  [" << v.detail << "]" << std::endl;
}

Verdict parser_equivalence() {
    Rng rng(20240601);
    int mismatches = 0;
    double worst = 0.0;
    const auto t0 = Clock::now();
    for (int i = 0; i < 1000; ++i) {
        const auto layers = random_tiny_layout(rng);
        const AogModel m = random_tiny_model(rng, layers, 3, 4);
        const FeatureMapSet f = random_normalized_maps(rng, "x", layers);
        const ParseResult got = parse_image(m, f);
        const RefParse ref = reference_parse(m, f);
        bool same = got.chosen_template_id == ref.chosen_template_id;
        for (std::size_t t = 0; t < m.templates.size(); ++t) {
            worst = std::max(worst, std::abs(got.templates[t].score - ref.templates[t].score));
            for (std::size_t p = 0; p < m.templates[t].patterns.size(); ++p) {
                const UnitRef u = got.templates[t].assignments[p].unit;
                const RefUnit& v = ref.templates[t].units[p];
                same = same && u == UnitRef{v.layer, v.channel, v.row, v.col};
            }
        }
        worst = std::max(worst, std::abs(got.s_top - ref.s_top));
        if (!same) ++mismatches;
    }
    const double elapsed = seconds_since(t0);
    std::ostringstream d;
    d << "1000 instances, unit mismatches " << mismatches << ", max score diff " << worst << ", " << elapsed << " s";
    return {mismatches == 0 && worst < 1e-9 && elapsed < 30.0, d.str()};
}

Verdict miner_equivalence() {
    Rng rng(777);
    int mismatches = 0, order_violations = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto layers = random_tiny_layout(rng);
        std::vector<FeatureMapSet> imgs;
        const int n_ann = rng.uniform_int(1, 3);
        const int n_un = rng.uniform_int(0, 4);
        for (int i = 0; i < n_ann + n_un; ++i) imgs.push_back(random_normalized_maps(rng, "i" + std::to_string(i), layers));
        std::vector<Annotation> anns;
        for (int i = 0; i < n_ann; ++i)
            anns.push_back({imgs[i].image_id, {rng.uniform(20, 200), rng.uniform(20, 200), 30, 30}, 0, false});
        std::vector<AnnotatedView> views;
        std::vector<std::pair<const FeatureMapSet*, Annotation>> ref_ann;
        for (int i = 0; i < n_ann; ++i) {
            views.push_back({&imgs[i], &anns[i]});
            ref_ann.push_back({&imgs[i], anns[i]});
        }
        std::vector<const FeatureMapSet*> un;
        for (int i = n_ann; i < n_ann + n_un; ++i) un.push_back(&imgs[i]);

        MinerConfig cfg;
        cfg.epsilon_cells = rng.uniform_int(1, 3);
        for (int l = 0; l < 2; ++l)
            if (rng.coin(0.7)) cfg.n_k_override[l] = rng.uniform_int(1, 10);
        const PartTemplate t = mine_template(0, "t", anns, views, un, layers, cfg);

        std::vector<std::tuple<int, int, int, int>> want;
        for (int l = 0; l < 2; ++l) {
            std::vector<Candidate> cands = enumerate_candidates(layers[l], l);
            for (auto& c : cands)
                c.score = reference_candidate_score(l, c.channel, c.row, c.col, ref_ann, un, cfg.weights);
            int n_k = 0;
            if (cfg.n_k_override.count(l)) {
                n_k = cfg.n_k_override.at(l);
            } else {
                std::vector<double> ranked;
                for (const auto& c : cands) ranked.push_back(c.score);
                std::sort(ranked.begin(), ranked.end(), std::greater<>());
                n_k = fit_layer_pattern_count(ranked);
            }
            const auto picked = reference_greedy(cands, n_k, cfg.epsilon_cells);
            for (std::size_t i : picked) want.emplace_back(l, cands[i].channel, cands[i].row, cands[i].col);

            // Every selected score is at least every live, unselected one.
            std::vector<bool> dead(cands.size(), false);
            double weakest = 1e300;
            for (std::size_t i : picked) {
                weakest = std::min(weakest, cands[i].score);
                for (std::size_t j = 0; j < cands.size(); ++j)
                    if (cands[j].channel == cands[i].channel &&
                        std::abs(cands[j].row - cands[i].row) < cfg.epsilon_cells &&
                        std::abs(cands[j].col - cands[i].col) < cfg.epsilon_cells)
                        dead[j] = true;
            }
            for (std::size_t j = 0; j < cands.size(); ++j)
                if (!dead[j] && cands[j].score > weakest) ++order_violations;
        }
        std::vector<std::tuple<int, int, int, int>> got;
        for (const auto& p : t.patterns) got.emplace_back(p.layer, p.channel, p.row, p.col);
        if (got != want) ++mismatches;
    }
    std::ostringstream d;
    d << "200 candidate sets, selection mismatches " << mismatches << ", order violations " << order_violations;
    return {mismatches == 0 && order_violations == 0, d.str()};
}

Verdict qa_equivalence() {
    Rng rng(4242);
    int mismatches = 0, flips = 0, linear_vs_full = 0;
    const int sessions = 200;
    for (int trial = 0; trial < sessions; ++trial) {
        const auto layers = random_tiny_layout(rng);
        AogModel m = random_tiny_model(rng, layers, 3, 4);
        m.weights = ScoreWeights{};
        QaConfig cfg;
        cfg.alpha = rng.uniform(0.5, 8.0);
        const int n = rng.uniform_int(2, 10);
        std::vector<FeatureMapSet> imgs;
        for (int i = 0; i < n; ++i) imgs.push_back(random_normalized_maps(rng, "i" + std::to_string(i), layers));
        QaSession s(imgs, cfg, m);
        for (int k = rng.uniform_int(0, n - 2); k > 0; --k) {
            const auto& pool = s.unannotated();
            const std::string id = *std::next(pool.begin(), rng.uniform_int(0, static_cast<int>(pool.size()) - 1));
            s.apply_answer({id, s.predicted_template(id), std::nullopt},
                           Answer{rng.coin(0.7) ? AnswerKind::Correct : AnswerKind::Absent, {}, {}, {}, {}});
        }
        const std::string want = reference_select(s, KlForm::Linear);
        const std::string full = reference_select(s, KlForm::Full);
        if (s.select_question().image_id != want) ++mismatches;
        if (reference_select(s, KlForm::LogisticPositive) != full) ++flips;
        if (want != full) ++linear_vs_full;
    }
    const double flip_rate = static_cast<double>(flips) / sessions;
    std::ostringstream d;
    d << sessions << " sessions, argmax mismatches " << mismatches << ", full-KL flips " << flips << " ("
      << 100.0 * flip_rate << "%), linear vs full-KL argmax differ " << linear_vs_full;
    return {mismatches == 0 && flip_rate < 0.05, d.str()};
}

Verdict exact_recovery() {
    double worst = 0.0;
    int seeds = 5;
    for (int seed = 1; seed <= seeds; ++seed) {
        const SyntheticSplit split = make_split(seed, 50, 50, 3, 0.0, 0);
        std::map<std::string, int> per_template;
        std::map<std::string, int> ids;
        std::vector<Annotation> anns;
        for (const auto& r : split.train_truth) {
            if (!r.present || per_template[r.gt_template] >= 3) continue;
            const int tid = ids.emplace(r.gt_template, static_cast<int>(ids.size())).first->second;
            ++per_template[r.gt_template];
            anns.push_back({r.image_id, r.gt_bbox, tid, r.flipped});
        }
        MiningCorpus corpus;
        for (const auto& m : split.train) corpus.images.emplace(m.image_id, m);
        AogModel model = learn_model(anns, corpus, synthetic_miner_config());
        for (auto& t : model.templates)
            for (const auto& [name, id] : ids)
                if (id == t.id) t.name = name;
        worst = std::max(worst, score_held_out(model, split).mean_normalized_distance);
    }
    std::ostringstream d;
    d << "sigma 0, 3 annotations per template, " << seeds << " seeds, worst held-out distance " << worst;
    return {worst == 0.0, d.str()};
}

QaConfig recovery_config(int budget) {
    QaConfig cfg;
    cfg.budget = budget;
    cfg.miner = synthetic_miner_config();
    return cfg;
}

Verdict noisy_recovery() {
    std::vector<double> nds, pcps;
    for (int seed = 1; seed <= 20; ++seed) {
        const SyntheticSplit split = make_split(seed, 50, 50, 3, 0.2, 1);
        const auto curve = run_learning_curve(split, recovery_config(12), Selection::ActiveKl, seed);
        nds.push_back(curve.back().score.mean_normalized_distance);
        pcps.push_back(curve.back().score.pcp);
    }
    const double nd = median(nds), pcp = median(pcps);
    std::ostringstream d;
    d << "sigma 0.2, 20 seeds, budget 12: median distance " << nd << " (<= 0.05), median PCP " << pcp << " (>= 0.9)";
    return {nd <= 0.05 && pcp >= 0.9, d.str()};
}

// Annotations (answers of kind 2-4) spent before held-out PCP first reaches
// 0.9; budget + 1 when it never does.
double annotations_to_reach(const std::vector<CurvePoint>& curve, int budget) {
    for (const auto& p : curve)
        if (p.score.pcp >= 0.9) return p.annotations;
    return budget + 1;
}

Verdict efficiency() {
    constexpr int kBudget = 30;
    std::vector<double> active, random;
    for (int seed = 1; seed <= 20; ++seed) {
        const SyntheticSplit split = make_split(seed, 50, 50, 3, 0.2, 1);
        active.push_back(annotations_to_reach(run_learning_curve(split, recovery_config(kBudget), Selection::ActiveKl, seed), kBudget));
        random.push_back(annotations_to_reach(run_learning_curve(split, recovery_config(kBudget), Selection::Random, seed), kBudget));
    }
    const double a = median(active), r = median(random);
    std::ostringstream d;
    d << "median annotations to PCP 0.9: active " << a << ", random " << r << ", ratio " << a / r << " (<= 0.7)";
    return {a <= 0.7 * r, d.str()};
}

Verdict invariants() {
    Rng rng(99);
    std::vector<std::string> broken;
    auto expect = [&](bool ok, const char* what) {
        if (!ok) broken.push_back(what);
    };

    const ScoreWeights w;
    expect(w.rsp == 1.5 && w.loc == 1.0 / 3.0 && w.pair == 10.0 && w.inf == 5.0 && w.unant == 5.0 && w.close == 0.4 &&
               w.s_none == -3.0 && w.d_px == 37.0,
           "default constants");

    bool q_ok = true, kl_ok = true, inf_ok = true, deform_ok = true, ser_ok = true, fmap_ok = true;
    QaConfig qc;
    for (int i = 0; i < 1000; ++i) {
        const double s = rng.uniform(-100, 100);
        const double q = estimate_q(s, qc);
        q_ok = q_ok && q >= 0.0 && q <= 1.0 && std::abs(q + estimate_q(-s, qc) - 1.0) < 1e-12;

        std::vector<double> p, qq;
        for (int k = 0; k < 5; ++k) {
            p.push_back(rng.uniform(0, 1));
            qq.push_back(rng.uniform(1e-6, 1 - 1e-6));
        }
        kl_ok = kl_ok && kl_divergence(p, qq) >= -1e-12;

        ScoreWeights iw;
        iw.inf_unit = rng.coin(0.5) ? DistanceUnit::Cells : DistanceUnit::Pixels;
        const double stride = rng.uniform_int(4, 40);
        const double len = unit_length(iw.inf_unit, stride);
        const double v = inference_compatibility({rng.uniform(0, 300), rng.uniform(0, 300)},
                                                 {rng.uniform(0, 300), rng.uniform(0, 300)}, stride, iw);
        inf_ok = inf_ok && v <= 0.0 && v >= -iw.inf * iw.d_px * iw.d_px / (len * len);

        const LayerMeta m = random_layer(rng, "L", 1, 16, 2);
        LatentPattern pat;
        pat.row = rng.uniform_int(0, m.height - 1);
        pat.col = rng.uniform_int(0, m.width - 1);
        pat.deform_side = deform_side_for(m);
        const CellRange r = deformation_range(pat, m);
        deform_ok = deform_ok && !r.empty() && r.row0 >= 0 && r.col0 >= 0 && r.row1 < m.height && r.col1 < m.width &&
                    r.row0 <= pat.row && pat.row <= r.row1 && r.col0 <= pat.col && pat.col <= r.col1;
    }
    for (int i = 0; i < 100; ++i) {
        const AogModel m = random_model(rng);
        const std::string text = save_model(m);
        ser_ok = ser_ok && load_model(text) == m && save_model(load_model(text)) == text;
        const FeatureMapSet f = random_raw_maps(rng, "img" + std::to_string(i), random_tiny_layout(rng));
        const auto bytes = write_fmap(f);
        fmap_ok = fmap_ok && write_fmap(read_fmap(bytes)) == bytes;
    }
    expect(q_ok, "Q normalization");
    expect(kl_ok, "KL >= 0");
    expect(inf_ok, "S_inf range");
    expect(deform_ok, "deformation containment");
    expect(ser_ok, "model round trip");
    expect(fmap_ok, "FMAP round trip");

    const SyntheticSplit split = make_split(3, 20, 1, 2, 0.2, 1);
    ScriptedOracle oracle(split.train_truth);
    const QaOutcome a = run_session(split.train, oracle, recovery_config(6));
    const QaOutcome b = run_session(split.train, oracle, recovery_config(6));
    expect(a.log == b.log && a.model == b.model, "session replay");

    std::string detail = "7 invariant groups";
    for (const auto& s : broken) detail += "; broken: " + s;
    return {broken.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    bool strict = false;
    app.add_flag("--strict", strict, "Exit non-zero when any criterion fails");
    CLI11_PARSE(app, argc, argv);

    report("parser oracle equivalence", parser_equivalence());
    report("miner oracle equivalence", miner_equivalence());
    report("QA selection equivalence", qa_equivalence());
    report("synthetic recovery, exact (sigma 0)", exact_recovery());
    report("synthetic recovery, noisy (sigma 0.2)", noisy_recovery());
    report("QA efficiency versus random selection", efficiency());
    report("invariant suites", invariants());

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed")
              << std::endl;
    return strict && failures > 0 ? 1 : 0;
}
