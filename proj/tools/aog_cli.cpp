#include <csignal>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"

#include "aog/error.hpp"
#include "aog/eval.hpp"
#include "aog/fmap.hpp"
#include "aog/miner.hpp"
#include "aog/model.hpp"
#include "aog/oracle.hpp"
#include "aog/parser.hpp"
#include "aog/qa.hpp"
#include "aog/records.hpp"
#include "aog/server.hpp"
#include "aog/stats.hpp"
#include "aog/synth.hpp"

namespace {

using namespace aog;

std::vector<FeatureMapSet> load_normalized(const std::string& dir, std::optional<CorpusStats>& stats) {
    std::vector<FeatureMapSet> maps = load_fmap_dir(dir);
    if (maps.empty()) throw Error(ErrorCode::EmptyCorpus, "no .fmap files in " + dir);
    if (!stats) stats = compute_corpus_stats(maps);
    for (auto& m : maps) apply_normalization(m, *stats);
    return maps;
}

MiningCorpus to_corpus(std::vector<FeatureMapSet> maps) {
    MiningCorpus c;
    for (auto& m : maps) {
        std::string id = m.image_id;
        c.images.emplace(std::move(id), std::move(m));
    }
    return c;
}

// Flipped annotations arrive in the image frame and are stored mirrored.
void canonicalize(std::vector<Annotation>& annotations, const MiningCorpus& corpus) {
    for (auto& a : annotations) {
        if (!a.flipped) continue;
        auto it = corpus.images.find(a.image_id);
        if (it == corpus.images.end()) throw Error(ErrorCode::UnknownImage, a.image_id);
        a.bbox = mirror_box(a.bbox, it->second.image_width);
    }
}

struct LearnArgs {
    std::string fmaps, annotations, out, part;
    int layers = 9;
    int epsilon = 2;
};

int run_learn(const LearnArgs& args) {
    std::optional<CorpusStats> stats;
    MiningCorpus corpus = to_corpus(load_normalized(args.fmaps, stats));
    std::vector<Annotation> annotations = load_annotations(args.annotations);
    canonicalize(annotations, corpus);
    MinerConfig cfg;
    cfg.valid_layers = args.layers;
    cfg.epsilon_cells = args.epsilon;
    AogModel model = learn_model(annotations, corpus, cfg, args.part);
    model.normalization = stats;
    save_model_file(args.out, model);
    std::size_t patterns = 0;
    for (const auto& t : model.templates) patterns += t.patterns.size();
    std::cout << "learned " << model.templates.size() << " templates, " << patterns << " latent patterns\n";
    return 0;
}

int run_parse(const std::string& model_path, const std::string& fmaps, const std::string& out) {
    const AogModel model = load_model_file(model_path);
    std::optional<CorpusStats> stats = model.normalization;
    const std::vector<FeatureMapSet> maps = load_normalized(fmaps, stats);
    std::vector<ParseRecord> rows;
    for (const auto& r : parse_corpus(model, std::span<const FeatureMapSet>(maps))) rows.push_back(to_parse_record(r));
    save_records(out, rows);
    std::cout << "parsed " << rows.size() << " images\n";
    return 0;
}

struct QaRunArgs {
    std::string fmaps, oracle, out, log;
    int budget = 0;
    double alpha = 4.0;
    int layers = 9;
};

int run_qa(const QaRunArgs& args) {
    std::optional<CorpusStats> stats;
    std::vector<FeatureMapSet> maps = load_normalized(args.fmaps, stats);
    const std::vector<OracleRecord> records = load_oracle(args.oracle);
    ScriptedOracle oracle(records);
    QaConfig cfg;
    cfg.budget = args.budget;
    cfg.alpha = args.alpha;
    cfg.miner.valid_layers = args.layers;
    QaOutcome outcome = run_session(std::move(maps), oracle, cfg);
    outcome.model.normalization = stats;
    save_model_file(args.out, outcome.model);
    save_records(args.log, outcome.log);
    std::cout << "asked " << outcome.log.size() << " questions, model has " << outcome.model.templates.size()
              << " templates\n";
    return 0;
}

HttpSessionServer* g_server = nullptr;
extern "C" void on_signal(int) {
    if (g_server) g_server->stop();
}

int run_serve(const std::string& fmaps, const std::string& images, const std::string& host, int port, int budget) {
    std::optional<CorpusStats> stats;
    QaConfig cfg;
    cfg.budget = budget;
    SessionService service(QaSession(load_normalized(fmaps, stats), cfg), images);
    HttpSessionServer server(service);
    const int bound = server.bind(host, port);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "serving on http://" << host << ":" << bound << std::endl;
    server.listen();
    g_server = nullptr;
    return 0;
}

int run_eval(const std::string& parses_path, const std::string& oracle_path, const std::string& csv) {
    const auto parses = load_parses(parses_path);
    const auto truth = load_oracle(oracle_path);
    const EvalSummary s = evaluate(parses, truth);
    if (!csv.empty()) {
        std::ofstream out(csv);
        out << "image_id,pred_cx,pred_cy,gt_cx,gt_cy,normalized_distance,pcp_correct\n";
        for (const auto& r : s.records)
            out << r.image_id << ',' << r.predicted.cx << ',' << r.predicted.cy << ',' << r.ground_truth.cx << ','
                << r.ground_truth.cy << ',' << r.normalized_distance << ',' << (r.pcp_correct ? 1 : 0) << '\n';
    }
    nlohmann::json j = {{"images", s.records.size() + s.missing},
                        {"missing", s.missing},
                        {"mean_normalized_distance", s.mean_normalized_distance},
                        {"pcp", s.pcp}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

int run_synth(const std::string& spec_path, const std::string& out) {
    std::ifstream in(spec_path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + spec_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    const SynthCorpus corpus = synth_generate(synth_spec_from_json(j));
    write_synth_corpus(out, corpus);
    std::cout << "wrote " << corpus.maps.size() << " images to " << out << '\n';
    return 0;
}

int run_stats(const std::string& model_path, const std::string& fmaps, bool per_image) {
    const AogModel model = load_model_file(model_path);
    std::optional<CorpusStats> stats = model.normalization;
    const std::vector<FeatureMapSet> maps = load_normalized(fmaps, stats);
    const auto parses = parse_corpus(model, std::span<const FeatureMapSet>(maps));

    struct Acc {
        double energy = 0, magnitude = 0, activation = 0;
        int n = 0;
    };
    std::map<int, Acc> acc;
    if (per_image) std::cout << "image_id,";
    std::cout << "layer,layer_name,energy_ratio,relative_magnitude,activation_ratio\n";
    for (std::size_t i = 0; i < maps.size(); ++i) {
        for (const auto& s : pattern_activation_stats(parses[i], maps[i])) {
            if (per_image)
                std::cout << maps[i].image_id << ',' << s.layer << ',' << model.layer_metas[s.layer].name << ','
                          << s.energy_ratio << ',' << s.relative_magnitude << ',' << s.activation_ratio << '\n';
            Acc& a = acc[s.layer];
            a.energy += s.energy_ratio;
            a.magnitude += s.relative_magnitude;
            a.activation += s.activation_ratio;
            ++a.n;
        }
    }
    if (!per_image)
        for (const auto& [layer, a] : acc)
            std::cout << layer << ',' << model.layer_metas[layer].name << ',' << a.energy / a.n << ','
                      << a.magnitude / a.n << ',' << a.activation / a.n << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"And-Or graph part models from CNN feature maps, learned by active question answering"};
    app.require_subcommand(1);

    LearnArgs learn;
    auto* learn_cmd = app.add_subcommand("learn", "Mine a model from annotated feature maps");
    learn_cmd->add_option("--fmaps", learn.fmaps, "Directory of .fmap files")->required();
    learn_cmd->add_option("--annotations", learn.annotations, "Annotation records (JSONL)")->required();
    learn_cmd->add_option("--out", learn.out, "Model file to write")->required();
    learn_cmd->add_option("--layers", learn.layers, "Number of top layers to mine")->capture_default_str();
    learn_cmd->add_option("--epsilon", learn.epsilon, "Suppression radius in cells")->capture_default_str();
    learn_cmd->add_option("--part", learn.part, "Semantic part name");

    std::string model_path, fmaps, out;
    auto* parse_cmd = app.add_subcommand("parse", "Parse feature maps with a model");
    parse_cmd->add_option("--model", model_path)->required();
    parse_cmd->add_option("--fmaps", fmaps)->required();
    parse_cmd->add_option("--out", out, "Parse records (JSONL)")->required();

    auto* qa_cmd = app.add_subcommand("qa", "Active question answering");
    qa_cmd->require_subcommand(1);
    QaRunArgs qa;
    auto* qa_run = qa_cmd->add_subcommand("run", "Run a session against a scripted oracle");
    qa_run->add_option("--fmaps", qa.fmaps)->required();
    qa_run->add_option("--oracle", qa.oracle, "Oracle records (JSONL)")->required();
    qa_run->add_option("--budget", qa.budget, "Maximum number of questions")->required();
    qa_run->add_option("--out", qa.out, "Model file to write")->required();
    qa_run->add_option("--log", qa.log, "Answer log (JSONL)")->required();
    qa_run->add_option("--alpha", qa.alpha)->capture_default_str();
    qa_run->add_option("--layers", qa.layers)->capture_default_str();

    std::string images, host = "127.0.0.1";
    int port = 8080, budget = 0;
    auto* qa_serve = qa_cmd->add_subcommand("serve", "Serve a session over HTTP for a human annotator");
    qa_serve->add_option("--fmaps", fmaps)->required();
    qa_serve->add_option("--images", images, "Directory of images named <image_id>.<ext>")->required();
    qa_serve->add_option("--port", port)->required();
    qa_serve->add_option("--budget", budget)->required();
    qa_serve->add_option("--host", host)->capture_default_str();

    std::string parses_path, oracle_path, csv;
    auto* eval_cmd = app.add_subcommand("eval", "Score parses against ground truth");
    eval_cmd->add_option("--parses", parses_path)->required();
    eval_cmd->add_option("--oracle", oracle_path)->required();
    eval_cmd->add_option("--csv", csv, "Per-image CSV output");

    std::string spec_path;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
    synth_cmd->add_option("--spec", spec_path, "Synth spec (JSON)")->required();
    synth_cmd->add_option("--out", out)->required();

    bool per_image = false;
    auto* stats_cmd = app.add_subcommand("stats", "Per-layer activation statistics of parses as CSV");
    stats_cmd->add_option("--model", model_path)->required();
    stats_cmd->add_option("--fmaps", fmaps)->required();
    stats_cmd->add_flag("--per-image", per_image, "One row per image and layer");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*learn_cmd) return run_learn(learn);
        if (*parse_cmd) return run_parse(model_path, fmaps, out);
        if (*qa_run) return run_qa(qa);
        if (*qa_serve) return run_serve(fmaps, images, host, port, budget);
        if (*eval_cmd) return run_eval(parses_path, oracle_path, csv);
        if (*synth_cmd) return run_synth(spec_path, out);
        if (*stats_cmd) return run_stats(model_path, fmaps, per_image);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
