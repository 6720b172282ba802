#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sthsep/checkpoint.hpp"
#include "sthsep/errors.hpp"
#include "sthsep/graphs.hpp"
#include "sthsep/harness.hpp"
#include "sthsep/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sthsep;

namespace {

struct Common {
    std::string config;
    std::string data;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    bool verbose = false;
};

void add_common(CLI::App* app, Common& c, bool needs_data = true) {
    app->add_option("--config", c.config, "JSON config of dotted keys");
    auto* d = app->add_option("--data", c.data, "dataset directory (values.csv, coords.csv, edges.csv)");
    if (!needs_data) d->description("dataset directory (optional)");
    app->add_option("--out", c.out, "output directory");
    app->add_option("--seed", c.seed, "overrides the config seed");
    app->add_option("--set", c.overrides, "key=value override, repeatable");
    app->add_flag("-v,--verbose", c.verbose, "per-epoch progress on stderr");
}

ModelConfig resolve_config(const Common& c) {
    ModelConfig cfg = c.config.empty() ? ModelConfig{} : ModelConfig::load(c.config);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!c.data.empty()) cfg.data_dir = c.data;
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
    return cfg;
}

SpatioTemporalDataset load_data(const ModelConfig& cfg) {
    if (cfg.data_dir.empty()) throw ConfigError("no dataset: pass --data or set data.dir");
    return load_dataset_dir(cfg.data_dir);
}

void print_report(const ForecastReport& r) {
    std::cout << "val  mae " << r.val.mae << " rmse " << r.val.rmse << '\n';
    std::cout << "test mae " << r.test.mae << " rmse " << r.test.rmse << '\n';
    for (const auto& [name, m] : r.baselines) std::cout << "  " << name << " test mae " << m.mae << '\n';
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_synth(const SynthConfig& sc, const std::string& out) {
    if (out.empty()) throw ConfigError("synth: --out is required");
    SynthResult res = synthesize(sc);
    write_dataset(res.dataset, out);
    std::cout << "wrote " << res.dataset.nodes() << " nodes x " << res.dataset.steps() << " steps to " << out
              << " (hash " << hex64(content_hash(res.dataset.values)) << ")\n";
    return 0;
}

json hyperedges_json(const Hypergraph& hg) {
    json edges = json::array();
    for (const auto& e : hg.hyperedges) edges.push_back(e);
    return edges;
}

int cmd_graph(const Common& c, const std::string& mode, std::optional<std::size_t> k, std::optional<double> sigma,
              std::optional<double> threshold) {
    ModelConfig cfg = resolve_config(c);
    if (k) cfg.hypergraph.order = *k;
    if (sigma) cfg.graph.sigma = *sigma;
    if (threshold) cfg.graph.threshold = *threshold;
    cfg.validate();
    SpatioTemporalDataset ds = load_data(cfg);
    const std::size_t n = ds.nodes();
    json out = {{"mode", mode}, {"nodes", n}, {"node_ids", ds.node_ids}};

    auto incident_raw = [&]() {
        const double s = cfg.graph.sigma > 0 ? cfg.graph.sigma : (ds.distances ? default_sigma(*ds.distances) : 1.0);
        return gaussian_incident(ds.distances, s, cfg.graph.threshold).matrix;
    };
    auto matrix_json = [](const Tensor& m) {
        json rows = json::array();
        for (std::size_t i = 0; i < m.dim(0); ++i) {
            std::vector<double> r;
            for (std::size_t j = 0; j < m.dim(1); ++j) r.push_back(m.at(i, j));
            rows.push_back(r);
        }
        return rows;
    };

    if (mode == "adaptive") {
        cfg.graph.use_incident = false;
        cfg.fusion.gamma = 1.0;
        Model model(cfg, n, std::nullopt);
        out["matrix"] = matrix_json(model.adaptive_adjacency());
    } else if (mode == "gaussian") {
        out["matrix"] = matrix_json(incident_raw());
    } else if (mode == "knn-hyper") {
        cfg.graph.use_incident = false;
        cfg.fusion.gamma = 0.5;
        cfg.hypergraph.mode = HyperMode::knn;
        Model model(cfg, n, std::nullopt);
        out["order"] = cfg.hypergraph.order;
        out["hyperedges"] = hyperedges_json(model.hypergraph());
    } else if (mode == "hop-hyper") {
        Hypergraph hg = hop_hyperedges(binarize(incident_raw()), cfg.hypergraph.order);
        CoverageResult t1 = coverage_check(hg, binarize(incident_raw()), cfg.hypergraph.order);
        out["order"] = cfg.hypergraph.order;
        out["hyperedges"] = hyperedges_json(hg);
        out["coverage_check"] = {{"passed", t1.passed}, {"detail", t1.detail}};
    } else {
        throw ConfigError("graph: --mode must be adaptive, gaussian, knn-hyper or hop-hyper");
    }

    const std::string text = out.dump(2);
    if (c.out.empty()) {
        std::cout << text << '\n';
    } else {
        fs::create_directories(c.out);
        const fs::path path = fs::path(c.out) / ("graph_" + mode + ".json");
        std::ofstream f(path);
        if (!f) throw Error("cannot write '" + path.string() + "'");
        f << text << '\n';
        std::cout << "wrote " << path.string() << '\n';
    }
    return 0;
}

int cmd_train(const Common& c) {
    ModelConfig cfg = resolve_config(c);
    PreparedData data = prepare_data(load_data(cfg), cfg);
    ForecastReport r = run_experiment(cfg, data, {c.out, c.verbose});
    print_report(r);
    if (!c.out.empty()) std::cout << "wrote " << (fs::path(c.out) / "report.json").string() << '\n';
    return 0;
}

int cmd_eval(const Common& c, std::string checkpoint) {
    if (checkpoint.empty()) {
        if (c.out.empty()) throw ConfigError("eval: pass --checkpoint or an --out directory holding checkpoint.json");
        checkpoint = (fs::path(c.out) / "checkpoint.json").string();
    }
    Checkpoint ck = load_checkpoint(checkpoint);
    ModelConfig cfg = ck.config;
    if (!c.data.empty()) cfg.data_dir = c.data;
    PreparedData data = prepare_data(load_data(cfg), cfg);
    Model model(cfg, data.dataset.nodes(), data.dataset.distances);
    apply_checkpoint(ck, model);
    ForecastReport r = evaluate_model(model, data, {c.out, c.verbose});
    print_report(r);
    return 0;
}

int cmd_ablate(const Common& c, const std::string& sweep, std::vector<std::string> values) {
    ModelConfig cfg = resolve_config(c);
    if (values.empty()) values = default_sweep(sweep);
    PreparedData data = prepare_data(load_data(cfg), cfg);
    std::vector<AblationRow> rows = ablate(cfg, data, sweep, values, {c.out, c.verbose});
    for (const auto& r : rows)
        std::cout << sweep << '=' << r.setting << " test mae " << r.report.test.mae << " rmse " << r.report.test.rmse
                  << '\n';
    if (!c.out.empty()) {
        fs::create_directories(c.out);
        const fs::path path = fs::path(c.out) / ("ablation_" + sweep + ".csv");
        write_ablation_csv(path.string(), rows);
        std::cout << "wrote " << path.string() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatio-temporal forecasting with separate spatial and temporal branches"};
    app.require_subcommand(1);

    Common common;
    SynthConfig sc;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with spatial drift");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", sc.seed, "generator seed");
    synth->add_option("--config", common.config, "unused; accepted for symmetry");
    synth->add_option("--data", common.data, "unused; accepted for symmetry");
    synth->add_option("--nodes", sc.nodes);
    synth->add_option("--steps", sc.steps);
    synth->add_option("--rank", sc.rank);
    synth->add_option("--periods", sc.periods)->delimiter(',');
    synth->add_option("--rho", sc.rho);
    auto* drift = synth->add_option("--drift-at", sc.drift_at, "regime switch step (default steps/2)");
    synth->add_option("--noise", sc.noise_std);
    synth->add_option("--neighbours", sc.neighbours);

    std::string mode = "adaptive";
    std::optional<std::size_t> k;
    std::optional<double> sigma, threshold;
    auto* graph = app.add_subcommand("graph", "build and print one graph or hypergraph");
    add_common(graph, common);
    graph->add_option("--mode", mode, "adaptive | gaussian | knn-hyper | hop-hyper")
        ->check(CLI::IsMember({"adaptive", "gaussian", "knn-hyper", "hop-hyper"}));
    graph->add_option("--k", k, "hyperedge order");
    graph->add_option("--sigma", sigma, "Gaussian kernel width");
    graph->add_option("--threshold", threshold, "Gaussian kernel cut-off");

    auto* trn = app.add_subcommand("train", "train, evaluate and write report, predictions and checkpoint");
    add_common(trn, common);

    std::string checkpoint;
    auto* ev = app.add_subcommand("eval", "evaluate a saved checkpoint");
    add_common(ev, common);
    ev->add_option("--checkpoint", checkpoint, "checkpoint file (default <out>/checkpoint.json)");

    std::string sweep;
    std::vector<std::string> values;
    auto* abl = app.add_subcommand("ablate", "run a sweep and write a CSV table");
    add_common(abl, common);
    abl->add_option("--sweep", sweep, "gamma | k | temporal")->required()->check(
        CLI::IsMember({"gamma", "k", "temporal"}));
    abl->add_option("--values", values, "comma-separated settings")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*synth) {
            if (drift->count() == 0) sc.drift_at = sc.steps / 2;
            return cmd_synth(sc, synth_out);
        }
        if (*graph) return cmd_graph(common, mode, k, sigma, threshold);
        if (*trn) return cmd_train(common);
        if (*ev) return cmd_eval(common, checkpoint);
        if (*abl) return cmd_ablate(common, sweep, values);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return 2;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
