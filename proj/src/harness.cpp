#include "sthsep/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sthsep/checkpoint.hpp"
#include "sthsep/errors.hpp"

namespace sthsep {

namespace fs = std::filesystem;
using nlohmann::json;

PreparedData prepare_data(const SpatioTemporalDataset& ds, const ModelConfig& cfg) {
    ds.validate();
    cfg.validate();
    PreparedData p;
    p.dataset = ds;
    p.data_hash = hex64(content_hash(ds.values));
    Splits splits = split_dataset(ds, {0.7, 0.1, 0.2}, cfg.window.lookback + cfg.window.horizon);
    p.norm = zscore_normalize(splits);
    p.warnings = p.norm.warnings;
    WindowSpec eval_spec = cfg.window;
    eval_spec.stride = cfg.eval_stride;
    p.train = make_windows(splits.train.values, cfg.window);
    p.val = make_windows(splits.val.values, eval_spec);
    p.test = make_windows(splits.test.values, eval_spec);
    return p;
}

json ForecastReport::to_json() const {
    auto m = [](const Metrics& x) { return json{{"mae", x.mae}, {"rmse", x.rmse}}; };
    json b = json::object();
    for (const auto& [name, x] : baselines) b[name] = m(x);
    json j = {{"schema_version", report_schema_version},
              {"seed", seed},
              {"config", config},
              {"splits", {{"val", m(val)}, {"test", m(test)}}},
              {"baselines", {{"test", b}}},
              {"runtime_s", runtime_s},
              {"best_epoch", best_epoch},
              {"epochs_run", epochs_run},
              {"history_hash", history_hash},
              {"data_hash", data_hash},
              {"warnings", warnings}};
    if (!predictions_path.empty()) j["predictions"] = predictions_path;
    return j;
}

std::map<std::string, Metrics> evaluate_baselines(const PreparedData& data, std::vector<std::string>* warnings) {
    std::map<std::string, Metrics> out;
    for (Baseline b : {Baseline::last_value, Baseline::historical_average, Baseline::seasonal_naive}) {
        std::vector<Tensor> preds, targets;
        std::vector<std::string> notes;
        for (const auto& w : data.test) {
            const Tensor x = data.norm.denormalize(w.x);
            preds.push_back(baseline_forecast(b, x, w.y.dim(0), 24, notes.empty() ? &notes : nullptr));
            targets.push_back(data.norm.denormalize(w.y));
        }
        if (warnings) warnings->insert(warnings->end(), notes.begin(), notes.end());
        out[baseline_name(b)] = metrics(preds, targets);
    }
    return out;
}

void write_predictions_csv(const std::string& path, const std::vector<Window>& windows,
                           const std::vector<Tensor>& predictions, const NormStats& norm) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "window_start,step,node,prediction,target\n";
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const Tensor y = norm.denormalize(windows[w].y);
        for (std::size_t h = 0; h < y.dim(0); ++h)
            for (std::size_t n = 0; n < y.dim(1); ++n)
                out << windows[w].start << ',' << h << ',' << n << ',' << format_double(predictions[w].at(h, n))
                    << ',' << format_double(y.at(h, n)) << '\n';
    }
}

namespace {

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

std::optional<Tensor> distances_for(const PreparedData& data) { return data.dataset.distances; }

ForecastReport finish(Model& model, const PreparedData& data, const RunOptions& opts, ForecastReport r) {
    r.seed = model.config().seed;
    r.config = model.config().to_json();
    r.data_hash = data.data_hash;
    r.warnings.insert(r.warnings.end(), data.warnings.begin(), data.warnings.end());
    r.val = evaluate(model, data.val, data.norm);
    std::vector<Tensor> preds;
    r.test = evaluate(model, data.test, data.norm, &preds);
    r.baselines = evaluate_baselines(data, &r.warnings);
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        r.predictions_path = (fs::path(opts.out_dir) / "predictions.csv").string();
        write_predictions_csv(r.predictions_path, data.test, preds, data.norm);
    }
    return r;
}

}  // namespace

ForecastReport evaluate_model(Model& model, const PreparedData& data, const RunOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    ForecastReport r = finish(model, data, opts, {});
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!opts.out_dir.empty()) write_json((fs::path(opts.out_dir) / "report.json").string(), r.to_json());
    return r;
}

ForecastReport run_experiment(const ModelConfig& cfg, const PreparedData& data, const RunOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    if (data.dataset.distances == std::nullopt && cfg.graph.use_incident)
        throw ConfigError("graph.use_incident needs node coordinates or edges in the dataset");
    Model model(cfg, data.dataset.nodes(), distances_for(data));
    EpochCallback log;
    if (opts.verbose)
        log = [](const EpochRecord& e) {
            std::cerr << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_mae " << e.val_mae << '\n';
        };
    TrainResult tr = train(model, data.train, data.val, data.norm, log);

    ForecastReport r;
    r.best_epoch = tr.best_epoch;
    r.epochs_run = tr.history.size();
    r.history_hash = hex64(tr.history_hash);
    r = finish(model, data, opts, std::move(r));
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!opts.out_dir.empty()) {
        save_checkpoint(model, (fs::path(opts.out_dir) / "checkpoint.json").string());
        write_json((fs::path(opts.out_dir) / "report.json").string(), r.to_json());
    }
    return r;
}

std::vector<std::string> default_sweep(const std::string& sweep) {
    if (sweep == "gamma") return {"0", "0.5", "1"};
    if (sweep == "k") return {"2", "3", "4", "5"};
    if (sweep == "temporal") return {"on", "off"};
    throw ConfigError("ablate: unknown sweep '" + sweep + "' (expected gamma, k or temporal)");
}

std::vector<AblationRow> ablate(const ModelConfig& base, const PreparedData& data, const std::string& sweep,
                                const std::vector<std::string>& settings, const RunOptions& opts) {
    default_sweep(sweep);
    if (settings.empty()) throw ConfigError("ablate: empty sweep");
    std::vector<ModelConfig> configs;
    for (const auto& s : settings) {
        ModelConfig c = base;
        if (sweep == "gamma") {
            c.set("fusion.gamma", s);
        } else if (sweep == "k") {
            c.set("hypergraph.order", s);
            const std::size_t k = c.hypergraph.order;
            if (k < 2 || k > 5) throw ConfigError("ablate: k must be in {2,3,4,5}, got " + s);
        } else if (s == "on" || s == "off") {
            c.temporal_enabled = s == "on";
            if (!c.temporal_enabled) c.gate_force.reset();
        } else {
            throw ConfigError("ablate: temporal setting must be on or off, got '" + s + "'");
        }
        c.validate();
        configs.push_back(c);
    }
    std::vector<AblationRow> rows;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        RunOptions o = opts;
        if (!o.out_dir.empty()) o.out_dir = (fs::path(opts.out_dir) / (sweep + "_" + settings[i])).string();
        rows.push_back({sweep, settings[i], run_experiment(configs[i], data, o)});
    }
    return rows;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "sweep,setting,seed,data_hash,val_mae,val_rmse,test_mae,test_rmse,best_epoch,runtime_s\n";
    for (const auto& r : rows)
        out << r.sweep << ',' << r.setting << ',' << r.report.seed << ',' << r.report.data_hash << ','
            << format_double(r.report.val.mae) << ',' << format_double(r.report.val.rmse) << ','
            << format_double(r.report.test.mae) << ',' << format_double(r.report.test.rmse) << ','
            << r.report.best_epoch << ',' << format_double(r.report.runtime_s) << '\n';
}

}  // namespace sthsep
