#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sthsep/checkpoint.hpp"
#include "sthsep/errors.hpp"
#include "sthsep/graphs.hpp"
#include "sthsep/harness.hpp"
#include "sthsep/metrics.hpp"
#include "sthsep/synth.hpp"
#include "sthsep/temporal.hpp"

namespace py = pybind11;
using namespace sthsep;

namespace {

using Matrix = std::vector<std::vector<double>>;

Tensor to_tensor(const Matrix& m) {
    const std::size_t rows = m.size(), cols = rows ? m[0].size() : 0;
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
        if (m[i].size() != cols) throw ShapeError("ragged matrix: row " + std::to_string(i));
        for (std::size_t j = 0; j < cols; ++j) t.at(i, j) = m[i][j];
    }
    return t;
}

Matrix to_matrix(const Tensor& t) {
    Matrix m(t.dim(0), std::vector<double>(t.dim(1)));
    for (std::size_t i = 0; i < t.dim(0); ++i)
        for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t.at(i, j);
    return m;
}

ModelConfig config_from(const std::string& text) {
    return text.empty() ? ModelConfig{} : ModelConfig::from_json(nlohmann::json::parse(text));
}

SynthConfig synth_config(std::size_t nodes, std::size_t steps, std::uint64_t seed, std::size_t rank, double rho,
                         std::size_t drift_at, double noise_std) {
    SynthConfig sc;
    sc.nodes = nodes;
    sc.steps = steps;
    sc.seed = seed;
    sc.rank = rank;
    sc.rho = rho;
    sc.drift_at = drift_at ? drift_at : steps / 2;
    sc.noise_std = noise_std;
    return sc;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native core of the sthsep forecasting library";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);

    m.def("default_config_json", [] { return ModelConfig{}.to_json().dump(); });
    m.def("normalize_config_json", [](const std::string& text) {
        ModelConfig c = config_from(text);
        c.validate();
        return c.to_json().dump();
    });

    m.def(
        "synthesize",
        [](std::size_t nodes, std::size_t steps, std::uint64_t seed, std::size_t rank, double rho,
           std::size_t drift_at, double noise_std) {
            SpatioTemporalDataset ds = synthesize(synth_config(nodes, steps, seed, rank, rho, drift_at, noise_std)).dataset;
            return py::dict(py::arg("values") = to_matrix(ds.values), py::arg("node_ids") = ds.node_ids,
                            py::arg("timestamps") = ds.timestamps, py::arg("coords") = to_matrix(*ds.coords));
        },
        py::arg("nodes") = 8, py::arg("steps") = 2048, py::arg("seed") = 7, py::arg("rank") = 2,
        py::arg("rho") = 0.5, py::arg("drift_at") = 0, py::arg("noise_std") = 0.1);

    m.def(
        "write_synthetic",
        [](const std::string& out, std::size_t nodes, std::size_t steps, std::uint64_t seed, std::size_t rank,
           double rho, std::size_t drift_at, double noise_std) {
            SpatioTemporalDataset ds = synthesize(synth_config(nodes, steps, seed, rank, rho, drift_at, noise_std)).dataset;
            write_dataset(ds, out);
            return hex64(content_hash(ds.values));
        },
        py::arg("out"), py::arg("nodes") = 8, py::arg("steps") = 2048, py::arg("seed") = 7, py::arg("rank") = 2,
        py::arg("rho") = 0.5, py::arg("drift_at") = 0, py::arg("noise_std") = 0.1);

    m.def(
        "train_json",
        [](const std::string& config, const std::string& data_dir, const std::string& out_dir) {
            ModelConfig cfg = config_from(config);
            if (!data_dir.empty()) cfg.data_dir = data_dir;
            PreparedData data = prepare_data(load_dataset_dir(cfg.data_dir), cfg);
            py::gil_scoped_release release;
            return run_experiment(cfg, data, {out_dir, false}).to_json().dump();
        },
        py::arg("config"), py::arg("data_dir"), py::arg("out_dir") = "");

    m.def(
        "evaluate_json",
        [](const std::string& checkpoint, const std::string& data_dir, const std::string& out_dir) {
            Checkpoint ck = load_checkpoint(checkpoint);
            PreparedData data = prepare_data(load_dataset_dir(data_dir), ck.config);
            Model model(ck.config, data.dataset.nodes(), data.dataset.distances);
            apply_checkpoint(ck, model);
            return evaluate_model(model, data, {out_dir, false}).to_json().dump();
        },
        py::arg("checkpoint"), py::arg("data_dir"), py::arg("out_dir") = "");

    m.def("metrics", [](const Matrix& pred, const Matrix& target) {
        Metrics r = metrics(to_tensor(pred), to_tensor(target));
        return py::make_tuple(r.mae, r.rmse);
    });

    m.def("patch_count", [](std::size_t steps, std::size_t length, std::size_t stride) {
        return patch_count(steps, {length, stride});
    });

    m.def("hop_hyperedges", [](const Matrix& adj, std::size_t k) { return hop_hyperedges(to_tensor(adj), k).hyperedges; });

    m.def("coverage_check", [](const Matrix& adj, std::size_t k) {
        Tensor a = to_tensor(adj);
        CoverageResult r = coverage_check(hop_hyperedges(a, k), a, k);
        return py::make_tuple(r.passed, r.detail);
    });

    m.def("adaptive_adjacency",
          [](const Matrix& e1, const Matrix& e2, const Matrix& w, const std::vector<double>& b, double alpha) {
              Tensor bias({b.size()}, std::vector<double>(b));
              return to_matrix(adaptive_adjacency(to_tensor(e1), to_tensor(e2), to_tensor(w), bias, alpha).matrix);
          });
}
