#include "sthsep/synth.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "sthsep/errors.hpp"
#include "sthsep/rng.hpp"

namespace sthsep {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
    if (nodes < 1) throw ConfigError("synth: nodes must be >= 1");
    if (steps < 2) throw ConfigError("synth: steps must be >= 2");
    if (rank < 1) throw ConfigError("synth: rank must be >= 1");
    if (periods.empty()) throw ConfigError("synth: periods must not be empty");
    for (double p : periods)
        if (!(p > 0)) throw ConfigError("synth: periods must be > 0");
    if (!(rho >= 0 && rho < 1)) throw ConfigError("synth: rho must be in [0, 1) for a stable recursion");
    if (drift_at == 0 || drift_at >= steps) throw ConfigError("synth: drift_at must satisfy 0 < drift_at < steps");
    if (!(noise_std >= 0)) throw ConfigError("synth: noise_std must be >= 0");
}

namespace {

// Row-stochastic, zero diagonal, `k` random off-diagonal entries per row.
Tensor draw_coupling(Rng& rng, std::size_t n, std::size_t k) {
    Tensor c({n, n});
    if (n < 2) return c;
    k = std::min(k, n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(j);
        double total = 0;
        for (std::size_t m = 0; m < k; ++m) {
            const std::size_t pick = m + rng.below(others.size() - m);
            std::swap(others[m], others[pick]);
            const double w = rng.uniform(0.5, 1.0);
            c.at(i, others[m]) = w;
            total += w;
        }
        for (std::size_t j = 0; j < n; ++j) c.at(i, j) /= total;
    }
    return c;
}

double factor(std::size_t r, double period, std::size_t t) {
    const double phase = std::fmod(static_cast<double>(t), period) / period;
    if (r % 2 == 0) return std::sin(2.0 * std::numbers::pi * phase);
    return 2.0 * phase - 1.0;  // sawtooth
}

std::string hourly_stamp(std::size_t t) {
    using namespace std::chrono;
    const sys_days day = sys_days(year{2024} / January / 1) + days(static_cast<int>(t / 24));
    const year_month_day ymd(day);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02zu:00:00", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), t % 24);
    return buf;
}

}  // namespace

SynthResult synthesize(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t N = cfg.nodes, T = cfg.steps, R = cfg.rank;
    Rng rng(cfg.seed);
    Tensor u({N, R});
    for (auto& v : u.data()) v = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    SynthResult res;
    res.coupling_before = draw_coupling(rng, N, cfg.neighbours);
    res.coupling_after = draw_coupling(rng, N, cfg.neighbours);
    Tensor coords = rng.uniform_tensor({N, 2}, 0.0, 10.0);

    Tensor x({T, N});
    for (std::size_t t = 0; t < T; ++t) {
        const Tensor& c = t < cfg.drift_at ? res.coupling_before : res.coupling_after;
        for (std::size_t i = 0; i < N; ++i) {
            double v = 0;
            for (std::size_t r = 0; r < R; ++r) v += u.at(i, r) * factor(r, cfg.periods[r % cfg.periods.size()], t);
            if (t > 0)
                for (std::size_t j = 0; j < N; ++j) v += cfg.rho * c.at(i, j) * x.at(t - 1, j);
            if (cfg.noise_std > 0) v += cfg.noise_std * rng.normal();
            x.at(t, i) = v;
        }
    }

    auto& ds = res.dataset;
    ds.values = std::move(x);
    for (std::size_t t = 0; t < T; ++t) ds.timestamps.push_back(hourly_stamp(t));
    for (std::size_t i = 0; i < N; ++i) ds.node_ids.push_back("n" + std::to_string(i));
    ds.coords = coords;
    ds.distances = euclidean_distances(coords);
    return res;
}

void write_dataset(const SpatioTemporalDataset& ds, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory '" + dir + "': " + ec.message());
    write_values_csv(ds, (fs::path(dir) / "values.csv").string());
    if (ds.coords) write_coords_csv(ds, (fs::path(dir) / "coords.csv").string());
}

SpatioTemporalDataset load_dataset_dir(const std::string& dir) {
    const fs::path root(dir);
    const fs::path values = root / "values.csv";
    if (!fs::exists(values)) throw ParseError(values.string(), 0, "dataset file not found");
    std::optional<std::string> coords, edges;
    if (fs::exists(root / "coords.csv")) coords = (root / "coords.csv").string();
    if (fs::exists(root / "edges.csv")) edges = (root / "edges.csv").string();
    return load_dataset(values.string(), coords, edges);
}

}  // namespace sthsep
