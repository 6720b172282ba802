#include "sthsep/dataset.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "sthsep/errors.hpp"

namespace sthsep {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

struct CsvFile {
    std::string path;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)
};

CsvFile read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    CsvFile f{path, {}};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        f.rows.emplace_back(lineno, split_csv_line(line));
    }
    if (f.rows.empty()) throw ParseError(path, 0, "empty file");
    return f;
}

double parse_double(const std::string& s, const std::string& file, std::size_t line) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (!s.empty() && *b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || s.empty()) throw ParseError(file, line, "invalid number '" + s + "'");
    return v;
}

using Stamp = std::tuple<int, int, int, int, int, double>;

Stamp parse_timestamp(const std::string& s, const std::string& file, std::size_t line) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    double sec = 0.0;
    char sep = 'T';
    int consumed = 0;
    const int n = std::sscanf(s.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed);
    if (n != 3) throw ParseError(file, line, "invalid ISO-8601 timestamp '" + s + "'");
    std::string rest = s.substr(static_cast<std::size_t>(consumed));
    if (!rest.empty()) {
        sep = rest[0];
        if (sep != 'T' && sep != ' ') throw ParseError(file, line, "invalid ISO-8601 timestamp '" + s + "'");
        int c2 = 0;
        const int m = std::sscanf(rest.c_str() + 1, "%2d:%2d%n", &h, &mi, &c2);
        if (m != 2) throw ParseError(file, line, "invalid ISO-8601 timestamp '" + s + "'");
        std::string tail = rest.substr(1 + static_cast<std::size_t>(c2));
        if (!tail.empty() && tail[0] == ':') {
            std::size_t end = 1;
            while (end < tail.size() && (std::isdigit(static_cast<unsigned char>(tail[end])) || tail[end] == '.'))
                ++end;
            sec = parse_double(tail.substr(1, end - 1), file, line);
            tail = tail.substr(end);
        }
        if (!tail.empty() && tail != "Z") throw ParseError(file, line, "unsupported timestamp suffix in '" + s + "'");
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec >= 61.0)
        throw ParseError(file, line, "timestamp field out of range in '" + s + "'");
    return {y, mo, d, h, mi, sec};
}

}  // namespace

void SpatioTemporalDataset::validate() const {
    if (values.rank() != 2) throw ConfigError("dataset: values must be [T, N]");
    if (steps() < 2) throw ConfigError("dataset: need at least 2 timesteps");
    if (nodes() < 1) throw ConfigError("dataset: need at least 1 node");
    if (timestamps.size() != steps()) throw ConfigError("dataset: timestamp count differs from T");
    if (node_ids.size() != nodes()) throw ConfigError("dataset: node id count differs from N");
    if (coords && coords->shape() != Shape{nodes(), 2}) throw ConfigError("dataset: coords must be [N, 2]");
    if (distances) {
        if (distances->shape() != Shape{nodes(), nodes()}) throw ConfigError("dataset: distances must be [N, N]");
        for (std::size_t i = 0; i < nodes(); ++i) {
            if (distances->at(i, i) != 0.0) throw ConfigError("dataset: distance diagonal must be zero");
            for (std::size_t j = 0; j < i; ++j)
                if (distances->at(i, j) != distances->at(j, i)) throw ConfigError("dataset: distances not symmetric");
        }
    }
}

void WindowSpec::validate(std::size_t steps) const {
    if (lookback < 1 || horizon < 1 || stride < 1) throw ConfigError("window: lookback, horizon, stride must be >= 1");
    if (lookback + horizon > steps)
        throw ConfigError("window: lookback + horizon (" + std::to_string(lookback + horizon) + ") exceeds " +
                          std::to_string(steps) + " steps");
}

Tensor NormStats::normalize(const Tensor& values) const {
    Tensor out = values;
    const std::size_t n = mean.size();
    if (values.rank() != 2 || values.dim(1) != n) throw ShapeError("normalize: expected [*, " + std::to_string(n) + "]");
    for (std::size_t t = 0; t < values.dim(0); ++t)
        for (std::size_t i = 0; i < n; ++i) out.at(t, i) = (values.at(t, i) - mean[i]) / std[i];
    return out;
}

Tensor NormStats::denormalize(const Tensor& values) const {
    Tensor out = values;
    const std::size_t n = mean.size();
    if (values.rank() != 2 || values.dim(1) != n)
        throw ShapeError("denormalize: expected [*, " + std::to_string(n) + "]");
    for (std::size_t t = 0; t < values.dim(0); ++t)
        for (std::size_t i = 0; i < n; ++i) out.at(t, i) = values.at(t, i) * std[i] + mean[i];
    return out;
}

SpatioTemporalDataset load_dataset(const std::string& values_path, const std::optional<std::string>& coords_path,
                                   const std::optional<std::string>& edges_path) {
    const CsvFile vf = read_csv(values_path);
    const auto& [hline, header] = vf.rows.front();
    if (header.size() < 2 || header[0] != "timestamp")
        throw ParseError(values_path, hline, "header must be 'timestamp,<node_id>,...'");
    SpatioTemporalDataset ds;
    ds.node_ids.assign(header.begin() + 1, header.end());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ds.node_ids.size(); ++i) {
        if (ds.node_ids[i].empty()) throw ParseError(values_path, hline, "empty node id");
        if (!index.emplace(ds.node_ids[i], i).second)
            throw ParseError(values_path, hline, "duplicate node id '" + ds.node_ids[i] + "'");
    }
    const std::size_t n = ds.node_ids.size();
    const std::size_t steps = vf.rows.size() - 1;
    std::vector<double> data;
    data.reserve(steps * n);
    std::optional<Stamp> prev;
    for (std::size_t r = 1; r < vf.rows.size(); ++r) {
        const auto& [line, fields] = vf.rows[r];
        if (fields.size() != n + 1)
            throw ParseError(values_path, line,
                             "expected " + std::to_string(n + 1) + " fields, got " + std::to_string(fields.size()));
        Stamp s = parse_timestamp(fields[0], values_path, line);
        if (prev && !(*prev < s)) throw ParseError(values_path, line, "timestamps must be strictly increasing");
        prev = s;
        ds.timestamps.push_back(fields[0]);
        for (std::size_t j = 1; j <= n; ++j) {
            const double v = parse_double(fields[j], values_path, line);
            if (!std::isfinite(v)) throw ParseError(values_path, line, "non-finite value");
            data.push_back(v);
        }
    }
    if (steps < 2) throw ParseError(values_path, 0, "need at least 2 timesteps");
    ds.values = Tensor({steps, n}, std::move(data));

    if (coords_path) {
        const CsvFile cf = read_csv(*coords_path);
        Tensor coords({n, 2}, std::numeric_limits<double>::quiet_NaN());
        std::size_t first = 0;
        const auto& h = cf.rows.front().second;
        if (h.size() == 3 && h[0] == "node_id") first = 1;
        for (std::size_t r = first; r < cf.rows.size(); ++r) {
            const auto& [line, fields] = cf.rows[r];
            if (fields.size() != 3) throw ParseError(*coords_path, line, "expected 'node_id,x,y'");
            auto it = index.find(fields[0]);
            if (it == index.end()) throw ParseError(*coords_path, line, "unknown node id '" + fields[0] + "'");
            coords.at(it->second, 0) = parse_double(fields[1], *coords_path, line);
            coords.at(it->second, 1) = parse_double(fields[2], *coords_path, line);
        }
        for (std::size_t i = 0; i < n; ++i)
            if (std::isnan(coords.at(i, 0)))
                throw ParseError(*coords_path, 0, "missing coordinates for node '" + ds.node_ids[i] + "'");
        ds.coords = coords;
        if (!edges_path) ds.distances = euclidean_distances(coords);
    }

    if (edges_path) {
        const CsvFile ef = read_csv(*edges_path);
        Tensor dist({n, n}, std::numeric_limits<double>::infinity());
        Tensor seen({n, n}, 0.0);
        for (std::size_t i = 0; i < n; ++i) dist.at(i, i) = 0.0;
        std::size_t first = 0;
        const auto& h = ef.rows.front().second;
        if (h.size() == 3 && h[0] == "src") first = 1;
        for (std::size_t r = first; r < ef.rows.size(); ++r) {
            const auto& [line, fields] = ef.rows[r];
            if (fields.size() != 3) throw ParseError(*edges_path, line, "expected 'src,dst,dist'");
            auto a = index.find(fields[0]);
            auto b = index.find(fields[1]);
            if (a == index.end()) throw ParseError(*edges_path, line, "unknown node id '" + fields[0] + "'");
            if (b == index.end()) throw ParseError(*edges_path, line, "unknown node id '" + fields[1] + "'");
            const double d = parse_double(fields[2], *edges_path, line);
            if (!(d >= 0.0) || !std::isfinite(d)) throw ParseError(*edges_path, line, "distance must be finite and >= 0");
            const std::size_t i = a->second, j = b->second;
            if (i == j) {
                if (d != 0.0) throw ParseError(*edges_path, line, "self edge must have distance 0");
                continue;
            }
            if (seen.at(i, j) != 0.0 && dist.at(i, j) != d)
                throw ParseError(*edges_path, line,
                                 "conflicting distance for edge (" + fields[0] + "," + fields[1] + ")");
            dist.at(i, j) = dist.at(j, i) = d;
            seen.at(i, j) = seen.at(j, i) = 1.0;
        }
        ds.distances = dist;
    }
    ds.validate();
    return ds;
}

Tensor euclidean_distances(const Tensor& coords) {
    const std::size_t n = coords.dim(0);
    Tensor d({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double dx = coords.at(i, 0) - coords.at(j, 0);
            const double dy = coords.at(i, 1) - coords.at(j, 1);
            d.at(i, j) = d.at(j, i) = std::sqrt(dx * dx + dy * dy);
        }
    return d;
}

namespace {
SpatioTemporalDataset slice_rows(const SpatioTemporalDataset& ds, std::size_t begin, std::size_t len) {
    SpatioTemporalDataset out;
    const std::size_t n = ds.nodes();
    std::vector<double> v(ds.values.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                          ds.values.data().begin() + static_cast<std::ptrdiff_t>((begin + len) * n));
    out.values = Tensor({len, n}, std::move(v));
    out.timestamps.assign(ds.timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                          ds.timestamps.begin() + static_cast<std::ptrdiff_t>(begin + len));
    out.node_ids = ds.node_ids;
    out.coords = ds.coords;
    out.distances = ds.distances;
    return out;
}
}  // namespace

Splits split_dataset(const SpatioTemporalDataset& ds, std::array<double, 3> ratios, std::size_t min_length) {
    const double total = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(total - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0)
        throw ConfigError("split: ratios must be non-negative and sum to 1");
    const std::size_t T = ds.steps();
    const auto n_train = static_cast<std::size_t>(std::floor(ratios[0] * static_cast<double>(T) + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(T) + 1e-9));
    if (n_train + n_val > T) throw ConfigError("split: ratios exceed series length");
    const std::size_t n_test = T - n_train - n_val;
    const std::pair<const char*, std::size_t> lens[] = {{"train", n_train}, {"val", n_val}, {"test", n_test}};
    for (const auto& [name, len] : lens)
        if (len < min_length)
            throw ConfigError(std::string("split: ") + name + " split has " + std::to_string(len) +
                              " steps, fewer than lookback + horizon = " + std::to_string(min_length));
    return {slice_rows(ds, 0, n_train), slice_rows(ds, n_train, n_val), slice_rows(ds, n_train + n_val, n_test)};
}

NormStats zscore_normalize(Splits& splits) {
    const Tensor& tr = splits.train.values;
    const std::size_t T = tr.dim(0), n = tr.dim(1);
    NormStats st;
    st.mean.assign(n, 0.0);
    st.std.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double mu = 0.0;
        for (std::size_t t = 0; t < T; ++t) mu += tr.at(t, i);
        mu /= static_cast<double>(T);
        double var = 0.0;
        for (std::size_t t = 0; t < T; ++t) var += (tr.at(t, i) - mu) * (tr.at(t, i) - mu);
        var /= static_cast<double>(T);
        double sd = std::sqrt(var);
        if (sd < 1e-12) {
            st.warnings.push_back("node '" + splits.train.node_ids[i] + "' has near-zero train std; using 1");
            sd = 1.0;
        }
        st.mean[i] = mu;
        st.std[i] = sd;
    }
    splits.train.values = st.normalize(splits.train.values);
    if (!splits.val.values.empty()) splits.val.values = st.normalize(splits.val.values);
    if (!splits.test.values.empty()) splits.test.values = st.normalize(splits.test.values);
    return st;
}

std::size_t window_count(std::size_t steps, const WindowSpec& spec) {
    spec.validate(steps);
    return (steps - spec.lookback - spec.horizon) / spec.stride + 1;
}

std::vector<Window> make_windows(const Tensor& values, const WindowSpec& spec) {
    const std::size_t T = values.dim(0), n = values.dim(1);
    const std::size_t count = window_count(T, spec);
    std::vector<Window> out;
    out.reserve(count);
    auto rows = [&](std::size_t begin, std::size_t len) {
        std::vector<double> v(values.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                              values.data().begin() + static_cast<std::ptrdiff_t>((begin + len) * n));
        return Tensor({len, n}, std::move(v));
    };
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t s = w * spec.stride;
        out.push_back({rows(s, spec.lookback), rows(s + spec.lookback, spec.horizon), s});
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

void write_values_csv(const SpatioTemporalDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "timestamp";
    for (const auto& id : ds.node_ids) out << ',' << id;
    out << '\n';
    for (std::size_t t = 0; t < ds.steps(); ++t) {
        out << ds.timestamps[t];
        for (std::size_t i = 0; i < ds.nodes(); ++i) out << ',' << format_double(ds.values.at(t, i));
        out << '\n';
    }
}

void write_coords_csv(const SpatioTemporalDataset& ds, const std::string& path) {
    if (!ds.coords) throw Error("dataset has no coordinates");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "node_id,x,y\n";
    for (std::size_t i = 0; i < ds.nodes(); ++i)
        out << ds.node_ids[i] << ',' << format_double(ds.coords->at(i, 0)) << ',' << format_double(ds.coords->at(i, 1))
            << '\n';
}

std::uint64_t content_hash(const Tensor& values) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    for (std::size_t d : values.shape()) {
        const std::uint64_t v = d;
        mix(&v, sizeof(v));
    }
    mix(values.data().data(), values.size() * sizeof(double));
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace sthsep
