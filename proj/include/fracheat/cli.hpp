#pragma once

// Command-line front end: generate | norms | skorohod | solve | verify.
// Every command writes manifest.json next to its outputs. Exit status is 0 on
// success, 2 when an experiment fails its criterion and 1 on usage or config errors.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fracheat/config.hpp"
#include "fracheat/core.hpp"
#include "fracheat/fbm.hpp"
#include "fracheat/kernel.hpp"
#include "fracheat/solver.hpp"
#include "fracheat/spectral.hpp"
#include "fracheat/verify.hpp"

#ifndef FRACHEAT_GIT_DESCRIBE
#define FRACHEAT_GIT_DESCRIBE "unknown"
#endif

namespace fracheat::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitFailed = 2;

/// Experiment ids in the order `verify --experiment all` runs them.
inline const std::vector<std::string>& experiment_ids() {
    static const std::vector<std::string> ids{
        "fbm_law",     "skorohod",      "duality",      "spectral_laws", "contraction",
        "heat_reduction", "weak_residual", "maximal_ratio", "p2_maximal", "hoelder",
        "embedding_sup", "apriori",      "littlewood_paley"};
    return ids;
}

namespace detail {

using fracheat::detail::concat;

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string read_file(const fs::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw ConfigError(concat("cannot read file '", file.string(), "'"));
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline std::string file_hash(const fs::path& file) {
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << fnv1a(read_file(file));
    return ss.str();
}

inline std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

inline std::optional<std::uint64_t> env_seed() {
    const char* v = std::getenv("FRACHEAT_SEED");
    if (!v || !*v) return std::nullopt;
    const std::string s = fracheat::detail::trim(v);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError(concat("FRACHEAT_SEED must be a nonnegative integer, got '", s, "'"));
    try {
        return std::stoull(s);
    } catch (const std::out_of_range&) {
        throw ConfigError(concat("FRACHEAT_SEED out of range: '", s, "'"));
    }
}

inline std::vector<std::string> tokens(std::string s) {
    for (char& c : s)
        if (c == ',') c = ' ';
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string t; is >> t;) out.push_back(t);
    return out;
}

inline FbmMethod parse_method(const std::string& s) {
    if (s == "cholesky") return FbmMethod::Cholesky;
    if (s == "circulant") return FbmMethod::Circulant;
    throw ConfigError(concat("method must be cholesky or circulant, got '", s, "'"));
}

inline void write_json(const fs::path& file, const Json& j) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error(concat("cannot open ", file.string(), " for writing"));
    os << j.dump(2) << "\n";
}

inline void ensure_dir(const fs::path& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError(concat("cannot create output directory '", dir.string(), "': ", ec.message()));
}

}  // namespace detail

/// One config section with command-line overrides applied. Every lookup lands in
/// resolved(), which is what the manifest records.
class Params {
public:
    Params(Ini section, fs::path base) : section_(std::move(section)), base_(std::move(base)) {}

    bool has(const std::string& key) const { return section_.get_optional<std::string>(key).has_value(); }
    void set(const std::string& key, const std::string& value) { section_.put(key, value); }

    template <typename T>
    T get(const std::string& key, T fallback) {
        const T v = ini_get<T>(section_, key, fallback);
        resolved_[key] = v;
        return v;
    }

    std::vector<double> doubles(const std::string& key, std::vector<double> fallback) {
        if (has(key)) {
            fallback.clear();
            for (const auto& t : detail::tokens(section_.get<std::string>(key)))
                fallback.push_back(fracheat::detail::to_double(t, key));
        }
        resolved_[key] = fallback;
        return fallback;
    }

    std::vector<std::size_t> indices(const std::string& key, std::vector<std::size_t> fallback) {
        if (has(key)) {
            fallback.clear();
            for (const auto& t : detail::tokens(section_.get<std::string>(key))) {
                const double d = fracheat::detail::to_double(t, key);
                if (d < 1.0 || d != std::floor(d)) throw ConfigError(detail::concat(key, " entries must be positive integers"));
                fallback.push_back(static_cast<std::size_t>(d));
            }
        }
        resolved_[key] = fallback;
        return fallback;
    }

    /// Comma-separated strings, e.g. several profiles.
    std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) {
        if (has(key)) {
            fallback = fracheat::detail::split(section_.get<std::string>(key), ',');
            for (auto& s : fallback) s = fracheat::detail::trim(s);
        }
        resolved_[key] = fallback;
        return fallback;
    }

    /// A file named in the section resolves against the config's directory; the
    /// fallback is taken as given (relative to the working directory).
    std::string file(const std::string& key, const std::string& fallback) {
        std::string f = fallback;
        if (has(key)) {
            fs::path p = fracheat::detail::trim(section_.get<std::string>(key));
            if (p.is_relative() && !from_flag_.count(key)) p = base_ / p;
            f = p.lexically_normal().string();
        }
        resolved_[key] = f;
        return f;
    }

    /// Flag, then file key, then FRACHEAT_SEED, then the experiment's own default.
    std::uint64_t seed(std::uint64_t fallback) {
        std::uint64_t s = fallback;
        if (has("seed"))
            s = ini_get<std::uint64_t>(section_, "seed", fallback);
        else if (const auto e = detail::env_seed())
            s = *e;
        resolved_["seed"] = s;
        return s;
    }

    void mark_flag(const std::string& key) { from_flag_[key] = true; }
    const Json& resolved() const noexcept { return resolved_; }

private:
    Ini section_;
    fs::path base_;
    std::map<std::string, bool> from_flag_;
    Json resolved_ = Json::object();
};

namespace detail {

inline Battery load_battery_params(Params& p, const std::string& fallback) {
    Battery b = fracheat::load_battery(p.file("battery", fallback));
    b.hurst = p.get<double>("H", b.hurst);
    b.horizon = p.get<double>("T", b.horizon);
    b.cells = p.get<std::size_t>("m", b.cells);
    HurstIndex{b.hurst};
    return b;
}

inline MaximalConfig maximal_config(Params& p, Battery& b) {
    MaximalConfig c;
    c.p = p.get<double>("p", b.p);
    c.hurst = b.hurst;
    c.cells = b.cells;
    c.n_mc = p.get<std::size_t>("n_mc", b.n_mc);
    c.seed = p.seed(b.seed);
    if (c.p < 2.0) throw DomainError(concat("maximal_ratio needs p >= 2, got ", c.p));
    return c;
}

inline ProblemDescription load_problem_params(Params& p, const std::string& fallback) {
    const std::string file = p.file("spec", fallback);
    ProblemDescription d = fracheat::load_problem(file);
    d.hurst = p.get<double>("H", d.hurst);
    d.horizon = p.get<double>("T", d.horizon);
    HurstIndex{d.hurst};
    d.build();
    return d;
}

inline std::string stem(const std::string& file) { return fs::path(file).filename().string(); }

}  // namespace detail

using ExperimentFn = std::function<ExperimentReport(Params&)>;

/// Maps each experiment id to a runner reading its section of the verify config.
inline const std::map<std::string, ExperimentFn>& experiment_table() {
    static const std::map<std::string, ExperimentFn> table{
        {"fbm_law",
         [](Params& p) {
             FbmLawConfig c;
             c.hurst = p.doubles("H", c.hurst);
             for (double h : c.hurst) HurstIndex{h};
             c.cells = p.get<std::size_t>("m", c.cells);
             c.n_paths = p.get<std::size_t>("n_mc", c.n_paths);
             c.seed = p.seed(c.seed);
             c.method = detail::parse_method(p.get<std::string>("method", "cholesky"));
             return fbm_law_experiment(c);
         }},
        {"skorohod",
         [](Params& p) {
             Battery b = detail::load_battery_params(p, "experiments/skorohod.battery");
             const auto n = p.get<std::size_t>("n_mc", b.n_mc);
             return skorohod_experiment(b, n, p.seed(b.seed));
         }},
        {"duality",
         [](Params& p) {
             Battery b = detail::load_battery_params(p, "experiments/skorohod.battery");
             const auto n = p.get<std::size_t>("n_mc", b.n_mc);
             return duality_experiment(b, n, p.seed(b.seed));
         }},
        {"maximal_ratio",
         [](Params& p) {
             Battery b = detail::load_battery_params(p, "experiments/maximal.battery");
             return maximal_ratio_experiment(b, detail::maximal_config(p, b));
         }},
        {"p2_maximal",
         [](Params& p) {
             Battery b = detail::load_battery_params(p, "experiments/maximal.battery");
             MaximalConfig c = detail::maximal_config(p, b);
             return p2_maximal_experiment(b, c);
         }},
        {"hoelder",
         [](Params& p) {
             const ProblemDescription d = detail::load_problem_params(p, "experiments/det_g.spec");
             HoelderConfig c;
             c.p = p.get<double>("p", c.p);
             c.beta = p.get<double>("beta", c.beta);
             c.alpha = p.get<double>("alpha", c.alpha);
             c.n = p.get<double>("n", c.n);
             c.n_mc = p.get<std::size_t>("n_mc", c.n_mc);
             c.seed = p.seed(c.seed);
             c.cells = p.get<std::size_t>("m", c.cells);
             c.lags = p.indices("lags", c.lags);
             return hoelder_experiment(d, c, detail::stem(p.resolved()["spec"].get<std::string>()));
         }},
        {"embedding_sup",
         [](Params& p) {
             const ProblemDescription d = detail::load_problem_params(p, "experiments/det_g.spec");
             SolutionConfig c;
             c.p = p.get<double>("p", c.p);
             c.n = p.get<double>("n", c.n);
             c.n_mc = p.get<std::size_t>("n_mc", c.n_mc);
             c.seed = p.seed(c.seed);
             c.cells = p.get<std::size_t>("m", c.cells);
             return embedding_sup_experiment(d, c, detail::stem(p.resolved()["spec"].get<std::string>()));
         }},
        {"apriori",
         [](Params& p) {
             const ProblemDescription d = detail::load_problem_params(p, "experiments/mixed.spec");
             SolutionConfig c;
             c.p = p.get<double>("p", c.p);
             c.n = p.get<double>("n", c.n);
             c.n_mc = p.get<std::size_t>("n_mc", c.n_mc);
             c.seed = p.seed(c.seed);
             c.cells = p.get<std::size_t>("m", c.cells);
             return apriori_estimate_experiment(d, c, detail::stem(p.resolved()["spec"].get<std::string>()));
         }},
        {"weak_residual",
         [](Params& p) {
             const ProblemDescription d = detail::load_problem_params(p, "experiments/det_g.spec");
             WeakResidualConfig c;
             c.levels = p.indices("levels", c.levels);
             c.replicates = p.get<std::size_t>("n_mc", c.replicates);
             c.seed = p.seed(c.seed);
             c.test_function = p.get<std::string>("test_function", c.test_function);
             c.min_order = p.get<double>("min_order", c.min_order);
             c.tolerance = p.get<double>("tolerance", c.tolerance);
             return weak_residual_experiment(d, c, detail::stem(p.resolved()["spec"].get<std::string>()));
         }},
        {"heat_reduction",
         [](Params& p) {
             const ProblemDescription d = detail::load_problem_params(p, "experiments/det_g.spec");
             const double tol = p.get<double>("tolerance", 1e-10);
             return heat_reduction_experiment(d, tol, detail::stem(p.resolved()["spec"].get<std::string>()));
         }},
        {"contraction",
         [](Params& p) {
             ContractionConfig c;
             c.p = p.doubles("p", c.p);
             for (double q : c.p)
                 if (q < 1.0) throw DomainError(detail::concat("contraction needs p >= 1, got ", q));
             c.t = p.doubles("t", c.t);
             c.t_over_dx2 = p.doubles("t_over_dx2", c.t_over_dx2);
             c.half_width = p.get<double>("L", c.half_width);
             c.points = p.get<std::size_t>("M", c.points);
             c.random_fields = p.get<std::size_t>("random_fields", c.random_fields);
             c.seed = p.seed(c.seed);
             c.slack = p.get<double>("slack", c.slack);
             return contraction_experiment(c);
         }},
        {"spectral_laws",
         [](Params& p) {
             ContractionConfig c;
             c.p = p.doubles("p", c.p);
             c.t = p.doubles("t", c.t);
             c.half_width = p.get<double>("L", c.half_width);
             c.points = p.get<std::size_t>("M", c.points);
             c.random_fields = p.get<std::size_t>("random_fields", c.random_fields);
             c.seed = p.seed(c.seed);
             const double tol = p.get<double>("tolerance", 1e-10);
             return spectral_laws_experiment(c, tol);
         }},
        {"littlewood_paley",
         [](Params& p) {
             LittlewoodPaleyConfig c;
             c.p = p.get<double>("p", c.p);
             if (c.p < 2.0) throw DomainError(detail::concat("littlewood_paley needs p >= 2, got ", c.p));
             c.hurst = p.get<double>("H", c.hurst);
             HurstIndex{c.hurst};
             c.a = p.get<double>("a", c.a);
             c.b = p.get<double>("b", c.b);
             c.slice_width = p.get<double>("slice_width", c.slice_width);
             c.profiles = p.strings("profiles", c.profiles);
             c.half_width = p.get<double>("L", c.half_width);
             c.points = p.get<std::size_t>("M", c.points);
             c.panels = p.get<std::size_t>("panels", c.panels);
             return littlewood_paley_experiment(c);
         }},
    };
    return table;
}

/// Collects outputs and timings of one command and writes manifest.json.
class Manifest {
public:
    Manifest(std::string command, std::vector<std::string> argv, fs::path dir)
        : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
        j_["command"] = std::move(command);
        j_["argv"] = std::move(argv);
        j_["git_describe"] = FRACHEAT_GIT_DESCRIBE;
        j_["started_utc"] = detail::utc_now();
        j_["threads"] = max_threads();
        j_["seed"] = nullptr;
        j_["config"] = Json::object();
        j_["timing_seconds"] = Json::object();
        j_["outputs"] = Json::array();
    }

    Json& config() { return j_["config"]; }
    void seed(const Json& s) { j_["seed"] = s; }
    void time(const std::string& step, double seconds) { j_["timing_seconds"][step] = seconds; }
    void set(const std::string& key, const Json& v) { j_[key] = v; }

    /// Records a file written into the output directory.
    fs::path output(const std::string& name) {
        j_["outputs"].push_back(name);
        return dir_ / name;
    }

    void write() {
        const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        j_["timing_seconds"]["total"] = total;
        detail::write_json(dir_ / "manifest.json", j_);
    }

private:
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    Json j_;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Cells of a step function from CSV: one row per cell, one column per l2
/// component. A header row is skipped; a column named t is ignored.
inline std::vector<std::vector<double>> read_step_csv(const std::string& file) {
    std::ifstream is(file);
    if (!is) throw ConfigError(concat("cannot read file '", file, "'"));
    std::vector<std::vector<double>> rows;
    std::vector<bool> keep;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = fracheat::detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto cols = fracheat::detail::split(line, ',');
        for (auto& c : cols) c = fracheat::detail::trim(c);
        if (keep.empty()) {
            keep.assign(cols.size(), true);
            char* end = nullptr;
            std::strtod(cols[0].c_str(), &end);
            if (end == cols[0].c_str()) {  // header
                for (std::size_t i = 0; i < cols.size(); ++i) keep[i] = cols[i] != "t";
                continue;
            }
        }
        if (cols.size() != keep.size())
            throw ConfigError(concat(file, ":", lineno, ": expected ", keep.size(), " columns, got ", cols.size()));
        std::vector<double> row;
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (keep[i]) row.push_back(fracheat::detail::to_double(cols[i], concat(file, ":", lineno)));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError(concat(file, ": no data rows"));
    if (rows.front().empty()) throw ConfigError(concat(file, ": no value columns"));
    return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands.

struct GenerateOptions {
    double hurst = 0.75;
    double horizon = 1.0;
    std::size_t cells = 64;
    std::size_t paths = 1;
    std::size_t replicates = 1;
    std::optional<std::uint64_t> seed;
    std::string method = "cholesky";
    std::string format = "both";
    std::string out = ".";
};

inline int cmd_generate(const GenerateOptions& o, const std::vector<std::string>& argv, std::ostream& out) {
    const HurstIndex h(o.hurst);
    const TimeGrid grid(o.horizon, o.cells);
    if (o.paths == 0 || o.replicates == 0) throw DomainError("K and n must be positive");
    if (o.format != "csv" && o.format != "fbm1" && o.format != "both")
        throw ConfigError("format must be csv, fbm1 or both");
    const FbmMethod method = detail::parse_method(o.method);
    const std::uint64_t seed = o.seed ? *o.seed : detail::env_seed().value_or(1);
    detail::ensure_dir(o.out);

    Manifest man("generate", argv, o.out);
    man.config() = {{"H", o.hurst}, {"T", o.horizon}, {"m", o.cells},      {"K", o.paths},
                    {"n", o.replicates}, {"seed", seed}, {"method", o.method}, {"format", o.format}};
    man.seed(seed);
    const auto t0 = std::chrono::steady_clock::now();
    const FbmGenerator gen(grid, h, method);
    man.set("fallback", gen.fell_back());
    for (std::size_t r = 0; r < o.replicates; ++r) {
        const FbmEnsemble e = gen.ensemble(o.paths, seed, r);
        const std::string base = detail::concat("fbm_", r);
        if (o.format != "fbm1") {
            std::ofstream os(man.output(base + ".csv"));
            write_fbm_csv(os, e);
        }
        if (o.format != "csv") write_fbm_cache(man.output(base + ".fbm").string(), e);
    }
    man.time("generate", detail::seconds_since(t0));
    man.write();
    out << "generated " << o.replicates << " replicate(s) of " << o.paths << " path(s) on " << o.cells
        << " cells (" << to_string(gen.method()) << (gen.fell_back() ? ", circulant fell back" : "") << ")\n";
    return kExitOk;
}

struct NormsOptions {
    std::string input;
    double hurst = 0.75;
    double p = 2.0;
    double horizon = 1.0;
    std::string out = ".";
};

inline int cmd_norms(const NormsOptions& o, const std::vector<std::string>& argv, std::ostream& out) {
    const HurstIndex h(o.hurst);
    if (o.p < 2.0) throw DomainError(detail::concat("p must be >= 2, got ", o.p));
    const auto rows = detail::read_step_csv(o.input);
    const TimeGrid grid(o.horizon, rows.size());
    const FractionalKernel k(grid, h);
    const std::size_t comps = rows.front().size();
    for (const auto& r : rows)
        if (r.size() != comps) throw ConfigError("every row needs the same number of components");

    NormReport rep;
    SequenceProcessSample sample;
    if (comps == 1) {
        std::vector<double> c;
        for (const auto& r : rows) c.push_back(r[0]);
        const ScalarStep phi(grid, c);
        rep = norm_chain_report(k, phi);
        rep.values["L_p"] = lp_time_norm(phi, o.p);
        sample.u.push_back(phi);
    } else {
        const StepFunction<Sequence> phi(grid, rows);
        rep = norm_chain_report(k, phi);
        rep.values["L_p"] = lp_time_norm(phi, o.p);
        for (std::size_t q = 0; q < comps; ++q) {
            std::vector<double> c;
            for (const auto& r : rows) c.push_back(r[q]);
            sample.u.emplace_back(grid, std::move(c));
        }
    }
    // A deterministic integrand has D u = 0, so only the first part of the norm remains.
    rep.values["L^{1,p}_H(l2)"] = std::pow(lHp_l2_power(sample, o.p, h), 1.0 / o.p);

    detail::ensure_dir(o.out);
    Manifest man("norms", argv, o.out);
    man.config() = {{"input", o.input}, {"H", o.hurst}, {"p", o.p}, {"T", o.horizon}, {"cells", rows.size()},
                    {"components", comps}, {"input_hash", detail::file_hash(o.input)}};
    Json j = {{"H", o.hurst}, {"p", o.p}, {"T", o.horizon}, {"cells", rows.size()}, {"components", comps},
              {"values", rep.values}, {"checks", rep.checks}};
    detail::write_json(man.output("norms.json"), j);
    man.write();
    for (const auto& [key, v] : rep.values) out << key << " = " << v << "\n";
    bool ok = true;
    for (const auto& [key, v] : rep.checks) ok = ok && v;
    return ok ? kExitOk : kExitFailed;
}

struct SkorohodOptions {
    std::string battery = "experiments/skorohod.battery";
    std::optional<double> hurst, horizon;
    std::optional<std::size_t> cells, n_mc;
    std::optional<std::uint64_t> seed;
    std::size_t samples = 1000;
    std::string out = ".";
};

inline int cmd_skorohod(const SkorohodOptions& o, const std::vector<std::string>& argv, std::ostream& out) {
    Params p(Ini{}, fs::current_path());
    p.set("battery", o.battery);
    p.mark_flag("battery");
    if (o.hurst) p.set("H", detail::concat(*o.hurst));
    if (o.horizon) p.set("T", detail::concat(*o.horizon));
    if (o.cells) p.set("m", detail::concat(*o.cells));
    if (o.n_mc) p.set("n_mc", detail::concat(*o.n_mc));
    if (o.seed) p.set("seed", detail::concat(*o.seed));
    Battery b = detail::load_battery_params(p, o.battery);
    const std::size_t n_mc = p.get<std::size_t>("n_mc", b.n_mc);
    const std::uint64_t seed = p.seed(b.seed);
    detail::ensure_dir(o.out);

    Manifest man("skorohod", argv, o.out);
    auto t0 = std::chrono::steady_clock::now();
    const ExperimentReport rep = skorohod_experiment(b, n_mc, seed);
    man.time("skorohod", detail::seconds_since(t0));

    // Per-replicate values of sum_k delta^k(u^k) for the first `samples` replicates.
    t0 = std::chrono::steady_clock::now();
    const TimeGrid grid(b.horizon, b.cells);
    const FbmGenerator gen(grid, HurstIndex(b.hurst));
    const std::size_t rows = std::min(o.samples, n_mc);
    const std::size_t K = std::max<std::size_t>(b.noises(), 1);
    std::vector<ScalarProcess> procs;
    for (const auto& m : b.members) procs.push_back(m.build(grid));
    std::vector<std::vector<double>> vals(rows, std::vector<double>(procs.size()));
    parallel_for(rows, [&](std::size_t r) {
        const FbmEnsemble e = gen.ensemble(K, seed, r);
        for (std::size_t i = 0; i < procs.size(); ++i) vals[r][i] = skorohod_sum(procs[i], e, b.horizon);
    });
    {
        std::ofstream os(man.output("skorohod.csv"));
        os.precision(17);
        os << "replicate";
        for (const auto& m : b.members) os << "," << m.name;
        os << "\n";
        for (std::size_t r = 0; r < rows; ++r) {
            os << r;
            for (double v : vals[r]) os << "," << v;
            os << "\n";
        }
    }
    man.time("samples", detail::seconds_since(t0));
    detail::write_json(man.output("skorohod.json"), to_json(rep));
    man.config() = p.resolved();
    man.config()["samples"] = rows;
    man.config()["battery_hash"] = detail::file_hash(p.resolved()["battery"].get<std::string>());
    man.seed(seed);
    man.write();
    out << "skorohod: " << (rep.pass ? "PASS" : "FAIL") << " max |mean|/SE = " << rep.lhs << "\n";
    return rep.pass ? kExitOk : kExitFailed;
}

struct SolveOptions {
    std::string spec;
    std::optional<double> hurst, horizon;
    std::optional<std::size_t> cells;
    std::optional<std::uint64_t> seed;
    std::uint64_t replicate = 0;
    std::string method = "cholesky";
    double p = 2.0;
    double n = 1.0;
    std::string test_function = "gaussian 1 0 1";
    std::string out = ".";
};

inline int cmd_solve(const SolveOptions& o, const std::vector<std::string>& argv, std::ostream& out) {
    ProblemDescription d = load_problem(o.spec);
    if (o.hurst) d.hurst = *o.hurst;
    if (o.horizon) d.horizon = *o.horizon;
    if (o.cells) d.cells = *o.cells;
    HurstIndex{d.hurst};
    if (o.p < 1.0) throw DomainError(detail::concat("p must be >= 1, got ", o.p));
    const ProblemSpec spec = d.build();
    const FbmMethod method = detail::parse_method(o.method);
    const std::uint64_t seed = o.seed ? *o.seed : detail::env_seed().value_or(1);
    detail::ensure_dir(o.out);

    Manifest man("solve", argv, o.out);
    const auto t0 = std::chrono::steady_clock::now();
    const FbmGenerator gen(spec.time, spec.hurst, method);
    const FbmEnsemble e = gen.ensemble(std::max<std::size_t>(spec.noises(), 1), seed, o.replicate);
    const Realization r = draw_realization(spec, seed, o.replicate);
    const SolutionPath sol = solve(spec, e, r);
    man.time("solve", detail::seconds_since(t0));

    const std::size_t m = spec.time.cells();
    const int width = static_cast<int>(std::to_string(m).size());
    {
        std::ofstream os(man.output("norms.csv"));
        os.precision(17);
        os << "t,L_p,H^n_p\n";
        for (std::size_t j = 0; j <= m; ++j) {
            std::ostringstream name;
            name << "u_" << std::setw(width) << std::setfill('0') << j << ".fld";
            write_field_binary(man.output(name.str()).string(), sol.u[j]);
            os << spec.time.node(j) << "," << lp_norm(sol.u[j], o.p) << "," << sobolev_norm(sol.u[j], o.n, o.p)
               << "\n";
        }
    }
    const GridField phi = parse_profile(spec.space, o.test_function);
    const double residual = weak_form_residual(sol, spec, phi, m, e, r);

    Json u0_on = Json::array(), f_on = Json::array();
    for (char c : r.u0_on) u0_on.push_back(c != 0);
    for (char c : r.f_on) f_on.push_back(c != 0);
    const Json summary = {{"spec", o.spec},
                          {"spec_hash", detail::file_hash(o.spec)},
                          {"H", d.hurst},
                          {"T", d.horizon},
                          {"m", m},
                          {"d", d.dim},
                          {"L", d.half_width},
                          {"M", d.points},
                          {"K", spec.noises()},
                          {"seed", seed},
                          {"replicate", o.replicate},
                          {"method", to_string(gen.method())},
                          {"fallback", gen.fell_back()},
                          {"u0_on", u0_on},
                          {"f_on", f_on},
                          {"p", o.p},
                          {"n", o.n},
                          {"test_function", o.test_function},
                          {"weak_residual_T", residual}};
    detail::write_json(man.output("solve.json"), summary);
    man.config() = summary;
    man.config().erase("weak_residual_T");
    man.seed(seed);
    man.set("fallback", gen.fell_back());
    man.write();
    out << "solved " << m << " steps on " << spec.space.size() << " points; weak residual at T = " << residual
        << "\n";
    return kExitOk;
}

struct VerifyOptions {
    std::string experiment;
    std::optional<std::string> config;
    std::string out = "report.json";
    bool plot_data = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_mc, cells;
    std::optional<double> hurst, p;
    std::optional<std::string> spec, battery;
};

inline int cmd_verify(const VerifyOptions& o, const std::vector<std::string>& argv, std::ostream& out) {
    std::vector<std::string> ids;
    if (o.experiment == "all") {
        ids = experiment_ids();
    } else {
        if (!experiment_table().count(o.experiment)) {
            std::string known;
            for (const auto& id : experiment_ids()) known += (known.empty() ? "" : ", ") + id;
            throw ConfigError(detail::concat("unknown experiment '", o.experiment, "' (known: ", known, ", all)"));
        }
        ids = {o.experiment};
    }
    Ini ini;
    fs::path base = fs::current_path();
    if (o.config) {
        ini = load_ini(*o.config);
        base = fs::path(*o.config).parent_path();
        for (const auto& [section, body] : ini)
            if (!experiment_table().count(section))
                throw ConfigError(detail::concat(*o.config, ": unknown section [", section, "]"));
    }

    // Resolve everything before running anything, so a bad key fails fast.
    std::vector<Params> params;
    for (const auto& id : ids) {
        Params p(ini.get_child(id, Ini{}), base);
        auto put = [&](const char* key, const auto& v) {
            if (v) {
                p.set(key, detail::concat(*v));
                p.mark_flag(key);
            }
        };
        put("seed", o.seed);
        put("n_mc", o.n_mc);
        put("m", o.cells);
        put("H", o.hurst);
        put("p", o.p);
        put("spec", o.spec);
        put("battery", o.battery);
        params.push_back(std::move(p));
    }

    const fs::path report_path(o.out);
    const fs::path dir = report_path.parent_path();
    detail::ensure_dir(dir);
    Manifest man("verify", argv, dir);
    if (o.config) man.set("config_file", *o.config);
    Json reports = Json::array();
    Json seeds = Json::object();
    bool all_pass = true;
    std::vector<ExperimentReport> done;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        ExperimentReport rep = experiment_table().at(ids[i])(params[i]);
        man.time(ids[i], detail::seconds_since(t0));
        man.config()[ids[i]] = params[i].resolved();
        if (params[i].resolved().contains("seed")) seeds[ids[i]] = params[i].resolved()["seed"];
        all_pass = all_pass && rep.pass;
        out << ids[i] << ": " << (rep.pass ? "PASS" : "FAIL") << " ratio=" << rep.ratio << "\n";
        reports.push_back(to_json(rep));
        done.push_back(std::move(rep));
    }
    man.seed(seeds);

    const std::string report_name = report_path.filename().string();
    detail::write_json(man.output(report_name), ids.size() == 1 ? reports[0] : reports);
    if (o.plot_data) {
        const std::string stem = report_path.stem().string();
        for (const auto& rep : done)
            for (const auto& s : rep.series) {
                std::ofstream os(man.output(detail::concat(stem, "_", rep.id, "_", s.name, ".csv")));
                os.precision(17);
                os << s.x_label << "," << s.y_label << "\n";
                for (std::size_t k = 0; k < s.x.size(); ++k) os << s.x[k] << "," << s.y[k] << "\n";
            }
    }
    man.write();
    return all_pass ? kExitOk : kExitFailed;
}

// ---------------------------------------------------------------------------

/// Parses argv and runs one command. Usage and config errors print a single
/// "error: ..." line to err and return 1.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Fractional heat equation toolkit: fBm sampling, H-norms, Skorohod integrals, solver, experiments",
                 "fracheat"};
    app.require_subcommand(1);
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--threads", threads, "worker cap for parallel loops (results do not depend on it)")
        ->check(CLI::PositiveNumber);

    GenerateOptions g;
    auto* gen = app.add_subcommand("generate", "sample fBm ensembles to CSV and FBM1 files");
    gen->add_option("--H", g.hurst, "Hurst index in (1/2,1)");
    gen->add_option("--T", g.horizon, "horizon");
    gen->add_option("--m", g.cells, "time cells");
    gen->add_option("--K", g.paths, "paths per replicate");
    gen->add_option("--n", g.replicates, "replicates");
    gen->add_option("--seed", g.seed, "seed (default FRACHEAT_SEED, then 1)");
    gen->add_option("--method", g.method, "cholesky or circulant");
    gen->add_option("--format", g.format, "csv, fbm1 or both");
    gen->add_option("--out", g.out, "output directory");

    NormsOptions n;
    auto* nrm = app.add_subcommand("norms", "H-norm chain of a step function read from CSV");
    nrm->add_option("--input", n.input, "CSV with one row per cell")->required();
    nrm->add_option("--H", n.hurst, "Hurst index in (1/2,1)");
    nrm->add_option("--p", n.p, "integrability exponent p >= 2");
    nrm->add_option("--T", n.horizon, "horizon");
    nrm->add_option("--out", n.out, "output directory");

    SkorohodOptions s;
    auto* sko = app.add_subcommand("skorohod", "Skorohod integrals of a battery of elementary integrands");
    sko->add_option("--battery", s.battery, "battery file");
    sko->add_option("--H", s.hurst, "overrides the battery's H");
    sko->add_option("--T", s.horizon, "overrides the battery's T");
    sko->add_option("--m", s.cells, "overrides the battery's m");
    sko->add_option("--n_mc", s.n_mc, "overrides the battery's n_mc");
    sko->add_option("--seed", s.seed, "overrides the battery's seed");
    sko->add_option("--samples", s.samples, "replicates written to skorohod.csv");
    sko->add_option("--out", s.out, "output directory");

    SolveOptions v;
    auto* sol = app.add_subcommand("solve", "solve the stochastic heat equation for one replicate");
    sol->add_option("--spec", v.spec, "problem spec file")->required();
    sol->add_option("--H", v.hurst, "overrides the spec's H");
    sol->add_option("--T", v.horizon, "overrides the spec's T");
    sol->add_option("--m", v.cells, "overrides the spec's m");
    sol->add_option("--seed", v.seed, "seed (default FRACHEAT_SEED, then 1)");
    sol->add_option("--replicate", v.replicate, "replicate index");
    sol->add_option("--method", v.method, "cholesky or circulant");
    sol->add_option("--p", v.p, "exponent of the per-node norms");
    sol->add_option("--n", v.n, "Sobolev index of the per-node H^n_p norm");
    sol->add_option("--test-function", v.test_function, "profile used for the weak-form residual");
    sol->add_option("--out", v.out, "output directory");

    VerifyOptions w;
    auto* ver = app.add_subcommand("verify", "run verification experiments");
    ver->add_option("--experiment", w.experiment, "experiment id or all")->required();
    ver->add_option("--config", w.config, "experiment config file");
    ver->add_option("--out", w.out, "report path");
    ver->add_flag("--emit-plot-data", w.plot_data, "write (x,y) CSVs next to the report");
    ver->add_option("--seed", w.seed, "overrides every experiment's seed");
    ver->add_option("--n_mc", w.n_mc, "overrides every experiment's sample count");
    ver->add_option("--m", w.cells, "overrides the time cells");
    ver->add_option("--H", w.hurst, "overrides the Hurst index");
    ver->add_option("--p", w.p, "overrides the exponent p");
    ver->add_option("--spec", w.spec, "overrides the problem spec file");
    ver->add_option("--battery", w.battery, "overrides the battery file");

    std::vector<std::string> args(argv, argv + argc);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }

    const unsigned saved = max_threads();
    max_threads() = threads;
    int code = kExitError;
    try {
        if (gen->parsed()) code = cmd_generate(g, args, out);
        else if (nrm->parsed()) code = cmd_norms(n, args, out);
        else if (sko->parsed()) code = cmd_skorohod(s, args, out);
        else if (sol->parsed()) code = cmd_solve(v, args, out);
        else if (ver->parsed()) code = cmd_verify(w, args, out);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error: " << msg << "\n";
        code = kExitError;
    }
    max_threads() = saved;
    return code;
}

}  // namespace fracheat::cli
