// Acceptance run: one PASS/FAIL line per criterion. Experiment settings come from
// experiments/verify.ini; every criterion is evaluated twice and the two JSON dumps
// must match byte for byte (criterion 10).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "fracheat/cli.hpp"
#include "oracles.hpp"

using namespace fracheat;
namespace fs = std::filesystem;

namespace {

const fs::path kExperiments = fs::path(FRACHEAT_SOURCE_DIR) / "experiments";

struct Outcome {
    bool pass = false;
    std::string summary;
    Json dump;  // everything that must reproduce exactly
};

const Ini& reference_config() {
    static const Ini ini = load_ini((kExperiments / "verify.ini").string());
    return ini;
}

ExperimentReport run_experiment(const std::string& id, const std::vector<std::pair<std::string, std::string>>& set = {}) {
    cli::Params p(reference_config().get_child(id, Ini{}), kExperiments);
    for (const auto& [k, v] : set) p.set(k, v);
    return cli::experiment_table().at(id)(p);
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

Outcome from_reports(const std::vector<ExperimentReport>& reps, std::string summary) {
    Outcome o{true, std::move(summary), Json::array()};
    for (const auto& r : reps) {
        o.pass = o.pass && r.pass;
        o.dump.push_back(to_json(r));
    }
    return o;
}

Outcome fbm_law() {
    const auto r = run_experiment("fbm_law");
    return from_reports({r}, "max |z| = " + fmt(r.lhs) + " over H in {0.55, 0.75, 0.9}, m=16, 1e5 paths");
}

/// Closed forms against the tanh-sinh quadrature oracle on 100 random step functions.
Outcome kernel_closed_forms() {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> hdist(0.52, 0.98), tdist(0.5, 2.0);
    std::uniform_int_distribution<int> mdist(1, 12);
    std::normal_distribution<double> z;
    double worst = 0.0;
    Json errors = Json::array();
    for (int i = 0; i < 100; ++i) {
        const double h = hdist(rng), horizon = tdist(rng);
        const std::size_t m = static_cast<std::size_t>(mdist(rng));
        const TimeGrid g(horizon, m);
        const FractionalKernel k(g, HurstIndex(h));
        std::vector<double> a(m), b(m);
        for (auto& x : a) x = z(rng);
        for (auto& x : b) x = z(rng);
        const auto gram = oracle::kernel_gram(horizon, m, h);
        const ScalarStep pa(g, a), pb(g, b);
        const double qaa = oracle::quadratic_form(gram, a, a), qbb = oracle::quadratic_form(gram, b, b);
        const double qab = oracle::quadratic_form(gram, a, b);
        std::vector<double> abs_a(a);
        for (auto& x : abs_a) x = std::abs(x);
        const double qabs = std::sqrt(oracle::quadratic_form(gram, abs_a, abs_a));
        const double e_norm = std::abs(h_inner(k, pa, pa) - qaa) / qaa;
        // The cross term can vanish; scale it by the norms it is bounded by.
        const double e_cross = std::abs(h_inner(k, pa, pb) - qab) / std::sqrt(qaa * qbb);
        const double e_abs = std::abs(abs_h_norm(k, pa) - qabs) / qabs;
        const double e = std::max({e_norm, e_cross, e_abs});
        worst = std::max(worst, e);
        errors.push_back(e);
    }
    return {worst <= 1e-6, "max relative error " + fmt(worst) + " on 100 random step functions", errors};
}

Outcome skorohod() {
    const auto r = run_experiment("skorohod");
    return from_reports({r}, "pathwise error " + fmt(r.details["pathwise_relative_error"].get<double>()) +
                                 ", max |mean|/SE " + fmt(r.lhs) + " on 10 members at 1e5 samples");
}

Outcome duality() {
    const auto r = run_experiment("duality");
    return from_reports({r}, "max z " + fmt(r.lhs) + " over duality and the L2 identity, inequality form on every member");
}

Outcome spectral() {
    const auto laws = run_experiment("spectral_laws");
    const auto con = run_experiment("contraction");
    return from_reports({laws, con}, "max law error " + fmt(laws.lhs) + ", max contraction ratio " + fmt(con.ratio));
}

Outcome solver() {
    const auto heat = run_experiment("heat_reduction");
    const auto weak = run_experiment("weak_residual");
    return from_reports({heat, weak}, "g=0 error " + fmt(heat.lhs) + ", weak-residual order " +
                                          fmt(weak.details["order"].get<double>()) + " over m in {64,128,256}");
}

Outcome maximal() {
    std::vector<ExperimentReport> reps;
    std::string s;
    for (const char* p : {"2", "4"})
        for (const char* h : {"0.6", "0.75"}) {
            reps.push_back(run_experiment("maximal_ratio", {{"p", p}, {"H", h}}));
            s += std::string(s.empty() ? "" : ", ") + "(p,H)=(" + p + "," + h + ") max ratio " + fmt(reps.back().ratio);
        }
    return from_reports(reps, s);
}

Outcome hoelder() {
    const auto r = run_experiment("hoelder");
    return from_reports({r}, "slope " + fmt(r.details["slope"].get<double>()) + " (needs >= 0.85), R^2 " +
                                 fmt(r.details["r2"].get<double>()) + " at 1e4 replicates");
}

Outcome littlewood_paley() {
    const auto r = run_experiment("littlewood_paley");
    return from_reports({r}, "slice identity error " + fmt(r.details["slice_identity"]["relative_error"].get<double>()) +
                                 ", p=4 ratio " + fmt(r.ratio) + " vs refined " +
                                 fmt(r.details["ratio_refined"].get<double>()));
}

struct Criterion {
    int number;
    std::string name;
    double budget_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    max_threads() = std::max(1u, std::thread::hardware_concurrency());
    const std::vector<Criterion> criteria{
        {1, "fBm law", 90.0, fbm_law},
        {2, "kernel closed forms", 10.0, kernel_closed_forms},
        {3, "Skorohod exactness", 60.0, skorohod},
        {4, "duality and L2 identity", 120.0, duality},
        {5, "spectral laws", 10.0, spectral},
        {6, "solver reduction and refinement", 120.0, solver},
        {7, "maximal inequality", 300.0, maximal},
        {8, "Hoelder embedding", 300.0, hoelder},
        {9, "Littlewood-Paley", 60.0, littlewood_paley},
    };
    bool all = true, reproducible = true;
    std::vector<std::string> differing;
    for (const auto& c : criteria) {
        Outcome first, second;
        double seconds = 0.0;
        try {
            const auto t0 = std::chrono::steady_clock::now();
            first = c.run();
            seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            second = c.run();
        } catch (const std::exception& e) {
            first = {false, std::string("error: ") + e.what(), Json()};
            second = first;
        }
        const bool in_budget = seconds <= c.budget_seconds;
        const bool ok = first.pass && in_budget;
        all = all && ok;
        if (first.dump.dump() != second.dump.dump() || first.dump.is_null()) {
            reproducible = false;
            differing.push_back(std::to_string(c.number));
        }
        std::cout << (ok ? "PASS" : "FAIL") << " criterion " << c.number << " (" << c.name << "): " << first.summary
                  << "; " << fmt(seconds) << " s (budget " << fmt(c.budget_seconds) << " s)" << std::endl;
    }
    std::string which;
    for (const auto& d : differing) which += " " + d;
    std::cout << (reproducible ? "PASS" : "FAIL") << " criterion 10 (reproducibility): "
              << (reproducible ? "criteria 1-9 re-run byte-identically" : "outputs differ for criteria" + which)
              << std::endl;
    all = all && reproducible;
    return all ? 0 : 1;
}
