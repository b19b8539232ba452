#pragma once

// Declarative experiment inputs. Files are INI text (key = value, [sections]).
// Batteries and problem specs are stored in continuous time and built on a
// requested grid, so the same file serves every refinement level.
//
// Grammar of the compound values:
//   functional  "2*x0^2*x1 + x1 - 0.5"  (sum of monomials in x0, x1, ...)
//   args        "0:0.25 0.25:0.5*2"      (indicators c 1_(a,b], '-' for none)
//   profile     "gaussian amp center width" | "cosine k amp" | "constant c"
//   term        "k | a:b[*c] | functional | args [| damped]"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fracheat/core.hpp"
#include "fracheat/kernel.hpp"
#include "fracheat/malliavin.hpp"
#include "fracheat/solver.hpp"
#include "fracheat/spectral.hpp"

namespace fracheat {

using Ini = boost::property_tree::ptree;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline Ini load_ini(const std::string& file) {
    if (!std::filesystem::exists(file)) throw ConfigError(detail::concat("cannot read file '", file, "'"));
    Ini ini;
    try {
        boost::property_tree::read_ini(file, ini);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(detail::concat("malformed config '", file, "': ", e.message(), " (line ", e.line(), ")"));
    }
    return ini;
}

namespace detail {

inline std::string trim(std::string s) {
    auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), sp));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), sp).base(), s.end());
    return s;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

inline double to_double(const std::string& s, const std::string& what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != s.size()) throw ConfigError(concat("expected a number for ", what, ", got '", s, "'"));
    return v;
}

}  // namespace detail

template <typename T>
T ini_get(const Ini& section, const std::string& key, T fallback) {
    const auto v = section.get_optional<std::string>(key);
    if (!v) return fallback;
    if constexpr (std::is_same_v<T, std::string>) {
        return detail::trim(*v);
    } else {
        const double d = detail::to_double(detail::trim(*v), key);
        if constexpr (std::is_integral_v<T>) {
            if (d < 0.0 || d != std::floor(d)) throw ConfigError(detail::concat(key, " must be a nonnegative integer"));
        }
        return static_cast<T>(d);
    }
}

template <typename T>
T ini_require(const Ini& section, const std::string& key) {
    if (!section.get_optional<std::string>(key)) throw ConfigError(detail::concat("missing key '", key, "'"));
    return ini_get<T>(section, key, T{});
}

/// Parses "c*x0^2*x1 + x1 - 0.5" into a functional of the given arity.
inline SmoothFunctional parse_functional(const std::string& text, std::size_t arity,
                                         FunctionalFamily family = FunctionalFamily::Polynomial) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    if (s.empty()) throw ConfigError("empty functional");
    // Split into signed monomials, keeping exponent-free '-' as separators.
    std::vector<std::string> parts;
    std::string cur;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        const bool sign = (c == '+' || c == '-') && i > 0 && s[i - 1] != 'e' && s[i - 1] != 'E' && s[i - 1] != '^';
        if (sign) {
            parts.push_back(cur);
            cur.clear();
        }
        cur += c;
    }
    parts.push_back(cur);
    std::vector<Monomial> terms;
    for (auto p : parts) {
        if (p.empty() || p == "+") continue;
        double coef = 1.0;
        if (p[0] == '+' || p[0] == '-') {
            if (p[0] == '-') coef = -1.0;
            p.erase(0, 1);
        }
        Monomial m{coef, std::vector<int>(arity, 0)};
        for (const auto& f : detail::split(p, '*')) {
            if (f.empty()) throw ConfigError(detail::concat("malformed monomial '", p, "' in '", text, "'"));
            if (f[0] == 'x') {
                const auto hat = f.find('^');
                const std::string idx = f.substr(1, hat == std::string::npos ? std::string::npos : hat - 1);
                const auto i = static_cast<std::size_t>(detail::to_double(idx, "variable index"));
                if (i >= arity)
                    throw ConfigError(detail::concat("functional uses x", i, " but only ", arity, " arguments are given"));
                const int pw = hat == std::string::npos
                                   ? 1
                                   : static_cast<int>(detail::to_double(f.substr(hat + 1), "exponent"));
                if (pw < 0) throw ConfigError("exponents must be nonnegative");
                m.powers[i] += pw;
            } else {
                m.coef *= detail::to_double(f, "coefficient");
            }
        }
        terms.push_back(std::move(m));
    }
    return SmoothFunctional(arity, std::move(terms), family);
}

/// c 1_(a,b] in continuous time.
struct IntervalSpec {
    double a = 0.0, b = 0.0, c = 1.0;
};

inline IntervalSpec parse_interval(const std::string& text) {
    std::string s = detail::trim(text);
    IntervalSpec iv;
    if (const auto star = s.find('*'); star != std::string::npos) {
        iv.c = detail::to_double(detail::trim(s.substr(star + 1)), "interval coefficient");
        s = detail::trim(s.substr(0, star));
    }
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ConfigError(detail::concat("expected a:b for an interval, got '", text, "'"));
    iv.a = detail::to_double(detail::trim(s.substr(0, colon)), "interval start");
    iv.b = detail::to_double(detail::trim(s.substr(colon + 1)), "interval end");
    if (!(iv.a < iv.b)) throw ConfigError(detail::concat("empty interval '", text, "'"));
    return iv;
}

inline std::vector<IntervalSpec> parse_intervals(const std::string& text) {
    std::vector<IntervalSpec> out;
    const std::string s = detail::trim(text);
    if (s.empty() || s == "-") return out;
    std::stringstream ss(s);
    std::string tok;
    while (ss >> tok) out.push_back(parse_interval(tok));
    return out;
}

/// F^k c 1_(a,b] with F = f(beta^k(args)), stored in continuous time.
struct TermSpec {
    std::size_t noise = 0;
    IntervalSpec on;
    std::string functional = "1";
    std::vector<IntervalSpec> args;
    FunctionalFamily family = FunctionalFamily::Polynomial;

    CylindricalRV factor(const TimeGrid& grid) const {
        std::vector<ScalarStep> steps;
        for (const auto& a : args) steps.push_back(indicator(grid, a.a, a.b, a.c));
        return CylindricalRV(parse_functional(functional, args.size(), family), std::move(steps), noise);
    }
};

inline TermSpec parse_term(const std::string& text) {
    const auto f = detail::split(text, '|');
    if (f.size() < 3 || f.size() > 5)
        throw ConfigError(detail::concat("term needs 'k | a:b | functional [| args] [| damped]', got '", text, "'"));
    TermSpec t;
    t.noise = static_cast<std::size_t>(detail::to_double(f[0], "noise index"));
    t.on = parse_interval(f[1]);
    t.functional = f[2];
    if (f.size() > 3) t.args = parse_intervals(f[3]);
    if (f.size() > 4) {
        if (f[4] == "damped")
            t.family = FunctionalFamily::DampedPolynomial;
        else if (f[4] != "polynomial")
            throw ConfigError(detail::concat("unknown functional family '", f[4], "'"));
    }
    parse_functional(t.functional, t.args.size(), t.family);
    return t;
}

/// "gaussian amp center width" | "cosine k amp" | "constant c".
inline GridField parse_profile(const SpatialGrid& g, const std::string& text) {
    std::stringstream ss(text);
    std::string kind;
    ss >> kind;
    std::vector<double> v;
    std::string tok;
    while (ss >> tok) v.push_back(detail::to_double(tok, "profile parameter"));
    if (kind == "gaussian" && v.size() == 3) return GridField::gaussian(g, v[0], v[1], v[2]);
    if (kind == "cosine" && v.size() == 2) return GridField::cosine_mode(g, static_cast<long>(v[0]), v[1]);
    if (kind == "constant" && v.size() == 1) return GridField::constant(g, v[0]);
    throw ConfigError(detail::concat("unknown profile '", text, "'"));
}

// ---------------------------------------------------------------------------
// Batteries of elementary integrands over the sequence (beta^k)_k.

struct BatteryMember {
    std::string name;
    std::vector<TermSpec> terms;
    std::optional<TermSpec> dual;  // F for duality checks; its interval is unused

    std::size_t noises() const {
        std::size_t k = 0;
        for (const auto& t : terms) k = std::max(k, t.noise + 1);
        return k;
    }
    ScalarProcess build(const TimeGrid& grid) const {
        ScalarProcess g{grid, {}};
        for (const auto& t : terms) g.add(t.noise, t.factor(grid), t.on.a, t.on.b, t.on.c);
        return g;
    }
    /// The single-noise integrand on noise 0 (used by the one-noise identity checks).
    ScalarIntegrand integrand(const TimeGrid& grid) const { return component(build(grid), 0); }
};

struct Battery {
    std::string name;
    double hurst = 0.75;
    double horizon = 1.0;
    std::size_t cells = 32;
    double p = 2.0;
    std::size_t n_mc = 10000;
    std::uint64_t seed = 1;
    std::vector<BatteryMember> members;

    std::size_t noises() const {
        std::size_t k = 0;
        for (const auto& m : members) k = std::max(k, m.noises());
        return k;
    }
};

/// [battery] (optional) holds the defaults; every other section is a member with keys
/// term1, term2, ... and an optional dual = "functional | args [| damped]".
inline Battery load_battery(const std::string& file) {
    const Ini ini = load_ini(file);
    Battery b;
    // An empty section is dropped by the INI reader, so a missing [battery] means all defaults.
    const Ini head_or_empty = ini.get_child("battery", Ini{});
    const Ini* head = &head_or_empty;
    b.name = ini_get<std::string>(*head, "name", std::filesystem::path(file).stem().string());
    b.hurst = ini_get<double>(*head, "H", b.hurst);
    b.horizon = ini_get<double>(*head, "T", b.horizon);
    b.cells = ini_get<std::size_t>(*head, "m", b.cells);
    b.p = ini_get<double>(*head, "p", b.p);
    b.n_mc = ini_get<std::size_t>(*head, "n_mc", b.n_mc);
    b.seed = ini_get<std::uint64_t>(*head, "seed", b.seed);
    for (const auto& [section, body] : ini) {
        if (section == "battery") continue;
        BatteryMember m;
        m.name = section;
        for (const auto& [key, value] : body) {
            const std::string v = value.get_value<std::string>();
            try {
                if (key.rfind("term", 0) == 0)
                    m.terms.push_back(parse_term(v));
                else if (key == "dual")
                    m.dual = parse_term("0 | 0:1 | " + v);
                else
                    throw ConfigError(detail::concat("unknown key '", key, "'"));
            } catch (const std::exception& e) {
                throw ConfigError(detail::concat(file, " [", section, "] ", key, ": ", e.what()));
            }
        }
        b.members.push_back(std::move(m));
    }
    if (b.members.empty()) throw ConfigError(detail::concat("battery file '", file, "' has no members"));
    return b;
}

// ---------------------------------------------------------------------------
// Problem specs for the solver.

struct ProblemDescription {
    double horizon = 1.0;
    std::size_t cells = 64;
    int dim = 1;
    double half_width = 8.0;
    std::size_t points = 128;
    double hurst = 0.75;
    struct Initial {
        std::string profile;
        double probability = 1.0;
    };
    struct Forcing {
        IntervalSpec on;
        std::string profile;
        double probability = 1.0;
    };
    struct Noise {
        TermSpec term;
        std::string profile;
    };
    std::vector<Initial> u0;
    std::vector<Forcing> f;
    std::vector<Noise> g;

    SpatialGrid space() const { return SpatialGrid(dim, half_width, points); }

    /// The spec on m time cells (m = 0 keeps the file's value).
    ProblemSpec build(std::size_t m = 0) const {
        const TimeGrid time(horizon, m == 0 ? cells : m);
        const SpatialGrid sp = space();
        ProblemSpec s{time, sp, HurstIndex(hurst), {}, {}, FieldProcess{time, {}}};
        for (const auto& t : u0) s.u0.push_back({parse_profile(sp, t.profile), t.probability});
        for (const auto& t : f)
            s.f.push_back({time.node_index(t.on.a), time.node_index(t.on.b), t.on.c * parse_profile(sp, t.profile),
                           t.probability});
        for (const auto& t : g)
            s.g.add(t.term.noise, t.term.factor(time), t.term.on.a, t.term.on.b,
                    t.term.on.c * parse_profile(sp, t.profile));
        s.validate();
        return s;
    }
};

/// [grid] T m d L M H; sections u0*, f*, g* hold one term each:
///   u0: profile, probability      f: interval, profile, probability
///   g:  term (k | a:b | functional | args), profile
inline ProblemDescription load_problem(const std::string& file) {
    const Ini ini = load_ini(file);
    ProblemDescription d;
    // As for batteries, a missing [grid] means all defaults.
    const Ini grid_or_empty = ini.get_child("grid", Ini{});
    const Ini* grid = &grid_or_empty;
    try {
        d.horizon = ini_get<double>(*grid, "T", d.horizon);
        d.cells = ini_get<std::size_t>(*grid, "m", d.cells);
        d.dim = ini_get<int>(*grid, "d", d.dim);
        d.half_width = ini_get<double>(*grid, "L", d.half_width);
        d.points = ini_get<std::size_t>(*grid, "M", d.points);
        d.hurst = ini_get<double>(*grid, "H", d.hurst);
        for (const auto& [section, body] : ini) {
            if (section == "grid") continue;
            if (section.rfind("u0", 0) == 0) {
                d.u0.push_back({ini_require<std::string>(body, "profile"), ini_get<double>(body, "probability", 1.0)});
            } else if (section.rfind("f", 0) == 0) {
                d.f.push_back({parse_interval(ini_require<std::string>(body, "interval")),
                               ini_require<std::string>(body, "profile"), ini_get<double>(body, "probability", 1.0)});
            } else if (section.rfind("g", 0) == 0) {
                d.g.push_back({parse_term(ini_require<std::string>(body, "term")),
                               ini_require<std::string>(body, "profile")});
            } else {
                throw ConfigError(detail::concat("unknown section [", section, "]"));
            }
        }
        d.build();
    } catch (const ConfigError& e) {
        throw ConfigError(detail::concat(file, ": ", e.what()));
    } catch (const std::exception& e) {
        throw ConfigError(detail::concat(file, ": ", e.what()));
    }
    return d;
}

}  // namespace fracheat
