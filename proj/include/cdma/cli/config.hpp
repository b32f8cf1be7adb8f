#pragma once

// Configuration for the command-line front end.
//
// A config file is a list of `key = value` lines; `#` starts a comment.
// Values that parse as JSON are taken as JSON, anything else as a bare
// string. Command-line flags override file values.

#include "cdma/channel.hpp"
#include "cdma/errors.hpp"
#include "cdma/montecarlo.hpp"
#include "cdma/numeric/quadrature.hpp"
#include "cdma/spectra.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cdma::cli {

/// Malformed configuration or flag value (exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, nlohmann::json>;

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// JSON if the text parses as JSON, else the text itself as a string.
inline nlohmann::json parse_value(const std::string& text) {
    auto v = nlohmann::json::parse(text, nullptr, false);
    if (v.is_discarded()) return nlohmann::json(text);
    return v;
}

inline KeyValues parse_key_values(std::istream& in, const std::string& origin) {
    KeyValues kv;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(number) + ": expected `key = value`");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError(origin + ":" + std::to_string(number) + ": empty key or value");
        }
        kv[key] = parse_value(value);
    }
    return kv;
}

inline KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    return parse_key_values(in, path);
}

/// Textual form of a value, for keys whose syntax is not JSON (grids, priors).
inline std::string as_text(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

inline double as_number(const nlohmann::json& v, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto parsed = parse_value(v.get<std::string>());
        if (parsed.is_number()) return parsed.get<double>();
    }
    throw ConfigError(key + ": expected a number, got " + v.dump());
}

inline long long as_integer(const nlohmann::json& v, const std::string& key) {
    const double d = as_number(v, key);
    if (d != std::floor(d) || std::abs(d) > 9e15) throw ConfigError(key + ": expected an integer, got " + v.dump());
    return static_cast<long long>(d);
}

// ---------------------------------------------------------------- grids

/// `lo:hi:n`; strictly monotone (or a single point with lo = hi, n = 1).
struct GridSpec {
    double lo;
    double hi;
    std::size_t n;
};

inline GridSpec parse_grid(const std::string& text, const std::string& key) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(trim(item));
    if (parts.size() != 3) throw ConfigError(key + ": expected lo:hi:n, got '" + text + "'");
    GridSpec g{};
    try {
        std::size_t used = 0;
        g.lo = std::stod(parts[0], &used);
        if (used != parts[0].size()) throw std::invalid_argument("lo");
        g.hi = std::stod(parts[1], &used);
        if (used != parts[1].size()) throw std::invalid_argument("hi");
        const long long n = std::stoll(parts[2], &used);
        if (used != parts[2].size() || n < 1) throw std::invalid_argument("n");
        g.n = static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw ConfigError(key + ": malformed grid '" + text + "'");
    }
    if (!std::isfinite(g.lo) || !std::isfinite(g.hi)) throw ConfigError(key + ": grid bounds must be finite");
    if (g.n == 1 && g.lo != g.hi) throw ConfigError(key + ": a single-point grid needs lo = hi");
    if (g.n > 1 && g.lo == g.hi) throw ConfigError(key + ": grid is not strictly monotone");
    return g;
}

/// Noise variances: log-spaced, all positive.
inline std::vector<double> sigma2_values(const GridSpec& g) {
    if (!(g.lo > 0.0 && g.hi > 0.0)) throw ConfigError("sigma2 grid: values must be positive");
    return numeric::log_spaced(g.lo, g.hi, g.n);
}

/// Eb/N0 in dB: linear in dB.
inline std::vector<double> ebn0_values(const GridSpec& g) { return numeric::linear_spaced(g.lo, g.hi, g.n); }

/// Noise variance for unit-energy binary inputs at a given Eb/N0.
inline double sigma2_from_ebn0_db(double db) { return 1.0 / (2.0 * std::pow(10.0, db / 10.0)); }

/// R-transform arguments: log-spaced, all negative.
inline std::vector<double> z_values(const GridSpec& g) {
    if (!(g.lo < 0.0 && g.hi < 0.0)) throw ConfigError("z grid: values must be negative");
    return numeric::log_spaced(g.lo, g.hi, g.n);
}

// ---------------------------------------------------------------- priors

/// `gaussian`, `binary` or `discrete:[[x1,p1],...]`; discrete alphabets are
/// normalized to unit mass, zero mean and unit variance.
inline channel::InputPrior parse_prior(const std::string& text) {
    const std::string t = trim(text);
    if (t == "gaussian") return channel::InputPrior::gaussian();
    if (t == "binary") return channel::InputPrior::binary();
    const std::string tag = "discrete:";
    if (t.rfind(tag, 0) != 0) throw ConfigError("prior: expected gaussian, binary or discrete:[[x,p],...]");
    const auto body = nlohmann::json::parse(t.substr(tag.size()), nullptr, false);
    if (body.is_discarded() || !body.is_array() || body.empty()) {
        throw ConfigError("prior: discrete alphabet must be a JSON list of [x, p] pairs");
    }
    std::vector<channel::Symbol> alphabet;
    for (const auto& item : body) {
        if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number()) {
            throw ConfigError("prior: each symbol must be [x, p]");
        }
        alphabet.push_back({item[0].get<double>(), item[1].get<double>()});
    }
    try {
        return channel::InputPrior::normalized_discrete(std::move(alphabet));
    } catch (const std::exception& e) {
        throw ConfigError(std::string("prior: ") + e.what());
    }
}

// ---------------------------------------------------------------- spectra

/// A named spectrum: `mp`, `wbe`, or a law read from a spectrum file.
struct SpectrumSpec {
    std::string name;
    std::optional<spectra::EigenDistribution> fixed; ///< set for file-based laws

    /// The law at load beta (file-based laws carry their own load).
    [[nodiscard]] spectra::EigenDistribution law(double beta) const {
        if (fixed) return *fixed;
        try {
            if (name == "mp") return spectra::make_mp_law(beta);
            return spectra::make_wbe_law(beta);
        } catch (const DomainError& e) {
            throw ConfigError(std::string("spectrum ") + name + ": " + e.what());
        }
    }
};

/// Spectrum file: keys `beta`, `kind` (mp | wbe | discrete) and, for
/// discrete, `pi_atoms = [[lambda, weight], ...]`.
inline spectra::EigenDistribution spectrum_from_key_values(const KeyValues& kv, const std::string& origin) {
    auto need = [&](const char* key) -> const nlohmann::json& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError(origin + ": missing key '" + key + "'");
        return it->second;
    };
    const double beta = as_number(need("beta"), "beta");
    const std::string kind = as_text(need("kind"));
    try {
        if (kind == "mp") return spectra::make_mp_law(beta);
        if (kind == "wbe") return spectra::make_wbe_law(beta);
        if (kind != "discrete") throw ConfigError(origin + ": kind must be mp, wbe or discrete");
        const auto& atoms = need("pi_atoms");
        if (!atoms.is_array() || atoms.empty()) throw ConfigError(origin + ": pi_atoms must be a non-empty list");
        std::vector<spectra::Atom> pi;
        for (const auto& a : atoms) {
            if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
                throw ConfigError(origin + ": each pi atom must be [lambda, weight]");
            }
            pi.push_back({a[0].get<double>(), a[1].get<double>()});
        }
        return spectra::make_discrete_law(std::move(pi), beta);
    } catch (const ConstraintViolation& e) {
        throw ConfigError(origin + ": " + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

inline spectra::EigenDistribution read_spectrum_file(const std::string& path) {
    return spectrum_from_key_values(read_key_values(path), path);
}

/// Comma-separated list of `mp`, `wbe` or spectrum-file paths.
inline std::vector<SpectrumSpec> parse_spectra(const std::string& text) {
    std::vector<SpectrumSpec> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (item.empty()) continue;
        if (item == "mp" || item == "wbe") {
            out.push_back({item, std::nullopt});
        } else {
            out.push_back({std::filesystem::path(item).stem().string(), read_spectrum_file(item)});
        }
    }
    if (out.empty()) throw ConfigError("spectrum: no spectra given");
    return out;
}

inline std::vector<montecarlo::SpreadingKind> parse_kinds(const std::string& text) {
    std::vector<montecarlo::SpreadingKind> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(montecarlo::parse_spreading_kind(item));
        } catch (const DomainError& e) {
            throw ConfigError(std::string("kinds: ") + e.what());
        }
    }
    if (out.empty()) throw ConfigError("kinds: no spreading kind given");
    return out;
}

// ---------------------------------------------------------------- config

enum class Units { nats, bits };

struct SweepConfig {
    channel::InputPrior prior = channel::InputPrior::binary();
    std::vector<SpectrumSpec> spectra{{"mp", std::nullopt}, {"wbe", std::nullopt}};
    double beta = 1.5;
    std::optional<GridSpec> sigma2_grid;
    std::optional<GridSpec> ebn0_grid;
    Units units = Units::nats;
    std::uint64_t seed = 1;
    std::string out = "-";

    // verify-optimality
    std::size_t candidates = 100;
    int atoms = 0; ///< pi-atoms per candidate; 0 cycles through 2..8
    std::optional<std::string> candidate_file;

    // simulate
    int K = 12;
    int L = 8;
    std::vector<montecarlo::SpreadingKind> kinds{montecarlo::SpreadingKind::iid, montecarlo::SpreadingKind::wbe};
    std::size_t samples = 100000;
    std::size_t matrices = 1;

    // transform
    GridSpec z_grid{-5.0, -1e-3, 200};

    [[nodiscard]] double unit_scale() const { return units == Units::bits ? 1.0 / std::log(2.0) : 1.0; }

    /// The noise axis: (sigma2, optional Eb/N0 in dB) pairs.
    [[nodiscard]] std::vector<std::pair<double, std::optional<double>>> noise_axis(const GridSpec& fallback) const {
        if (sigma2_grid && ebn0_grid) throw ConfigError("give either a sigma2 grid or an Eb/N0 grid, not both");
        std::vector<std::pair<double, std::optional<double>>> axis;
        if (ebn0_grid) {
            for (double db : ebn0_values(*ebn0_grid)) axis.emplace_back(sigma2_from_ebn0_db(db), db);
        } else {
            for (double s2 : sigma2_values(sigma2_grid ? *sigma2_grid : fallback)) axis.emplace_back(s2, std::nullopt);
        }
        return axis;
    }
};

inline const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys{"prior",      "spectrum", "beta",  "sigma2_grid", "ebn0_grid",
                                               "units",      "seed",     "out",   "candidates",  "atoms",
                                               "candidate",  "K",        "L",     "kinds",       "samples",
                                               "matrices",   "z_grid"};
    return keys;
}

/// Applies key-value settings (from a file or from flags) on top of `cfg`.
inline void apply_settings(SweepConfig& cfg, const KeyValues& kv) {
    for (const auto& [key, value] : kv) {
        if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end()) {
            throw ConfigError("unknown key '" + key + "'");
        }
        if (key == "prior") {
            cfg.prior = parse_prior(as_text(value));
        } else if (key == "spectrum") {
            cfg.spectra = parse_spectra(as_text(value));
        } else if (key == "beta") {
            cfg.beta = as_number(value, key);
            if (!(cfg.beta > 0.0)) throw ConfigError("beta must be positive");
        } else if (key == "sigma2_grid") {
            cfg.sigma2_grid = parse_grid(as_text(value), key);
        } else if (key == "ebn0_grid") {
            cfg.ebn0_grid = parse_grid(as_text(value), key);
        } else if (key == "units") {
            const auto u = as_text(value);
            if (u == "nats") {
                cfg.units = Units::nats;
            } else if (u == "bits") {
                cfg.units = Units::bits;
            } else {
                throw ConfigError("units must be nats or bits");
            }
        } else if (key == "seed") {
            const auto s = as_integer(value, key);
            if (s < 0) throw ConfigError("seed must be non-negative");
            cfg.seed = static_cast<std::uint64_t>(s);
        } else if (key == "out") {
            cfg.out = as_text(value);
        } else if (key == "candidates") {
            const auto n = as_integer(value, key);
            if (n < 0) throw ConfigError("candidates must be >= 0");
            cfg.candidates = static_cast<std::size_t>(n);
        } else if (key == "atoms") {
            const auto n = as_integer(value, key);
            if (n != 0 && n < 2) throw ConfigError("atoms must be 0 (varied) or >= 2");
            cfg.atoms = static_cast<int>(n);
        } else if (key == "candidate") {
            cfg.candidate_file = as_text(value);
        } else if (key == "K" || key == "L") {
            const auto n = as_integer(value, key);
            if (n < 1) throw ConfigError(key + " must be >= 1");
            (key == "K" ? cfg.K : cfg.L) = static_cast<int>(n);
        } else if (key == "kinds") {
            cfg.kinds = parse_kinds(as_text(value));
        } else if (key == "samples") {
            const auto n = as_integer(value, key);
            if (n < 1) throw ConfigError("samples must be positive");
            cfg.samples = static_cast<std::size_t>(n);
        } else if (key == "matrices") {
            const auto n = as_integer(value, key);
            if (n < 1) throw ConfigError("matrices must be positive");
            cfg.matrices = static_cast<std::size_t>(n);
        } else if (key == "z_grid") {
            cfg.z_grid = parse_grid(as_text(value), key);
            (void)z_values(cfg.z_grid);
        }
    }
}

/// File settings first, then flag settings on top.
inline SweepConfig load_config(const std::optional<std::string>& path, const KeyValues& flags) {
    SweepConfig cfg;
    if (path) apply_settings(cfg, read_key_values(*path));
    apply_settings(cfg, flags);
    return cfg;
}

} // namespace cdma::cli
