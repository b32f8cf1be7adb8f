#pragma once

// The four CLI commands. Each computes its full output before writing
// anything, so a failed run never leaves a partial CSV behind.

#include "cdma/cli/config.hpp"
#include "cdma/montecarlo.hpp"
#include "cdma/optimality.hpp"
#include "cdma/parallel.hpp"
#include "cdma/replica.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cdma::cli {

enum ExitCode : int { exit_ok = 0, exit_not_dominated = 1, exit_usage = 2, exit_solver = 3 };

/// A solver failure at a named grid point (exit code 3).
class SolverFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Twelve significant digits, locale-independent.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string join_row(const std::vector<std::string>& cells) {
    std::string row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) row += ',';
        row += cells[i];
    }
    row += '\n';
    return row;
}

/// Writes `text` to stdout for "-", otherwise to the named file.
inline void emit(const std::string& path, const std::string& text, std::ostream& stdout_stream) {
    if (path == "-") {
        stdout_stream << text;
        stdout_stream.flush();
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path);
    f << text;
    if (!f) throw ConfigError("write failed for " + path);
}

// ---------------------------------------------------------------- mi-sweep

inline const GridSpec default_sweep_grid{0.05, 5.0, 20};

/// One row per (spectrum, noise level); columns
/// spectrum,sigma2[,ebn0_db],E,theta,C,F,n_fixed_points.
inline std::string mi_sweep_csv(const SweepConfig& cfg) {
    const auto axis = cfg.noise_axis(default_sweep_grid);
    const bool with_db = cfg.ebn0_grid.has_value();

    std::vector<spectra::EigenDistribution> laws;
    for (const auto& s : cfg.spectra) laws.push_back(s.law(cfg.beta));

    struct Cell {
        replica::SaddleSolution best;
        std::size_t n_fixed_points = 0;
        std::optional<std::string> error;
    };
    const std::size_t n = laws.size() * axis.size();
    std::vector<Cell> cells(n);
    parallel_for(n, [&](std::size_t i) {
        const auto& law = laws[i / axis.size()];
        const double sigma2 = axis[i % axis.size()].first;
        try {
            const auto sols = replica::solve_saddle({cfg.prior, law, sigma2});
            cells[i].best = sols.front();
            cells[i].n_fixed_points = sols.size();
        } catch (const NumericError& e) {
            cells[i].error = e.what();
        }
    });

    const double scale = cfg.unit_scale();
    std::string csv = with_db ? "spectrum,sigma2,ebn0_db,E,theta,C,F,n_fixed_points\n"
                              : "spectrum,sigma2,E,theta,C,F,n_fixed_points\n";
    for (std::size_t i = 0; i < n; ++i) {
        const auto& name = cfg.spectra[i / axis.size()].name;
        const auto& [sigma2, db] = axis[i % axis.size()];
        const Cell& c = cells[i];
        if (c.error) {
            std::string where = "spectrum " + name + ", sigma2 " + fmt(sigma2);
            if (db) where += " (Eb/N0 " + fmt(*db) + " dB)";
            throw SolverFailure("solver failed at " + where + ": " + *c.error);
        }
        std::vector<std::string> row{name, fmt(sigma2)};
        if (with_db) row.push_back(fmt(*db));
        row.insert(row.end(), {fmt(c.best.E), fmt(c.best.theta), fmt(c.best.mutual_information * scale),
                               fmt(c.best.free_energy * scale), std::to_string(c.n_fixed_points)});
        csv += join_row(row);
    }
    return csv;
}

inline int run_mi_sweep(const SweepConfig& cfg, std::ostream& out, std::ostream& /*log*/) {
    emit(cfg.out, mi_sweep_csv(cfg), out);
    return exit_ok;
}

// ---------------------------------------------------------------- verify-optimality

inline const std::vector<double> default_check_sigma2{0.25, 1.0};
inline constexpr double hilbert_grid_lo = 1e-4;
inline constexpr double hilbert_grid_hi = 100.0;
inline constexpr const char* default_report_dir = "optimality_report";

struct CandidateResult {
    std::string label; ///< sampler seed, or the file name
    spectra::EigenDistribution law;
    optimality::DominanceReport hilbert;
    std::vector<optimality::RDominance> r;
    std::vector<double> c_candidate;
    std::vector<double> c_wbe;

    [[nodiscard]] bool mi_dominated(std::size_t j) const {
        return c_wbe[j] - c_candidate[j] >= -optimality::dominance_tol;
    }
    [[nodiscard]] bool dominated() const {
        if (!hilbert.dominated) return false;
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (!r[j].report.dominated || !mi_dominated(j)) return false;
        }
        return true;
    }
};

inline std::string describe_law(const spectra::EigenDistribution& law) {
    std::string s = "beta " + fmt(law.beta()) + ", rho atoms [";
    bool first = true;
    for (const auto& a : law.atoms()) {
        s += (first ? "[" : ", [") + fmt(a.location) + ", " + fmt(a.weight) + "]";
        first = false;
    }
    return s + "]";
}

inline CandidateResult check_candidate(const SweepConfig& cfg, std::string label, spectra::EigenDistribution law,
                                       const std::vector<double>& sigma2s) {
    CandidateResult res{std::move(label), std::move(law), {}, {}, {}, {}};
    const auto wbe = spectra::make_wbe_law(res.law.beta());
    res.hilbert =
        optimality::hilbert_dominance(res.law, optimality::negative_log_grid(hilbert_grid_lo, hilbert_grid_hi));
    for (double sigma2 : sigma2s) {
        const replica::SystemSpec cand{cfg.prior, res.law, sigma2};
        res.r.push_back(optimality::r_dominance(cand));
        res.c_candidate.push_back(replica::mutual_information(cand).mutual_information);
        res.c_wbe.push_back(replica::mutual_information({cfg.prior, wbe, sigma2}).mutual_information);
    }
    return res;
}

/// Writes summary.csv plus per-candidate dominance CSVs into cfg.out (a
/// directory); returns 1 and names every counterexample on `log` if any
/// candidate is not dominated.
inline int write_optimality_report(const SweepConfig& cfg, const std::vector<double>& sigma2s,
                                   const std::vector<CandidateResult>& results, std::ostream& out, std::ostream& log) {
    const std::filesystem::path dir = cfg.out == "-" ? default_report_dir : cfg.out;
    std::filesystem::create_directories(dir);
    const double scale = cfg.unit_scale();
    std::string summary =
        "candidate,label,n_atoms,sigma2,hilbert_min_margin,r_min_margin,C_candidate,C_wbe,mi_margin,dominated\n";
    std::size_t failures = 0;
    double worst_h = std::numeric_limits<double>::infinity();
    double worst_r = worst_h;
    double worst_mi = worst_h;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& res = results[i];
        const std::string stem = "candidate_" + std::to_string(i);
        {
            std::ostringstream csv;
            optimality::write_csv(csv, res.hilbert);
            emit((dir / (stem + "_hilbert.csv")).string(), csv.str(), out);
        }
        worst_h = std::min(worst_h, res.hilbert.min_margin);
        for (std::size_t j = 0; j < sigma2s.size(); ++j) {
            std::ostringstream csv;
            optimality::write_csv(csv, res.r[j].report);
            emit((dir / (stem + "_r_sigma2_" + std::to_string(j) + ".csv")).string(), csv.str(), out);
            const double mi_margin = res.c_wbe[j] - res.c_candidate[j];
            worst_r = std::min(worst_r, res.r[j].report.min_margin);
            worst_mi = std::min(worst_mi, mi_margin);
            const bool ok = res.hilbert.dominated && res.r[j].report.dominated && res.mi_dominated(j);
            summary += join_row({std::to_string(i), res.label, std::to_string(res.law.atoms().size()), fmt(sigma2s[j]),
                                 fmt(res.hilbert.min_margin), fmt(res.r[j].report.min_margin),
                                 fmt(res.c_candidate[j] * scale), fmt(res.c_wbe[j] * scale), fmt(mi_margin * scale),
                                 ok ? "true" : "false"});
        }
        if (!res.dominated()) {
            ++failures;
            log << "counterexample: candidate " << i << " (" << res.label << "): " << describe_law(res.law)
                << "; hilbert margin " << fmt(res.hilbert.min_margin) << '\n';
        }
    }
    emit((dir / "summary.csv").string(), summary, out);

    out << "verify-optimality: " << results.size() << " candidate(s), " << sigma2s.size() << " noise level(s), "
        << failures << " not dominated";
    if (!results.empty()) {
        out << "; min margins: hilbert " << fmt(worst_h) << ", R " << fmt(worst_r) << ", MI " << fmt(worst_mi * scale);
    }
    out << "; report in " << dir.string() << '\n';
    return failures ? exit_not_dominated : exit_ok;
}

/// Samples candidates (or reads one from a file), checks them and writes the report.
inline int run_verify_optimality(const SweepConfig& cfg, std::ostream& out, std::ostream& log) {
    std::vector<double> sigma2s = default_check_sigma2;
    if (cfg.sigma2_grid) sigma2s = sigma2_values(*cfg.sigma2_grid);
    if (cfg.ebn0_grid) {
        sigma2s.clear();
        for (double db : ebn0_values(*cfg.ebn0_grid)) sigma2s.push_back(sigma2_from_ebn0_db(db));
    }

    std::vector<CandidateResult> results;
    if (cfg.candidate_file) {
        auto law = read_spectrum_file(*cfg.candidate_file);
        results.push_back(check_candidate(cfg, std::filesystem::path(*cfg.candidate_file).filename().string(),
                                          std::move(law), sigma2s));
    } else {
        std::vector<std::optional<CandidateResult>> slots(cfg.candidates);
        parallel_for(cfg.candidates, [&](std::size_t i) {
            const std::uint64_t seed = derive_seed(cfg.seed, i);
            const int atoms = cfg.atoms > 0 ? cfg.atoms : 2 + static_cast<int>(i % 7);
            slots[i] = check_candidate(cfg, std::to_string(seed),
                                       optimality::sample_candidate_spectrum(seed, cfg.beta, atoms), sigma2s);
        });
        for (auto& s : slots) results.push_back(std::move(*s));
    }
    return write_optimality_report(cfg, sigma2s, results, out, log);
}

// ---------------------------------------------------------------- simulate

/// Finite-size rows K,L,kind,sigma2,mi,stderr,n_samples,seed,replica_C,gap
/// where gap = (replica_C - mi) / replica_C.
inline std::string simulate_csv(const SweepConfig& cfg) {
    const auto axis = cfg.noise_axis(default_sweep_grid);
    const bool gaussian = cfg.prior.kind() == channel::PriorKind::gaussian;
    if (!gaussian) {
        const double states = std::pow(static_cast<double>(cfg.prior.alphabet().size()), cfg.K);
        if (states > montecarlo::enumeration_bound) {
            throw CapabilityError("simulate: " + std::to_string(cfg.prior.alphabet().size()) + "^" +
                                  std::to_string(cfg.K) + " input vectors exceed the enumeration bound 2^20");
        }
        if (cfg.samples < 1000) throw ConfigError("simulate: samples must be at least 1000");
    }
    const double beta = static_cast<double>(cfg.K) / cfg.L;
    const double scale = cfg.unit_scale();
    std::string csv = "K,L,kind,sigma2,mi,stderr,n_samples,seed,replica_C,gap\n";
    for (auto kind : cfg.kinds) {
        const auto law = kind == montecarlo::SpreadingKind::wbe ? spectra::make_wbe_law(beta) : spectra::make_mp_law(beta);
        for (const auto& [sigma2, db] : axis) {
            montecarlo::MiEstimate est;
            if (gaussian) {
                std::vector<double> values;
                for (std::size_t m = 0; m < cfg.matrices; ++m) {
                    const auto s = montecarlo::gen_spreading(kind, derive_seed(cfg.seed, 2 * m), cfg.K, cfg.L);
                    values.push_back(montecarlo::gaussian_exact_mi(s, sigma2));
                }
                est = values.size() > 1 ? montecarlo::detail::summarize(std::move(values))
                                        : montecarlo::MiEstimate{values[0], 0.0, 0};
                est.n_samples = 0; // closed form, no sampling
            } else {
                est = montecarlo::ensemble_mutual_information(kind, cfg.K, cfg.L, cfg.prior, sigma2, cfg.matrices,
                                                              cfg.samples, cfg.seed);
            }
            double c = 0.0;
            try {
                c = replica::mutual_information({cfg.prior, law, sigma2}).mutual_information;
            } catch (const NumericError& e) {
                throw SolverFailure("solver failed at kind " + std::string(to_string(kind)) + ", sigma2 " +
                                    fmt(sigma2) + ": " + e.what());
            }
            csv += join_row({std::to_string(cfg.K), std::to_string(cfg.L), to_string(kind), fmt(sigma2),
                             fmt(est.value * scale), fmt(est.std_error * scale), std::to_string(est.n_samples),
                             std::to_string(cfg.seed), fmt(c * scale), fmt((c - est.value) / c)});
        }
    }
    return csv;
}

inline int run_simulate(const SweepConfig& cfg, std::ostream& out, std::ostream& /*log*/) {
    emit(cfg.out, simulate_csv(cfg), out);
    return exit_ok;
}

// ---------------------------------------------------------------- transform

/// Rows z,R,G,gamma,C_at_gamma with gamma = R(z) + 1/z, so C_at_gamma
/// reproduces z.
inline std::string transform_csv(const SweepConfig& cfg) {
    const auto law = cfg.spectra.front().law(cfg.beta);
    const auto zs = z_values(cfg.z_grid);
    struct Row {
        double r, g, gamma, c;
    };
    std::vector<Row> rows(zs.size());
    parallel_for(zs.size(), [&](std::size_t i) {
        const double z = zs[i];
        const double r = spectra::r_transform(law, z);
        const double gamma = r + 1.0 / z;
        rows[i] = {r, spectra::g_integral(law, z), gamma, spectra::hilbert(law, gamma)};
    });
    std::string csv = "z,R,G,gamma,C_at_gamma\n";
    for (std::size_t i = 0; i < zs.size(); ++i) {
        csv += join_row({fmt(zs[i]), fmt(rows[i].r), fmt(rows[i].g), fmt(rows[i].gamma), fmt(rows[i].c)});
    }
    return csv;
}

inline int run_transform(const SweepConfig& cfg, std::ostream& out, std::ostream& /*log*/) {
    emit(cfg.out, transform_csv(cfg), out);
    return exit_ok;
}

// ---------------------------------------------------------------- dispatch

/// Runs a command and maps failures to exit codes: 2 for bad input or
/// capability limits, 3 for solver failures.
inline int guarded(const std::function<int()>& command, std::ostream& log) {
    try {
        return command();
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const CapabilityError& e) {
        log << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DomainError& e) {
        log << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const ConstraintViolation& e) {
        log << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const SolverFailure& e) {
        log << "error: " << e.what() << '\n';
        return exit_solver;
    } catch (const NumericError& e) {
        log << "error: solver failure: " << e.what() << '\n';
        return exit_solver;
    } catch (const std::filesystem::filesystem_error& e) {
        log << "error: " << e.what() << '\n';
        return exit_usage;
    }
}

} // namespace cdma::cli
