#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fade/config.hpp"
#include "fade/output.hpp"
#include "fade/simulation.hpp"

namespace fade {

enum class CheckStatus { kPass, kFail, kSkip };

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::kSkip;
  std::string detail;
};

/// Outcome of validating a configuration against the model contract the
/// estimators rely on. Assumption 1 (iid unit-variance Gaussian noise) holds
/// by construction in the simulator; assumptions 2-4 and the spectral
/// contraction of the averaged weights are checked here.
struct ValidationReport {
  std::vector<CheckResult> checks;

  bool ok() const {
    for (const auto& c : checks)
      if (c.status != CheckStatus::kPass) return false;
    return true;
  }

  std::string text() const {
    std::ostringstream os;
    for (const auto& c : checks) {
      const char* tag = c.status == CheckStatus::kPass   ? "[PASS]"
                        : c.status == CheckStatus::kFail ? "[FAIL]"
                                                         : "[SKIP]";
      os << tag << ' ' << c.name << ": " << c.detail << '\n';
    }
    return os.str();
  }
};

/// Runs all semantic checks on a parsed configuration. Artifacts referenced
/// by path are resolved relative to `base_dir`. Build failures are
/// attributed to the assumption they invalidate (for example, an ensemble
/// file with a zero selection probability fails the connectivity-on-average
/// check, since the ensemble it describes is not a valid switching law).
inline ValidationReport validate_experiment(const ExperimentConfig& cfg,
                                            const std::filesystem::path& base_dir = ".") {
  ValidationReport report;
  auto add = [&](std::string name, CheckStatus status, std::string detail) {
    report.checks.push_back({std::move(name), status, std::move(detail)});
  };

  std::optional<SensingModel> model;
  std::string model_err;
  try {
    model = detail::build_model(cfg.model, base_dir);
  } catch (const std::exception& e) {
    model_err = e.what();
  }

  // Cross-field consistency that the parser cannot see.
  bool config_ok = true;
  {
    std::vector<std::string> problems;
    if (model) {
      if (static_cast<int>(cfg.theta.size()) != model->dim())
        problems.push_back("theta has " + std::to_string(cfg.theta.size()) +
                           " entries, model dimension is " + std::to_string(model->dim()));
      if (cfg.model.blind_agent > model->agents() || cfg.model.blind_coord > model->dim())
        problems.push_back("blind_agent/blind_coord out of range");
      if (cfg.run.track_agent > model->agents() || cfg.run.track_coord > model->dim())
        problems.push_back("track_agent/track_coord out of range");
      config_ok = problems.empty();
      std::string detail = "theta dimension " + std::to_string(cfg.theta.size()) +
                           ", horizon " + std::to_string(cfg.run.horizon) + ", runs " +
                           std::to_string(cfg.run.runs);
      if (!config_ok) {
        detail = problems.front();
        for (std::size_t i = 1; i < problems.size(); ++i) detail += "; " + problems[i];
      }
      add("Configuration", config_ok ? CheckStatus::kPass : CheckStatus::kFail, detail);
    } else {
      config_ok = false;
      add("Configuration", CheckStatus::kSkip, "model unavailable");
    }
  }

  // Assumption 2: the stacked sensing matrix has full column rank.
  std::optional<SensingModel> effective;
  if (!model) {
    add("Assumption 2 (global observability)", CheckStatus::kFail, model_err);
  } else if (!config_ok) {
    add("Assumption 2 (global observability)", CheckStatus::kSkip,
        "configuration inconsistent");
  } else {
    SensingModel m = *model;
    if (cfg.model.blind_agent > 0)
      m = blind_agent_coordinate(m, cfg.model.blind_agent - 1, cfg.model.blind_coord - 1);
    const int rank = detail::numerical_rank(m.stacked(), SensingModel::kRankTol);
    const bool pass = rank == m.dim();
    add("Assumption 2 (global observability)",
        pass ? CheckStatus::kPass : CheckStatus::kFail,
        "stacked sensing matrix has rank " + std::to_string(rank) + " of " +
            std::to_string(m.dim()) + " (agents " + std::to_string(m.agents()) + ")");
    if (pass) effective = std::move(m);
  }

  // Assumption 3: the ensemble is a valid switching law whose union graph
  // is connected.
  std::optional<EdgeSetEnsemble> ensemble;
  {
    const int agents = model ? model->agents() : cfg.model.agents;
    std::string err;
    try {
      ensemble = detail::build_ensemble(cfg.network, agents, base_dir);
    } catch (const std::exception& e) {
      err = e.what();
    }
    if (!ensemble) {
      add("Assumption 3 (connectivity on average)", CheckStatus::kFail, err);
    } else if (model && ensemble->nodes() != model->agents()) {
      add("Assumption 3 (connectivity on average)", CheckStatus::kFail,
          "network has " + std::to_string(ensemble->nodes()) + " nodes, model has " +
              std::to_string(model->agents()) + " agents");
      ensemble.reset();
    } else if (!check_average_connectivity(*ensemble)) {
      add("Assumption 3 (connectivity on average)", CheckStatus::kFail,
          "union of the " + std::to_string(ensemble->size()) +
              " edge sets is disconnected");
    } else {
      add("Assumption 3 (connectivity on average)", CheckStatus::kPass,
          "union of the " + std::to_string(ensemble->size()) + " edge sets is connected");
    }
  }

  // Assumption 4: each mixing matrix is symmetric, doubly stochastic,
  // non-negative with positive diagonal, and matches its edge set's sparsity.
  std::optional<std::vector<WeightMatrix>> weights;
  if (!ensemble) {
    add("Assumption 4 (weight matrices)", CheckStatus::kSkip, "network unavailable");
  } else {
    try {
      auto w = detail::build_weights(cfg.network, *ensemble, base_dir);
      for (int k = 0; k < ensemble->size(); ++k) {
        try {
          validate_weight_matrix(w[k], ensemble->edge_set(k), ensemble->nodes());
        } catch (const std::exception& e) {
          throw std::runtime_error("matrix " + std::to_string(k + 1) + ": " + e.what());
        }
      }
      add("Assumption 4 (weight matrices)", CheckStatus::kPass,
          std::to_string(w.size()) +
              (cfg.network.weights_path.empty() ? " Metropolis matrices valid"
                                                : " supplied matrices valid"));
      weights = std::move(w);
    } catch (const std::exception& e) {
      add("Assumption 4 (weight matrices)", CheckStatus::kFail, e.what());
    }
  }

  // Spectral contraction of the averaged weights; strict inequalities are
  // equivalent to connectivity on average when assumption 4 holds.
  if (!ensemble || !weights) {
    add("Spectral contraction", CheckStatus::kSkip, "weights unavailable");
  } else {
    const SpectralReport s = average_matrices(*ensemble, *weights);
    const bool pass = s.rho_tilde < 1.0 && s.second_eig_bar < 1.0;
    std::ostringstream os;
    os.precision(6);
    os << "rho_tilde = " << s.rho_tilde << ", second eigenvalue of the mean = "
       << s.second_eig_bar << (pass ? " (both < 1)" : " (must both be < 1)");
    add("Spectral contraction", pass ? CheckStatus::kPass : CheckStatus::kFail, os.str());
  }

  return report;
}

/// `fade validate <config>`: parse, run all checks, report one line per
/// check. Exit 0 when everything passes, 1 for unparseable configs, 2 when
/// any check fails.
inline int cmd_validate(const std::string& config_path, std::ostream& out,
                        std::ostream& err) {
  std::filesystem::path path(config_path);
  ExperimentConfig cfg;
  try {
    cfg = parse_config(path);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
  try {
    const ValidationReport report = validate_experiment(cfg, path.parent_path());
    out << report.text();
    if (report.ok()) {
      out << "validation OK\n";
      return 0;
    }
    out << "validation FAILED\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

struct RunOptions {
  std::string config_path;
  std::string out_dir;  // overridden by FADE_OUT_DIR when that is set
  std::optional<int> runs;
  std::optional<int> horizon;
  std::optional<std::uint64_t> seed;
};

/// `fade run <config> --out <dir>`: validate, simulate, write curves.csv,
/// manifest.cfg and (for tracked single-run estimate recordings)
/// trajectory.csv. The FADE_OUT_DIR environment variable overrides --out.
/// Exit 0 on success, 1 for usage errors, 2 for validation failures, 3 for
/// runtime failures.
inline int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  std::filesystem::path config_path(opts.config_path);
  ExperimentConfig cfg;
  try {
    cfg = parse_config(config_path);
    if (opts.runs) {
      if (*opts.runs < 1) throw ConfigError("--runs must be >= 1");
      cfg.run.runs = *opts.runs;
    }
    if (opts.horizon) {
      if (*opts.horizon < 1) throw ConfigError("--horizon must be >= 1");
      cfg.run.horizon = *opts.horizon;
    }
    if (opts.seed) cfg.run.base_seed = *opts.seed;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  std::string out_dir = opts.out_dir;
  if (const char* env = std::getenv("FADE_OUT_DIR"); env && *env) out_dir = env;
  if (out_dir.empty()) {
    err << "error: no output directory (give --out or set FADE_OUT_DIR)\n";
    return 1;
  }

  try {
    const std::filesystem::path base_dir = config_path.parent_path();
    const ValidationReport report = validate_experiment(cfg, base_dir);
    if (!report.ok()) {
      out << report.text() << "validation FAILED\n";
      return 2;
    }

    const Experiment exp = setup_experiment(cfg, base_dir);
    const McSummary summary = run_monte_carlo(exp);

    const std::filesystem::path out_path(out_dir);
    std::filesystem::create_directories(out_path);

    // Manifests must rerun from anywhere, so referenced files are pinned to
    // absolute paths.
    ExperimentConfig echo = cfg;
    auto absolutize = [&](std::string& p) {
      if (p.empty()) return;
      std::filesystem::path fp(p);
      if (fp.is_relative()) fp = base_dir / fp;
      p = std::filesystem::absolute(fp).lexically_normal().string();
    };
    if (echo.model.source == SourceKind::kFile) absolutize(echo.model.path);
    if (echo.network.source == SourceKind::kFile) absolutize(echo.network.path);
    absolutize(echo.network.weights_path);

    write_curves_csv(out_path / "curves.csv", summary);
    write_manifest(out_path / "manifest.cfg", echo);
    out << "wrote " << (out_path / "curves.csv").string() << '\n';
    out << "wrote " << (out_path / "manifest.cfg").string() << '\n';

    if (cfg.run.track_agent > 0 && cfg.run.runs == 1 &&
        cfg.run.record == RecordKind::kEstimates) {
      const RunTrace trace = run_trajectory(exp, 0);
      write_trajectory_csv(out_path / "trajectory.csv", trace, exp.theta,
                           cfg.run.track_agent - 1, cfg.run.track_coord - 1);
      out << "wrote " << (out_path / "trajectory.csv").string() << '\n';
    }

    out << "runs " << summary.runs << ", horizon " << cfg.run.horizon << '\n';
    if (cfg.estimators.ci) {
      out << "ci diagnostics: " << summary.ci_unstable_steps
          << " destabilized consensus steps";
      if (summary.ci_diverged_runs > 0)
        out << ", divergence clamp engaged in " << summary.ci_diverged_runs << " of "
            << summary.runs << " runs";
      out << '\n';
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ObservabilityError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace fade
