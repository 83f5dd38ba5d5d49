#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <future>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "fade/analysis.hpp"
#include "fade/config.hpp"
#include "fade/estimators.hpp"
#include "fade/model.hpp"
#include "fade/network.hpp"
#include "fade/rng.hpp"

namespace fade {

enum class EstimatorKind { kFade = 0, kCi = 1, kMl = 2 };

inline const char* estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kFade: return "fade";
    case EstimatorKind::kCi: return "ci";
    case EstimatorKind::kMl: return "ml";
  }
  return "?";
}

/// Recorded samples of one estimator at the experiment's time grid. Each
/// entry is agents x dim (the centralized estimator records a single row);
/// the rows hold errors or raw estimates depending on the record policy.
struct EstimatorTrace {
  std::vector<Eigen::MatrixXd> samples;
};

/// Everything one Monte Carlo run produced: its derived stream seeds, the
/// active edge set index per step, and the recorded estimator samples.
struct RunTrace {
  int run_index = 0;
  std::uint64_t edge_seed = 0;
  std::uint64_t noise_seed = 0;
  std::vector<int> times;
  std::vector<int> edge_indices;
  std::array<std::optional<EstimatorTrace>, 3> estimators;
  RecordKind record = RecordKind::kErrors;
  CiDiagnostics ci;
};

/// Fully resolved experiment: built model and network, per-edge-set weight
/// matrices (validated on construction) and cached Laplacian spectral radii,
/// plus the run settings. Immutable once built; shared read-only by all runs.
struct Experiment {
  ExperimentConfig config;
  SensingModel model;
  Eigen::VectorXd theta;
  EdgeSetEnsemble ensemble;
  std::vector<WeightMatrix> weights;
  std::vector<double> lap_lambda_max;
  CiConfig ci_config;

  bool enabled(EstimatorKind k) const {
    switch (k) {
      case EstimatorKind::kFade: return config.estimators.fade;
      case EstimatorKind::kCi: return config.estimators.ci;
      case EstimatorKind::kMl: return config.estimators.ml;
    }
    return false;
  }

  /// Recorded time grid: multiples of the decimation interval plus the
  /// horizon itself.
  std::vector<int> record_times() const {
    std::vector<int> times;
    const int T = config.run.horizon;
    const int dec = config.run.decimation;
    for (int t = 1; t <= T; ++t)
      if (t % dec == 0 || t == T) times.push_back(t);
    return times;
  }
};

namespace detail {

inline SensingModel build_model(const ModelConfig& mc,
                                const std::filesystem::path& base_dir) {
  if (mc.source == SourceKind::kFile) {
    std::filesystem::path p(mc.path);
    if (p.is_relative()) p = base_dir / p;
    return load_model(p);
  }
  Rng rng(mc.seed);
  return generate_random_model(mc.agents, mc.dim, mc.obs_dim, mc.rank, rng);
}

inline EdgeSetEnsemble build_ensemble(const NetworkConfig& nc, int agents,
                                      const std::filesystem::path& base_dir) {
  if (nc.source == SourceKind::kFile) {
    std::filesystem::path p(nc.path);
    if (p.is_relative()) p = base_dir / p;
    return load_ensemble(p);
  }
  Rng rng(nc.seed);
  return generate_random_ensemble(agents, nc.edge_sets, nc.density, rng);
}

inline std::vector<WeightMatrix> build_weights(
    const NetworkConfig& nc, const EdgeSetEnsemble& ensemble,
    const std::filesystem::path& base_dir) {
  if (!nc.weights_path.empty()) {
    std::filesystem::path p(nc.weights_path);
    if (p.is_relative()) p = base_dir / p;
    auto weights = load_weight_matrices(p);
    if (static_cast<int>(weights.size()) != ensemble.size())
      throw std::runtime_error("weights file: expected one matrix per edge set");
    return weights;
  }
  std::vector<WeightMatrix> weights;
  weights.reserve(ensemble.size());
  for (int k = 0; k < ensemble.size(); ++k)
    weights.push_back(metropolis_weights(ensemble.edge_set(k), ensemble.nodes(), k));
  return weights;
}

}  // namespace detail

/// Builds and cross-checks the runnable experiment from a parsed config.
/// File paths are resolved relative to `base_dir` (typically the directory
/// holding the config file). Throws ConfigError for inconsistent settings,
/// ObservabilityError for hopeless models, std::invalid_argument for weight
/// matrices violating their contract.
inline Experiment setup_experiment(const ExperimentConfig& cfg,
                                   const std::filesystem::path& base_dir = ".") {
  SensingModel model = detail::build_model(cfg.model, base_dir);
  if (static_cast<int>(cfg.theta.size()) != model.dim())
    throw ConfigError("theta has " + std::to_string(cfg.theta.size()) +
                      " entries but the model dimension is " +
                      std::to_string(model.dim()));
  if (cfg.model.blind_agent > 0) {
    if (cfg.model.blind_agent > model.agents() || cfg.model.blind_coord > model.dim())
      throw ConfigError("blind_agent/blind_coord out of range for the model");
    model = blind_agent_coordinate(model, cfg.model.blind_agent - 1,
                                   cfg.model.blind_coord - 1);
  }
  if (!model.observable())
    throw ObservabilityError("model is not globally observable; estimation is ill-posed");
  EdgeSetEnsemble ensemble = detail::build_ensemble(cfg.network, model.agents(), base_dir);
  if (ensemble.nodes() != model.agents())
    throw ConfigError("network has " + std::to_string(ensemble.nodes()) +
                      " nodes but the model has " + std::to_string(model.agents()) +
                      " agents");
  std::vector<WeightMatrix> weights = detail::build_weights(cfg.network, ensemble, base_dir);
  for (int k = 0; k < ensemble.size(); ++k)
    validate_weight_matrix(weights[k], ensemble.edge_set(k), ensemble.nodes());
  std::vector<double> lmax;
  lmax.reserve(ensemble.size());
  for (int k = 0; k < ensemble.size(); ++k)
    lmax.push_back(laplacian_lambda_max(ensemble.edge_set(k), ensemble.nodes()));
  if (cfg.run.track_agent > model.agents() || cfg.run.track_coord > model.dim())
    throw ConfigError("track_agent/track_coord out of range for the model");
  Eigen::VectorXd theta(model.dim());
  for (int i = 0; i < model.dim(); ++i) theta(i) = cfg.theta[i];
  CiConfig ci_cfg{cfg.estimators.ci_r};
  if (cfg.estimators.ci) ci_cfg.validate();
  return Experiment{cfg,
                    std::move(model),
                    std::move(theta),
                    std::move(ensemble),
                    std::move(weights),
                    std::move(lmax),
                    ci_cfg};
}

/**
 * Runs one trajectory. Randomness comes from two streams seeded by
 * derive_stream_seed(base_seed, run_index, stream): the noise stream feeds
 * the measurements, the edge stream picks the active edge set. The edge
 * stream is only consumed when a distributed estimator is enabled, and the
 * draw order within a step is fixed (noise first, then the edge index), so
 * enabling or disabling estimators never changes the draws any other
 * estimator sees. Both estimators in one run therefore face the exact same
 * measurement sequence, and the centralized estimate is computed from the
 * same running means.
 */
inline RunTrace run_trajectory(const Experiment& exp, int run_index) {
  const auto& cfg = exp.config;
  const bool use_fade = cfg.estimators.fade;
  const bool use_ci = cfg.estimators.ci;
  const bool use_ml = cfg.estimators.ml;
  const bool need_edges = use_fade || use_ci;

  RunTrace trace;
  trace.run_index = run_index;
  trace.record = cfg.run.record;
  trace.edge_seed = derive_stream_seed(cfg.run.base_seed, run_index, Stream::kEdges);
  trace.noise_seed = derive_stream_seed(cfg.run.base_seed, run_index, Stream::kNoise);
  trace.times = exp.record_times();
  Rng edge_rng(trace.edge_seed);
  Rng noise_rng(trace.noise_seed);

  const int agents = exp.model.agents();
  const int d = exp.model.dim();
  std::optional<NetworkEstimate> fade_state, ci_state;
  if (use_fade) fade_state = NetworkEstimate::zero(exp.model);
  if (use_ci) ci_state = NetworkEstimate::zero(exp.model);
  std::vector<Eigen::VectorXd> ml_means;
  if (use_ml)
    for (int n = 0; n < agents; ++n)
      ml_means.push_back(Eigen::VectorXd::Zero(exp.model.obs_dim(n)));

  for (int k = 0; k < 3; ++k)
    if (exp.enabled(static_cast<EstimatorKind>(k))) {
      trace.estimators[k].emplace();
      trace.estimators[k]->samples.reserve(trace.times.size());
    }
  if (need_edges) trace.edge_indices.reserve(cfg.run.horizon);

  const bool record_errors = cfg.run.record == RecordKind::kErrors;
  auto record_distributed = [&](const NetworkEstimate& s, EstimatorTrace& out) {
    Eigen::MatrixXd sample(agents, d);
    for (int n = 0; n < agents; ++n) sample.row(n) = s.agent(n).transpose();
    if (record_errors) sample.rowwise() -= exp.theta.transpose();
    out.samples.push_back(std::move(sample));
  };

  const int T = cfg.run.horizon;
  const int dec = cfg.run.decimation;
  for (int t = 1; t <= T; ++t) {
    const Measurement y = sample_measurement(exp.model, exp.theta, noise_rng, t);
    int k = -1;
    if (need_edges) {
      k = sample_edge_index(exp.ensemble, edge_rng);
      trace.edge_indices.push_back(k);
    }
    if (use_fade) fade_step(*fade_state, exp.weights[k], y, exp.model);
    if (use_ci)
      ci_step(*ci_state, exp.ensemble.edge_set(k), y, exp.model, exp.ci_config,
              &trace.ci, exp.lap_lambda_max[k]);
    if (use_ml) {
      const double step = 1.0 / static_cast<double>(t);
      for (int n = 0; n < agents; ++n)
        ml_means[n] += step * (y.per_agent[n] - ml_means[n]);
    }
    if (t % dec == 0 || t == T) {
      if (use_fade)
        record_distributed(*fade_state, *trace.estimators[static_cast<int>(EstimatorKind::kFade)]);
      if (use_ci)
        record_distributed(*ci_state, *trace.estimators[static_cast<int>(EstimatorKind::kCi)]);
      if (use_ml) {
        Eigen::MatrixXd sample(1, d);
        sample.row(0) = ml_estimate(exp.model, ml_means).transpose();
        if (record_errors) sample.row(0) -= exp.theta.transpose();
        trace.estimators[static_cast<int>(EstimatorKind::kMl)]->samples.push_back(
            std::move(sample));
      }
    }
  }
  return trace;
}

/// Aggregated Monte Carlo statistics per enabled estimator, plus the
/// consensus+innovations stability diagnostics summed over runs.
struct McSummary {
  std::vector<int> times;
  std::array<std::optional<ErrorCurve>, 3> curves;
  int runs = 0;
  std::int64_t ci_unstable_steps = 0;
  int ci_diverged_runs = 0;
};

namespace detail {

inline void accumulate_trace(const RunTrace& trace, const Eigen::VectorXd& theta,
                             std::array<std::optional<McAccumulator>, 3>& accs,
                             McSummary& summary) {
  for (int k = 0; k < 3; ++k) {
    if (!trace.estimators[k]) continue;
    const auto& samples = trace.estimators[k]->samples;
    if (trace.record == RecordKind::kErrors) {
      accs[k]->add_run(samples);
    } else {
      std::vector<Eigen::MatrixXd> errors;
      errors.reserve(samples.size());
      for (const auto& s : samples)
        errors.push_back(s.rowwise() - theta.transpose());
      accs[k]->add_run(errors);
    }
  }
  summary.ci_unstable_steps += trace.ci.unstable_steps;
  if (trace.ci.frozen_at >= 0) ++summary.ci_diverged_runs;
}

}  // namespace detail

/**
 * Runs the full Monte Carlo experiment. Runs execute in blocks of
 * hardware_concurrency() via std::async, but the reduction consumes the
 * traces strictly in run-index order, so the aggregate is a fixed-order sum:
 * repeating the experiment with any thread count reproduces every statistic
 * bit for bit.
 */
inline McSummary run_monte_carlo(const Experiment& exp) {
  const int runs = exp.config.run.runs;
  const int agents = exp.model.agents();
  const int d = exp.model.dim();
  McSummary summary;
  summary.times = exp.record_times();
  summary.runs = runs;

  std::array<std::optional<McAccumulator>, 3> accs;
  for (int k = 0; k < 3; ++k)
    if (exp.enabled(static_cast<EstimatorKind>(k)))
      accs[k].emplace(summary.times,
                      k == static_cast<int>(EstimatorKind::kMl) ? 1 : agents, d);

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (hw <= 1 || runs == 1) {
    for (int r = 0; r < runs; ++r)
      detail::accumulate_trace(run_trajectory(exp, r), exp.theta, accs, summary);
  } else {
    const int block = static_cast<int>(hw);
    for (int start = 0; start < runs; start += block) {
      const int end = std::min(runs, start + block);
      std::vector<std::future<RunTrace>> futures;
      futures.reserve(end - start);
      for (int r = start; r < end; ++r)
        futures.push_back(std::async(std::launch::async,
                                     [&exp, r] { return run_trajectory(exp, r); }));
      for (auto& f : futures)
        detail::accumulate_trace(f.get(), exp.theta, accs, summary);
    }
  }

  for (int k = 0; k < 3; ++k)
    if (accs[k]) summary.curves[k] = accs[k]->finish();
  return summary;
}

/// Error statistics of one estimator across a set of traces (all from the
/// same experiment). Estimate-policy traces are converted to errors against
/// the supplied truth; the reduction order is the order of `traces`.
inline ErrorCurve empirical_mse(const std::vector<RunTrace>& traces,
                                EstimatorKind kind, const Eigen::VectorXd& theta) {
  if (traces.empty()) throw std::invalid_argument("no traces given");
  const int k = static_cast<int>(kind);
  if (!traces.front().estimators[k])
    throw std::invalid_argument("traces do not contain the requested estimator");
  const auto& first = traces.front().estimators[k]->samples;
  if (first.empty()) throw std::invalid_argument("traces have no recorded samples");
  McAccumulator acc(traces.front().times, static_cast<int>(first.front().rows()),
                    static_cast<int>(first.front().cols()));
  for (const auto& trace : traces) {
    if (!trace.estimators[k])
      throw std::invalid_argument("trace is missing the requested estimator");
    const auto& samples = trace.estimators[k]->samples;
    if (trace.record == RecordKind::kErrors) {
      acc.add_run(samples);
    } else {
      std::vector<Eigen::MatrixXd> errors;
      errors.reserve(samples.size());
      for (const auto& s : samples)
        errors.push_back(s.rowwise() - theta.transpose());
      acc.add_run(errors);
    }
  }
  return acc.finish();
}

}  // namespace fade
