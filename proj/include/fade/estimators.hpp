#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fade/model.hpp"
#include "fade/network.hpp"

namespace fade {

/// Joint state of one distributed estimator: the stacked estimate
/// (agent n occupies segment [n*d, (n+1)*d)), the per-agent running means of
/// past observations, and the number of absorbed measurements.
struct NetworkEstimate {
  Eigen::VectorXd theta_hat;
  std::vector<Eigen::VectorXd> y_bar;
  int agents = 0;
  int dim = 0;
  int t = 0;

  static NetworkEstimate zero(const SensingModel& model) {
    NetworkEstimate s;
    s.agents = model.agents();
    s.dim = model.dim();
    s.theta_hat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.agents) * s.dim);
    s.y_bar.reserve(s.agents);
    for (int n = 0; n < s.agents; ++n)
      s.y_bar.push_back(Eigen::VectorXd::Zero(model.obs_dim(n)));
    s.t = 0;
    return s;
  }

  Eigen::VectorBlock<Eigen::VectorXd> agent(int n) {
    return theta_hat.segment(static_cast<Eigen::Index>(n) * dim, dim);
  }
  Eigen::VectorBlock<const Eigen::VectorXd> agent(int n) const {
    return theta_hat.segment(static_cast<Eigen::Index>(n) * dim, dim);
  }
};

/// Running mean advance: given the mean of y(1..t-1) and the sample y(t),
/// returns the mean of y(1..t). With t = 1 the previous mean is ignored
/// (multiplied by zero), matching the all-zero initialization.
inline Eigen::VectorXd running_mean_update(const Eigen::VectorXd& prev_mean,
                                           const Eigen::VectorXd& y, int t) {
  if (t < 1) throw std::invalid_argument("running mean time index must be >= 1");
  if (prev_mean.size() != y.size())
    throw std::invalid_argument("running mean dimension mismatch");
  return prev_mean + (y - prev_mean) / static_cast<double>(t);
}

/**
 * One step of the distributed running-mean innovation estimator.
 *
 * With t = state.t + 1 each agent first absorbs its own innovation against
 * the running mean of its past observations,
 *
 *   theta_bar_m = theta_hat_m(t-1) + (1/t) C_m (y_m(t) - y_bar_m(t-1)),
 *
 * then the network mixes the intermediate estimates with the step's weight
 * matrix,
 *
 *   theta_hat_n(t) = sum_m W_nm theta_bar_m,
 *
 * and finally every agent advances its running mean. Mixing walks the
 * per-row neighbor lists, so the cost per step is O(|E| d + N d) and the
 * N d x N d Kronecker form is never materialized. Because every W is column
 * stochastic, the network average of the estimates equals the centralized
 * ML estimate built from the same running means, exactly, for any weight
 * sequence.
 */
inline void fade_step(NetworkEstimate& state, const WeightMatrix& weights,
                      const Measurement& y, const SensingModel& model) {
  const int agents = state.agents;
  const int d = state.dim;
  if (weights.entries.rows() != agents)
    throw std::invalid_argument("weight matrix does not match network size");
  if (static_cast<int>(y.per_agent.size()) != agents)
    throw std::invalid_argument("measurement does not match network size");
  const int t = state.t + 1;
  const double step = 1.0 / static_cast<double>(t);

  Eigen::MatrixXd intermediate(d, agents);
  for (int m = 0; m < agents; ++m)
    intermediate.col(m) =
        state.agent(m) +
        step * (model.gain(m) * (y.per_agent[m] - state.y_bar[m]));

  for (int n = 0; n < agents; ++n) {
    Eigen::VectorXd mixed = Eigen::VectorXd::Zero(d);
    for (const auto& [m, w] : weights.rows[n]) mixed += w * intermediate.col(m);
    state.agent(n) = mixed;
  }

  for (int m = 0; m < agents; ++m)
    state.y_bar[m] += step * (y.per_agent[m] - state.y_bar[m]);
  state.t = t;
}

/// Step size exponent for the consensus term of the consensus+innovations
/// baseline: beta(t) = t^{-r} with 0 < r < 1/2, innovation step alpha(t) = 1/t.
struct CiConfig {
  double r = 0.05;

  void validate() const {
    if (!(r > 0.0) || !(r < 0.5))
      throw std::invalid_argument("consensus exponent r must lie in (0, 1/2)");
  }
};

/// Once any component of the consensus+innovations state exceeds this bound
/// the step's result is discarded and the state held fixed. At the step
/// sizes above, realistic switching graphs make per-step factors expansive
/// for a very long transient, so trajectories can grow without bound; the
/// clamp keeps every downstream statistic (squared errors, their squares for
/// standard errors) a finite double while still recording a divergence that
/// is dozens of orders of magnitude beyond any meaningful estimate.
inline constexpr double kCiOverflowGuard = 1e70;

/// Per-trajectory diagnostics of the consensus+innovations baseline.
/// `unstable_steps` counts steps whose consensus factor I - beta(t) L(t) has
/// norm above one (beta(t) * lambda_max(L) > 2); `frozen_at` records the
/// first step, if any, at which the overflow guard engaged.
struct CiDiagnostics {
  std::int64_t unstable_steps = 0;
  int frozen_at = -1;
};

/**
 * One step of the consensus+innovations baseline,
 *
 *   theta(t) = theta(t-1) - beta(t) (L(t) (x) I_d) theta(t-1)
 *              + alpha(t) C (y(t) - H theta(t-1)),
 *
 * applied blockwise: agent n moves by -beta sum_{m ~ n} (theta_n - theta_m)
 * plus alpha C_n (y_n - H_n theta_n). L(t) is the Laplacian of the step's
 * edge set; alpha(t) = 1/t and beta(t) = t^{-r}. Running means are advanced
 * too so traces remain comparable with the other estimators.
 *
 * Destabilized steps (norm of I - beta L above one) are not an error; they
 * are counted in `diag` when `lap_lambda_max` (the precomputed largest
 * Laplacian eigenvalue of `edges`) is supplied. See kCiOverflowGuard for the
 * divergence clamp.
 */
inline void ci_step(NetworkEstimate& state, const EdgeSet& edges,
                    const Measurement& y, const SensingModel& model,
                    const CiConfig& cfg, CiDiagnostics* diag = nullptr,
                    double lap_lambda_max = -1.0) {
  const int agents = state.agents;
  const int d = state.dim;
  if (static_cast<int>(y.per_agent.size()) != agents)
    throw std::invalid_argument("measurement does not match network size");
  cfg.validate();
  const int t = state.t + 1;
  const double alpha = 1.0 / static_cast<double>(t);
  const double beta = std::pow(static_cast<double>(t), -cfg.r);
  if (diag && lap_lambda_max > 0.0 && beta * lap_lambda_max > 2.0)
    ++diag->unstable_steps;

  const bool frozen = diag && diag->frozen_at >= 0;
  if (!frozen) {
    const auto adj = edges.adjacency(agents);
    Eigen::MatrixXd next(d, agents);
    for (int n = 0; n < agents; ++n) {
      Eigen::VectorXd acc = state.agent(n);
      for (int m : adj[n]) acc -= beta * (state.agent(n) - state.agent(m));
      acc += alpha * (model.gain(n) *
                      (y.per_agent[n] - model.sensing(n) * state.agent(n)));
      next.col(n) = acc;
    }
    if (next.allFinite() && next.cwiseAbs().maxCoeff() <= kCiOverflowGuard) {
      for (int n = 0; n < agents; ++n) state.agent(n) = next.col(n);
    } else if (diag) {
      diag->frozen_at = t;
    }
  }

  const double step = 1.0 / static_cast<double>(t);
  for (int m = 0; m < agents; ++m)
    state.y_bar[m] += step * (y.per_agent[m] - state.y_bar[m]);
  state.t = t;
}

/// Centralized maximum-likelihood estimate from running observation means:
/// theta_ml(t) = (1/N) sum_n C_n y_bar_n(t). Coincides with the least
/// squares solution over all observations up to time t.
inline Eigen::VectorXd ml_estimate(const SensingModel& model,
                                   const std::vector<Eigen::VectorXd>& y_bar) {
  if (static_cast<int>(y_bar.size()) != model.agents())
    throw std::invalid_argument("running means do not match network size");
  Eigen::VectorXd est = Eigen::VectorXd::Zero(model.dim());
  for (int n = 0; n < model.agents(); ++n) est += model.gain(n) * y_bar[n];
  return est / static_cast<double>(model.agents());
}

}  // namespace fade
