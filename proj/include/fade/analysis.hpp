#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fade/model.hpp"

namespace fade {

/// Split of a stacked network vector u (N blocks of dimension d) into its
/// consensus part (the network average, one block) and the residual
/// u - 1 (x) average, which sums to zero blockwise.
struct ConsensusDecomposition {
  Eigen::VectorXd average;   // d
  Eigen::VectorXd residual;  // N * d
};

inline ConsensusDecomposition decompose(const Eigen::VectorXd& u, int agents,
                                        int dim) {
  if (u.size() != static_cast<Eigen::Index>(agents) * dim)
    throw std::invalid_argument("stacked vector size does not match agents * dim");
  ConsensusDecomposition dec;
  dec.average = Eigen::VectorXd::Zero(dim);
  for (int n = 0; n < agents; ++n)
    dec.average += u.segment(static_cast<Eigen::Index>(n) * dim, dim);
  dec.average /= static_cast<double>(agents);
  dec.residual = u;
  for (int n = 0; n < agents; ++n)
    dec.residual.segment(static_cast<Eigen::Index>(n) * dim, dim) -= dec.average;
  return dec;
}

/// Exact mean squared error of the centralized ML estimator at time t under
/// unit-variance noise: tr((sum_n H_n' H_n)^{-1}) / t. The estimator is
/// unbiased, so its scaled error t * MSE is this constant for every t.
inline double ml_mse_closed_form(const SensingModel& model, int t) {
  if (t < 1) throw std::invalid_argument("time index must be >= 1");
  if (!model.observable())
    throw ObservabilityError("closed-form ML error needs an observable model");
  Eigen::LLT<Eigen::MatrixXd> llt(model.gram());
  const double trace_inv =
      llt.solve(Eigen::MatrixXd::Identity(model.dim(), model.dim())).trace();
  return trace_inv / static_cast<double>(model.agents()) / static_cast<double>(t);
}

/// Empirical error statistics of one estimator on a grid of recorded times.
/// Matrices are times x agents (the centralized estimator counts as a single
/// "agent"); `bias` holds the mean error vector per agent at each time.
struct ErrorCurve {
  std::vector<int> times;
  Eigen::MatrixXd mse;         // mean squared error norm
  Eigen::MatrixXd scaled_mse;  // t * mse
  Eigen::MatrixXd mse_stderr;  // Monte Carlo standard error of mse
  std::vector<Eigen::MatrixXd> bias;  // per time: agents x dim
  int runs = 0;
};

/// Streaming Monte Carlo reduction over per-run error samples. Runs must be
/// fed in run-index order; the reduction is a fixed-order sum, so results
/// are bitwise identical no matter how the runs were produced (sequentially
/// or block-parallel).
class McAccumulator {
 public:
  McAccumulator(std::vector<int> times, int agents, int dim)
      : times_(std::move(times)), agents_(agents), dim_(dim) {
    const auto t = static_cast<Eigen::Index>(times_.size());
    sum_sq_ = Eigen::MatrixXd::Zero(t, agents_);
    sum_sq_sq_ = Eigen::MatrixXd::Zero(t, agents_);
    sum_err_.assign(times_.size(), Eigen::MatrixXd::Zero(agents_, dim_));
  }

  /// errors[i] is the agents x dim error matrix at recorded time times[i].
  void add_run(const std::vector<Eigen::MatrixXd>& errors) {
    if (errors.size() != times_.size())
      throw std::invalid_argument("run sample count does not match the time grid");
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (errors[i].rows() != agents_ || errors[i].cols() != dim_)
        throw std::invalid_argument("run sample has wrong shape");
      for (int n = 0; n < agents_; ++n) {
        const double sq = errors[i].row(n).squaredNorm();
        sum_sq_(static_cast<Eigen::Index>(i), n) += sq;
        sum_sq_sq_(static_cast<Eigen::Index>(i), n) += sq * sq;
      }
      sum_err_[i] += errors[i];
    }
    ++runs_;
  }

  ErrorCurve finish() const {
    if (runs_ < 1) throw std::logic_error("no runs accumulated");
    ErrorCurve curve;
    curve.times = times_;
    curve.runs = runs_;
    const double r = static_cast<double>(runs_);
    curve.mse = sum_sq_ / r;
    curve.scaled_mse = curve.mse;
    for (std::size_t i = 0; i < times_.size(); ++i)
      curve.scaled_mse.row(static_cast<Eigen::Index>(i)) *=
          static_cast<double>(times_[i]);
    curve.mse_stderr = Eigen::MatrixXd::Zero(sum_sq_.rows(), sum_sq_.cols());
    for (Eigen::Index i = 0; i < sum_sq_.rows(); ++i)
      for (Eigen::Index n = 0; n < sum_sq_.cols(); ++n) {
        const double mean = curve.mse(i, n);
        double var = sum_sq_sq_(i, n) / r - mean * mean;
        if (!std::isfinite(var))
          var = std::numeric_limits<double>::infinity();
        curve.mse_stderr(i, n) = std::sqrt(std::max(var, 0.0) / r);
      }
    curve.bias.reserve(sum_err_.size());
    for (const auto& s : sum_err_) curve.bias.push_back(s / r);
    return curve;
  }

  const std::vector<int>& times() const { return times_; }
  int runs() const { return runs_; }

 private:
  std::vector<int> times_;
  int agents_;
  int dim_;
  int runs_ = 0;
  Eigen::MatrixXd sum_sq_;
  Eigen::MatrixXd sum_sq_sq_;
  std::vector<Eigen::MatrixXd> sum_err_;
};

}  // namespace fade
