#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "fade/config.hpp"
#include "fade/simulation.hpp"
#include "fade/version.hpp"

namespace fade {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return os;
}

}  // namespace detail

/// Writes the aggregated error curves. One row per (estimator, recorded
/// time, agent); agents are 1-based and the centralized estimator reports as
/// agent 0. Values use 17 significant digits, so rewriting the same summary
/// is byte identical.
inline void write_curves_csv(std::ostream& os, const McSummary& summary) {
  os << "estimator,t,agent,mse,scaled_mse,bias_norm,mse_stderr\n";
  for (int k = 0; k < 3; ++k) {
    if (!summary.curves[k]) continue;
    const auto& curve = *summary.curves[k];
    const auto kind = static_cast<EstimatorKind>(k);
    const bool central = kind == EstimatorKind::kMl;
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      for (Eigen::Index n = 0; n < curve.mse.cols(); ++n) {
        os << estimator_name(kind) << ',' << curve.times[i] << ','
           << (central ? 0 : static_cast<int>(n) + 1) << ','
           << detail::g17(curve.mse(row, n)) << ','
           << detail::g17(curve.scaled_mse(row, n)) << ','
           << detail::g17(curve.bias[i].row(n).norm()) << ','
           << detail::g17(curve.mse_stderr(row, n)) << '\n';
      }
    }
  }
}

inline void write_curves_csv(const std::filesystem::path& path,
                             const McSummary& summary) {
  auto os = detail::open_out(path);
  write_curves_csv(os, summary);
}

/// Writes the tracked coordinate of a single estimate-policy run: one row
/// per recorded time with a column per enabled estimator plus the true
/// value. `track_agent`/`track_coord` are 0-based here.
inline void write_trajectory_csv(std::ostream& os, const RunTrace& trace,
                                 const Eigen::VectorXd& theta, int track_agent,
                                 int track_coord) {
  if (trace.record != RecordKind::kEstimates)
    throw std::invalid_argument("trajectory output needs record = estimates");
  os << "t";
  for (int k = 0; k < 3; ++k)
    if (trace.estimators[k]) os << ',' << estimator_name(static_cast<EstimatorKind>(k));
  os << ",true\n";
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    os << trace.times[i];
    for (int k = 0; k < 3; ++k) {
      if (!trace.estimators[k]) continue;
      const auto& sample = trace.estimators[k]->samples[i];
      const int agent =
          static_cast<EstimatorKind>(k) == EstimatorKind::kMl ? 0 : track_agent;
      os << ',' << detail::g17(sample(agent, track_coord));
    }
    os << ',' << detail::g17(theta(track_coord)) << '\n';
  }
}

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const RunTrace& trace, const Eigen::VectorXd& theta,
                                 int track_agent, int track_coord) {
  auto os = detail::open_out(path);
  write_trajectory_csv(os, trace, theta, track_agent, track_coord);
}

/// Writes the manifest: a comment header with the toolkit version followed
/// by the canonical config echo. The manifest is itself a valid config;
/// running it reproduces the experiment bit for bit.
inline void write_manifest(std::ostream& os, const ExperimentConfig& cfg) {
  os << "# fade experiment manifest (version " << kVersion << ")\n";
  os << "# rerun with: fade run <this file> --out <dir>\n";
  os << echo_config(cfg);
}

inline void write_manifest(const std::filesystem::path& path,
                           const ExperimentConfig& cfg) {
  auto os = detail::open_out(path);
  write_manifest(os, cfg);
}

}  // namespace fade
