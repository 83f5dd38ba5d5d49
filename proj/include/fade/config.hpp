#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fade {

/// Raised for malformed or inconsistent experiment configuration text.
/// Messages carry "name:line:" prefixes where a location is known.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SourceKind { kGenerate, kFile };

struct ModelConfig {
  SourceKind source = SourceKind::kGenerate;
  std::string path;
  int agents = 0;
  int dim = 0;
  int obs_dim = 0;
  int rank = 0;
  std::uint64_t seed = 0;
  int blind_agent = -1;  // 1-based in config text, -1 = none
  int blind_coord = -1;
};

struct NetworkConfig {
  SourceKind source = SourceKind::kGenerate;
  std::string path;
  int edge_sets = 0;
  double density = 0.0;
  std::uint64_t seed = 0;
  std::string weights_path;  // optional externally supplied mixing matrices
};

struct EstimatorConfig {
  bool fade = true;
  bool ci = true;
  bool ml = true;
  double ci_r = 0.05;
};

enum class RecordKind { kErrors, kEstimates };

struct RunSettings {
  int horizon = 1;
  int runs = 1;
  std::uint64_t base_seed = 0;
  RecordKind record = RecordKind::kErrors;
  int decimation = 10;
  int track_agent = -1;  // 1-based in config text, -1 = none
  int track_coord = -1;
};

struct ExperimentConfig {
  ModelConfig model;
  std::vector<double> theta;
  NetworkConfig network;
  EstimatorConfig estimators;
  RunSettings run;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] inline void cfg_fail(const std::string& name, int line,
                                  const std::string& what) {
  throw ConfigError(name + ":" + std::to_string(line) + ": " + what);
}

inline long long parse_int(const std::string& name, int line, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    cfg_fail(name, line, "expected an integer, got '" + v + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& name, int line,
                                const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long out = std::stoull(v, &pos);
    if (pos != v.size() || v.find('-') != std::string::npos)
      throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    cfg_fail(name, line, "expected a non-negative integer, got '" + v + "'");
  }
}

inline double parse_double(const std::string& name, int line, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    cfg_fail(name, line, "expected a number, got '" + v + "'");
  }
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Parses the flat key-value experiment format: '[section]' headers,
/// 'key = value' lines, '#' comments, blank lines ignored. Unknown sections
/// or keys are errors (reported with name:line), as are missing required
/// fields and out-of-range values. `name` labels the stream in messages.
inline ExperimentConfig parse_config(std::istream& is, const std::string& name) {
  ExperimentConfig cfg;
  std::string section;
  std::string line;
  int lineno = 0;
  bool saw_theta = false, saw_horizon = false;

  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') detail::cfg_fail(name, lineno, "unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "theta" && section != "network" &&
          section != "estimators" && section != "run")
        detail::cfg_fail(name, lineno, "unknown section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      detail::cfg_fail(name, lineno, "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) detail::cfg_fail(name, lineno, "empty key");
    if (value.empty()) detail::cfg_fail(name, lineno, "empty value for '" + key + "'");
    if (section.empty())
      detail::cfg_fail(name, lineno, "key '" + key + "' outside any section");

    if (section == "model") {
      if (key == "source") {
        if (value == "generate") cfg.model.source = SourceKind::kGenerate;
        else if (value == "file") cfg.model.source = SourceKind::kFile;
        else detail::cfg_fail(name, lineno, "model source must be 'generate' or 'file'");
      } else if (key == "path") cfg.model.path = value;
      else if (key == "agents") cfg.model.agents = static_cast<int>(detail::parse_int(name, lineno, value));
      else if (key == "dim") cfg.model.dim = static_cast<int>(detail::parse_int(name, lineno, value));
      else if (key == "obs_dim") cfg.model.obs_dim = static_cast<int>(detail::parse_int(name, lineno, value));
      else if (key == "rank") cfg.model.rank = static_cast<int>(detail::parse_int(name, lineno, value));
      else if (key == "seed") cfg.model.seed = detail::parse_uint(name, lineno, value);
      else if (key == "blind_agent") cfg.model.blind_agent = static_cast<int>(detail::parse_int(name, lineno, value));
      else if (key == "blind_coord") cfg.model.blind_coord = static_cast<int>(detail::parse_int(name, lineno, value));
      else detail::cfg_fail(name, lineno, "unknown key '" + key + "' in [model]");
    } else if (section == "theta") {
      if (key == "values") {
        cfg.theta.clear();
        for (const auto& tok : detail::split_list(value))
          cfg.theta.push_back(detail::parse_double(name, lineno, tok));
        saw_theta = true;
      } else detail::cfg_fail(name, lineno, "unknown key '" + key + "' in [theta]");
    } else if (section == "network") {
      if (key == "source") {
        if (value == "generate") cfg.network.source = SourceKind::kGenerate;
        else if (value == "file") cfg.network.source = SourceKind::kFile;
        else detail::cfg_fail(name, lineno, "network source must be 'generate' or 'file'");
      } else if (key == "path") cfg.network.path = value;
      else if (key == "edge_sets") cfg.network.edge_sets = static_cast<int>(detail::parse_int(name, lineno, value));
      else if (key == "density") cfg.network.density = detail::parse_double(name, lineno, value);
      else if (key == "seed") cfg.network.seed = detail::parse_uint(name, lineno, value);
      else if (key == "weights") cfg.network.weights_path = value;
      else detail::cfg_fail(name, lineno, "unknown key '" + key + "' in [network]");
    } else if (section == "estimators") {
      if (key == "enable") {
        cfg.estimators.fade = cfg.estimators.ci = cfg.estimators.ml = false;
        const auto toks = detail::split_list(value);
        if (toks.empty()) detail::cfg_fail(name, lineno, "empty estimator list");
        for (const auto& tok : toks) {
          if (tok == "fade") cfg.estimators.fade = true;
          else if (tok == "ci") cfg.estimators.ci = true;
          else if (tok == "ml") cfg.estimators.ml = true;
          else detail::cfg_fail(name, lineno, "unknown estimator '" + tok + "'");
        }
      } else if (key == "ci_r") cfg.estimators.ci_r = detail::parse_double(name, lineno, value);
      else detail::cfg_fail(name, lineno, "unknown key '" + key + "' in [estimators]");
    } else if (section == "run") {
      if (key == "horizon") { cfg.run.horizon = static_cast<int>(detail::parse_int(name, lineno, value)); saw_horizon = true; }
      else if (key == "runs") cfg.run.runs = static_cast<int>(detail::parse_int(name, lineno, value));
      else if (key == "base_seed") cfg.run.base_seed = detail::parse_uint(name, lineno, value);
      else if (key == "record") {
        if (value == "errors") cfg.run.record = RecordKind::kErrors;
        else if (value == "estimates") cfg.run.record = RecordKind::kEstimates;
        else detail::cfg_fail(name, lineno, "record must be 'errors' or 'estimates'");
      } else if (key == "decimation") cfg.run.decimation = static_cast<int>(detail::parse_int(name, lineno, value));
      else if (key == "track_agent") cfg.run.track_agent = static_cast<int>(detail::parse_int(name, lineno, value));
      else if (key == "track_coord") cfg.run.track_coord = static_cast<int>(detail::parse_int(name, lineno, value));
      else detail::cfg_fail(name, lineno, "unknown key '" + key + "' in [run]");
    }
  }

  // Structural requirements that do not need the built model or network.
  auto fail = [&](const std::string& what) { throw ConfigError(name + ": " + what); };
  if (!saw_theta || cfg.theta.empty()) fail("[theta] values is required");
  if (!saw_horizon) fail("[run] horizon is required");
  if (cfg.run.horizon < 1) fail("horizon must be >= 1");
  if (cfg.run.runs < 1) fail("runs must be >= 1");
  if (cfg.run.decimation < 1) fail("decimation must be >= 1");
  if (cfg.model.source == SourceKind::kGenerate) {
    if (cfg.model.agents < 2) fail("[model] agents must be >= 2 when generating");
    if (cfg.model.dim < 1) fail("[model] dim must be >= 1 when generating");
    if (cfg.model.obs_dim < 1) fail("[model] obs_dim must be >= 1 when generating");
    if (cfg.model.rank < 1) fail("[model] rank must be >= 1 when generating");
  } else if (cfg.model.path.empty()) {
    fail("[model] path is required when source = file");
  }
  if (cfg.network.source == SourceKind::kGenerate) {
    if (cfg.network.edge_sets < 1) fail("[network] edge_sets must be >= 1 when generating");
    if (!(cfg.network.density > 0.0) || cfg.network.density > 1.0)
      fail("[network] density must lie in (0, 1] when generating");
  } else if (cfg.network.path.empty()) {
    fail("[network] path is required when source = file");
  }
  if (!cfg.estimators.fade && !cfg.estimators.ci && !cfg.estimators.ml)
    fail("at least one estimator must be enabled");
  if (cfg.estimators.ci && !(cfg.estimators.ci_r > 0.0 && cfg.estimators.ci_r < 0.5))
    fail("ci_r must lie in (0, 1/2)");
  if ((cfg.model.blind_agent > 0) != (cfg.model.blind_coord > 0))
    fail("blind_agent and blind_coord must be given together");
  if (cfg.model.blind_agent == 0 || cfg.model.blind_coord == 0)
    fail("blind_agent and blind_coord are 1-based");
  if ((cfg.run.track_agent > 0) != (cfg.run.track_coord > 0))
    fail("track_agent and track_coord must be given together");
  if (cfg.run.track_agent == 0 || cfg.run.track_coord == 0)
    fail("track_agent and track_coord are 1-based");
  return cfg;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  return parse_config(is, path.filename().string());
}

/// Canonical text form of a configuration. Re-parsing the echo yields an
/// identical ExperimentConfig; doubles are written with 17 significant
/// digits, optional fields are omitted when unset.
inline std::string echo_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "[model]\n";
  os << "source = " << (cfg.model.source == SourceKind::kGenerate ? "generate" : "file") << '\n';
  if (cfg.model.source == SourceKind::kFile) {
    os << "path = " << cfg.model.path << '\n';
  } else {
    os << "agents = " << cfg.model.agents << '\n';
    os << "dim = " << cfg.model.dim << '\n';
    os << "obs_dim = " << cfg.model.obs_dim << '\n';
    os << "rank = " << cfg.model.rank << '\n';
    os << "seed = " << cfg.model.seed << '\n';
  }
  if (cfg.model.blind_agent > 0) {
    os << "blind_agent = " << cfg.model.blind_agent << '\n';
    os << "blind_coord = " << cfg.model.blind_coord << '\n';
  }
  os << "\n[theta]\nvalues =";
  for (double v : cfg.theta) os << ' ' << detail::g17(v);
  os << '\n';
  os << "\n[network]\n";
  os << "source = " << (cfg.network.source == SourceKind::kGenerate ? "generate" : "file") << '\n';
  if (cfg.network.source == SourceKind::kFile) {
    os << "path = " << cfg.network.path << '\n';
  } else {
    os << "edge_sets = " << cfg.network.edge_sets << '\n';
    os << "density = " << detail::g17(cfg.network.density) << '\n';
    os << "seed = " << cfg.network.seed << '\n';
  }
  if (!cfg.network.weights_path.empty())
    os << "weights = " << cfg.network.weights_path << '\n';
  os << "\n[estimators]\nenable =";
  bool first = true;
  for (const auto& [on, label] : {std::pair<bool, const char*>{cfg.estimators.fade, "fade"},
                                  {cfg.estimators.ci, "ci"},
                                  {cfg.estimators.ml, "ml"}}) {
    if (!on) continue;
    os << (first ? " " : ", ") << label;
    first = false;
  }
  os << '\n';
  os << "ci_r = " << detail::g17(cfg.estimators.ci_r) << '\n';
  os << "\n[run]\n";
  os << "horizon = " << cfg.run.horizon << '\n';
  os << "runs = " << cfg.run.runs << '\n';
  os << "base_seed = " << cfg.run.base_seed << '\n';
  os << "record = " << (cfg.run.record == RecordKind::kErrors ? "errors" : "estimates") << '\n';
  os << "decimation = " << cfg.run.decimation << '\n';
  if (cfg.run.track_agent > 0) {
    os << "track_agent = " << cfg.run.track_agent << '\n';
    os << "track_coord = " << cfg.run.track_coord << '\n';
  }
  return os.str();
}

}  // namespace fade
