#include "hba/run_config.hpp"

#include <cstddef>
#include <fstream>
#include <stdexcept>

#include "hba/errors.hpp"

namespace hba {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + ": not an integer: '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + ": not a number: '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("config: " + key + ": expected 0/1/true/false, got '" + value + "'");
}

}  // namespace

PipelineMode mode_from_string(const std::string& s) {
  if (s == "hierarchical") return PipelineMode::Hierarchical;
  if (s == "original_ba") return PipelineMode::OriginalBa;
  if (s == "reduced_ba") return PipelineMode::ReducedBa;
  if (s == "direct_assign") return PipelineMode::DirectAssign;
  throw ConfigError("unknown mode: " + s);
}

std::string mode_to_string(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::Hierarchical: return "hierarchical";
    case PipelineMode::OriginalBa: return "original_ba";
    case PipelineMode::ReducedBa: return "reduced_ba";
    case PipelineMode::DirectAssign: return "direct_assign";
  }
  return "hierarchical";
}

void apply_setting(RunSettings& s, const std::string& key, const std::string& value) {
  auto& py = s.pipeline.pyramid;
  auto& ba = s.pipeline.ba;
  auto& pg = s.pipeline.pg;
  if (key == "window_size") py.window = parse_int(key, value);
  else if (key == "stride") py.stride = parse_int(key, value);
  else if (key == "workers") py.workers = parse_int(key, value);
  else if (key == "layers") py.layers = parse_int(key, value);
  else if (key == "theta_local") py.theta_local = parse_double(key, value);
  else if (key == "voxel_local") py.voxel_local = parse_double(key, value);
  else if (key == "theta_global") py.theta_global = parse_double(key, value);
  else if (key == "voxel_global") py.voxel_global = parse_double(key, value);
  else if (key == "min_points") py.min_points = parse_int(key, value);
  else if (key == "max_depth") py.max_depth = parse_int(key, value);
  else if (key == "ba_max_iter") ba.max_iter = parse_int(key, value);
  else if (key == "lambda_init") ba.lambda_init = parse_double(key, value);
  else if (key == "lambda_up") ba.lambda_up = parse_double(key, value);
  else if (key == "lambda_dn") ba.lambda_dn = parse_double(key, value);
  else if (key == "grad_tol") ba.grad_tol = parse_double(key, value);
  else if (key == "step_tol") ba.step_tol = parse_double(key, value);
  else if (key == "pg_max_iter") pg.max_iter = parse_int(key, value);
  else if (key == "pg_grad_tol") pg.grad_tol = parse_double(key, value);
  else if (key == "max_passes") s.pipeline.max_passes = parse_int(key, value);
  else if (key == "rel_cost_tol") s.pipeline.rel_cost_tol = parse_double(key, value);
  else if (key == "filter_enabled") s.filter_enabled = parse_bool(key, value);
  else if (key == "filter_size") s.filter_size = parse_double(key, value);
  else if (key == "mode") s.pipeline.mode = mode_from_string(value);
  else if (key == "scan_format") s.scan_format = scan_format_from_string(value);
  else if (key == "pose_format") s.pose_format = pose_format_from_string(value);
  else if (key == "mme_radius") s.mme_radius = parse_double(key, value);
  else throw ConfigError("config: unknown key '" + key + "'");
}

RunSettings load_run_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  RunSettings s;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    apply_setting(s, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return s;
}

}  // namespace hba
