#pragma once

#include <string>

#include "hba/frame_io.hpp"
#include "hba/pipeline.hpp"

namespace hba {

// Flat key=value settings file: '#' starts a comment, blank lines are
// skipped, unknown keys are hard errors. Precedence is flags over file over
// the defaults below.
struct RunSettings {
  PipelineConfig pipeline;
  bool filter_enabled = false;
  double filter_size = 0.25;
  ScanFormat scan_format = ScanFormat::BinXyzi;
  PoseFormat pose_format = PoseFormat::Kitti;
  double mme_radius = 0.5;
};

// hierarchical | original_ba | reduced_ba | direct_assign
PipelineMode mode_from_string(const std::string& s);
std::string mode_to_string(PipelineMode mode);

// Applies one pair; ConfigError on an unknown key or an unparsable value.
void apply_setting(RunSettings& settings, const std::string& key, const std::string& value);

RunSettings load_run_settings(const std::string& path);

}  // namespace hba
