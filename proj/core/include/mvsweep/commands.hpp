#pragma once

#include <string>

#include "mvsweep/config.hpp"

namespace mvsweep {

// CLI-facing operations. All throw mvsweep::Error on failure; outputs are
// deterministic under a fixed seed.

void cmd_synth(const RunConfig& cfg, const std::string& out_dir);

void cmd_train(const RunConfig& cfg, const std::string& scenes_dir,
               const std::string& out_prefix);

// checkpoint_prefix may be empty: seeded freshly initialized weights.
// baseline = true runs the fixed-shrink cascade instead of the learned one.
void cmd_infer(const RunConfig& cfg, const std::string& scene_dir,
               const std::string& checkpoint_prefix, const std::string& out_dir,
               bool baseline = false, const std::string& method_name = "");

void cmd_fuse(const RunConfig& cfg, const std::string& depth_dir,
              const std::string& out_ply);

void cmd_eval(const RunConfig& cfg, const std::string& pred_dir,
              const std::string& gt_dir, const std::string& report_csv);

// Returns true when every gradient check stays within tolerance.
bool cmd_gradcheck(const RunConfig& cfg);

} // namespace mvsweep
