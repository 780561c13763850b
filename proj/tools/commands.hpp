#pragma once

#include "config.hpp"

namespace dsar::cli {

void cmd_fit(const FitConfig& config);
void cmd_detect(const DetectConfig& config);
void cmd_simulate(const SimulateConfig& config);
void cmd_replicate(const ReplicateConfig& config);

}  // namespace dsar::cli
