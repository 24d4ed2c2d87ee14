#pragma once

// Static SVG rendering of regret and moderation curves.

#include <filesystem>
#include <string>
#include <vector>

#include "hyperagent/runner.hpp"

namespace hyperagent {

/// Mean cumulative regret per agent with a shaded p10-p90 band and a legend.
std::string regret_svg(const AggregateResult& result, const std::string& title);

/// Accuracy against labeling effort (cumulative publishes), one curve per agent.
std::string moderation_svg(const std::vector<ModerationCurve>& curves, const std::string& title);

/// Writes <env>_regret.svg and, when curves are given, <env>_accuracy_effort.svg.
/// Write failures raise std::runtime_error naming the path.
std::vector<std::filesystem::path> render_plots(const AggregateResult& result,
                                                const std::vector<ModerationCurve>& moderation,
                                                const std::string& env_name,
                                                const std::filesystem::path& out_dir);

}  // namespace hyperagent
