#pragma once

// Flat `key = value` configuration files. Lines starting with '#' (after
// optional whitespace) and blank lines are ignored; trailing "# ..." comments
// are stripped. Every key has a default and unknown keys are rejected.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rrtrack/eval.hpp"
#include "rrtrack/tracker.hpp"
#include "rrtrack/trainer.hpp"

namespace rrtrack {

struct AppConfig {
  TrainConfig train;
  TrackerOptions tracker;
  VotOptions vot;
};

/// Throws UsageError naming the offending line.
AppConfig parse_config(std::string_view text, std::string_view origin = "<config>");
AppConfig load_config(const std::filesystem::path& path);

/// Every accepted key, in documentation order.
std::vector<std::string> config_keys();

/// `key = value` lines reproducing `config` (parse_config of the result gives
/// back an equal configuration).
std::string render_config(const AppConfig& config);

/// Parses "5x16,3x32/2,11x96/4+2" (kernel x channels [/stride] [+pad]).
std::vector<ConvBlockSpec> parse_conv_blocks(std::string_view text);
std::string render_conv_blocks(const std::vector<ConvBlockSpec>& blocks);

}  // namespace rrtrack
