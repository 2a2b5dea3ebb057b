#include "rrtrack/config.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "rrtrack/errors.hpp"

namespace rrtrack {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) throw UsageError(fmt::format("'{}' is not a valid number", v));
  return out;
}

std::size_t parse_size(std::string_view v) { return parse_number<std::size_t>(v); }
int parse_int(std::string_view v) { return parse_number<int>(v); }

double parse_real(std::string_view v) {
  const double d = parse_number<double>(v);
  if (!std::isfinite(d)) throw UsageError(fmt::format("'{}' is not a finite number", v));
  return d;
}

double parse_unit(std::string_view v) {
  const double d = parse_real(v);
  if (d < 0.0 || d > 1.0) throw UsageError(fmt::format("'{}' must lie in [0,1]", v));
  return d;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError(fmt::format("'{}' is not a boolean", v));
}

std::vector<std::size_t> parse_size_list(std::string_view v) {
  std::vector<std::size_t> out;
  for (auto part : split(v, ',')) out.push_back(parse_size(part));
  return out;
}

std::string real(double v) { return fmt::format("{}", v); }

struct Key {
  std::string name;
  std::function<void(AppConfig&, std::string_view)> set;
  std::function<std::string(const AppConfig&)> get;
};

#define RR_SIZE(key, field)                                                          \
  Key { key, [](AppConfig& c, std::string_view v) { c.field = parse_size(v); },      \
        [](const AppConfig& c) { return std::to_string(c.field); } }
#define RR_INT(key, field)                                                           \
  Key { key, [](AppConfig& c, std::string_view v) { c.field = parse_int(v); },       \
        [](const AppConfig& c) { return std::to_string(c.field); } }
#define RR_REAL(key, field)                                                          \
  Key { key, [](AppConfig& c, std::string_view v) { c.field = parse_real(v); },      \
        [](const AppConfig& c) { return real(c.field); } }
#define RR_UNIT(key, field)                                                          \
  Key { key, [](AppConfig& c, std::string_view v) { c.field = parse_unit(v); },      \
        [](const AppConfig& c) { return real(c.field); } }
#define RR_BOOL(key, field)                                                          \
  Key { key, [](AppConfig& c, std::string_view v) { c.field = parse_bool(v); },      \
        [](const AppConfig& c) { return std::string(c.field ? "true" : "false"); } }
#define RR_U64(key, field)                                                           \
  Key { key, [](AppConfig& c, std::string_view v) { c.field = parse_number<std::uint64_t>(v); }, \
        [](const AppConfig& c) { return std::to_string(c.field); } }

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = {
      Key{"network.preset",
          [](AppConfig& c, std::string_view v) {
            if (v == "desk") {
              c.train.network = NetworkConfig::desk();
            } else if (v == "small") {
              c.train.network = NetworkConfig::small();
            } else if (v == "full") {
              c.train.network = NetworkConfig::full_scale();
            } else {
              throw UsageError(fmt::format("unknown network preset '{}' (desk, small, full)", v));
            }
          },
          [](const AppConfig& c) -> std::string {
            if (c.train.network == NetworkConfig::small()) return "small";
            if (c.train.network == NetworkConfig::full_scale()) return "full";
            return "desk";
          }},
      RR_SIZE("network.crop_size", train.network.crop_size),
      Key{"network.conv_blocks",
          [](AppConfig& c, std::string_view v) { c.train.network.conv_blocks = parse_conv_blocks(v); },
          [](const AppConfig& c) { return render_conv_blocks(c.train.network.conv_blocks); }},
      Key{"network.skip_channels",
          [](AppConfig& c, std::string_view v) { c.train.network.skip_channels = parse_size_list(v); },
          [](const AppConfig& c) { return fmt::format("{}", fmt::join(c.train.network.skip_channels, ",")); }},
      RR_SIZE("network.embed_dim", train.network.embed_dim),
      RR_SIZE("network.lstm_units", train.network.lstm_units),
      RR_U64("network.seed", train.network.seed),
      RR_U64("train.seed", train.seed),
      RR_REAL("train.lr_initial", train.lr_initial),
      RR_REAL("train.lr_final", train.lr_final),
      RR_UNIT("train.lr_drop_fraction", train.lr_drop_fraction),
      RR_SIZE("train.plateau_window", train.plateau.window),
      RR_REAL("train.plateau_threshold", train.plateau.threshold),
      RR_SIZE("train.stage_cap", train.plateau.stage_cap),
      RR_BOOL("train.self_training", train.self_training),
      RR_UNIT("train.mirror_probability", train.mirror_probability),
      RR_SIZE("train.checkpoint_every", train.checkpoint_every),
      Key{"train.profile",
          [](AppConfig& c, std::string_view v) {
            if (v == "test") {
              c.train.checkpoint_dtype = DType::f64;
            } else if (v == "fast") {
              c.train.checkpoint_dtype = DType::f32;
            } else {
              throw UsageError(fmt::format("unknown profile '{}' (test, fast)", v));
            }
          },
          [](const AppConfig& c) { return std::string(c.train.checkpoint_dtype == DType::f64 ? "test" : "fast"); }},
      RR_INT("synth.frame_width", train.synth.frame_width),
      RR_INT("synth.frame_height", train.synth.frame_height),
      Key{"synth.source",
          [](AppConfig& c, std::string_view v) {
            if (v == "procedural") {
              c.train.synth.source.mode = PatchSource::Mode::procedural;
            } else if (v == "images") {
              c.train.synth.source.mode = PatchSource::Mode::image_directory;
            } else {
              throw UsageError(fmt::format("unknown patch source '{}' (procedural, images)", v));
            }
          },
          [](const AppConfig& c) {
            return std::string(c.train.synth.source.mode == PatchSource::Mode::procedural ? "procedural" : "images");
          }},
      Key{"synth.image_dir", [](AppConfig& c, std::string_view v) { c.train.synth.source.image_dir = std::string(v); },
          [](const AppConfig& c) { return c.train.synth.source.image_dir.string(); }},
      RR_UNIT("synth.min_area_fraction", train.synth.source.min_area_fraction),
      RR_UNIT("synth.max_area_fraction", train.synth.max_area_fraction),
      RR_INT("synth.min_occluders", train.synth.min_occluders),
      RR_INT("synth.max_occluders", train.synth.max_occluders),
      RR_UNIT("synth.occluder_min_area_fraction", train.synth.occluder_min_area_fraction),
      RR_UNIT("synth.occluder_max_area_fraction", train.synth.occluder_max_area_fraction),
      RR_REAL("synth.speed_min", train.synth.motion.speed_min),
      RR_REAL("synth.speed_max", train.synth.motion.speed_max),
      RR_REAL("synth.sigma_speed", train.synth.motion.sigma_speed),
      RR_REAL("synth.sigma_dir", train.synth.motion.sigma_dir),
      RR_REAL("synth.sigma_aspect", train.synth.motion.sigma_aspect),
      RR_REAL("synth.sigma_scale", train.synth.motion.sigma_scale),
      RR_REAL("synth.min_extent", train.synth.min_extent),
      RR_UNIT("synth.occlusion_threshold", train.synth.occlusion_threshold),
      RR_INT("synth.max_retries", train.synth.max_retries),
      RR_SIZE("track.reset_interval", tracker.reset_interval),
      RR_BOOL("track.reset_enabled", tracker.reset_enabled),
      RR_SIZE("eval.reinit_gap", vot.reinit_gap),
      RR_REAL("eval.robustness_scale", vot.robustness_scale),
  };
  return keys;
}

#undef RR_SIZE
#undef RR_INT
#undef RR_REAL
#undef RR_UNIT
#undef RR_BOOL
#undef RR_U64

const Key* find_key(std::string_view name) {
  for (const auto& k : key_table()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

void validate(const AppConfig& c) {
  c.train.network.validate();
  const auto& s = c.train.synth;
  if (s.frame_width < 16 || s.frame_height < 16) throw UsageError("synth frames must be at least 16x16");
  if (s.min_occluders < 0 || s.max_occluders < s.min_occluders) throw UsageError("bad occluder count range");
  if (s.motion.speed_max < s.motion.speed_min || s.motion.speed_min < 0.0) throw UsageError("bad speed range");
  if (s.source.min_area_fraction > s.max_area_fraction) throw UsageError("min area fraction exceeds max");
  if (s.occluder_min_area_fraction > s.occluder_max_area_fraction) throw UsageError("bad occluder area range");
  if (s.source.mode == PatchSource::Mode::image_directory && s.source.image_dir.empty()) {
    throw UsageError("synth.source = images requires synth.image_dir");
  }
  if (c.train.lr_initial <= 0.0 || c.train.lr_final <= 0.0) throw UsageError("learning rates must be positive");
  if (c.tracker.reset_interval == 0) throw UsageError("track.reset_interval must be positive");
  if (c.vot.reinit_gap == 0) throw UsageError("eval.reinit_gap must be positive");
}

}  // namespace

std::vector<ConvBlockSpec> parse_conv_blocks(std::string_view text) {
  std::vector<ConvBlockSpec> out;
  for (auto item : split(text, ',')) {
    ConvBlockSpec b;
    auto rest = item;
    const auto plus = rest.find('+');
    if (plus != std::string_view::npos) {
      b.pad = parse_int(rest.substr(plus + 1));
      rest = rest.substr(0, plus);
    }
    const auto slash = rest.find('/');
    if (slash != std::string_view::npos) {
      b.stride = parse_size(rest.substr(slash + 1));
      rest = rest.substr(0, slash);
    }
    const auto x = rest.find('x');
    if (x == std::string_view::npos) throw UsageError(fmt::format("conv block '{}' is not KxC", item));
    b.kernel = parse_size(rest.substr(0, x));
    b.channels = parse_size(rest.substr(x + 1));
    out.push_back(b);
  }
  return out;
}

std::string render_conv_blocks(const std::vector<ConvBlockSpec>& blocks) {
  std::string s;
  for (const auto& b : blocks) {
    if (!s.empty()) s += ',';
    s += fmt::format("{}x{}", b.kernel, b.channels);
    if (b.stride != 1) s += fmt::format("/{}", b.stride);
    if (b.pad >= 0) s += fmt::format("+{}", b.pad);
  }
  return s;
}

AppConfig parse_config(std::string_view text, std::string_view origin) {
  std::vector<std::pair<const Key*, std::string>> entries;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::istringstream is{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(fmt::format("{}:{}: expected 'key = value'", origin, line_no));
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const Key* k = find_key(key);
    if (!k) throw UsageError(fmt::format("{}:{}: unknown key '{}'", origin, line_no, key));
    if (auto it = seen.find(key); it != seen.end()) {
      throw UsageError(fmt::format("{}:{}: key '{}' already set on line {}", origin, line_no, key, it->second));
    }
    seen.emplace(std::string(key), line_no);
    entries.emplace_back(k, std::string(value));
  }

  AppConfig config;
  // The preset replaces the whole topology, so it goes before any override.
  std::stable_partition(entries.begin(), entries.end(),
                        [](const auto& e) { return e.first->name == "network.preset"; });
  for (const auto& [key, value] : entries) {
    try {
      key->set(config, value);
    } catch (const UsageError& e) {
      throw UsageError(fmt::format("{}: {}: {}", origin, key->name, e.what()));
    }
  }
  try {
    validate(config);
  } catch (const std::exception& e) {
    throw UsageError(fmt::format("{}: {}", origin, e.what()));
  }
  return config;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.name);
  return out;
}

std::string render_config(const AppConfig& config) {
  std::string s;
  for (const auto& k : key_table()) s += fmt::format("{} = {}\n", k.name, k.get(config));
  return s;
}

}  // namespace rrtrack
