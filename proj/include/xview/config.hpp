#pragma once

// Key/value settings shared by the config file, the command line and the
// run manifest.
//
// Config file schema: one `key = value` per line; `#` starts a comment;
// blank lines are ignored. Keys are the snake_case names listed by
// settings_keys(); booleans are true/false; enums use their lowercase names.
// Unknown or repeated keys are errors.

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "xview/datagen.hpp"
#include "xview/train.hpp"

namespace xview {

struct RunSettings {
  TrainConfig train;
  SyntheticSpec synthetic;
};

struct SettingKey {
  std::string name;
  std::string help;
  bool synthetic = false;  // describes the synthetic corpus, not training
  std::function<std::string(const RunSettings&)> get;
  std::function<void(RunSettings&, const std::string&)> set;
};

const std::vector<SettingKey>& settings_keys();
const SettingKey* find_setting(const std::string& name);

// Parses `key = value` text. Throws ErrorCode::kConfig on malformed lines,
// unknown keys or duplicates.
std::map<std::string, std::string> parse_settings(std::istream& in);
std::map<std::string, std::string> parse_settings_file(const std::string& path);

void apply_setting(RunSettings& settings, const std::string& key, const std::string& value);

enum class SettingSource { kDefault, kFile, kFlag };
const char* to_string(SettingSource s);

struct ResolvedSetting {
  std::string key;
  std::string value;
  SettingSource source = SettingSource::kDefault;
};

// Flag beats file beats default. Every key appears in the result.
std::vector<ResolvedSetting> resolve_settings(RunSettings& settings,
                                              const std::map<std::string, std::string>& file,
                                              const std::map<std::string, std::string>& flags);

// Shortest text that reads back to the same double.
std::string format_double(double v);

}  // namespace xview
