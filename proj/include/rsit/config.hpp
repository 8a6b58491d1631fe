#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rsit/changedetect.hpp"
#include "rsit/data.hpp"
#include "rsit/trainer.hpp"

namespace rsit {

/// Raised for unknown keys or unparsable values in a config file or override.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a CLI invocation can be configured with. Keys are `section.name`
/// (e.g. `train.lr0`, `pcakm.block`) plus the top-level `seed`.
struct RunConfig {
  std::uint64_t seed = 0;
  train::TrainConfig train;
  /// Square training crop taken from each image.
  int crop = 256;
  cd::PcakmConfig pcakm;
  data::BenchmarkSpec bench;
  std::string extractor = "tiny-cnn";
  std::string weights;
  int is_splits = 1;

  /// Sets one key. Throws ConfigError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  /// Copies `seed` into every seeded component and fills derived defaults.
  void resolve();
  /// Flat `key = value` dump, one per line, sorted by key; parses back through `set`.
  std::string dump() const;

  /// Desk-scale preset: 1/8-width networks on 64x64 crops.
  void apply_desk_preset();

 private:
  bool epochs_constant_set_ = false;
};

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Throws ConfigError with the line number on malformed lines.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

/// `base`, then the file (if any), then `overrides` in order, then resolve().
RunConfig load_run_config(const std::filesystem::path& file,
                          const std::vector<std::pair<std::string, std::string>>& overrides,
                          RunConfig base = {});

}  // namespace rsit
