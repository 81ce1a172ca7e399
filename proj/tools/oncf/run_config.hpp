#pragma once

// Flat `key = value` run configuration. Lines starting with `#` are comments,
// later keys override earlier ones and command-line `--key=value` overrides
// are applied last. Unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "oncf/gradcheck.hpp"
#include "oncf/model.hpp"
#include "oncf/training.hpp"

namespace oncf::cli {

struct RunConfig {
  std::filesystem::path data;  // interaction file; the only key without a default
  std::filesystem::path out = "out";
  ModelSpec spec = ModelSpec::convncf(Variant::MF, 64, 32);
  TrainConfig train;
  std::size_t min_item = 1;
  std::size_t min_user = 1;
  std::optional<std::uint64_t> split_seed;  // derived from `seed` when unset
  std::size_t eval_negatives = 999;
  std::filesystem::path pretrained;  // shallow checkpoint to warm-start from
  std::filesystem::path checkpoint;  // eval / recommend input; defaults to <out>/model.ckpt
  GradCheckOptions gradcheck;

  std::uint64_t effective_split_seed() const;
  std::filesystem::path effective_checkpoint() const;
};

// Applies one setting; throws ConfigError naming the key.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// Reads settings from a config stream on top of `config`.
void read_config(std::istream& in, RunConfig& config);

// File (optional) then `--key=value` overrides.
RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

// One line per key with its default, for --help output and the README.
std::string describe_keys();

}  // namespace oncf::cli
