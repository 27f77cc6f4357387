#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cbsa/attention.hpp"

namespace cbsa {

struct ExperimentConfig {
  std::uint64_t seed = 0;
  double epsilon = 0.5;
  double kappa = 1.0;
  std::size_t d = 48;
  std::size_t heads = 4;
  std::size_t m = 12;
  std::size_t n = 64;
  std::size_t iterations = 1024;
  std::size_t classes = 10;
  std::size_t samples_per_class = 200;
  double noise = 0.1;
  std::size_t layers = 8;
  Operator op = Operator::exact;
  bool fig5_mode = false;
  std::string output_path;

  void validate() const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Built-in defaults per subcommand. demo-synthetic runs in the ambient R^3
// with eps = 0.1 and kappa = 1.5; flops starts from d = 384, H = 6, m = 64.
ExperimentConfig defaults_for(std::string_view command);

// `key = value` lines; '#' starts a comment; blank lines ignored.
KeyValues parse_key_values(std::istream& in, const std::string& source);
KeyValues load_config_file(const std::string& path);

// Applies overrides in order. Unknown keys and malformed values throw
// std::invalid_argument naming the key.
void apply_overrides(ExperimentConfig& cfg, const KeyValues& values);

// Flag > file > built-in default.
ExperimentConfig resolve_config(ExperimentConfig defaults, const KeyValues& file,
                                const KeyValues& flags);

}  // namespace cbsa
