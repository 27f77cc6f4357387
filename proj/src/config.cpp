#include "cbsa/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <stdexcept>

namespace cbsa {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <class T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config key '" + key + "': expected a non-negative integer, got '" +
                                value + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': expected a real number, got '" + value +
                                "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw std::invalid_argument("config key '" + key + "': expected a boolean, got '" + value + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (d == 0 || heads == 0 || m == 0 || n == 0) {
    throw std::invalid_argument("d, K, m, N must be positive");
  }
  if (d % heads != 0) throw std::invalid_argument("K must divide d");
  if (m > n) throw std::invalid_argument("m must not exceed N");
  if (classes == 0 || samples_per_class == 0) {
    throw std::invalid_argument("classes and samples_per_class must be positive");
  }
  if (noise < 0.0) throw std::invalid_argument("noise must be non-negative");
}

ExperimentConfig defaults_for(std::string_view command) {
  ExperimentConfig cfg;
  if (command == "demo-synthetic") {
    cfg.epsilon = 0.1;
    cfg.kappa = 1.5;
  } else if (command == "flops") {
    cfg.d = 384;
    cfg.heads = 6;
    cfg.m = 64;
    cfg.n = 196;
  }
  return cfg;
}

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

KeyValues load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_key_values(in, path);
}

void apply_overrides(ExperimentConfig& cfg, const KeyValues& values) {
  for (const auto& [key, value] : values) {
    if (key == "seed") cfg.seed = parse_integer<std::uint64_t>(key, value);
    else if (key == "epsilon") cfg.epsilon = parse_real(key, value);
    else if (key == "kappa") cfg.kappa = parse_real(key, value);
    else if (key == "d") cfg.d = parse_integer<std::size_t>(key, value);
    else if (key == "K" || key == "heads") cfg.heads = parse_integer<std::size_t>(key, value);
    else if (key == "m") cfg.m = parse_integer<std::size_t>(key, value);
    else if (key == "N") cfg.n = parse_integer<std::size_t>(key, value);
    else if (key == "iterations") cfg.iterations = parse_integer<std::size_t>(key, value);
    else if (key == "classes") cfg.classes = parse_integer<std::size_t>(key, value);
    else if (key == "samples_per_class") cfg.samples_per_class = parse_integer<std::size_t>(key, value);
    else if (key == "noise") cfg.noise = parse_real(key, value);
    else if (key == "layers") cfg.layers = parse_integer<std::size_t>(key, value);
    else if (key == "op") cfg.op = parse_operator(value);
    else if (key == "fig5_mode") cfg.fig5_mode = parse_bool(key, value);
    else if (key == "output_path" || key == "out") cfg.output_path = value;
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

ExperimentConfig resolve_config(ExperimentConfig defaults, const KeyValues& file,
                                const KeyValues& flags) {
  apply_overrides(defaults, file);
  apply_overrides(defaults, flags);
  defaults.validate();
  return defaults;
}

}  // namespace cbsa
