// cbsa: desk-scale experiments for contract-and-broadcast self-attention.
//
//   cbsa demo-synthetic     [--config F] [--seed S] [--epsilon E] [--kappa K] [--out F]
//   cbsa trace-coding-rate  [--layers L] [--op OP] [--fig5-mode] ...
//   cbsa flops              [--tokens 64,128,...] [--out F]
//   cbsa grad-check         [--seed S] [--epsilon E]
//   cbsa variants-check     [--seed S]
//
// CSV traces go to --out; a JSON summary goes to stdout. Exit status is 0 iff
// every check the command runs passes.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cbsa/config.hpp"
#include "cbsa/experiments.hpp"
#include "cbsa/flops.hpp"

namespace {

using nlohmann::json;

struct CommonFlags {
  std::optional<std::string> config_path;
  std::optional<std::string> seed, epsilon, kappa, layers, op, out;
  std::optional<std::string> d, heads, m, n, iterations, classes, samples, noise;
  bool fig5_mode = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "key = value configuration file");
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_option("--epsilon", f.epsilon, "coding-rate precision");
  cmd->add_option("--kappa", f.kappa, "residual step size (sign unconstrained)");
  cmd->add_option("--layers", f.layers, "number of stacked layers");
  cmd->add_option("--op", f.op, "exact|softmax|mssa|linear|channel|agent");
  cmd->add_option("--out", f.out, "output path");
  cmd->add_option("--d", f.d, "ambient dimension");
  cmd->add_option("--K", f.heads, "number of heads / subspaces");
  cmd->add_option("--m", f.m, "number of representatives");
  cmd->add_option("--N", f.n, "number of tokens");
  cmd->add_option("--iterations", f.iterations, "iterations for demo-synthetic");
  cmd->add_option("--classes", f.classes, "synthetic classes");
  cmd->add_option("--samples", f.samples, "samples per synthetic class");
  cmd->add_option("--noise", f.noise, "synthetic noise stddev");
  cmd->add_flag("--fig5-mode", f.fig5_mode, "pin kappa = 1");
}

cbsa::ExperimentConfig resolve(const std::string& command, const CommonFlags& f) {
  cbsa::KeyValues file;
  if (f.config_path) file = cbsa::load_config_file(*f.config_path);
  cbsa::KeyValues flags;
  auto put = [&](const char* key, const std::optional<std::string>& v) {
    if (v) flags.emplace_back(key, *v);
  };
  put("seed", f.seed);
  put("epsilon", f.epsilon);
  put("kappa", f.kappa);
  put("layers", f.layers);
  put("op", f.op);
  put("output_path", f.out);
  put("d", f.d);
  put("K", f.heads);
  put("m", f.m);
  put("N", f.n);
  put("iterations", f.iterations);
  put("classes", f.classes);
  put("samples_per_class", f.samples);
  put("noise", f.noise);
  if (f.fig5_mode) flags.emplace_back("fig5_mode", "1");
  return cbsa::resolve_config(cbsa::defaults_for(command), file, flags);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  return out;
}

void close_output(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw std::runtime_error("failed writing output file '" + path + "'");
}

json real_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int run_demo(const CommonFlags& flags) {
  const cbsa::ExperimentConfig cfg = resolve("demo-synthetic", flags);
  const std::string path = cfg.output_path.empty() ? "demo_synthetic.csv" : cfg.output_path;
  const cbsa::DemoResult result = cbsa::demo_synthetic(cfg);
  std::ofstream out = open_output(path);
  cbsa::write_demo_csv(out, result);
  close_output(out, path);

  json classes = json::array();
  for (std::size_t c = 0; c < result.rates.size(); ++c) {
    const auto& r = result.rates[c];
    classes.push_back({{"class", c},
                       {"initial_rate", r.front()},
                       {"final_rate", r.back()},
                       {"final_over_initial", r.back() / r.front()},
                       {"non_increasing", static_cast<bool>(result.monotone[c])}});
  }
  const bool ok = result.all_monotone();
  json summary{{"command", "demo-synthetic"},
               {"output", path},
               {"epsilon", cfg.epsilon},
               {"kappa", cfg.kappa},
               {"checkpoints", result.checkpoints},
               {"classes", classes},
               {"worst_final_over_initial", result.worst_compression_ratio()},
               {"checks", {{"non_increasing", ok}}}};
  std::cout << summary.dump(2) << '\n';
  return ok ? 0 : 1;
}

int run_trace(const CommonFlags& flags) {
  const cbsa::ExperimentConfig cfg = resolve("trace-coding-rate", flags);
  const std::string path = cfg.output_path.empty() ? "trace_coding_rate.csv" : cfg.output_path;
  const cbsa::CodingRateTrace trace = cbsa::trace_coding_rate(cfg);
  std::ofstream out = open_output(path);
  cbsa::write_trace_csv(out, trace);
  close_output(out, path);

  bool finite = true;
  for (const auto& row : trace.rows) {
    finite = finite && std::isfinite(row.rate) && std::isfinite(row.compression);
    for (const auto& h : row.heads) finite = finite && std::isfinite(h.reduced_z) && std::isfinite(h.reduced_q);
  }
  json corr = json::array();
  for (double c : trace.head_correlation) corr.push_back(real_or_null(c));
  json summary{{"command", "trace-coding-rate"},
               {"output", path},
               {"op", std::string(cbsa::to_string(cfg.op))},
               {"layers", cfg.layers},
               {"kappa", trace.kappa},
               {"head_correlation", corr},
               {"positive_fraction", trace.positive_fraction},
               {"checks", {{"finite", finite}}}};
  std::cout << summary.dump(2) << '\n';
  return finite ? 0 : 1;
}

std::vector<std::int64_t> parse_tokens(const std::string& list) {
  std::vector<std::int64_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoll(item));
  }
  if (out.empty()) throw std::invalid_argument("--tokens needs at least one value");
  return out;
}

int run_flops(const CommonFlags& flags, const std::optional<std::string>& tokens) {
  const cbsa::ExperimentConfig cfg = resolve("flops", flags);
  const std::string path = cfg.output_path.empty() ? "flops.csv" : cfg.output_path;
  const auto n_values = tokens ? parse_tokens(*tokens) : cbsa::default_sweep_tokens();
  const auto d = static_cast<std::int64_t>(cfg.d);
  const auto h = static_cast<std::int64_t>(cfg.heads);
  const auto m = static_cast<std::int64_t>(cfg.m);
  const std::vector<cbsa::FlopsRow> rows = cbsa::sweep(n_values, d, h, m);
  std::ofstream out = open_output(path);
  cbsa::write_flops_csv(out, rows);
  close_output(out, path);

  // CBSA is cheaper exactly when N > 2m, and the totals meet at N = 2m.
  bool consistent = true;
  json crossover = json::array();
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
    const std::int64_t diff = rows[i].cost.total - rows[i + 1].cost.total;
    const std::int64_t n = rows[i].n;
    const int expected = n > 2 * m ? 1 : (n == 2 * m ? 0 : -1);
    const int sign = diff > 0 ? 1 : (diff == 0 ? 0 : -1);
    consistent = consistent && sign == expected;
    if (rows[i].crossover) crossover.push_back(n);
  }
  json summary{{"command", "flops"},
               {"output", path},
               {"d", d},
               {"H", h},
               {"m", m},
               {"rows", rows.size()},
               {"crossover_N", crossover},
               {"checks", {{"crossover_at_2m", consistent}}}};
  std::cout << summary.dump(2) << '\n';
  return consistent ? 0 : 1;
}

int run_grad_check(const CommonFlags& flags, bool corrupt) {
  const cbsa::ExperimentConfig cfg = resolve("grad-check", flags);
  cbsa::GradCheckOptions opts;
  opts.seed = cfg.seed;
  opts.epsilon = cfg.epsilon;
  if (corrupt) {
    // Negative control: perturb the last entry of every analytic gradient.
    opts.gradient = [](const cbsa::Matrix& q, const cbsa::CodingRateConfig& c) {
      cbsa::Matrix g = cbsa::coding_rate_gradient(q, c);
      g(g.rows() - 1, g.cols() - 1) += 1e-2 * std::max(1.0, g.max_abs());
      return g;
    };
  }
  const cbsa::GradCheckReport r = cbsa::grad_check(opts);
  json summary{{"command", "grad-check"},
               {"instances", r.instances},
               {"threshold", opts.threshold},
               {"max_relative_error", r.max_relative_error},
               {"worst",
                {{"instance", r.worst_instance},
                 {"shape", {r.worst_rows, r.worst_cols}},
                 {"row", r.worst_row},
                 {"col", r.worst_col},
                 {"analytic", r.worst_analytic},
                 {"numeric", r.worst_numeric}}},
               {"checks", {{"gradient", r.passed}}}};
  std::cout << summary.dump(2) << '\n';
  if (!r.passed) {
    std::cerr << "grad-check failed: entry (" << r.worst_row << ", " << r.worst_col << ") of instance "
              << r.worst_instance << " (" << r.worst_rows << "x" << r.worst_cols
              << ") has relative error " << r.max_relative_error << '\n';
  }
  return r.passed ? 0 : 1;
}

int run_variants(const CommonFlags& flags) {
  const cbsa::ExperimentConfig cfg = resolve("variants-check", flags);
  const cbsa::VariantsReport r = cbsa::variants_check(cfg.seed);
  json summary{
      {"command", "variants-check"},
      {"instances", r.instances},
      {"max_deviation",
       {{"softmax_self_expressed_vs_mssa", r.softmax_vs_mssa},
        {"exact_self_expressed_vs_inverse_mssa", r.exact_vs_inverse_mssa},
        {"exact_svd_vs_linear", r.svd_exact_vs_linear},
        {"linear_vs_channel_diagonal", r.linear_vs_channel}}},
      {"tolerance",
       {{"softmax_self_expressed_vs_mssa", r.tol_softmax_vs_mssa},
        {"exact_self_expressed_vs_inverse_mssa", r.tol_exact_vs_inverse_mssa},
        {"exact_svd_vs_linear", r.tol_svd_exact_vs_linear},
        {"linear_vs_channel_diagonal", r.tol_linear_vs_channel}}},
      {"checks", {{"degeneration_chain", r.passed}}}};
  std::cout << summary.dump(2) << '\n';
  return r.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contract-and-broadcast self-attention experiments"};
  app.require_subcommand(1);

  CommonFlags demo_flags, trace_flags, flops_flags, grad_flags, variants_flags;
  std::optional<std::string> tokens;
  bool corrupt = false;

  auto* demo = app.add_subcommand("demo-synthetic", "iterate the linear variant on 3-D synthetic classes");
  add_common(demo, demo_flags);
  auto* trace = app.add_subcommand("trace-coding-rate", "coding rates across stacked random-bank layers");
  add_common(trace, trace_flags);
  auto* flops = app.add_subcommand("flops", "MSSA vs CBSA cost sweep");
  add_common(flops, flops_flags);
  flops->add_option("--tokens", tokens, "comma-separated token counts");
  auto* grad = app.add_subcommand("grad-check", "finite-difference check of the coding-rate gradient");
  add_common(grad, grad_flags);
  grad->add_flag("--corrupt-gradient", corrupt, "test hook: perturb the analytic gradient");
  auto* variants = app.add_subcommand("variants-check", "degeneration-chain equivalences");
  add_common(variants, variants_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (demo->parsed()) return run_demo(demo_flags);
    if (trace->parsed()) return run_trace(trace_flags);
    if (flops->parsed()) return run_flops(flops_flags, tokens);
    if (grad->parsed()) return run_grad_check(grad_flags, corrupt);
    if (variants->parsed()) return run_variants(variants_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
