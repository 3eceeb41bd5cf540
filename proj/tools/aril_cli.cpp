// aril command-line tool: run, compare, plot, check-grad, sr-dump.
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aril/aril.hpp"

namespace fs = std::filesystem;
using namespace aril;

namespace {

std::string read_input(const std::string& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("no such file: " + path);
  return harness::read_file(path);
}

int cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed,
            const std::optional<std::string>& out) {
  ExperimentConfig c = parse_config(read_input(config_path));
  c = apply_env_overrides(c);
  if (seed) c.seeds = {*seed};
  if (out) c.out_dir = *out;
  validate(c);
  const auto result = harness::run_experiment(c);
  for (const auto& r : result.runs) {
    std::cout << "seed " << r.seed << ": final greedy return " << format_double(r.final_greedy_return)
              << " (expert " << format_double(r.expert_mean_return) << "), queries " << r.budget_used << "\n";
  }
  std::cout << "results written to " << result.directory.string() << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& inputs, const std::optional<std::string>& out) {
  std::vector<harness::StrategyResult> sets;
  for (const auto& d : inputs) {
    if (!fs::is_directory(d)) throw ConfigError("not a result directory: " + d);
    sets.push_back(harness::load_result(d));
  }
  const std::string text = harness::report_text(harness::compare(sets));
  if (out) harness::write_file(*out, text);
  std::cout << text;
  return 0;
}

int cmd_plot(const std::string& input, const std::string& out) {
  const auto rows = harness::parse_metrics_csv(read_input(input));
  if (rows.empty()) throw ConfigError("plot: metrics file has no rows");
  harness::write_file(out, harness::emit_plot(rows));
  return 0;
}

int cmd_check_grad(std::uint64_t n_seeds, double tolerance) {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= n_seeds; ++s) seeds.push_back(s);
  std::map<std::string, double> worst;
  for (const auto& r : gradcheck::run_suite(seeds)) worst[r.name] = std::max(worst[r.name], r.max_relative_error);
  bool ok = true;
  for (const auto& [name, err] : worst) {
    const bool pass = err <= tolerance;
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << name << " max relative error " << err << "\n";
  }
  return ok ? 0 : 2;
}

int cmd_sr_dump(const std::string& path, const std::optional<std::string>& out) {
  const std::string csv = harness::sr_dump(harness::parse_checkpoint(read_input(path)));
  if (out) harness::write_file(*out, csv);
  else std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"active imitation learning lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> run_out;
  auto* run = app.add_subcommand("run", "train every seed of a config");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--seed", seed, "run only this seed");
  run->add_option("--out", run_out, "output directory");

  std::vector<std::string> inputs;
  std::optional<std::string> compare_out;
  auto* cmp = app.add_subcommand("compare", "compare result directories");
  cmp->add_option("--inputs", inputs, "result directories")->required()->expected(1, -1);
  cmp->add_option("--out", compare_out, "write the report here too");

  std::string plot_in, plot_out;
  auto* plot = app.add_subcommand("plot", "render a metrics CSV as SVG");
  plot->add_option("--input", plot_in, "metrics CSV")->required();
  plot->add_option("--out", plot_out, "SVG file")->required();

  std::uint64_t grad_seeds = 20;
  double grad_tol = 1e-4;
  auto* grad = app.add_subcommand("check-grad", "finite-difference check of every loss");
  grad->add_option("--seeds", grad_seeds, "number of random seeds");
  grad->add_option("--tolerance", grad_tol, "max relative error");

  std::string ckpt;
  std::optional<std::string> dump_out;
  auto* dump = app.add_subcommand("sr-dump", "SR vectors of every maze cell as CSV");
  dump->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  dump->add_option("--out", dump_out, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(config_path, seed, run_out);
    if (*cmp) return cmd_compare(inputs, compare_out);
    if (*plot) return cmd_plot(plot_in, plot_out);
    if (*grad) return cmd_check_grad(grad_seeds, grad_tol);
    if (*dump) return cmd_sr_dump(ckpt, dump_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
