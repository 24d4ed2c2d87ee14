#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "hyperagent/errors.hpp"
#include "hyperagent/plot.hpp"
#include "hyperagent/runner.hpp"
#include "hyperagent/validator.hpp"

namespace ha = hyperagent;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRunFailure = 1;
constexpr int kConfigError = 2;
constexpr int kDataError = 3;

int run_command(const std::string& config_path, unsigned jobs, const std::optional<std::string>& out,
                const std::optional<std::uint64_t>& seed) {
  ha::ExperimentConfig cfg = ha::load_experiment_config(config_path);
  if (out) cfg.output_dir = *out;
  if (seed) cfg.master_seed = *seed;
  ha::RunOptions options;
  options.jobs = jobs;
  const auto result = ha::run_experiment(cfg, options);
  for (const auto& c : result.aggregate.curves) {
    const std::size_t T = c.mean_cum.size();
    std::cout << c.agent << ": final cumulative regret " << c.mean_cum[T - 1] << " +/- " << c.se[T - 1]
              << '\n';
  }
  std::cout << "wrote " << result.files.size() << " files to " << cfg.output_dir << '\n';
  return kOk;
}

int certify_command(const std::string& suite_name, const std::string& out_dir, std::uint64_t seed,
                    std::size_t samples) {
  const auto suite = ha::parse_certification_suite(suite_name);
  ha::CertificationOptions options;
  options.seed = seed;
  options.n_samples = samples;
  const auto rows = ha::run_certification(suite, options);
  fs::create_directories(out_dir);
  const fs::path path = fs::path(out_dir) / (suite_name + ".csv");
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  ha::write_certification_csv(file, rows);
  bool all = true;
  for (const auto& row : rows) {
    std::cout << (row.pass ? "PASS " : "FAIL ") << row.check_name << ' ' << row.params
              << " empirical=" << row.empirical << " bound=" << row.bound << '\n';
    all = all && row.pass;
  }
  std::cout << "wrote " << path.string() << '\n';
  return all ? kOk : kRunFailure;
}

int plot_command(const std::string& in_dir, const std::string& out_dir) {
  const fs::path in = in_dir;
  const auto aggregate = ha::read_aggregate_csv(in / "aggregate.csv");
  std::vector<ha::ModerationCurve> curves;
  if (fs::exists(in / "moderation_curves.csv")) curves = ha::read_moderation_curves_csv(in / "moderation_curves.csv");
  std::string env = "experiment";
  if (fs::exists(in / "experiment.json")) {
    std::ifstream f(in / "experiment.json");
    const auto doc = nlohmann::json::parse(f);
    env = doc.at("env").at("kind").get<std::string>();
  }
  for (const auto& p : ha::render_plots(aggregate, curves, env, out_dir)) std::cout << "wrote " << p.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HyperAgent bandit experiments"};
  app.require_subcommand(1);

  std::string config_path;
  unsigned jobs = 1;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("--config", config_path, "experiment config")->required();
  run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--out", out, "output directory (overrides the config)");
  run->add_option("--seed", seed, "master seed (overrides the config)");

  std::string suite;
  std::string certify_out;
  std::uint64_t certify_seed = 7;
  std::size_t samples = 1000000;
  auto* certify = app.add_subcommand("certify", "statistical certification of index distributions");
  certify->add_option("--suite", suite, "distributions | goodevent | anticoncentration")->required();
  certify->add_option("--out", certify_out, "output directory")->required();
  certify->add_option("--seed", certify_seed, "seed");
  certify->add_option("--samples", samples, "Monte Carlo draws per check");

  std::string plot_in;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "render SVG plots from experiment output");
  plot->add_option("--in", plot_in, "experiment output directory")->required();
  plot->add_option("--out", plot_out, "plot directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return run_command(config_path, jobs, out, seed);
    if (*certify) return certify_command(suite, certify_out, certify_seed, samples);
    if (*plot) return plot_command(plot_in, plot_out);
  } catch (const ha::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ha::FormatError& e) {
    std::cerr << "data format error: " << e.what() << '\n';
    return kDataError;
  } catch (const ha::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRunFailure;
  }
  return kRunFailure;
}
