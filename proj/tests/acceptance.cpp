// One PASS/FAIL line per acceptance criterion. Exit status is 0 when every
// failing criterion is named in --allow-fail.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "hyperagent/agents.hpp"
#include "hyperagent/envs.hpp"
#include "hyperagent/hbe1.hpp"
#include "hyperagent/linear_core.hpp"
#include "hyperagent/runner.hpp"
#include "hyperagent/validator.hpp"
#include "hypermodel_checks.hpp"
#include "support.hpp"

using namespace hyperagent;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), pattern, a);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Outcome closed_form_equivalence() {
  const auto start = Clock::now();
  Rng rng(101);
  std::uniform_int_distribution<int> dim(1, 20), index(1, 16), len(1, 200);
  std::uniform_real_distribution<double> lam(0.1, 2.0);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int seq = 0; seq < 100; ++seq) {
    const Eigen::Index d = dim(rng), M = index(rng);
    const int T = len(rng);
    const double lambda = lam(rng);
    const Eigen::MatrixXd z0 = sample_prior_perturbations<double>(d, M, DistributionKind::sphere(), rng);
    auto state = init_with_prior<double>(z0, lambda);
    std::vector<Observation<double>> log;
    for (int t = 0; t < T; ++t) {
      Eigen::VectorXd phi = test_support::random_unit(d, rng) * std::uniform_real_distribution<double>(0, 1)(rng);
      const double y = normal(rng);
      const Eigen::VectorXd z = sample_perturbation<double>(DistributionKind::sphere(), M, rng).z;
      update(state, phi, y, z);
      log.push_back({phi, y, z});
    }
    const auto oracle = ridge_oracle(log, z0, lambda);
    worst = std::max({worst, (state.mean - oracle.mean).norm(), (state.covariance - oracle.covariance).norm(),
                      (state.factor - oracle.factor).norm()});
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-8 && elapsed < 10.0,
          "100 sequences, max Frobenius gap " + fmt("%.3g", worst) + " (<= 1e-8), " + fmt("%.2f", elapsed) +
              " s (< 10 s)"};
}

Outcome per_step_cost() {
  Rng rng(102);
  const Eigen::Index d = 50, M = 128;
  auto state = init<double>(d, M, 1.0, DistributionKind::sphere(), rng);
  std::normal_distribution<double> normal;
  const int steps = 10000;
  std::vector<Eigen::VectorXd> phis, zs;
  std::vector<double> ys;
  for (int t = 0; t < steps; ++t) {
    phis.push_back(test_support::random_unit(d, rng));
    zs.push_back(sample_perturbation<double>(DistributionKind::sphere(), M, rng).z);
    ys.push_back(normal(rng));
  }
  std::vector<double> cost(steps);
  for (int t = 0; t < steps; ++t) {
    const auto start = Clock::now();
    update(state, phis[t], ys[t], zs[t]);
    cost[t] = seconds_since(start);
  }
  const double early = std::accumulate(cost.begin(), cost.begin() + 1000, 0.0) / 1000.0;
  const double late = std::accumulate(cost.begin() + 9000, cost.end(), 0.0) / 1000.0;
  const double ratio = late / early;
  return {ratio <= 1.5 && ratio >= 1.0 / 1.5,
          "d=50 M=128, mean update " + fmt("%.2f", early * 1e6) + " us over [0,1000) vs " +
              fmt("%.2f", late * 1e6) + " us over [9000,10000), ratio " + fmt("%.3f", ratio) +
              " (within 1.5x)"};
}

Outcome anti_concentration_floors() {
  const auto start = Clock::now();
  Rng rng(103);
  const std::size_t n = 1000000;
  const Eigen::Index M = 16;
  bool pass = true;
  std::string detail;
  auto check = [&](const std::string& name, const DistributionKind& kind, Eigen::Index m,
                   const Eigen::VectorXd& v) {
    const double floor = *optimism_floor(kind, m);
    const double freq = anti_concentration_test(kind, m, v, n, rng);
    const double band = 5.0 * test_support::bernoulli_se(floor, static_cast<double>(n));
    const bool ok = freq >= floor - band;
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + name + " " + fmt("%.4f", freq) + (ok ? " >= " : " < ") +
              fmt("%.4f", floor - band);
  };
  check("gaussian", DistributionKind::gaussian(), M, test_support::random_unit(M, rng));
  check("sphere", DistributionKind::sphere(), M, test_support::random_unit(M, rng));
  check("cube", DistributionKind::cube(), M, test_support::random_unit(M, rng));
  for (const Eigen::Index m : {2, 8, 32}) {
    check("coord M=" + std::to_string(m), DistributionKind::coord(), m, Eigen::VectorXd::Unit(m, 0));
  }
  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 60.0;
  return {pass, detail + "; " + fmt("%.1f", elapsed) + " s (< 60 s)"};
}

Outcome isotropy() {
  Rng rng(104);
  const Eigen::Index M = 8;
  const std::size_t n = 1000000;
  bool pass = true;
  std::string detail;
  for (const auto& kind : {DistributionKind::gaussian(), DistributionKind::sphere(), DistributionKind::cube(),
                           DistributionKind::coord(), DistributionKind::sparse(2)}) {
    const auto mc = isotropy_monte_carlo(kind, M, n, rng);
    const double z = std::max(mc.max_standard_errors, mc.max_mean_standard_errors);
    const bool ok = z <= 5.0;
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + to_string(kind) + " max z " + fmt("%.2f", z);
  }
  for (const auto& [kind, m] : std::vector<std::pair<DistributionKind, Eigen::Index>>{
           {DistributionKind::coord(), 8}, {DistributionKind::cube(), 8}, {DistributionKind::sparse(2), 8}}) {
    const auto exact = isotropy_exact(kind, m);
    const double gap = exact ? std::max(exact->max_abs_deviation, exact->max_abs_mean) : INFINITY;
    const bool ok = gap <= 1e-12;
    pass = pass && ok;
    detail += "; exact " + to_string(kind) + " M=" + std::to_string(m) + " gap " + fmt("%.1e", gap);
  }
  return {pass, "n=1e6 M=8, z <= 5: " + detail};
}

Outcome good_event_monotonicity() {
  const auto start = Clock::now();
  GoodEventSweepConfig cfg;
  cfg.perturbation = DistributionKind::sphere();
  bool pass = true;
  double previous = -1.0;
  std::string detail;
  for (const Eigen::Index M : {32, 64, 128, 256}) {
    const double rate = good_event_pass_rate(cfg, M);
    pass = pass && rate >= previous;
    previous = rate;
    detail += (detail.empty() ? "" : ", ") + ("M=" + std::to_string(M)) + " " + fmt("%.2f", rate);
  }
  pass = pass && previous >= 0.9;
  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 300.0;
  return {pass, "pass rates " + detail + " (non-decreasing, >= 0.9 at M=256); " + fmt("%.1f", elapsed) +
                    " s (< 300 s)"};
}

Outcome regret_replication(const fs::path& scratch) {
  const auto start = Clock::now();
  ExperimentConfig cfg = parse_experiment_config(nlohmann::json::parse(R"({
    "env": {"kind": "finite_linear", "d": 10, "n_actions": 100},
    "agents": [
      {"type": "hyperagent", "reference": "gaussian", "perturbation": "sphere", "M": 8, "lambda": 0.1},
      {"type": "hyperagent", "reference": "gaussian", "perturbation": "sphere", "M": 4, "lambda": 0.1},
      {"type": "ensemble+", "M": 4, "lambda": 0.1},
      {"type": "ts", "lambda": 0.1}
    ],
    "T": 1000, "n_seeds": 200, "master_seed": 2024, "plot": false
  })"));
  cfg.output_dir = (scratch / "regret").string();
  RunOptions options;
  options.resume = false;
  const auto result = run_experiment(cfg, options);
  auto final_mean = [&](const std::string& label) -> double {
    for (const auto& c : result.aggregate.curves) {
      if (c.agent == label) return c.mean_cum.back();
    }
    return NAN;
  };
  const double ha8 = final_mean("hyperagent:gaussian-gaussian-sphere:M=8");
  const double ha4 = final_mean("hyperagent:gaussian-gaussian-sphere:M=4");
  const double ens4 = final_mean("ensemble+:M=4");
  const double ts = final_mean("ts");
  const double gap = std::abs(ha8 - ts) / ts;
  const double elapsed = seconds_since(start);
  return {gap <= 0.2 && ha4 < ens4,
          "200 seeds: HA(M=8) " + fmt("%.1f", ha8) + " vs TS " + fmt("%.1f", ts) + " (gap " +
              fmt("%.1f", 100 * gap) + "% <= 20%); HA(M=4) " + fmt("%.1f", ha4) + " < ensemble+(M=4) " +
              fmt("%.1f", ens4) + "; " + fmt("%.1f", elapsed) + " s"};
}

Outcome gradient_correctness() {
  Rng rng(105);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    worst = std::max(worst, test_support::gradient_relative_error(test_support::random_instance(rng)));
  }
  return {worst < 1e-4, "50 instances, max relative gap " + fmt("%.2e", worst) + " (< 1e-4)"};
}

Outcome exact_vs_sampled() {
  Rng rng(106);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto inst = test_support::random_instance(rng);
    for (const auto& kind : {DistributionKind::coord(), DistributionKind::cube()}) {
      const auto cmp = test_support::compare_exact_sampled(inst, kind, 10000, rng);
      worst = std::max(worst, std::abs(cmp.exact - cmp.sampled) / std::max(cmp.standard_error, 1e-300));
    }
  }
  return {worst <= 3.0, "20 instances x {coord, cube}, |Xi|=1e4, worst gap " + fmt("%.2f", worst) +
                            " standard errors (<= 3)"};
}

EmbeddingDataset separable_posts(std::size_t n, std::uint32_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> normal;
  const Eigen::VectorXd w = test_support::random_unit(d, rng);
  EmbeddingDataset data;
  data.dim = d;
  while (data.size() < n) {
    std::vector<float> x(d);
    double s = 0.0;
    for (std::uint32_t j = 0; j < d; ++j) {
      x[j] = normal(rng);
      s += w[j] * x[j];
    }
    if (std::abs(s - 0.5) < 0.1) continue;
    data.embeddings.insert(data.embeddings.end(), x.begin(), x.end());
    data.labels.push_back(s > 0.5 ? kLabelHate : kLabelFree);
  }
  return data;
}

Outcome moderation(const fs::path& scratch) {
  EmbeddingDataset six;
  six.dim = 2;
  six.embeddings = {1, 0, 0, 1, 1, 1, -1, 0, 0, -1, 2, 2};
  six.labels = {0, 1, 0, 1, 1, 0};
  ModerationEnv env(six);
  Rng rng(107);
  bool rows_ok = true;
  for (std::size_t t = 0; t < 6; ++t) {
    const auto& set = env.begin_step(t, rng);
    const bool hate = six.labels[t] == kLabelHate;
    const Action block{kBlock, set.features.row(kBlock).transpose()};
    const Action publish{kPublish, set.features.row(kPublish).transpose()};
    rows_ok = rows_ok && env.reward(block, rng) == 0.5 && env.reward(publish, rng) == (hate ? -0.5 : 1.0) &&
              regret_step(env, block) == (hate ? 0.0 : 0.5) && regret_step(env, publish) == (hate ? 1.0 : 0.0);
  }

  const fs::path posts = scratch / "separable.hbe";
  save_hbe1(posts.string(), separable_posts(5000, 16, 108));
  nlohmann::json doc = nlohmann::json::parse(R"({
    "env": {"kind": "moderation", "shuffle": true},
    "agents": [
      {"type": "hyperagent", "mode": "sgd", "M": 8, "lambda": 1.0, "hidden": [],
       "optimizer": "adam", "learning_rate": 0.01},
      {"type": "greedy", "lambda": 1.0}
    ],
    "T": 5000, "n_seeds": 20, "master_seed": 7, "plot": false
  })");
  doc["env"]["embeddings"] = posts.string();
  doc["output_dir"] = (scratch / "moderation").string();
  RunOptions options;
  options.resume = false;
  const auto result = run_experiment(parse_experiment_config(doc), options);
  std::vector<double> ha_acc, greedy_acc, ha_effort, greedy_effort;
  for (const auto& trace : result.traces) {
    const auto s = moderation_summary(trace);
    const bool greedy = trace.agent_label == "greedy";
    (greedy ? greedy_acc : ha_acc).push_back(s.accuracy);
    (greedy ? greedy_effort : ha_effort).push_back(s.effort);
  }
  const bool ordering = mean_of(ha_acc) >= mean_of(greedy_acc) && sd_of(ha_acc) < sd_of(greedy_acc);
  return {rows_ok && ordering,
          std::string("6-post reward/regret rows ") + (rows_ok ? "exact" : "WRONG") +
              "; 5000 posts d=16, 20 seeds: HA accuracy " + fmt("%.4f", mean_of(ha_acc)) + " sd " +
              fmt("%.4f", sd_of(ha_acc)) + " vs greedy " + fmt("%.4f", mean_of(greedy_acc)) + " sd " +
              fmt("%.4f", sd_of(greedy_acc)) + "; publish fraction " + fmt("%.3f", mean_of(ha_effort)) +
              " vs " + fmt("%.3f", mean_of(greedy_effort))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<std::string> allowed;
  std::vector<std::string> only;
  app.add_option("--allow-fail", allowed, "criteria whose failure does not affect the exit status");
  app.add_option("--only", only, "run just these criteria");
  CLI11_PARSE(app, argc, argv);

  const fs::path scratch = test_support::scratch_dir("acceptance");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"closed_form_equivalence", closed_form_equivalence},
      {"per_step_cost", per_step_cost},
      {"anti_concentration_floors", anti_concentration_floors},
      {"isotropy", isotropy},
      {"good_event_monotonicity", good_event_monotonicity},
      {"regret_replication", [&] { return regret_replication(scratch); }},
      {"gradient_correctness", gradient_correctness},
      {"exact_vs_sampled_loss", exact_vs_sampled},
      {"moderation_reward_accounting", [&] { return moderation(scratch); }},
  };
  const std::set<std::string> allow(allowed.begin(), allowed.end());
  const std::set<std::string> subset(only.begin(), only.end());
  int blocking = 0;
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!subset.empty() && !subset.count(name)) continue;
    Outcome out;
    try {
      out = run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %s: %s\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) {
      ++failed;
      if (!allow.count(name)) ++blocking;
    }
  }
  std::printf("%d criteria failed, %d not allowed to fail\n", failed, blocking);
  return blocking == 0 ? 0 : 1;
}
