// Command-line front end: train, eval, sweep, resume.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "strange/cli/config_io.hpp"
#include "strange/cli/metrics_io.hpp"
#include "strange/cli/run.hpp"
#include "strange/errors.hpp"

namespace {

namespace fs = std::filesystem;
using namespace strange;

// Exit codes by error category.
enum Exit { ok = 0, internal = 1, usage = 2, io = 3, divergence = 4, validation = 5 };

struct Common {
  std::string config;
  std::string out;
  std::string algo;
  std::string env;
  std::int64_t seed = -1;
};

std::string out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("STRANGE_MARL_OUT"); env && *env) return env;
  return "runs/default";
}

trainer::TrainConfig resolve(const Common& c) {
  cli::Overrides o;
  if (!c.algo.empty()) o = cli::algo_overrides(c.algo);
  if (!c.env.empty()) o["env.kind"] = c.env;
  if (c.seed >= 0) o["train.seed"] = std::to_string(c.seed);
  return c.config.empty() ? cli::parse_config_text("", o) : cli::parse_config(c.config, o);
}

void add_common(CLI::App* app, Common& c, bool with_seed) {
  app->add_option("--config", c.config, "config file (flat key = value with [env]/[algo]/[train] sections)");
  app->add_option("--out", c.out, "output directory (default: $STRANGE_MARL_OUT or runs/default)");
  app->add_option("--algo", c.algo, "mixer+exploration, e.g. qmix+sim, vdn+none, qmix+sim_wo_eq");
  app->add_option("--env", c.env, "matrix_game or pressure_plate");
  if (with_seed) app->add_option("--seed", c.seed, "random seed");
}

void print_last(const std::vector<trainer::MetricsRow>& rows) {
  if (rows.empty()) return;
  const auto& r = rows.back();
  std::printf("env_steps=%lld return=%.6g length=%.6g solve_rate=%.6g\n", static_cast<long long>(r.env_steps),
              r.eval_return_mean, r.eval_episode_length_mean, r.eval_win_or_solve_rate);
}

int run(int argc, char** argv) {
  CLI::App app{"Cooperative MARL with strangeness-driven exploration"};
  app.require_subcommand(1);

  Common train_opts;
  CLI::App* train = app.add_subcommand("train", "train one seed");
  add_common(train, train_opts, true);

  Common sweep_opts;
  std::vector<std::uint64_t> seeds;
  CLI::App* sweep = app.add_subcommand("sweep", "train several seeds and aggregate");
  add_common(sweep, sweep_opts, false);
  sweep->add_option("--seeds", seeds, "seed list")->required()->delimiter(',');

  std::string ckpt;
  int episodes = 1;
  CLI::App* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  eval->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes")->check(CLI::PositiveNumber);

  Common resume_opts;
  std::string resume_ckpt;
  CLI::App* resume = app.add_subcommand("resume", "continue a checkpointed run");
  resume->add_option("--checkpoint", resume_ckpt, "checkpoint file")->required();
  resume->add_option("--out", resume_opts.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Exit::ok : Exit::usage;
  }

  if (*train) {
    const trainer::TrainConfig config = resolve(train_opts);
    const std::string dir = out_dir(train_opts);
    fs::create_directories(dir);
    cli::RunManifest m;
    m.config = cli::serialize_config(config);
    m.out_dir = dir;
    m.seeds.push_back({config.seed, (fs::path(dir) / "metrics.csv").string(), "pending"});
    m.started = cli::utc_now();
    const std::string manifest = (fs::path(dir) / "manifest.json").string();
    cli::write_manifest(m, manifest);
    std::ofstream(fs::path(dir) / "config.txt") << m.config;
    const auto rows = cli::train_one(config, dir);
    m.seeds[0].status = "ok";
    m.finished = cli::utc_now();
    m.status = "ok";
    cli::write_manifest(m, manifest);
    print_last(rows);
  } else if (*sweep) {
    const trainer::TrainConfig config = resolve(sweep_opts);
    const std::string dir = out_dir(sweep_opts);
    std::ofstream(fs::path(dir) / "config.txt") << cli::serialize_config(config);
    if (!cli::sweep(config, seeds, dir)) {
      std::fprintf(stderr, "sweep: at least one seed failed; see %s/manifest.json\n", dir.c_str());
      return Exit::internal;
    }
  } else if (*eval) {
    auto t = cli::load_checkpoint(ckpt);
    auto env = trainer::make_env(t->config().env);
    nn::Rng rng(t->config().seed);
    const trainer::EvalResult r = trainer::evaluate(t->learner().goal, *env, episodes, rng);
    std::printf("return=%.6g length=%.6g solve_rate=%.6g\n", r.mean_return, r.mean_length, r.solve_rate);
  } else if (*resume) {
    print_last(cli::resume_run(resume_ckpt, out_dir(resume_opts)));
  }
  return Exit::ok;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const strange::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return Exit::usage;
  } catch (const strange::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return Exit::usage;
  } catch (const strange::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return Exit::io;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return Exit::io;
  } catch (const strange::DivergenceError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return Exit::divergence;
  } catch (const strange::ValidationError& e) {
    std::fprintf(stderr, "invalid data: %s\n", e.what());
    return Exit::validation;
  } catch (const strange::DimensionError& e) {
    std::fprintf(stderr, "dimension error: %s\n", e.what());
    return Exit::validation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return Exit::internal;
  }
}
