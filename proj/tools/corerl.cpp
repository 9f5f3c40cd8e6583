// corerl: queueing-simulated microservice autoscaling with soft actor-critic.
//
// Subcommands: train, eval, autoscale-eval, transfer, features, export.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "corerl/trainer.hpp"

namespace {

using namespace corerl;

void print_aggregate(const RunMetrics& m) {
  std::printf("%-8s %-8s %-16s %-16s %-12s %s\n", "users", "steps", "mean_alloc_cores",
              "max_alloc_cores", "mean_p99_ms", "violation_rate");
  for (const auto& a : m.aggregate()) {
    if (a.users < 0)
      std::printf("%-8s", "all");
    else
      std::printf("%-8d", a.users);
    std::printf(" %-8" PRId64 " %-16.4f %-16.4f %-12.3f %.4f\n", a.steps, a.mean_alloc_cores,
                a.max_alloc_cores, a.mean_p99_ms, a.violation_rate);
  }
}

void write_outputs(const RunMetrics& m, const std::string& out) {
  export_metrics(m, out);
  const std::string summary =
      out.size() > 4 && out.substr(out.size() - 4) == ".csv"
          ? out.substr(0, out.size() - 4) + "_summary.csv"
          : out + "_summary.csv";
  export_summary(m, summary);
  std::printf("wrote %s and %s\n", out.c_str(), summary.c_str());
}

struct LoadedAgent {
  SacAgent agent;
  QosClassifier clf;
  TrainerCheckpoint tc;
};

LoadedAgent load_agent(const std::string& checkpoint, const ExperimentConfig& cfg) {
  const CheckpointInfo info = peek_checkpoint(checkpoint);
  if (info.input_dim != input_width(cfg))
    throw ConfigError("checkpoint " + checkpoint + " stores input width " +
                      std::to_string(info.input_dim) + " but the config implies " +
                      std::to_string(input_width(cfg)));
  RngStream rng(0, "cli-load");
  LoadedAgent la{make_agent(cfg, rng), make_classifier(cfg, rng), {}};
  load_checkpoint(checkpoint, la.agent, &la.clf, &la.tc);
  return la;
}

int cmd_train(const std::string& config_path, std::int64_t seed, const std::string& out_dir,
              bool resume, bool realtime, bool trace, bool no_replay) {
  ExperimentConfig cfg = load_config(config_path);
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  TrainerOptions opt;
  opt.out_dir = out_dir;
  opt.resume = resume;
  opt.realtime = realtime;
  opt.trace = trace;
  opt.write_replay = !no_replay;
  Trainer tr(cfg, opt);
  std::printf("training: %" PRId64 " steps (%" PRId64 " seed + %" PRId64 " RL), seed %llu\n",
              cfg.total_steps, cfg.asa_steps, cfg.rl_steps(),
              static_cast<unsigned long long>(cfg.seed));
  TrainResult r = tr.run();
  std::printf("done: %" PRId64 " steps, checkpoint %s\n", r.steps_done,
              r.checkpoint_path.c_str());
  print_aggregate(r.metrics);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path,
             std::vector<int> users, std::int64_t duration, const std::string& out) {
  ExperimentConfig cfg = load_config(config_path);
  if (users.empty()) users = cfg.eval_user_counts;
  if (duration <= 0) duration = cfg.eval_duration;
  LoadedAgent la = load_agent(checkpoint, cfg);
  RunMetrics m = evaluate_agent(la.agent, cfg, la.tc.stats, users, duration);
  print_aggregate(m);
  write_outputs(m, out);
  return 0;
}

int cmd_autoscale_eval(const std::string& config_path, std::vector<int> users,
                       std::int64_t duration, const std::string& out) {
  ExperimentConfig cfg = load_config(config_path);
  if (users.empty()) users = cfg.eval_user_counts;
  if (duration <= 0) duration = cfg.eval_duration;
  RunMetrics m = evaluate_autoscale(cfg, users, duration);
  print_aggregate(m);
  write_outputs(m, out);
  return 0;
}

int cmd_transfer(const std::string& from, const std::string& config_path, int seeds,
                 const std::string& out_dir) {
  ExperimentConfig cfg = load_config(config_path);
  const CheckpointInfo info = peek_checkpoint(from);
  if (info.input_dim % cfg.stack_k != 0 ||
      info.input_dim / cfg.stack_k < kNumBaseFeatures + 1)
    throw ConfigError("source checkpoint width is incompatible with stack_k");
  const int m_max_src = info.input_dim / cfg.stack_k - kNumBaseFeatures - 1;

  ExperimentConfig src_like = cfg;
  src_like.m_max = m_max_src;
  RngStream rng(0, "cli-transfer");
  SacAgent source = make_agent(src_like, rng);
  QosClassifier src_clf = make_classifier(src_like, rng);
  load_checkpoint(from, source, &src_clf, nullptr);

  TransferExperiment ex = run_transfer_experiment(cfg, source, m_max_src, out_dir, seeds);
  std::printf("parity reference: AutoScale mean allocation %.4f cores over users",
              ex.probe.autoscale_mean_alloc);
  for (int u : ex.probe.users) std::printf(" %d", u);
  std::printf("\n%-6s %-16s %-16s %s\n", "seed", "transfer_steps", "scratch_steps", "ratio");
  for (std::size_t i = 0; i < ex.transfer_arms.size(); ++i) {
    const auto& w = ex.transfer_arms[i];
    const auto& c = ex.scratch_arms[i];
    std::printf("%-6zu %-16" PRId64 " %-16" PRId64 " %.4f%s%s\n", i, w.milestone_rl_steps,
                c.milestone_rl_steps,
                static_cast<double>(w.milestone_rl_steps) /
                    static_cast<double>(c.milestone_rl_steps),
                w.reached ? "" : " [transfer capped]", c.reached ? "" : " [scratch capped]");
  }
  std::printf("mean ratio: %.4f\n", ex.mean_ratio);

  const std::string summary =
      (std::filesystem::path(out_dir) / "transfer_summary.csv").string();
  std::FILE* f = std::fopen(summary.c_str(), "wb");
  if (!f) throw IoError("cannot open " + summary);
  std::fprintf(f, "seed,transfer_steps,transfer_reached,scratch_steps,scratch_reached\n");
  for (std::size_t i = 0; i < ex.transfer_arms.size(); ++i)
    std::fprintf(f, "%zu,%" PRId64 ",%d,%" PRId64 ",%d\n", i,
                 ex.transfer_arms[i].milestone_rl_steps, ex.transfer_arms[i].reached ? 1 : 0,
                 ex.scratch_arms[i].milestone_rl_steps, ex.scratch_arms[i].reached ? 1 : 0);
  std::fclose(f);
  std::printf("wrote %s\n", summary.c_str());
  return 0;
}

int cmd_features(int m_max) {
  std::printf("index,category,name\n");
  for (const auto& d : feature_schema(m_max))
    std::printf("%d,%s,%s\n", d.index, d.category.c_str(), d.name.c_str());
  return 0;
}

int cmd_export(const std::string& metrics_path, const std::string& out) {
  RunMetrics m = import_metrics(metrics_path);
  export_summary(m, out);
  std::printf("wrote %s (%zu steps aggregated)\n", out.c_str(), m.steps.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"queueing-simulated microservice autoscaling with soft actor-critic"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, out, out_dir, from, metrics_path;
  std::vector<int> users;
  std::int64_t seed = -1, duration = 0;
  int seeds = 3, m_max = 12;
  bool resume = false, realtime = false, trace = false, no_replay = false, schema = false;

  auto* train = app.add_subcommand("train", "run the training schedule");
  train->add_option("--config", config_path, "experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "override the config seed");
  train->add_option("--out", out_dir, "output directory")->default_val("runs/train");
  train->add_flag("--resume", resume, "resume from the directory's checkpoint");
  train->add_flag("--realtime", realtime, "pace each step to one control interval");
  train->add_flag("--trace", trace, "write a per-step per-node allocation CSV");
  train->add_flag("--no-replay", no_replay, "skip the replay sidecar file");

  auto* eval = app.add_subcommand("eval", "mean-mode evaluation of a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--config", config_path, "experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--users", users, "user counts to sweep")->delimiter(',');
  eval->add_option("--duration", duration, "steps per user count");
  eval->add_option("--out", out, "metrics CSV path")->default_val("eval_metrics.csv");

  auto* asev = app.add_subcommand("autoscale-eval", "evaluate the threshold controller");
  asev->add_option("--config", config_path, "experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  asev->add_option("--users", users, "user counts to sweep")->delimiter(',');
  asev->add_option("--duration", duration, "steps per user count");
  asev->add_option("--out", out, "metrics CSV path")->default_val("autoscale_metrics.csv");

  auto* transfer = app.add_subcommand("transfer", "budget-matched transfer experiment");
  transfer->add_option("--from", from, "source checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  transfer->add_option("--config", config_path, "target experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  transfer->add_option("--seeds", seeds, "paired arms to run")->check(CLI::PositiveNumber);
  transfer->add_option("--out", out_dir, "output directory")->default_val("runs/transfer");

  auto* features = app.add_subcommand("features", "feature vector layout");
  features->add_flag("--schema", schema, "print the ordering table as CSV");
  features->add_option("--m-max", m_max, "identifier block width")
      ->check(CLI::PositiveNumber);

  auto* exp = app.add_subcommand("export", "aggregate a metrics CSV into a summary CSV");
  exp->add_option("--metrics", metrics_path, "per-step metrics CSV")
      ->required()
      ->check(CLI::ExistingFile);
  exp->add_option("--out", out, "summary CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return cmd_train(config_path, seed, out_dir, resume, realtime, trace, no_replay);
    if (eval->parsed()) return cmd_eval(checkpoint, config_path, users, duration, out);
    if (asev->parsed()) return cmd_autoscale_eval(config_path, users, duration, out);
    if (transfer->parsed()) return cmd_transfer(from, config_path, seeds, out_dir);
    if (features->parsed()) {
      if (!schema) {
        std::fprintf(stderr, "features: pass --schema to print the table\n");
        return 2;
      }
      return cmd_features(m_max);
    }
    if (exp->parsed()) return cmd_export(metrics_path, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
