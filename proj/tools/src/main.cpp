#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "snn/cli/commands.hpp"
#include "snn/error.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> dataset;
  std::optional<std::string> data_path;
  std::optional<std::string> arch;
  std::optional<double> tau;
  std::optional<double> vth;
  std::optional<std::size_t> timesteps;
  std::optional<std::string> surrogate;
  std::optional<std::size_t> epochs;
  std::optional<std::string> checkpoint;
  std::optional<std::size_t> samples;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("--out", o.out, "Run directory");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--jobs", o.jobs, "Worker threads (default: all cores)");
  cmd->add_option("--dataset", o.dataset, "Dataset")->check(CLI::IsMember({"mnist", "cifar10", "synthetic"}));
  cmd->add_option("--data-path", o.data_path, "Directory holding the dataset files");
  cmd->add_option("--arch", o.arch, "Architecture")->check(CLI::IsMember({"mlpsnn", "cnnsnn"}));
  cmd->add_option("--tau", o.tau, "Membrane time constant");
  cmd->add_option("--vth", o.vth, "Firing threshold");
  cmd->add_option("--timesteps", o.timesteps, "Simulation steps T");
  cmd->add_option("--surrogate", o.surrogate, "Surrogate gradient")->check(CLI::IsMember({"arctan", "sigmoid"}));
  cmd->add_option("--epochs", o.epochs, "Maximum training epochs");
}

snn::cli::RunConfig resolve(const Overrides& o) {
  snn::cli::RunConfig cfg;
  if (!o.config.empty()) cfg = snn::cli::load_run_config(o.config);
  if (o.out) cfg.out = *o.out;
  if (o.seed) cfg.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.dataset) cfg.dataset.name = *o.dataset;
  if (o.data_path) cfg.dataset.path = *o.data_path;
  if (o.arch) cfg.arch.arch = snn::arch_from_string(*o.arch);
  if (o.tau) cfg.lif.tau = *o.tau;
  if (o.vth) cfg.lif.v_th = *o.vth;
  if (o.timesteps) cfg.t_steps = *o.timesteps;
  if (o.surrogate) {
    cfg.lif.surrogate = snn::surrogate_from_string(*o.surrogate);
    cfg.lif.alpha = snn::default_alpha(cfg.lif.surrogate);
  }
  if (o.epochs) cfg.train.max_epochs = *o.epochs;
  if (o.checkpoint) cfg.perturb.checkpoint = *o.checkpoint;
  if (o.samples) cfg.perturb.samples = *o.samples;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking neural network training, parameter sweeps and robustness analysis"};
  app.require_subcommand(1);

  Overrides o;
  std::string report_dir;
  auto* train = app.add_subcommand("train", "Train one network and write a checkpoint");
  auto* sweep = app.add_subcommand("sweep", "Train and evaluate over a (tau, v_th) grid");
  auto* perturb = app.add_subcommand("perturb", "Noise-injection robustness campaign on a checkpoint");
  auto* report = app.add_subcommand("report", "Regenerate heatmaps and tables from a run directory");
  for (auto* cmd : {train, sweep, perturb}) add_common(cmd, o);
  perturb->add_option("--checkpoint", o.checkpoint, "Checkpoint file (default: <out>/checkpoint)");
  perturb->add_option("--samples", o.samples, "Number of test samples");
  report->add_option("run_dir", report_dir, "Run directory");
  report->add_option("--out", o.out, "Run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? snn::cli::exit_ok : snn::cli::exit_usage;
  }

  return snn::cli::run_command(
      [&] {
        if (report->parsed()) {
          const std::string dir = !report_dir.empty() ? report_dir : o.out.value_or("");
          if (dir.empty()) throw snn::ConfigError("report needs a run directory");
          snn::cli::cmd_report(dir, std::cout);
          return;
        }
        snn::cli::RunConfig cfg = resolve(o);
        if (train->parsed()) snn::cli::cmd_train(cfg, std::cout);
        if (sweep->parsed()) snn::cli::cmd_sweep(cfg, std::cout);
        if (perturb->parsed()) snn::cli::cmd_perturb(cfg, std::cout);
      },
      std::cerr);
}
