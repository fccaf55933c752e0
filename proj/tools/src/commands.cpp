#include "snn/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "snn/container.hpp"
#include "snn/csv.hpp"
#include "snn/error.hpp"
#include "snn/heatmap.hpp"
#include "snn/robustness.hpp"
#include "snn/sweep.hpp"

namespace snn::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void prepare(RunConfig& cfg) {
  cfg.validate();
  cfg.arch.init_seed = cfg.component_seed(seed_init);
  cfg.train.seed = cfg.component_seed(seed_train);
  cfg.eval.seed = cfg.component_seed(seed_eval);
  cfg.eval.loss = cfg.train.loss;
}

void start_run_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  write_text(cfg.out / "config.json", dump_run_config(cfg));
}

// Cached sweep cells are only valid for the configuration that produced them.
void check_resumable(const RunConfig& cfg) {
  const fs::path existing = cfg.out / "config.json";
  if (!fs::is_regular_file(existing)) return;
  RunConfig previous = load_run_config(existing);
  previous.jobs = cfg.jobs;
  previous.out = cfg.out;
  previous.perturb = cfg.perturb;
  if (dump_run_config(previous) != dump_run_config(cfg)) {
    throw ConfigError(cfg.out.string() + " holds a sweep with a different configuration; use another --out");
  }
}

}  // namespace

int run_command(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return exit_ok;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return exit_internal;
  }
}

void cmd_train(RunConfig cfg, std::ostream& log) {
  prepare(cfg);
  LoadedData data = load_data(cfg);
  start_run_dir(cfg);

  Network net = build_network(cfg.arch, cfg.lif, cfg.t_steps);
  log << "training " << to_string(cfg.arch.arch) << " (" << net.parameter_count() << " parameters) on "
      << data.train.size() << " samples\n";
  FitResult fitted = fit(std::move(net), data.train, cfg.train, [&log](const EpochRecord& r) {
    log << "epoch " << r.epoch << "  train_loss " << csv::sig6(r.train_loss) << "  val_loss "
        << csv::sig6(r.val_loss) << "  val_acc " << csv::sig6(r.val_acc) << "\n";
  });

  save_network(fitted.network, cfg.out / "checkpoint");
  std::ostringstream hist;
  write_history_csv(fitted.history, hist);
  write_text(cfg.out / "history.csv", hist.str());

  const EvalResult r = evaluate(fitted.network, data.test, cfg.eval);
  log << "test_accuracy " << csv::sig6(r.accuracy) << "  total_spikes " << r.total_spikes
      << "  silent_fraction " << csv::sig6(r.silent_fraction) << "\n";
}

void cmd_sweep(RunConfig cfg, std::ostream& log) {
  prepare(cfg);
  LoadedData data = load_data(cfg);
  SweepGrid::empty(cfg.sweep.tau, cfg.sweep.v_th).validate();
  check_resumable(cfg);
  start_run_dir(cfg);

  SweepSpec spec{cfg.arch, cfg.lif, cfg.t_steps, cfg.train, cfg.eval};
  RunGridOptions opts;
  opts.jobs = cfg.resolved_jobs();
  opts.cell_dir = cfg.out / "cells";
  opts.on_cell = [&log](const SweepGrid& g, const SweepPoint& p) {
    log << "[" << g.completed_count() << "/" << g.cells.size() << "] tau " << csv::sig6(p.tau) << " v_th "
        << csv::sig6(p.v_th) << "  acc " << csv::sig6(p.test_accuracy) << "  spikes " << p.total_spikes << "  "
        << to_string(p.status) << "\n";
  };
  SweepGrid grid = run_grid(spec, data.train, data.test, cfg.sweep.tau, cfg.sweep.v_th, opts);

  try {
    apply_efficiency(grid);
  } catch (const DomainError& e) {
    log << "warning: " << e.what() << "; efficiency left at 0\n";
  }
  std::ostringstream csv_text;
  write_sweep_csv(grid, csv_text);
  write_text(cfg.out / "sweep.csv", csv_text.str());
  render_sweep_outputs(cfg.out, log);
}

void render_sweep_outputs(const fs::path& run_dir, std::ostream& log) {
  std::ifstream in(run_dir / "sweep.csv");
  if (!in) throw ConfigError("no sweep.csv in " + run_dir.string());
  const SweepGrid grid = read_sweep_csv(in);
  if (grid.completed_count() == 0) throw ConfigError("sweep.csv in " + run_dir.string() + " has no rows");

  // tau along x, v_th along y with the largest threshold on top.
  auto make = [&](const std::string& title, auto value) {
    HeatmapData d;
    d.title = title;
    d.x_label = "tau";
    d.y_label = "v_th";
    d.rows = grid.vth_values.size();
    d.cols = grid.tau_values.size();
    for (double t : grid.tau_values) d.x_ticks.push_back(csv::sig6(t));
    for (std::size_t r = 0; r < d.rows; ++r) {
      const std::size_t j = d.rows - 1 - r;
      d.y_ticks.push_back(csv::sig6(grid.vth_values[j]));
      for (std::size_t i = 0; i < d.cols; ++i) {
        const auto& c = grid.cells[grid.index(i, j)];
        d.values.push_back(c ? std::optional<double>(value(*c)) : std::nullopt);
      }
    }
    return d;
  };
  write_heatmap_svg(make("Test accuracy", [](const SweepPoint& p) { return p.test_accuracy; }),
                    run_dir / "accuracy.svg");
  write_heatmap_svg(make("Total spikes", [](const SweepPoint& p) { return static_cast<double>(p.total_spikes); }),
                    run_dir / "spikes.svg");

  std::ostringstream table;
  table << "model          tau        v_th       accuracy   spikes       efficiency\n";
  auto row = [&table](const char* name, const SweepPoint& p) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-14s %-10s %-10s %-10s %-12llu %s\n", name, csv::sig6(p.tau).c_str(),
                  csv::sig6(p.v_th).c_str(), csv::sig6(p.test_accuracy).c_str(),
                  static_cast<unsigned long long>(p.total_spikes), csv::sig6(p.efficiency).c_str());
    table << buf;
  };
  const bool have_eta = std::any_of(grid.cells.begin(), grid.cells.end(),
                                    [](const auto& c) { return c && c->efficiency != 0.0; });
  if (have_eta) {
    row("operational", select_operational_point(grid));
  } else {
    table << "operational    n/a (efficiency undefined for this grid)\n";
  }
  row("best-accuracy", select_best_accuracy(grid));
  if (grid.completed_count() < grid.cells.size()) {
    table << grid.completed_count() << " of " << grid.cells.size() << " cells completed\n";
  }
  write_text(run_dir / "sweep_summary.txt", table.str());
  log << table.str();
}

void cmd_perturb(RunConfig cfg, std::ostream& log) {
  prepare(cfg);
  const fs::path ckpt = cfg.checkpoint_path();
  if (!fs::is_regular_file(ckpt)) throw ConfigError("checkpoint not found: " + ckpt.string());
  const Network net = load_network(ckpt);
  LoadedData data = load_data(cfg);
  if (shape_numel(data.test.sample_shape()) != shape_numel(net.input_shape)) {
    throw ConfigError("checkpoint expects input " + shape_to_string(net.input_shape) + " but dataset gives " +
                      shape_to_string(data.test.sample_shape()));
  }
  start_run_dir(cfg);

  CampaignConfig cc;
  cc.n_samples = cfg.perturb.samples;
  cc.seed = cfg.component_seed(seed_campaign);
  cc.threshold = cfg.perturb.threshold;
  cc.jobs = cfg.resolved_jobs();
  cc.max_corr_neurons = cfg.perturb.max_corr_neurons;
  const CampaignResult result = run_robustness_campaign(net, data.test, cc);

  const fs::path corr_dir = cfg.out / "corr";
  fs::create_directories(corr_dir);
  std::ostringstream stats;
  stats << "layer,condition,neurons,samples,kurtosis,skewness,p99,count_above,mean,degenerate,degenerate_trains\n";
  for (const auto& lc : result.layers) {
    if (!lc.analyzed) {
      log << "layer" << lc.layer << ": " << lc.neurons << " neurons, skipped (max_corr_neurons "
          << cfg.perturb.max_corr_neurons << ")\n";
      continue;
    }
    const std::string name = "layer" + std::to_string(lc.layer);
    save_tensor(corr_dir / (name + "_clean.bin"), lc.clean);
    save_tensor(corr_dir / (name + "_cor.bin"), lc.corrupt);
    auto row = [&](const char* cond, std::size_t samples, const CorrStats& s, std::uint64_t degenerate_trains) {
      stats << name << "," << cond << "," << lc.neurons << "," << samples << "," << csv::sig6(s.kurtosis) << ","
            << csv::sig6(s.skewness) << "," << csv::sig6(s.p99) << "," << s.count_above << ","
            << csv::sig6(s.mean) << "," << (s.degenerate ? 1 : 0) << "," << degenerate_trains << "\n";
    };
    row("clean", result.analyzed, lc.clean_stats, lc.clean_degenerate_trains);
    row("corrupt", result.failed, lc.corrupt_stats, lc.corrupt_degenerate_trains);
  }
  write_text(cfg.out / "stats.csv", stats.str());

  std::ostringstream failures;
  failures << "frames_corrupted,samples\n";
  for (std::size_t k = 1; k < result.failure_histogram.size(); ++k) {
    failures << k << "," << result.failure_histogram[k] << "\n";
  }
  failures << "never," << result.never_failed << "\n";
  write_text(cfg.out / "failures.csv", failures.str());

  log << "samples " << result.selected << "  skipped " << result.skipped << "  failed " << result.failed
      << "  never_failed " << result.never_failed << "\n";
  log << "penultimate layer: layer" << result.penultimate_layer() << "\n";
  log << stats.str();
  render_corr_outputs(cfg.out, log);
}

void render_corr_outputs(const fs::path& run_dir, std::ostream& log) {
  const fs::path corr_dir = run_dir / "corr";
  if (!fs::is_directory(corr_dir)) throw ConfigError("no corr directory in " + run_dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(corr_dir)) {
    if (entry.path().extension() == ".bin") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string stem = f.stem().string();
    const bool clean = stem.ends_with("_clean");
    const std::string layer = stem.substr(0, stem.rfind('_'));
    const Tensor m = load_tensor(f);
    write_heatmap_svg(matrix_heatmap(m, layer + (clean ? " clean" : " corrupt") + " spike-train correlation"),
                      run_dir / ("corr_" + stem + ".svg"));
  }
  log << "rendered " << files.size() << " correlation heatmaps\n";
}

void cmd_report(const fs::path& run_dir, std::ostream& log) {
  if (!fs::is_directory(run_dir)) throw ConfigError("run directory not found: " + run_dir.string());
  const bool sweep = fs::is_regular_file(run_dir / "sweep.csv");
  const bool corr = fs::is_directory(run_dir / "corr");
  if (!sweep && !corr) throw ConfigError("nothing to report in " + run_dir.string());
  if (sweep) render_sweep_outputs(run_dir, log);
  if (corr) {
    render_corr_outputs(run_dir, log);
    std::ifstream stats(run_dir / "stats.csv");
    if (stats) log << stats.rdbuf();
  }
}

}  // namespace snn::cli
