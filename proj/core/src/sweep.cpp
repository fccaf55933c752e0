#include "snn/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "snn/csv.hpp"
#include "snn/error.hpp"

namespace snn {

std::string to_string(CellStatus s) {
  switch (s) {
    case CellStatus::ok:
      return "ok";
    case CellStatus::silent:
      return "silent";
    case CellStatus::failed:
      return "failed";
  }
  return "failed";
}

CellStatus cell_status_from_string(const std::string& s) {
  if (s == "ok") return CellStatus::ok;
  if (s == "silent") return CellStatus::silent;
  if (s == "failed") return CellStatus::failed;
  throw FormatError("unknown cell status '" + s + "'");
}

SweepGrid SweepGrid::empty(std::vector<double> taus, std::vector<double> vths) {
  SweepGrid g;
  g.tau_values = std::move(taus);
  g.vth_values = std::move(vths);
  g.cells.assign(g.tau_values.size() * g.vth_values.size(), std::nullopt);
  return g;
}

void SweepGrid::validate() const {
  if (tau_values.empty() || vth_values.empty()) throw ConfigError("sweep grid axes must be non-empty");
  if (!std::is_sorted(tau_values.begin(), tau_values.end()) ||
      !std::is_sorted(vth_values.begin(), vth_values.end())) {
    throw ConfigError("sweep grid axes must be sorted ascending");
  }
  for (double t : tau_values) {
    if (!(t > 1.0)) throw ConfigError("sweep tau values must be > 1");
  }
  if (cells.size() != tau_values.size() * vth_values.size()) {
    throw ConfigError("sweep grid cell count does not match its axes");
  }
}

std::size_t SweepGrid::completed_count() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.has_value(); }));
}

std::vector<SweepPoint> SweepGrid::completed() const {
  std::vector<SweepPoint> out;
  for (const auto& c : cells)
    if (c) out.push_back(*c);
  return out;
}

SweepPoint run_cell(const SweepSpec& spec, const Dataset& train, const Dataset& test, double tau,
                    double v_th) {
  SweepPoint p;
  p.tau = tau;
  p.v_th = v_th;
  LIFParams lif = spec.lif;
  lif.tau = tau;
  lif.v_th = v_th;
  try {
    Network net = build_network(spec.arch, lif, spec.t_steps);
    FitResult trained = fit(std::move(net), train, spec.train);
    EvalResult r = evaluate(trained.network, test, spec.eval);
    p.test_accuracy = r.accuracy;
    p.total_spikes = r.total_spikes;
    p.status = r.total_spikes == 0 ? CellStatus::silent : CellStatus::ok;
  } catch (const DivergenceError&) {
    p.status = CellStatus::failed;
  }
  return p;
}

namespace {

std::filesystem::path cell_path(const std::filesystem::path& dir, std::size_t i, std::size_t j) {
  return dir / ("cell_" + std::to_string(i) + "_" + std::to_string(j) + ".txt");
}

void persist_cell(const std::filesystem::path& path, const SweepPoint& p) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << csv::exact(p.tau) << ' ' << csv::exact(p.v_th) << ' ' << csv::exact(p.test_accuracy)
        << ' ' << p.total_spikes << ' ' << to_string(p.status) << '\n';
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<SweepPoint> load_cell(const std::filesystem::path& path, double tau, double v_th) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string tau_s, vth_s, acc_s, spikes_s, status_s;
  if (!(in >> tau_s >> vth_s >> acc_s >> spikes_s >> status_s)) return std::nullopt;
  SweepPoint p;
  p.tau = csv::parse_double(tau_s);
  p.v_th = csv::parse_double(vth_s);
  // A cell from a different grid must not be reused.
  if (p.tau != tau || p.v_th != v_th) return std::nullopt;
  p.test_accuracy = csv::parse_double(acc_s);
  p.total_spikes = csv::parse_uint(spikes_s);
  p.status = cell_status_from_string(status_s);
  return p;
}

}  // namespace

SweepGrid run_grid(const SweepSpec& spec, const Dataset& train, const Dataset& test,
                   std::vector<double> tau_values, std::vector<double> vth_values,
                   const RunGridOptions& opts) {
  SweepGrid grid = SweepGrid::empty(std::move(tau_values), std::move(vth_values));
  grid.validate();
  const std::size_t n_vth = grid.vth_values.size();
  const bool persist = !opts.cell_dir.empty();
  if (persist) std::filesystem::create_directories(opts.cell_dir);

  std::vector<std::size_t> pending;
  for (std::size_t k = 0; k < grid.cells.size(); ++k) {
    const std::size_t i = k / n_vth, j = k % n_vth;
    if (persist) {
      grid.cells[k] = load_cell(cell_path(opts.cell_dir, i, j), grid.tau_values[i], grid.vth_values[j]);
    }
    if (!grid.cells[k]) pending.push_back(k);
  }
  if (opts.max_new_cells && pending.size() > *opts.max_new_cells) {
    pending.resize(*opts.max_new_cells);
  }

  std::mutex collector;
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= pending.size()) return;
      const std::size_t k = pending[slot];
      const std::size_t i = k / n_vth, j = k % n_vth;
      try {
        SweepPoint p = run_cell(spec, train, test, grid.tau_values[i], grid.vth_values[j]);
        std::lock_guard lock(collector);
        if (persist) persist_cell(cell_path(opts.cell_dir, i, j), p);
        grid.cells[k] = p;
        if (opts.on_cell) opts.on_cell(grid, p);
      } catch (...) {
        std::lock_guard lock(collector);
        if (!first_error) first_error = std::current_exception();
        next = pending.size();
        return;
      }
    }
  };

  const std::size_t n_threads = std::max<std::size_t>(1, std::min(opts.jobs, pending.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return grid;
}

std::vector<double> efficiency(const SweepGrid& grid) {
  std::vector<std::size_t> usable;
  for (std::size_t k = 0; k < grid.cells.size(); ++k) {
    if (grid.cells[k] && grid.cells[k]->status != CellStatus::failed) usable.push_back(k);
  }
  if (usable.empty()) throw DomainError("efficiency: grid has no completed cells");

  double acc_min = 1e300, acc_max = -1e300;
  double spk_min = 1e300, spk_max = -1e300;
  for (std::size_t k : usable) {
    const SweepPoint& p = *grid.cells[k];
    acc_min = std::min(acc_min, p.test_accuracy);
    acc_max = std::max(acc_max, p.test_accuracy);
    spk_min = std::min(spk_min, static_cast<double>(p.total_spikes));
    spk_max = std::max(spk_max, static_cast<double>(p.total_spikes));
  }
  if (spk_max == spk_min) {
    throw DomainError("efficiency: all cells have the same spike count, normalization is degenerate");
  }

  const double eps = kEfficiencyFloor;
  auto normalise = [eps](double x, double lo, double hi) {
    return eps + (1.0 - eps) * (x - lo) / (hi - lo);
  };
  std::vector<double> eta(grid.cells.size(), 0.0);
  for (std::size_t k : usable) {
    const SweepPoint& p = *grid.cells[k];
    const double na = acc_max == acc_min ? 1.0 : normalise(p.test_accuracy, acc_min, acc_max);
    const double ns = normalise(static_cast<double>(p.total_spikes), spk_min, spk_max);
    eta[k] = na / ns;
  }
  return eta;
}

void apply_efficiency(SweepGrid& grid) {
  const std::vector<double> eta = efficiency(grid);
  for (std::size_t k = 0; k < grid.cells.size(); ++k) {
    if (grid.cells[k]) grid.cells[k]->efficiency = eta[k];
  }
}

namespace {

template <typename Better>
SweepPoint select_by(const SweepGrid& grid, bool skip_silent, Better better) {
  std::optional<SweepPoint> best;
  auto scan = [&](bool exclude_silent) {
    for (const auto& c : grid.cells) {
      if (!c || c->status == CellStatus::failed) continue;
      if (exclude_silent && c->status == CellStatus::silent) continue;
      if (!best || better(*c, *best)) best = *c;
    }
  };
  scan(skip_silent);
  if (!best && skip_silent) scan(false);
  if (!best) throw DomainError("selection over an empty grid");
  return *best;
}

}  // namespace

SweepPoint select_operational_point(const SweepGrid& grid) {
  return select_by(grid, true, [](const SweepPoint& a, const SweepPoint& b) {
    if (a.efficiency != b.efficiency) return a.efficiency > b.efficiency;
    if (a.test_accuracy != b.test_accuracy) return a.test_accuracy > b.test_accuracy;
    if (a.total_spikes != b.total_spikes) return a.total_spikes < b.total_spikes;
    return std::tie(a.tau, a.v_th) < std::tie(b.tau, b.v_th);
  });
}

SweepPoint select_best_accuracy(const SweepGrid& grid) {
  return select_by(grid, false, [](const SweepPoint& a, const SweepPoint& b) {
    if (a.test_accuracy != b.test_accuracy) return a.test_accuracy > b.test_accuracy;
    if (a.total_spikes != b.total_spikes) return a.total_spikes < b.total_spikes;
    return std::tie(a.tau, a.v_th) < std::tie(b.tau, b.v_th);
  });
}

void write_sweep_csv(const SweepGrid& grid, std::ostream& out) {
  out << "tau,v_th,test_accuracy,total_spikes,efficiency,status\n";
  for (const auto& c : grid.cells) {
    if (!c) continue;
    out << csv::sig6(c->tau) << ',' << csv::sig6(c->v_th) << ',' << csv::sig6(c->test_accuracy)
        << ',' << c->total_spikes << ',' << csv::sig6(c->efficiency) << ',' << to_string(c->status)
        << '\n';
  }
}

SweepGrid read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("sweep CSV is empty");
  const auto header = csv::split_line(line);
  const std::vector<std::string> expected{"tau", "v_th", "test_accuracy", "total_spikes",
                                          "efficiency", "status"};
  if (header != expected) throw FormatError("unexpected sweep CSV header: " + line);
  std::vector<SweepPoint> rows;
  std::set<double> taus, vths;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() != 6) throw FormatError("sweep CSV row has " + std::to_string(f.size()) + " fields");
    SweepPoint p;
    p.tau = csv::parse_double(f[0]);
    p.v_th = csv::parse_double(f[1]);
    p.test_accuracy = csv::parse_double(f[2]);
    p.total_spikes = csv::parse_uint(f[3]);
    p.efficiency = csv::parse_double(f[4]);
    p.status = cell_status_from_string(f[5]);
    taus.insert(p.tau);
    vths.insert(p.v_th);
    rows.push_back(p);
  }
  SweepGrid grid = SweepGrid::empty({taus.begin(), taus.end()}, {vths.begin(), vths.end()});
  for (const SweepPoint& p : rows) {
    const auto i = static_cast<std::size_t>(
        std::lower_bound(grid.tau_values.begin(), grid.tau_values.end(), p.tau) -
        grid.tau_values.begin());
    const auto j = static_cast<std::size_t>(
        std::lower_bound(grid.vth_values.begin(), grid.vth_values.end(), p.v_th) -
        grid.vth_values.begin());
    grid.cells[grid.index(i, j)] = p;
  }
  return grid;
}

}  // namespace snn
