#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "snn/data_io.hpp"
#include "snn/network.hpp"
#include "snn/training.hpp"

namespace snn {

enum class CellStatus { ok, silent, failed };

std::string to_string(CellStatus s);
CellStatus cell_status_from_string(const std::string& s);

struct SweepPoint {
  double tau = 0.0;
  double v_th = 0.0;
  double test_accuracy = 0.0;
  std::uint64_t total_spikes = 0;
  double efficiency = 0.0;
  CellStatus status = CellStatus::ok;

  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

/// (tau, v_th) grid; cells are stored tau-major: index = i_tau * |vth| + i_vth.
struct SweepGrid {
  std::vector<double> tau_values;
  std::vector<double> vth_values;
  std::vector<std::optional<SweepPoint>> cells;

  static SweepGrid empty(std::vector<double> taus, std::vector<double> vths);
  /// Throws ConfigError unless both axes are non-empty, sorted and tau > 1.
  void validate() const;
  std::size_t index(std::size_t i_tau, std::size_t i_vth) const {
    return i_tau * vth_values.size() + i_vth;
  }
  std::size_t completed_count() const;
  /// Completed cells in grid order.
  std::vector<SweepPoint> completed() const;
};

/// Everything that stays fixed across cells of one sweep.
struct SweepSpec {
  ArchSpec arch;
  LIFParams lif;  // tau and v_th are overwritten per cell
  std::size_t t_steps = 10;
  TrainConfig train;
  EvalOptions eval;
};

struct RunGridOptions {
  std::size_t jobs = 1;
  /// When set, each finished cell is persisted here and existing cells are reused.
  std::filesystem::path cell_dir;
  /// Stop after this many newly computed cells (simulates an interruption).
  std::optional<std::size_t> max_new_cells;
  /// Called under the collector lock after each completed cell.
  std::function<void(const SweepGrid&, const SweepPoint&)> on_cell;
};

/// Train and evaluate a fresh network at one grid point.
SweepPoint run_cell(const SweepSpec& spec, const Dataset& train, const Dataset& test, double tau,
                    double v_th);

SweepGrid run_grid(const SweepSpec& spec, const Dataset& train, const Dataset& test,
                   std::vector<double> tau_values, std::vector<double> vth_values,
                   const RunGridOptions& opts = {});

inline constexpr double kEfficiencyFloor = 1e-3;

/// eta = norm(acc) / norm(spikes), both min-max normalised to [1e-3, 1] over the
/// non-failed completed cells. Returns one value per cell index (0 where not
/// applicable). Throws DomainError when all spike counts are identical.
std::vector<double> efficiency(const SweepGrid& grid);

/// Fill SweepPoint::efficiency from efficiency().
void apply_efficiency(SweepGrid& grid);

/// argmax eta over non-silent cells (all cells if every one is silent);
/// ties: higher accuracy, fewer spikes, then smaller (tau, v_th).
SweepPoint select_operational_point(const SweepGrid& grid);

/// argmax accuracy; ties: fewer spikes, then smaller (tau, v_th).
SweepPoint select_best_accuracy(const SweepGrid& grid);

/// `tau,v_th,test_accuracy,total_spikes,efficiency,status`, %.6g floats.
void write_sweep_csv(const SweepGrid& grid, std::ostream& out);
/// Rebuilds a grid (axes from the distinct values present) from write_sweep_csv output.
SweepGrid read_sweep_csv(std::istream& in);

}  // namespace snn
