#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wsod/config.hpp"
#include "wsod/trainer.hpp"

namespace wsod::experiments {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  void save_csv(const std::string& path) const;
};

// One train+eval run: fresh datasets and model from cfg.seed.
trainer::MetricReport run_single(const RunConfig& cfg, const std::string& out_dir = "");

// Module ablation: {baseline top-1, +MIST w/o Reg., +MIST, +fixed DropBlock,
// +Concrete DropBlock} over the given seeds.
struct AblationRow {
  std::string name;
  std::vector<double> ap50, corloc, ar100;  // per seed
  double ap50_mean = 0.0, ap50_sd = 0.0;
  double corloc_mean = 0.0, corloc_sd = 0.0;
  double ar100_mean = 0.0, ar100_sd = 0.0;
};
std::vector<AblationRow> run_ablation(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                      std::ostream* log);
Table ablation_table(const std::vector<AblationRow>& rows);

// p × IoU sensitivity grid (MIST only).
struct GridResult {
  std::vector<double> ps, taus;
  // [seed][p_index][tau_index] -> AP50
  std::vector<std::vector<std::vector<double>>> ap;
  bool interior_max(std::size_t seed_index) const;
  std::size_t interior_max_count() const;
};
GridResult run_sensitivity_grid(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                const std::vector<double>& ps, const std::vector<double>& taus,
                                std::ostream* log);
Table grid_table(const GridResult& g);
void grid_heatmap(const GridResult& g, const std::string& path);

// Memory/time sweep over proposal counts for both schedules.
struct BenchRow {
  std::size_t n = 0;
  BpMode mode = BpMode::Vanilla;
  std::size_t peak_units = 0;        // region-span activation elements
  std::size_t peak_total_units = 0;  // all retained activation elements
  double seconds = 0.0;
};
std::vector<BenchRow> run_bench(const RunConfig& base, const std::vector<std::size_t>& ns,
                                int repetitions, std::ostream* log);
Table bench_table(const std::vector<BenchRow>& rows);         // (N, mode, peak_units, seconds)
Table bench_detail_table(const std::vector<BenchRow>& rows);  // + totals
void bench_plot(const std::vector<BenchRow>& rows, const std::string& path);

}  // namespace wsod::experiments
