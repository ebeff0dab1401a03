#include "wsod/experiments.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include "wsod/plot.hpp"

namespace wsod::experiments {

void Table::save_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
  f << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
    f << "\n";
  }
}

trainer::MetricReport run_single(const RunConfig& cfg, const std::string& out_dir) {
  data::GenParams gp = data::GenParams::from_config(cfg);
  auto train_scenes = data::make_dataset(cfg.seed, cfg.train_scenes, gp, "train");
  auto eval_scenes = data::make_dataset(cfg.seed ^ 0xe7a1ULL, cfg.eval_scenes, gp, "eval");
  Rng init_rng(cfg.seed ^ 0x1417ULL);
  model::Detector det(cfg, init_rng);
  trainer::train(det, cfg, train_scenes, out_dir);
  trainer::MetricReport r = trainer::evaluate(det, eval_scenes);
  if (!out_dir.empty()) trainer::write_metric_files(r, out_dir);
  return r;
}

namespace {

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
}

void finish_row(AblationRow& row) {
  mean_sd(row.ap50, row.ap50_mean, row.ap50_sd);
  mean_sd(row.corloc, row.corloc_mean, row.corloc_sd);
  mean_sd(row.ar100, row.ar100_mean, row.ar100_sd);
}

}  // namespace

std::vector<AblationRow> run_ablation(const RunConfig& base,
                                      const std::vector<std::uint64_t>& seeds, std::ostream* log) {
  struct Variant {
    const char* name;
    SelectionMode selection;
    bool regression;
    DropMode drop;
  };
  const Variant variants[] = {
      {"baseline_top1", SelectionMode::Top1, false, DropMode::Off},
      {"mist_noreg", SelectionMode::Mist, false, DropMode::Off},
      {"mist", SelectionMode::Mist, true, DropMode::Off},
      {"mist_fixed_dropblock", SelectionMode::Mist, true, DropMode::Fixed},
      {"mist_concrete_dropblock", SelectionMode::Mist, true, DropMode::Concrete},
  };
  std::vector<AblationRow> rows;
  for (const Variant& v : variants) {
    AblationRow row;
    row.name = v.name;
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.selection = v.selection;
      cfg.regression = v.regression;
      cfg.drop = v.drop;
      cfg.seed = seed;
      trainer::MetricReport r = run_single(cfg);
      row.ap50.push_back(r.ap50);
      row.corloc.push_back(r.corloc);
      row.ar100.push_back(r.ar100);
      if (log)
        *log << "[ablate] " << row.name << " seed=" << seed << " ap50=" << r.ap50
             << " corloc=" << r.corloc << " ar100=" << r.ar100 << std::endl;
    }
    finish_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

Table ablation_table(const std::vector<AblationRow>& rows) {
  Table t;
  t.header = {"variant", "ap50_mean", "ap50_sd", "corloc_mean", "corloc_sd",
              "ar100_mean", "ar100_sd", "seeds"};
  for (const AblationRow& r : rows) {
    t.rows.push_back({r.name, std::to_string(r.ap50_mean), std::to_string(r.ap50_sd),
                      std::to_string(r.corloc_mean), std::to_string(r.corloc_sd),
                      std::to_string(r.ar100_mean), std::to_string(r.ar100_sd),
                      std::to_string(r.ap50.size())});
  }
  return t;
}

bool GridResult::interior_max(std::size_t seed_index) const {
  const auto& grid = ap[seed_index];
  std::size_t bi = 0, bj = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < grid[i].size(); ++j)
      if (grid[i][j] > best) {
        best = grid[i][j];
        bi = i;
        bj = j;
      }
  return bi > 0 && bi + 1 < grid.size() && bj > 0 && bj + 1 < grid[bi].size();
}

std::size_t GridResult::interior_max_count() const {
  std::size_t n = 0;
  for (std::size_t s = 0; s < ap.size(); ++s)
    if (interior_max(s)) ++n;
  return n;
}

GridResult run_sensitivity_grid(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                const std::vector<double>& ps, const std::vector<double>& taus,
                                std::ostream* log) {
  GridResult g;
  g.ps = ps;
  g.taus = taus;
  for (std::uint64_t seed : seeds) {
    std::vector<std::vector<double>> grid;
    for (double p : ps) {
      std::vector<double> row;
      for (double tau : taus) {
        RunConfig cfg = base;
        cfg.selection = SelectionMode::Mist;
        cfg.drop = DropMode::Off;
        cfg.p = p;
        cfg.mist_iou_tau = tau;
        cfg.seed = seed;
        trainer::MetricReport r = run_single(cfg);
        row.push_back(r.ap50);
        if (log)
          *log << "[grid] seed=" << seed << " p=" << p << " iou=" << tau << " ap50=" << r.ap50
               << std::endl;
      }
      grid.push_back(std::move(row));
    }
    g.ap.push_back(std::move(grid));
  }
  return g;
}

Table grid_table(const GridResult& g) {
  Table t;
  t.header = {"seed_index", "p", "iou", "ap50"};
  for (std::size_t s = 0; s < g.ap.size(); ++s)
    for (std::size_t i = 0; i < g.ps.size(); ++i)
      for (std::size_t j = 0; j < g.taus.size(); ++j)
        t.rows.push_back({std::to_string(s), std::to_string(g.ps[i]), std::to_string(g.taus[j]),
                          std::to_string(g.ap[s][i][j])});
  return t;
}

void grid_heatmap(const GridResult& g, const std::string& path) {
  // seed-mean AP per cell
  std::vector<std::vector<double>> mean(g.ps.size(), std::vector<double>(g.taus.size(), 0.0));
  for (const auto& grid : g.ap)
    for (std::size_t i = 0; i < g.ps.size(); ++i)
      for (std::size_t j = 0; j < g.taus.size(); ++j) mean[i][j] += grid[i][j];
  for (auto& row : mean)
    for (double& v : row) v /= static_cast<double>(g.ap.size());
  std::vector<std::string> row_labels, col_labels;
  for (double p : g.ps) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p=%.2f", p);
    row_labels.push_back(buf);
  }
  for (double tau : g.taus) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "iou=%.1f", tau);
    col_labels.push_back(buf);
  }
  plot::heatmap(path, "ap50 over p and iou", mean, row_labels, col_labels);
}

std::vector<BenchRow> run_bench(const RunConfig& base, const std::vector<std::size_t>& ns,
                                int repetitions, std::ostream* log) {
  std::vector<BenchRow> rows;
  for (std::size_t n : ns) {
    RunConfig cfg = base;
    cfg.drop = DropMode::Off;  // the sweep measures the backbone schedule
    data::GenParams gp = data::GenParams::from_config(cfg);
    Rng rng(cfg.seed ^ n);
    data::SyntheticScene scene = data::generate_scene(rng, gp, "bench" + std::to_string(n));

    // replace proposals with exactly n random boxes
    const double img = static_cast<double>(cfg.image_size);
    scene.proposals.boxes.clear();
    while (scene.proposals.boxes.size() < n) {
      double w = rng.uniform(6.0, img * 0.7);
      double h = rng.uniform(6.0, img * 0.7);
      double x1 = rng.uniform(0.0, img - w);
      double y1 = rng.uniform(0.0, img - h);
      scene.proposals.boxes.push_back({x1, y1, x1 + w, y1 + h});
    }

    for (BpMode mode : {BpMode::Vanilla, BpMode::SeqBp}) {
      RunConfig mc = cfg;
      mc.mode = mode;
      Rng init_rng(cfg.seed ^ 0x1417ULL);
      model::Detector det(mc, init_rng);
      seqbp::MemoryAccountant acc;
      det.set_accountant(&acc);
      Rng noise(cfg.seed);

      BenchRow row;
      row.n = n;
      row.mode = mode;
      row.seconds = 1e300;
      for (int rep = 0; rep < repetitions; ++rep) {
        det.begin_iteration(&scene, &noise);
        det.zero_grads();
        auto t0 = std::chrono::steady_clock::now();
        seqbp::IterationResult ir = seqbp::run_iteration(
            det, mode == BpMode::SeqBp ? seqbp::Mode::SeqBp : seqbp::Mode::Vanilla,
            mc.sub_batch_size);
        auto t1 = std::chrono::steady_clock::now();
        row.peak_units = ir.peak_region_units;
        row.peak_total_units = ir.peak_total_units;
        row.seconds = std::min(row.seconds, std::chrono::duration<double>(t1 - t0).count());
      }
      rows.push_back(row);
      if (log)
        *log << "[bench] N=" << n << " mode=" << to_string(mode)
             << " peak_units=" << rows.back().peak_units << " seconds=" << rows.back().seconds
             << std::endl;
    }
  }
  return rows;
}

Table bench_table(const std::vector<BenchRow>& rows) {
  Table t;
  t.header = {"N", "mode", "peak_units", "seconds"};
  for (const BenchRow& r : rows)
    t.rows.push_back({std::to_string(r.n), to_string(r.mode), std::to_string(r.peak_units),
                      std::to_string(r.seconds)});
  return t;
}

Table bench_detail_table(const std::vector<BenchRow>& rows) {
  Table t;
  t.header = {"N", "mode", "peak_units", "peak_total_units", "seconds"};
  for (const BenchRow& r : rows)
    t.rows.push_back({std::to_string(r.n), to_string(r.mode), std::to_string(r.peak_units),
                      std::to_string(r.peak_total_units), std::to_string(r.seconds)});
  return t;
}

void bench_plot(const std::vector<BenchRow>& rows, const std::string& path) {
  plot::Series vanilla_mem{"vanilla", {}, {}, 200, 40, 40};
  plot::Series seqbp_mem{"seqbp", {}, {}, 40, 80, 200};
  for (const BenchRow& r : rows) {
    plot::Series& s = r.mode == BpMode::Vanilla ? vanilla_mem : seqbp_mem;
    s.x.push_back(static_cast<double>(r.n));
    s.y.push_back(static_cast<double>(r.peak_units));
  }
  plot::line_plot(path, "peak activation units vs proposals", {vanilla_mem, seqbp_mem},
                  "proposals", "units");
}

}  // namespace wsod::experiments
