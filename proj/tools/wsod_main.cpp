#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "wsod/experiments.hpp"

namespace {

using namespace wsod;

std::string resolve_out(const std::string& out) {
  if (out.empty() || out.front() == '/') return out;
  const char* root = std::getenv("WSOD_OUT_ROOT");
  if (root && *root) return std::string(root) + "/" + out;
  return out;
}

void add_common_flags(CLI::App* cmd, RunConfig& cfg, std::string& mode, std::string& drop,
                      std::string& out) {
  cmd->add_option("--mode", mode, "backprop schedule: vanilla or seqbp");
  cmd->add_option("--sub-batch", cfg.sub_batch_size, "sub-batch size for seqbp");
  cmd->add_option("--p", cfg.p, "MIST top-percentage");
  cmd->add_option("--mist-iou", cfg.mist_iou_tau, "MIST diversity IoU threshold");
  cmd->add_option("--drop", drop, "DropBlock variant: off, fixed, or concrete");
  cmd->add_option("--drop-tau", cfg.drop_clamp_tau, "DropBlock probability clamp");
  cmd->add_option("--students", cfg.students, "number of student blocks");
  cmd->add_option("--seed", cfg.seed, "run seed");
  cmd->add_flag("--literal-image-loss", cfg.literal_image_loss,
                "use the positive-term-only image loss");
  cmd->add_option("--out", out, "output directory (relative to $WSOD_OUT_ROOT)");
}

void apply_modes(RunConfig& cfg, const std::string& mode, const std::string& drop) {
  if (!mode.empty()) cfg.mode = bp_mode_from_string(mode);
  if (!drop.empty()) cfg.drop = drop_mode_from_string(drop);
}

int cmd_train(RunConfig cfg, const std::string& out, const std::string& dump_pseudo) {
  cfg.validate();
  const std::string out_dir = resolve_out(out.empty() ? "run" : out);
  std::filesystem::create_directories(out_dir);
  data::GenParams gp = data::GenParams::from_config(cfg);
  auto train_scenes = data::make_dataset(cfg.seed, cfg.train_scenes, gp, "train");
  auto eval_scenes = data::make_dataset(cfg.seed ^ 0xe7a1ULL, cfg.eval_scenes, gp, "eval");

  Rng init_rng(cfg.seed ^ 0x1417ULL);
  model::Detector det(cfg, init_rng);
  trainer::TrainResult tr = trainer::train(det, cfg, train_scenes, out_dir);
  if (tr.diverged) {
    std::cerr << "training diverged at iteration " << tr.completed_iterations
              << "; parameters restored to iteration " << tr.last_good_iteration << "\n";
  }
  data::write_manifest(out_dir + "/manifest.json", train_scenes);

  trainer::MetricReport r = trainer::evaluate(det, eval_scenes);
  trainer::write_metric_files(r, out_dir);
  std::cout << "ap50=" << r.ap50 << " corloc=" << r.corloc << " ar100=" << r.ar100 << "\n";

  if (!dump_pseudo.empty()) {
    std::ofstream f(resolve_out(dump_pseudo));
    for (const auto& scene : train_scenes)
      mist::dump_pseudo_labels(f, scene.image_id, det.pseudo_labels(scene));
  }
  return tr.diverged ? 1 : 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& split, std::string out) {
  std::filesystem::path ckpt(checkpoint);
  if (!std::filesystem::exists(ckpt)) {
    std::cerr << "checkpoint not found: " << checkpoint << "\n";
    return 1;
  }
  RunConfig cfg = RunConfig::load((ckpt.parent_path() / "config.json").string());
  data::GenParams gp = data::GenParams::from_config(cfg);
  auto scenes = split == "train"
                    ? data::make_dataset(cfg.seed, cfg.train_scenes, gp, "train")
                    : data::make_dataset(cfg.seed ^ 0xe7a1ULL, cfg.eval_scenes, gp, "eval");
  Rng init_rng(cfg.seed ^ 0x1417ULL);
  model::Detector det(cfg, init_rng);
  trainer::load_checkpoint(checkpoint, det.params());
  trainer::MetricReport r = trainer::evaluate(det, scenes);
  if (out.empty()) out = (ckpt.parent_path() / ("eval_" + split)).string();
  trainer::write_metric_files(r, resolve_out(out));
  std::cout << "split=" << split << " ap50=" << r.ap50 << " corloc=" << r.corloc
            << " ar1=" << r.ar1 << " ar10=" << r.ar10 << " ar100=" << r.ar100 << "\n";
  return 0;
}

int cmd_ablate(RunConfig cfg, const std::string& out, int num_seeds, bool skip_grid) {
  cfg.validate();
  const std::string out_dir = resolve_out(out.empty() ? "ablation" : out);
  std::filesystem::create_directories(out_dir);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < num_seeds; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));

  auto rows = experiments::run_ablation(cfg, seeds, &std::cout);
  experiments::ablation_table(rows).save_csv(out_dir + "/ablation.csv");

  if (!skip_grid) {
    const std::vector<double> ps = {0.05, 0.10, 0.15, 0.20, 0.25};
    const std::vector<double> taus = {0.1, 0.2, 0.3, 0.4, 0.5};
    auto grid = experiments::run_sensitivity_grid(cfg, seeds, ps, taus, &std::cout);
    experiments::grid_table(grid).save_csv(out_dir + "/grid.csv");
    experiments::grid_heatmap(grid, out_dir + "/grid.png");
    std::cout << "interior-maximum seeds: " << grid.interior_max_count() << "/" << seeds.size()
              << "\n";
  }
  std::cout << "ablation table written to " << out_dir << "/ablation.csv\n";
  return 0;
}

int cmd_bench(RunConfig cfg, const std::string& out, int reps) {
  cfg.validate();
  const std::string out_dir = resolve_out(out.empty() ? "bench" : out);
  std::filesystem::create_directories(out_dir);
  const std::vector<std::size_t> ns = {1000, 2000, 3000, 4000, 5000};
  auto rows = experiments::run_bench(cfg, ns, reps, &std::cout);
  experiments::bench_table(rows).save_csv(out_dir + "/bench.csv");
  experiments::bench_detail_table(rows).save_csv(out_dir + "/bench_detail.csv");
  experiments::bench_plot(rows, out_dir + "/bench.png");
  std::cout << "bench table written to " << out_dir << "/bench.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly supervised detection toolkit (synthetic desk-scale)"};
  app.require_subcommand(1);

  RunConfig cfg;
  // --config seeds the defaults; explicit flags override on top
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        cfg = RunConfig::load(argv[i + 1]);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
      }
    }
  }

  std::string mode_s, drop_s, out, dump_pseudo, config_path;
  std::string checkpoint, split = "eval";
  int num_seeds = 3, reps = 2;
  bool skip_grid = false;

  CLI::App* train = app.add_subcommand("train", "train on synthetic scenes");
  add_common_flags(train, cfg, mode_s, drop_s, out);
  train->add_option("--config", config_path, "load a config JSON before applying flags");
  train->add_option("--iters", cfg.iterations, "training iterations");
  train->add_option("--train-scenes", cfg.train_scenes, "training scene count");
  train->add_option("--eval-scenes", cfg.eval_scenes, "eval scene count");
  train->add_option("--classes", cfg.num_classes, "number of classes");
  train->add_option("--lr", cfg.lr, "learning rate");
  train->add_option("--dump-pseudo", dump_pseudo, "write teacher pseudo-label dump here");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--split", split, "train or eval split");
  eval->add_option("--out", out, "output directory");

  CLI::App* ablate = app.add_subcommand("ablate", "module ablation and sensitivity grid");
  add_common_flags(ablate, cfg, mode_s, drop_s, out);
  ablate->add_option("--iters", cfg.iterations, "training iterations per run");
  ablate->add_option("--train-scenes", cfg.train_scenes, "training scene count");
  ablate->add_option("--eval-scenes", cfg.eval_scenes, "eval scene count");
  ablate->add_option("--seeds", num_seeds, "number of seeds");
  ablate->add_flag("--skip-grid", skip_grid, "skip the p x IoU grid");

  CLI::App* bench = app.add_subcommand("bench", "memory/time sweep over proposal counts");
  add_common_flags(bench, cfg, mode_s, drop_s, out);
  bench->add_option("--reps", reps, "repetitions per cell (min time kept)");

  CLI11_PARSE(app, argc, argv);

  try {
    apply_modes(cfg, mode_s, drop_s);
    if (app.got_subcommand(train)) return cmd_train(cfg, out, dump_pseudo);
    if (app.got_subcommand(eval)) return cmd_eval(checkpoint, split, out);
    if (app.got_subcommand(ablate)) return cmd_ablate(cfg, out, num_seeds, skip_grid);
    if (app.got_subcommand(bench)) return cmd_bench(cfg, out, reps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
