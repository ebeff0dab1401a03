#pragma once

#include <map>
#include <string>
#include <vector>

#include "wsod/config.hpp"
#include "wsod/data.hpp"
#include "wsod/evalmetrics.hpp"
#include "wsod/model.hpp"
#include "wsod/seqbp.hpp"

namespace wsod::trainer {

// SGD with momentum and weight decay; adversarial parameters take an ascent
// step (gradient sign flip) inside the same joint update.
class SGD {
 public:
  SGD(double lr, double momentum, double weight_decay)
      : lr_(lr), momentum_(momentum), wd_(weight_decay) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step(const std::vector<layers::Param*>& params);

 private:
  double lr_, momentum_, wd_;
  std::vector<Tensor> velocity_;
};

struct MetricReport {
  double ap50 = 0.0;
  double corloc = 0.0;
  double ar1 = 0.0, ar10 = 0.0, ar100 = 0.0;
  std::map<int, double> ap_per_class;
  std::map<int, double> corloc_per_class;
  evalmetrics::ArResult ar100_detail;
};

MetricReport evaluate(model::Detector& det, const std::vector<data::SyntheticScene>& scenes);

void save_checkpoint(const std::string& path, const std::vector<layers::Param*>& params);
void load_checkpoint(const std::string& path, const std::vector<layers::Param*>& params);

struct TrainResult {
  std::vector<seqbp::HeadLosses> losses;  // one entry per completed iteration
  bool diverged = false;
  std::size_t completed_iterations = 0;
  std::size_t last_good_iteration = 0;
};

// Runs the configured number of iterations over the scene list. When
// out_dir is non-empty, persists config.json, checkpoint.bin, losses.csv,
// and run_record.json there. A non-finite loss aborts the run and restores
// the last checkpointed parameters.
TrainResult train(model::Detector& det, const RunConfig& cfg,
                  const std::vector<data::SyntheticScene>& scenes, const std::string& out_dir);

void write_metric_files(const MetricReport& report, const std::string& out_dir);

}  // namespace wsod::trainer
