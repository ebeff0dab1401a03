#include "wsod/trainer.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "wsod/kernels.hpp"

namespace wsod::trainer {

void SGD::step(const std::vector<layers::Param*>& params) {
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (layers::Param* p : params) velocity_.push_back(Tensor::zeros_like(p->value));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    layers::Param& p = *params[i];
    Tensor& v = velocity_[i];
    const double sign = p.adversarial ? -1.0 : 1.0;  // ascent for the adversary
    for (std::size_t j = 0; j < v.size(); ++j) {
      double g = sign * p.grad[j] + wd_ * p.value[j];
      v[j] = momentum_ * v[j] + g;
      p.value[j] -= lr_ * v[j];
    }
  }
}

MetricReport evaluate(model::Detector& det, const std::vector<data::SyntheticScene>& scenes) {
  std::vector<evalmetrics::Detection> dets;
  std::vector<evalmetrics::GroundTruth> gts;
  for (const data::SyntheticScene& sc : scenes) {
    for (const data::Instance& inst : sc.instances)
      gts.push_back({sc.image_id, inst.cls, inst.box});
    for (evalmetrics::Detection& d : det.infer(sc)) dets.push_back(std::move(d));
  }
  MetricReport r;
  auto ap = evalmetrics::average_precision(dets, gts, 0.5);
  r.ap50 = ap.mean;
  r.ap_per_class = ap.per_class;
  auto cl = evalmetrics::corloc(dets, gts);
  r.corloc = cl.mean;
  r.corloc_per_class = cl.per_class;
  r.ar1 = evalmetrics::average_recall(dets, gts, 1).overall;
  r.ar10 = evalmetrics::average_recall(dets, gts, 10).overall;
  r.ar100_detail = evalmetrics::average_recall(dets, gts, 100);
  r.ar100 = r.ar100_detail.overall;
  return r;
}

namespace {
constexpr char kMagic[8] = {'W', 'S', 'O', 'D', 'C', 'K', 'P', '1'};

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::ifstream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_checkpoint(const std::string& path, const std::vector<layers::Param*>& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  f.write(kMagic, sizeof(kMagic));
  write_pod(f, static_cast<std::uint64_t>(params.size()));
  for (const layers::Param* p : params) {
    write_pod(f, static_cast<std::uint32_t>(p->name.size()));
    f.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_pod(f, static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t d : p->value.dims()) write_pod(f, static_cast<std::uint64_t>(d));
    f.write(reinterpret_cast<const char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
}

void load_checkpoint(const std::string& path, const std::vector<layers::Param*>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[8];
  f.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("bad checkpoint magic");
  std::uint64_t count = 0;
  read_pod(f, count);
  std::map<std::string, layers::Param*> by_name;
  for (layers::Param* p : params) by_name[p->name] = p;
  std::size_t loaded = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    read_pod(f, name_len);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    std::uint32_t rank = 0;
    read_pod(f, rank);
    std::vector<std::size_t> dims(rank);
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      std::uint64_t v = 0;
      read_pod(f, v);
      dims[d] = static_cast<std::size_t>(v);
      total *= dims[d];
    }
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint has unknown tensor " + name);
    if (it->second->value.dims() != dims)
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    f.read(reinterpret_cast<char*>(it->second->value.data()),
           static_cast<std::streamsize>(total * sizeof(double)));
    ++loaded;
  }
  if (!f) throw std::runtime_error("truncated checkpoint " + path);
  if (loaded != by_name.size())
    throw std::runtime_error("checkpoint is missing tensors for this model");
}

namespace {

std::vector<Tensor> snapshot(const std::vector<layers::Param*>& params) {
  std::vector<Tensor> s;
  s.reserve(params.size());
  for (layers::Param* p : params) s.push_back(p->value);
  return s;
}

void restore(const std::vector<layers::Param*>& params, const std::vector<Tensor>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

}  // namespace

TrainResult train(model::Detector& det, const RunConfig& cfg,
                  const std::vector<data::SyntheticScene>& scenes, const std::string& out_dir) {
  if (scenes.empty()) throw std::invalid_argument("train: empty dataset");
  const bool persist = !out_dir.empty();
  if (persist) {
    std::filesystem::create_directories(out_dir);
    cfg.save(out_dir + "/config.json");
  }

  auto params = det.params();
  SGD sgd(cfg.lr, cfg.momentum, cfg.weight_decay);
  Rng order_rng(cfg.seed ^ 0x5eedba5eULL);
  Rng noise_rng(cfg.seed ^ 0x90153ULL);

  TrainResult result;
  std::vector<Tensor> last_good = snapshot(params);
  result.last_good_iteration = 0;

  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t decay_at = cfg.iterations * 2 / 3;
  const seqbp::Mode mode =
      cfg.mode == BpMode::SeqBp ? seqbp::Mode::SeqBp : seqbp::Mode::Vanilla;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    if (it % scenes.size() == 0) {
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1],
                  order[static_cast<std::size_t>(order_rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    if (it == decay_at) sgd.set_lr(cfg.lr * 0.1);

    const data::SyntheticScene& scene = scenes[order[it % scenes.size()]];
    det.begin_iteration(&scene, &noise_rng);
    det.zero_grads();
    seqbp::IterationResult ir = seqbp::run_iteration(det, mode, cfg.sub_batch_size);
    if (!ir.finite) {
      result.diverged = true;
      restore(params, last_good);
      break;
    }
    sgd.step(params);
    result.losses.push_back(ir.losses);
    result.completed_iterations = it + 1;

    if ((it + 1) % cfg.checkpoint_interval == 0 || it + 1 == cfg.iterations) {
      last_good = snapshot(params);
      result.last_good_iteration = it + 1;
      if (persist) save_checkpoint(out_dir + "/checkpoint.bin", params);
    }
  }
  if (persist) {
    save_checkpoint(out_dir + "/checkpoint.bin", params);

    std::ofstream lf(out_dir + "/losses.csv");
    lf << "iteration,total,image";
    for (int b = 0; b < cfg.students; ++b) lf << ",roi_block" << b;
    lf << "\n";
    lf.precision(12);
    for (std::size_t i = 0; i < result.losses.size(); ++i) {
      const seqbp::HeadLosses& hl = result.losses[i];
      lf << i << ',' << hl.total << ',' << hl.image;
      for (double v : hl.roi_per_block) lf << ',' << v;
      lf << "\n";
    }

    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["config"] = nlohmann::json::parse(cfg.to_json_string());
    j["completed_iterations"] = result.completed_iterations;
    j["diverged"] = result.diverged;
    j["last_good_iteration"] = result.last_good_iteration;
    if (!result.losses.empty()) j["final_loss"] = result.losses.back().total;
    std::ofstream rf(out_dir + "/run_record.json");
    rf << j.dump(2) << '\n';
  }
  return result;
}

void write_metric_files(const MetricReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir + "/metrics.csv");
  csv << "class,metric,value\n";
  csv.precision(10);
  for (const auto& [cls, v] : report.ap_per_class) csv << cls << ",ap50," << v << "\n";
  for (const auto& [cls, v] : report.corloc_per_class) csv << cls << ",corloc," << v << "\n";
  csv << "all,ap50," << report.ap50 << "\n";
  csv << "all,corloc," << report.corloc << "\n";
  csv << "all,ar1," << report.ar1 << "\n";
  csv << "all,ar10," << report.ar10 << "\n";
  csv << "all,ar100," << report.ar100 << "\n";
  if (report.ar100_detail.has_small) csv << "all,ar100_small," << report.ar100_detail.small << "\n";
  if (report.ar100_detail.has_medium)
    csv << "all,ar100_medium," << report.ar100_detail.medium << "\n";
  if (report.ar100_detail.has_large) csv << "all,ar100_large," << report.ar100_detail.large << "\n";

  std::ofstream rep(out_dir + "/report.txt");
  rep.precision(4);
  rep << "detection metrics (synthetic eval split)\n";
  rep << "  AP50:    " << report.ap50 << "\n";
  rep << "  CorLoc:  " << report.corloc << "\n";
  rep << "  AR1:     " << report.ar1 << "\n";
  rep << "  AR10:    " << report.ar10 << "\n";
  rep << "  AR100:   " << report.ar100 << "\n";
  rep << "per-class AP50:\n";
  for (const auto& [cls, v] : report.ap_per_class)
    rep << "  class " << cls << ": " << v << "\n";
}

}  // namespace wsod::trainer
