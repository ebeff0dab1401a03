#pragma once

#include <cstdint>
#include <string>

namespace wsod {

enum class DropMode { Off, Fixed, Concrete };
enum class BpMode { Vanilla, SeqBp };
enum class SelectionMode { Top1, Mist };

std::string to_string(DropMode m);
std::string to_string(BpMode m);
std::string to_string(SelectionMode m);
DropMode drop_mode_from_string(const std::string& s);
BpMode bp_mode_from_string(const std::string& s);
SelectionMode selection_mode_from_string(const std::string& s);

// Full run configuration; serialized next to every run artifact.
struct RunConfig {
  // dataset
  int num_classes = 4;
  std::size_t image_size = 64;
  int max_instances = 4;
  std::size_t train_scenes = 96;
  std::size_t eval_scenes = 48;
  std::size_t min_proposals = 60;
  std::size_t max_proposals = 140;

  // pseudo-label generation
  double p = 0.15;
  double mist_iou_tau = 0.2;
  double fg_iou = 0.5;
  SelectionMode selection = SelectionMode::Mist;
  bool regression = true;
  int students = 3;

  // Concrete DropBlock
  DropMode drop = DropMode::Off;
  double drop_clamp_tau = 0.3;
  std::size_t block_size = 3;
  double gumbel_temperature = 0.5;
  std::size_t drop_hidden = 16;
  double fixed_drop_rate = 0.1;

  // image loss variant
  bool literal_image_loss = false;

  // backprop schedule
  BpMode mode = BpMode::Vanilla;
  std::size_t sub_batch_size = 500;

  // model widths
  std::size_t base_c1 = 12;
  std::size_t base_c2 = 16;
  std::size_t base_c3 = 16;
  std::size_t roi_size = 5;
  std::size_t neck_hidden = 96;
  std::size_t embed_dim = 96;

  // optimizer
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  std::size_t iterations = 600;

  // inference
  double nms_iou = 0.3;
  double conf_thresh = 1e-3;

  std::uint64_t seed = 1;
  std::size_t checkpoint_interval = 100;

  void validate() const;  // throws std::invalid_argument on out-of-range values
  std::string to_json_string() const;
  static RunConfig from_json_string(const std::string& text);
  void save(const std::string& path) const;
  static RunConfig load(const std::string& path);
};

}  // namespace wsod
