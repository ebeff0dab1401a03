#include "wsod/config.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace wsod {

std::string to_string(DropMode m) {
  switch (m) {
    case DropMode::Off: return "off";
    case DropMode::Fixed: return "fixed";
    case DropMode::Concrete: return "concrete";
  }
  return "off";
}
std::string to_string(BpMode m) { return m == BpMode::Vanilla ? "vanilla" : "seqbp"; }
std::string to_string(SelectionMode m) { return m == SelectionMode::Top1 ? "top1" : "mist"; }

DropMode drop_mode_from_string(const std::string& s) {
  if (s == "off") return DropMode::Off;
  if (s == "fixed") return DropMode::Fixed;
  if (s == "concrete") return DropMode::Concrete;
  throw std::invalid_argument("unknown drop mode: " + s);
}
BpMode bp_mode_from_string(const std::string& s) {
  if (s == "vanilla") return BpMode::Vanilla;
  if (s == "seqbp") return BpMode::SeqBp;
  throw std::invalid_argument("unknown bp mode: " + s);
}
SelectionMode selection_mode_from_string(const std::string& s) {
  if (s == "top1") return SelectionMode::Top1;
  if (s == "mist") return SelectionMode::Mist;
  throw std::invalid_argument("unknown selection mode: " + s);
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (p <= 0.0 || p > 1.0) fail("p must be in (0,1]");
  if (mist_iou_tau <= 0.0 || mist_iou_tau >= 1.0) fail("mist_iou_tau must be in (0,1)");
  if (fg_iou <= 0.0 || fg_iou > 1.0) fail("fg_iou must be in (0,1]");
  if (drop_clamp_tau <= 0.0 || drop_clamp_tau > 1.0) fail("drop_clamp_tau must be in (0,1]");
  if (block_size % 2 == 0 || block_size > roi_size) fail("block_size must be odd and <= roi_size");
  if (gumbel_temperature <= 0.0) fail("gumbel_temperature must be positive");
  if (students < 1) fail("students must be >= 1");
  if (sub_batch_size < 1) fail("sub_batch_size must be >= 1");
  if (lr <= 0.0) fail("lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) fail("momentum must be in [0,1)");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (min_proposals < 1 || max_proposals < min_proposals) fail("bad proposal count range");
  if (max_instances < 1) fail("max_instances must be >= 1");
}

std::string RunConfig::to_json_string() const {
  nlohmann::json j;
  j["num_classes"] = num_classes;
  j["image_size"] = image_size;
  j["max_instances"] = max_instances;
  j["train_scenes"] = train_scenes;
  j["eval_scenes"] = eval_scenes;
  j["min_proposals"] = min_proposals;
  j["max_proposals"] = max_proposals;
  j["p"] = p;
  j["mist_iou_tau"] = mist_iou_tau;
  j["fg_iou"] = fg_iou;
  j["selection"] = to_string(selection);
  j["regression"] = regression;
  j["students"] = students;
  j["drop"] = to_string(drop);
  j["drop_clamp_tau"] = drop_clamp_tau;
  j["block_size"] = block_size;
  j["gumbel_temperature"] = gumbel_temperature;
  j["drop_hidden"] = drop_hidden;
  j["fixed_drop_rate"] = fixed_drop_rate;
  j["literal_image_loss"] = literal_image_loss;
  j["mode"] = to_string(mode);
  j["sub_batch_size"] = sub_batch_size;
  j["base_c1"] = base_c1;
  j["base_c2"] = base_c2;
  j["base_c3"] = base_c3;
  j["roi_size"] = roi_size;
  j["neck_hidden"] = neck_hidden;
  j["embed_dim"] = embed_dim;
  j["lr"] = lr;
  j["momentum"] = momentum;
  j["weight_decay"] = weight_decay;
  j["iterations"] = iterations;
  j["nms_iou"] = nms_iou;
  j["conf_thresh"] = conf_thresh;
  j["seed"] = seed;
  j["checkpoint_interval"] = checkpoint_interval;
  return j.dump(2);
}

RunConfig RunConfig::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  RunConfig c;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
  };
  get("num_classes", c.num_classes);
  get("image_size", c.image_size);
  get("max_instances", c.max_instances);
  get("train_scenes", c.train_scenes);
  get("eval_scenes", c.eval_scenes);
  get("min_proposals", c.min_proposals);
  get("max_proposals", c.max_proposals);
  get("p", c.p);
  get("mist_iou_tau", c.mist_iou_tau);
  get("fg_iou", c.fg_iou);
  if (j.contains("selection")) c.selection = selection_mode_from_string(j["selection"]);
  get("regression", c.regression);
  get("students", c.students);
  if (j.contains("drop")) c.drop = drop_mode_from_string(j["drop"]);
  get("drop_clamp_tau", c.drop_clamp_tau);
  get("block_size", c.block_size);
  get("gumbel_temperature", c.gumbel_temperature);
  get("drop_hidden", c.drop_hidden);
  get("fixed_drop_rate", c.fixed_drop_rate);
  get("literal_image_loss", c.literal_image_loss);
  if (j.contains("mode")) c.mode = bp_mode_from_string(j["mode"]);
  get("sub_batch_size", c.sub_batch_size);
  get("base_c1", c.base_c1);
  get("base_c2", c.base_c2);
  get("base_c3", c.base_c3);
  get("roi_size", c.roi_size);
  get("neck_hidden", c.neck_hidden);
  get("embed_dim", c.embed_dim);
  get("lr", c.lr);
  get("momentum", c.momentum);
  get("weight_decay", c.weight_decay);
  get("iterations", c.iterations);
  get("nms_iou", c.nms_iou);
  get("conf_thresh", c.conf_thresh);
  get("seed", c.seed);
  get("checkpoint_interval", c.checkpoint_interval);
  c.validate();
  return c;
}

void RunConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write config to " + path);
  f << to_json_string() << '\n';
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config from " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

}  // namespace wsod
