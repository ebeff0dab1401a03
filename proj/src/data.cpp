#include "wsod/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace wsod::data {

namespace {

struct Rgb {
  double r, g, b;
};

// body colors and part pattern colors per class (square, disc, triangle, cross, ...)
const Rgb kBody[] = {{0.25, 0.45, 0.75}, {0.75, 0.30, 0.30}, {0.30, 0.70, 0.35},
                     {0.75, 0.65, 0.25}, {0.55, 0.35, 0.65}, {0.35, 0.65, 0.65}};
const Rgb kPart[] = {{1.00, 1.00, 0.30}, {0.30, 1.00, 1.00}, {1.00, 0.40, 1.00},
                     {0.50, 0.30, 1.00}, {1.00, 0.80, 0.20}, {0.20, 0.40, 1.00}};
constexpr int kMaxShapeClasses = 6;

void put_pixel(Tensor& img, std::size_t y, std::size_t x, const Rgb& c, double scale) {
  img.at(0, y, x) = std::clamp(c.r * scale, 0.0, 1.0);
  img.at(1, y, x) = std::clamp(c.g * scale, 0.0, 1.0);
  img.at(2, y, x) = std::clamp(c.b * scale, 0.0, 1.0);
}

bool inside_shape(int cls, double fx, double fy) {
  switch (cls % 4) {
    case 0:  // square
      return true;
    case 1: {  // disc
      double dx = fx - 0.5, dy = fy - 0.5;
      return dx * dx + dy * dy <= 0.25;
    }
    case 2:  // right triangle, legs on the left and bottom edges
      return fx + (1.0 - fy) <= 1.0;
    default: {  // cross
      bool hbar = fy >= 1.0 / 3 && fy <= 2.0 / 3;
      bool vbar = fx >= 1.0 / 3 && fx <= 2.0 / 3;
      return hbar || vbar;
    }
  }
}

// class-specific part location, as a fraction rectangle of the instance box
geometry::Box part_rect(int cls, const geometry::Box& b) {
  double w = b.width(), h = b.height();
  switch (cls % 4) {
    case 0: return {b.x1 + 0.08 * w, b.y1 + 0.08 * h, b.x1 + 0.58 * w, b.y1 + 0.58 * h};
    case 1: return {b.x1 + 0.25 * w, b.y1 + 0.25 * h, b.x1 + 0.75 * w, b.y1 + 0.75 * h};
    case 2: return {b.x1 + 0.05 * w, b.y1 + 0.45 * h, b.x1 + 0.55 * w, b.y1 + 0.95 * h};
    default: return {b.x1 + 0.25 * w, b.y1 + 0.25 * h, b.x1 + 0.75 * w, b.y1 + 0.75 * h};
  }
}

void render_instance(Tensor& img, const Instance& inst, Rng& rng) {
  const auto s = static_cast<std::ptrdiff_t>(img.dim(1));
  const geometry::Box& b = inst.box;
  const Rgb body = kBody[inst.cls % kMaxShapeClasses];
  const Rgb part = kPart[inst.cls % kMaxShapeClasses];
  const double body_scale = rng.uniform(0.55, 1.05);
  geometry::Box pr = part_rect(inst.cls, b);

  auto y0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(b.y1)));
  auto y1 = std::min<std::ptrdiff_t>(s, static_cast<std::ptrdiff_t>(std::ceil(b.y2)));
  auto x0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(b.x1)));
  auto x1 = std::min<std::ptrdiff_t>(s, static_cast<std::ptrdiff_t>(std::ceil(b.x2)));
  for (auto y = y0; y < y1; ++y)
    for (auto x = x0; x < x1; ++x) {
      double fx = (x + 0.5 - b.x1) / b.width();
      double fy = (y + 0.5 - b.y1) / b.height();
      if (fx < 0.0 || fx > 1.0 || fy < 0.0 || fy > 1.0) continue;
      if (!inside_shape(inst.cls, fx, fy)) continue;
      double px = x + 0.5, py = y + 0.5;
      bool in_part = px >= pr.x1 && px < pr.x2 && py >= pr.y1 && py < pr.y2;
      if (in_part) {
        // crisp checker pattern, the consistent discriminative signal
        bool on = ((x + y) & 1) == 0;
        put_pixel(img, static_cast<std::size_t>(y), static_cast<std::size_t>(x), part,
                  rng.uniform(0.92, 1.0) * (on ? 1.0 : 0.55));
      } else {
        // noisy body: unreliable evidence
        put_pixel(img, static_cast<std::size_t>(y), static_cast<std::size_t>(x), body,
                  body_scale + rng.uniform(-0.12, 0.12));
      }
    }
}

geometry::Box jitter_box(const geometry::Box& b, Rng& rng, double shift, double scale_lo,
                         double scale_hi, double img) {
  double w = b.width() * rng.uniform(scale_lo, scale_hi);
  double h = b.height() * rng.uniform(scale_lo, scale_hi);
  double cx = b.cx() + b.width() * rng.uniform(-shift, shift);
  double cy = b.cy() + b.height() * rng.uniform(-shift, shift);
  geometry::Box j{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  j.x1 = std::clamp(j.x1, 0.0, img - 2.0);
  j.y1 = std::clamp(j.y1, 0.0, img - 2.0);
  j.x2 = std::clamp(j.x2, j.x1 + 2.0, img);
  j.y2 = std::clamp(j.y2, j.y1 + 2.0, img);
  return j;
}

}  // namespace

std::vector<int> SyntheticScene::gt_classes() const {
  std::vector<int> cs;
  for (std::size_t c = 0; c < image_label.size(); ++c)
    if (image_label[c]) cs.push_back(static_cast<int>(c));
  return cs;
}

SyntheticScene generate_scene(Rng& rng, const GenParams& gp, const std::string& image_id) {
  const double img = static_cast<double>(gp.image_size);
  SyntheticScene sc;
  sc.image_id = image_id;
  sc.image = Tensor{3, gp.image_size, gp.image_size};

  // noisy background with a faint tint
  double tint_r = rng.uniform(0.0, 0.05), tint_g = rng.uniform(0.0, 0.05),
         tint_b = rng.uniform(0.0, 0.05);
  for (std::size_t y = 0; y < gp.image_size; ++y)
    for (std::size_t x = 0; x < gp.image_size; ++x) {
      sc.image.at(0, y, x) = 0.10 + tint_r + rng.uniform(0.0, 0.08);
      sc.image.at(1, y, x) = 0.10 + tint_g + rng.uniform(0.0, 0.08);
      sc.image.at(2, y, x) = 0.10 + tint_b + rng.uniform(0.0, 0.08);
    }

  // place instances; same-class adjacent pairs are injected to exercise
  // grouped-instance ambiguity
  const int want = rng.uniform_int(1, gp.max_instances);
  int attempts = 0;
  while (static_cast<int>(sc.instances.size()) < want && attempts < 200) {
    ++attempts;
    double w = rng.uniform(14.0, 30.0);
    double h = rng.uniform(14.0, 30.0);
    double x1 = rng.uniform(1.0, img - w - 1.0);
    double y1 = rng.uniform(1.0, img - h - 1.0);
    geometry::Box b{x1, y1, x1 + w, y1 + h};
    bool ok = true;
    for (const Instance& other : sc.instances)
      if (geometry::iou(b, other.box) > 0.2) ok = false;
    if (!ok) continue;
    int cls = rng.uniform_int(0, gp.num_classes - 1);
    sc.instances.push_back({cls, b});

    // adjacent same-class companion
    if (static_cast<int>(sc.instances.size()) < want && rng.uniform() < 0.35) {
      double gap = rng.uniform(2.0, 6.0);
      geometry::Box nb = b;
      if (rng.uniform() < 0.5) {
        nb.x1 = b.x2 + gap;
        nb.x2 = nb.x1 + w;
      } else {
        nb.y1 = b.y2 + gap;
        nb.y2 = nb.y1 + h;
      }
      if (nb.x2 < img - 1.0 && nb.y2 < img - 1.0) {
        bool ok2 = true;
        for (const Instance& other : sc.instances)
          if (geometry::iou(nb, other.box) > 0.2) ok2 = false;
        if (ok2) sc.instances.push_back({cls, nb});
      }
    }
  }

  sc.image_label.assign(static_cast<std::size_t>(gp.num_classes), 0);
  for (const Instance& inst : sc.instances) sc.image_label[static_cast<std::size_t>(inst.cls)] = 1;
  for (const Instance& inst : sc.instances) render_instance(sc.image, inst, rng);

  // proposals
  sc.proposals.image_id = image_id;
  sc.proposals.width = img;
  sc.proposals.height = img;
  auto& boxes = sc.proposals.boxes;
  for (const Instance& inst : sc.instances) {
    boxes.push_back(jitter_box(inst.box, rng, 0.03, 0.95, 1.05, img));  // tight
    for (int i = 0; i < 5; ++i) boxes.push_back(jitter_box(inst.box, rng, 0.18, 0.8, 1.25, img));
    geometry::Box pr = part_rect(inst.cls, inst.box);
    for (int i = 0; i < 2; ++i) boxes.push_back(jitter_box(pr, rng, 0.1, 0.9, 1.15, img));
  }
  // grouped boxes: union of same-class near pairs
  for (std::size_t i = 0; i < sc.instances.size(); ++i)
    for (std::size_t j = i + 1; j < sc.instances.size(); ++j) {
      if (sc.instances[i].cls != sc.instances[j].cls) continue;
      const geometry::Box &a = sc.instances[i].box, &b = sc.instances[j].box;
      double gapx = std::max(0.0, std::max(a.x1, b.x1) - std::min(a.x2, b.x2));
      double gapy = std::max(0.0, std::max(a.y1, b.y1) - std::min(a.y2, b.y2));
      if (gapx < 10.0 && gapy < 10.0) {
        geometry::Box u{std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
                        std::max(a.y2, b.y2)};
        boxes.push_back(jitter_box(u, rng, 0.03, 0.97, 1.06, img));
      }
    }
  // random boxes up to the target count
  const std::size_t target =
      std::max<std::size_t>(boxes.size() + 8,
                            static_cast<std::size_t>(rng.uniform_int(
                                static_cast<int>(gp.min_proposals),
                                static_cast<int>(gp.max_proposals))));
  while (boxes.size() < target) {
    double w = rng.uniform(6.0, img * 0.7);
    double h = rng.uniform(6.0, img * 0.7);
    double x1 = rng.uniform(0.0, img - w);
    double y1 = rng.uniform(0.0, img - h);
    boxes.push_back({x1, y1, x1 + w, y1 + h});
  }
  // shuffle so proposal index carries no signal
  for (std::size_t i = boxes.size(); i > 1; --i)
    std::swap(boxes[i - 1], boxes[static_cast<std::size_t>(rng.uniform_int(
                  0, static_cast<int>(i) - 1))]);
  // ingestion clipping
  std::vector<geometry::Box> clipped;
  for (const geometry::Box& b : boxes) {
    try {
      clipped.push_back(geometry::clip_box(b, img, img));
    } catch (const geometry::ZeroAreaAfterClip&) {
    }
  }
  boxes = std::move(clipped);
  return sc;
}

std::vector<SyntheticScene> make_dataset(std::uint64_t seed, std::size_t count,
                                         const GenParams& gp, const std::string& id_prefix) {
  Rng master(seed);
  std::vector<SyntheticScene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng scene_rng = master.fork(i);
    out.push_back(generate_scene(scene_rng, gp, id_prefix + std::to_string(i)));
  }
  return out;
}

std::map<std::string, geometry::ProposalSet> load_proposals(const std::string& path, double w,
                                                            double h) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open proposal file " + path);
  std::map<std::string, geometry::ProposalSet> out;
  std::vector<std::string> order;  // images with at least one raw record
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> raw_counts;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string id;
    double x1, y1, x2, y2;
    if (!(ss >> id >> x1 >> y1 >> x2 >> y2)) throw SchemaError(line_no, "expected: image_id x1 y1 x2 y2 [objectness]");
    double objectness;  // optional, validated but unused downstream
    if (ss >> objectness) {
      if (!std::isfinite(objectness)) throw SchemaError(line_no, "non-finite objectness");
    }
    std::string trailing;
    if (ss >> trailing) throw SchemaError(line_no, "trailing fields");
    if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2))
      throw SchemaError(line_no, "non-finite coordinates");
    if (x2 <= x1 || y2 <= y1) throw SchemaError(line_no, "box extents must be positive");
    if (raw_counts.find(id) == raw_counts.end()) order.push_back(id);
    ++raw_counts[id];
    try {
      geometry::Box b = geometry::clip_box({x1, y1, x2, y2}, w, h);
      auto& ps = out[id];
      ps.image_id = id;
      ps.width = w;
      ps.height = h;
      ps.boxes.push_back(b);
    } catch (const geometry::ZeroAreaAfterClip&) {
      // rejected at ingestion
    }
  }
  for (const std::string& id : order)
    if (out.find(id) == out.end() || out[id].boxes.empty()) throw EmptyProposalSet(id);
  return out;
}

void save_proposals(const std::string& path,
                    const std::vector<const geometry::ProposalSet*>& sets) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write proposal file " + path);
  f.precision(17);
  for (const geometry::ProposalSet* ps : sets)
    for (const geometry::Box& b : ps->boxes)
      f << ps->image_id << ' ' << b.x1 << ' ' << b.y1 << ' ' << b.x2 << ' ' << b.y2 << '\n';
}

void write_manifest(const std::string& path, const std::vector<SyntheticScene>& scenes) {
  nlohmann::json j;
  j["images"] = nlohmann::json::array();
  for (const SyntheticScene& sc : scenes) {
    nlohmann::json e;
    e["image_id"] = sc.image_id;
    e["label"] = sc.image_label;
    e["num_proposals"] = sc.proposals.boxes.size();
    j["images"].push_back(e);
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest " + path);
  f << j.dump(2) << '\n';
}

}  // namespace wsod::data
