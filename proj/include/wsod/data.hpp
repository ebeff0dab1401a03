#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsod/config.hpp"
#include "wsod/geometry.hpp"
#include "wsod/rng.hpp"
#include "wsod/tensor.hpp"

namespace wsod::data {

struct Instance {
  int cls = 0;
  geometry::Box box;
};

struct SyntheticScene {
  std::string image_id;
  Tensor image;  // (3, S, S), values in [0,1]
  std::vector<Instance> instances;
  std::vector<int> image_label;  // per class, 0/1
  geometry::ProposalSet proposals;

  std::vector<int> gt_classes() const;
};

struct GenParams {
  int num_classes = 4;
  std::size_t image_size = 64;
  int max_instances = 4;
  std::size_t min_proposals = 60;
  std::size_t max_proposals = 140;

  static GenParams from_config(const RunConfig& c) {
    GenParams g;
    g.num_classes = c.num_classes;
    g.image_size = c.image_size;
    g.max_instances = c.max_instances;
    g.min_proposals = c.min_proposals;
    g.max_proposals = c.max_proposals;
    return g;
  }
};

// Scenes contain 1..max_instances shapes with per-class bodies and a small
// high-contrast "part" sub-pattern; proposals mix tight and loose jittered
// ground truth, part-only boxes, grouped-pair boxes, and random boxes.
SyntheticScene generate_scene(Rng& rng, const GenParams& gp, const std::string& image_id);
std::vector<SyntheticScene> make_dataset(std::uint64_t seed, std::size_t count,
                                         const GenParams& gp, const std::string& id_prefix);

struct SchemaError : std::runtime_error {
  explicit SchemaError(std::size_t line, const std::string& what)
      : std::runtime_error("proposal file line " + std::to_string(line) + ": " + what),
        line_number(line) {}
  std::size_t line_number;
};
struct EmptyProposalSet : std::runtime_error {
  explicit EmptyProposalSet(const std::string& image_id)
      : std::runtime_error("no valid proposals for image " + image_id) {}
};

// Line format: image_id x1 y1 x2 y2 [objectness]. Boxes are clipped into
// [0,w]x[0,h]; boxes whose clipped area falls below the geometry epsilon are
// rejected. An image whose boxes all get rejected raises EmptyProposalSet.
std::map<std::string, geometry::ProposalSet> load_proposals(const std::string& path, double w,
                                                            double h);
void save_proposals(const std::string& path,
                    const std::vector<const geometry::ProposalSet*>& sets);

// Manifest: one JSON object per dataset listing image ids and labels.
void write_manifest(const std::string& path, const std::vector<SyntheticScene>& scenes);

}  // namespace wsod::data
