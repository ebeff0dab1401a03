#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace wsod::seqbp {

// Model-level activation accounting. Zones separate the image-level Base
// activations, the per-region span that sequential BP recomputes (pooled
// features, DropBlock maps, Neck internals), the Head internals, and the
// boundary tensors the schedule itself retains (A_b, E, G_n, G_b).
enum class Zone { Base, Region, Head, Boundary };

class MemoryAccountant {
 public:
  void add(Zone z, std::size_t elems);
  void sub(Zone z, std::size_t elems);

  // Named boundary tensors, visible in the retained-activation census.
  void acquire_named(const std::string& name, Zone z, std::size_t elems);
  void release_named(const std::string& name);

  std::size_t live(Zone z) const { return live_[index(z)]; }
  std::size_t live_total() const;
  std::size_t peak(Zone z) const { return peak_[index(z)]; }
  std::size_t peak_total() const { return peak_total_; }

  std::vector<std::pair<std::string, std::size_t>> census() const;

  void reset();

 private:
  static std::size_t index(Zone z) { return static_cast<std::size_t>(z); }
  void bump_peaks(Zone z);

  std::size_t live_[4] = {0, 0, 0, 0};
  std::size_t peak_[4] = {0, 0, 0, 0};
  std::size_t peak_total_ = 0;
  std::map<std::string, std::pair<Zone, std::size_t>> named_;
};

}  // namespace wsod::seqbp
