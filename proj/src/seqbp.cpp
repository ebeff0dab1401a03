#include "wsod/seqbp.hpp"

#include <algorithm>
#include <cmath>

namespace wsod::seqbp {

// ---- MemoryAccountant ----

void MemoryAccountant::bump_peaks(Zone z) {
  peak_[index(z)] = std::max(peak_[index(z)], live_[index(z)]);
  peak_total_ = std::max(peak_total_, live_total());
}

void MemoryAccountant::add(Zone z, std::size_t elems) {
  live_[index(z)] += elems;
  bump_peaks(z);
}

void MemoryAccountant::sub(Zone z, std::size_t elems) {
  live_[index(z)] = live_[index(z)] >= elems ? live_[index(z)] - elems : 0;
}

void MemoryAccountant::acquire_named(const std::string& name, Zone z, std::size_t elems) {
  release_named(name);
  named_[name] = {z, elems};
  add(z, elems);
}

void MemoryAccountant::release_named(const std::string& name) {
  auto it = named_.find(name);
  if (it == named_.end()) return;
  sub(it->second.first, it->second.second);
  named_.erase(it);
}

std::size_t MemoryAccountant::live_total() const {
  return live_[0] + live_[1] + live_[2] + live_[3];
}

std::vector<std::pair<std::string, std::size_t>> MemoryAccountant::census() const {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& [name, zs] : named_) out.emplace_back(name, zs.second);
  return out;
}

void MemoryAccountant::reset() {
  for (int i = 0; i < 4; ++i) live_[i] = peak_[i] = 0;
  peak_total_ = 0;
  named_.clear();
}

// ---- SubBatchPlan ----

SubBatchPlan SubBatchPlan::uniform(std::size_t n, std::size_t sub_batch_size) {
  if (sub_batch_size == 0) throw PlanError("sub_batch_size must be positive");
  SubBatchPlan plan;
  for (std::size_t b = 0; b < n; b += sub_batch_size)
    plan.ranges.emplace_back(b, std::min(n, b + sub_batch_size));
  if (n == 0) throw PlanError("empty region set");
  return plan;
}

void SubBatchPlan::validate(std::size_t n) const {
  std::size_t cursor = 0;
  for (const auto& [b, e] : ranges) {
    if (b != cursor) throw PlanError("plan gap or overlap at region " + std::to_string(b));
    if (e <= b) throw PlanError("empty sub-batch range");
    cursor = e;
  }
  if (cursor != n) throw PlanError("plan does not cover all regions");
}

// ---- schedule ----

ForwardState forward_pass(RegionPipeline& p, const SubBatchPlan& plan) {
  plan.validate(p.num_regions());
  MemoryAccountant* acc = p.accountant();
  ForwardState st;
  st.a_b = p.base_forward(/*cache=*/false);
  if (acc) acc->acquire_named("A_b", Zone::Boundary, st.a_b.size());

  for (std::size_t i = 0; i < plan.ranges.size(); ++i) {
    const auto& [b, e] = plan.ranges[i];
    Tensor rows = p.region_forward(st.a_b, b, e, /*cache=*/false);
    if (st.embeddings.empty()) {
      std::vector<std::size_t> d = rows.dims();
      d[0] = p.num_regions();
      st.embeddings = Tensor{d};
      if (acc) acc->acquire_named("E", Zone::Boundary, st.embeddings.size());
    }
    std::copy(rows.data(), rows.data() + rows.size(),
              st.embeddings.data() + b * st.embeddings.row_elems());
  }
  return st;
}

HeadStepResult head_step(RegionPipeline& p, ForwardState& state) {
  MemoryAccountant* acc = p.accountant();
  HeadStepResult r;
  r.losses = p.head_forward(state.embeddings, /*cache=*/true);
  if (!std::isfinite(r.losses.total)) {
    r.finite = false;
    p.head_clear();
    return r;
  }
  r.g_n = p.head_backward();
  p.head_clear();
  if (acc) {
    acc->acquire_named("G_n", Zone::Boundary, r.g_n.size());
    acc->release_named("E");  // the Head was its only consumer
  }
  state.embeddings = Tensor{};
  return r;
}

Tensor neck_sequential_step(RegionPipeline& p, const Tensor& a_b, const Tensor& g_n,
                            const SubBatchPlan& plan) {
  plan.validate(p.num_regions());
  MemoryAccountant* acc = p.accountant();
  Tensor g_b = Tensor::zeros_like(a_b);
  if (acc) acc->acquire_named("G_b", Zone::Boundary, g_b.size());
  for (const auto& [b, e] : plan.ranges) {
    p.region_forward(a_b, b, e, /*cache=*/true);
    Tensor g_rows = g_n.rows(b, e);
    p.region_backward(g_rows, b, e, g_b);
    p.region_clear();  // no two sub-batches' activations coexist
  }
  return g_b;
}

void base_step(RegionPipeline& p, const Tensor& g_b) {
  p.base_forward(/*cache=*/true);
  p.base_backward(g_b);
  p.base_clear();
}

IterationResult run_iteration(RegionPipeline& p, Mode mode, std::size_t sub_batch_size) {
  MemoryAccountant* acc = p.accountant();
  if (acc) acc->reset();
  IterationResult out;

  if (mode == Mode::Vanilla) {
    Tensor a_b = p.base_forward(/*cache=*/true);
    if (acc) acc->acquire_named("A_b", Zone::Boundary, a_b.size());
    Tensor e = p.region_forward(a_b, 0, p.num_regions(), /*cache=*/true);
    if (acc) acc->acquire_named("E", Zone::Boundary, e.size());
    out.losses = p.head_forward(e, /*cache=*/true);
    if (!std::isfinite(out.losses.total)) {
      out.finite = false;
    } else {
      Tensor g_n = p.head_backward();
      if (acc) acc->acquire_named("G_n", Zone::Boundary, g_n.size());
      Tensor g_b = Tensor::zeros_like(a_b);
      if (acc) acc->acquire_named("G_b", Zone::Boundary, g_b.size());
      p.region_backward(g_n, 0, p.num_regions(), g_b);
      p.base_backward(g_b);
    }
    p.head_clear();
    p.region_clear();
    p.base_clear();
  } else {
    SubBatchPlan plan = SubBatchPlan::uniform(p.num_regions(), sub_batch_size);
    ForwardState st = forward_pass(p, plan);
    HeadStepResult hs = head_step(p, st);
    out.losses = hs.losses;
    if (!hs.finite) {
      out.finite = false;
    } else {
      Tensor g_b = neck_sequential_step(p, st.a_b, hs.g_n, plan);
      if (acc) acc->release_named("G_n");
      base_step(p, g_b);
    }
  }

  if (acc) {
    out.peak_region_units = acc->peak(Zone::Region);
    out.peak_total_units = acc->peak_total();
    out.peak_base_units = acc->peak(Zone::Base);
    out.peak_head_units = acc->peak(Zone::Head);
    out.peak_boundary_units = acc->peak(Zone::Boundary);
    acc->release_named("A_b");
    acc->release_named("E");
    acc->release_named("G_n");
    acc->release_named("G_b");
  }
  return out;
}

}  // namespace wsod::seqbp
