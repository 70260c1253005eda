#pragma once

// One-dimensional grids with a uniform survey core, geometrically graded
// tails and optional complex-stretched (PML) steps, plus the two block
// partition strategies used by the two-level solver.
//
// Node indices are 0-based throughout. Nodes 0 and N-1 are outer boundary
// nodes carrying homogeneous Dirichlet data; unknowns are nodes 1..N-2 and
// unknown index u corresponds to node u+1.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strata/common.hpp"

namespace strata {

enum class SegmentTag { core, graded, pml, general };

inline const char* to_string(SegmentTag t) {
  switch (t) {
    case SegmentTag::core: return "core";
    case SegmentTag::graded: return "graded";
    case SegmentTag::pml: return "pml";
    case SegmentTag::general: return "general";
  }
  return "?";
}

class Grid1D {
 public:
  Grid1D() = default;

  /// Grid from explicit steps. Every step must be nonzero with a
  /// non-negative real part; steps tagged core/graded/general need a strictly
  /// positive real part.
  Grid1D(std::vector<cplx> steps, std::vector<SegmentTag> tags) : steps_(std::move(steps)), tags_(std::move(tags)) {
    if (steps_.empty()) throw GridError("grid needs at least one step");
    if (tags_.size() != steps_.size()) throw GridError("one segment tag per step required");
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      const cplx h = steps_[i];
      if (h == cplx{0.0, 0.0}) throw GridError("zero grid step at index " + std::to_string(i));
      if (h.real() < 0.0) throw GridError("grid step with negative real part at index " + std::to_string(i));
      if (tags_[i] != SegmentTag::pml && !(h.real() > 0.0))
        throw GridError("non-positive grid step at index " + std::to_string(i));
    }
  }

  static Grid1D from_steps(std::vector<cplx> steps) {
    std::vector<SegmentTag> tags(steps.size(), SegmentTag::general);
    for (std::size_t i = 0; i < steps.size(); ++i)
      if (steps[i].imag() != 0.0) tags[i] = SegmentTag::pml;
    return Grid1D(std::move(steps), std::move(tags));
  }

  static Grid1D uniform(Index cells, double h) {
    return Grid1D(std::vector<cplx>(static_cast<std::size_t>(cells), cplx{h, 0.0}),
                  std::vector<SegmentTag>(static_cast<std::size_t>(cells), SegmentTag::core));
  }

  Index nodes() const { return static_cast<Index>(steps_.size()) + 1; }
  Index cells() const { return static_cast<Index>(steps_.size()); }
  Index unknowns() const { return nodes() - 2; }

  const std::vector<cplx>& steps() const { return steps_; }
  const std::vector<SegmentTag>& tags() const { return tags_; }
  cplx step(Index i) const { return steps_[static_cast<std::size_t>(i)]; }
  SegmentTag tag(Index i) const { return tags_[static_cast<std::size_t>(i)]; }

  /// Node coordinates, x_0 = 0.
  std::vector<cplx> coordinates() const {
    std::vector<cplx> x(steps_.size() + 1);
    x[0] = 0.0;
    for (std::size_t i = 0; i < steps_.size(); ++i) x[i + 1] = x[i] + steps_[i];
    return x;
  }

  double real_extent() const {
    double s = 0.0;
    for (const auto& h : steps_) s += h.real();
    return s;
  }

  bool has_complex_steps() const {
    return std::any_of(steps_.begin(), steps_.end(), [](cplx h) { return h.imag() != 0.0; });
  }

  /// First/last node touched by a core step, if any.
  std::optional<std::pair<Index, Index>> core_nodes() const {
    Index first = -1, last = -1;
    for (Index i = 0; i < cells(); ++i) {
      if (tag(i) == SegmentTag::core) {
        if (first < 0) first = i;
        last = i + 1;
      }
    }
    if (first < 0) return std::nullopt;
    return std::make_pair(first, last);
  }

 private:
  std::vector<cplx> steps_;
  std::vector<SegmentTag> tags_;
};

/// Builds core + symmetric graded tails + outermost PML steps.
inline Grid1D build_grid(double core_extent, double core_step, Index n_graded, double grading_ratio,
                         std::span<const cplx> pml_steps = {}) {
  if (!(core_step > 0.0)) throw GridError("core step must be positive");
  if (!(core_extent > 0.0)) throw GridError("core extent must be positive");
  if (n_graded < 0) throw GridError("graded step count must be non-negative");
  if (n_graded > 0 && !(grading_ratio > 1.0)) throw GridError("grading ratio must exceed 1");
  const double ratio = core_extent / core_step;
  const auto n_core = static_cast<Index>(std::llround(ratio));
  if (n_core < 1 || std::abs(ratio - static_cast<double>(n_core)) > 1e-9 * std::max(1.0, ratio))
    throw GridError("core extent must be a whole multiple of the core step");

  std::vector<cplx> steps;
  std::vector<SegmentTag> tags;
  for (auto it = pml_steps.rbegin(); it != pml_steps.rend(); ++it) {
    steps.push_back(*it);
    tags.push_back(SegmentTag::pml);
  }
  for (Index g = n_graded; g >= 1; --g) {
    steps.emplace_back(core_step * std::pow(grading_ratio, static_cast<double>(g)), 0.0);
    tags.push_back(SegmentTag::graded);
  }
  for (Index c = 0; c < n_core; ++c) {
    steps.emplace_back(core_step, 0.0);
    tags.push_back(SegmentTag::core);
  }
  for (Index g = 1; g <= n_graded; ++g) {
    steps.emplace_back(core_step * std::pow(grading_ratio, static_cast<double>(g)), 0.0);
    tags.push_back(SegmentTag::graded);
  }
  for (const auto& p : pml_steps) {
    steps.push_back(p);
    tags.push_back(SegmentTag::pml);
  }
  return Grid1D(std::move(steps), std::move(tags));
}

/// Control-volume lengths: mean of the adjacent steps, half a step at the ends.
struct ControlVolumes {
  std::vector<cplx> lengths;

  cplx operator[](Index i) const { return lengths[static_cast<std::size_t>(i)]; }
  Index size() const { return static_cast<Index>(lengths.size()); }
};

inline ControlVolumes control_volumes(const Grid1D& g) {
  const Index n = g.nodes();
  ControlVolumes cv;
  cv.lengths.resize(static_cast<std::size_t>(n));
  cv.lengths.front() = 0.5 * g.step(0);
  cv.lengths.back() = 0.5 * g.step(n - 2);
  for (Index i = 1; i + 1 < n; ++i) cv.lengths[static_cast<std::size_t>(i)] = 0.5 * (g.step(i - 1) + g.step(i));
  return cv;
}

struct NodeRange {
  Index first = 0;  // inclusive
  Index last = -1;  // inclusive
  Index size() const { return last - first + 1; }
  bool empty() const { return last < first; }
  bool operator==(const NodeRange&) const = default;
};

/// Split of the nodes 0..N-1 into contiguous blocks separated by single
/// interface nodes.
class BlockPartition {
 public:
  BlockPartition() = default;

  BlockPartition(Index nodes, std::vector<NodeRange> blocks, std::vector<Index> interfaces, bool degenerate = false)
      : nodes_(nodes), blocks_(std::move(blocks)), interfaces_(std::move(interfaces)), degenerate_(degenerate) {
    validate();
  }

  /// Partition induced by a sorted list of interface nodes.
  static BlockPartition from_interfaces(Index nodes, std::vector<Index> interfaces) {
    std::sort(interfaces.begin(), interfaces.end());
    std::vector<NodeRange> blocks;
    Index start = 0;
    for (Index s : interfaces) {
      if (s <= 0 || s >= nodes - 1) throw GridError("interface node must be an interior node");
      blocks.push_back({start, s - 1});
      start = s + 1;
    }
    blocks.push_back({start, nodes - 1});
    const bool single_block = interfaces.empty();
    return BlockPartition(nodes, std::move(blocks), std::move(interfaces), single_block);
  }

  static BlockPartition single(Index nodes) { return BlockPartition(nodes, {{0, nodes - 1}}, {}, true); }

  Index nodes() const { return nodes_; }
  const std::vector<NodeRange>& blocks() const { return blocks_; }
  const std::vector<Index>& interfaces() const { return interfaces_; }
  Index block_count() const { return static_cast<Index>(blocks_.size()); }

  /// True when the partition fell back to a single block.
  bool degenerate() const { return degenerate_; }

  /// Unknown-index range (node - 1) of a block, with the outer boundary nodes removed.
  NodeRange block_unknowns(Index b) const {
    const NodeRange& r = blocks_[static_cast<std::size_t>(b)];
    NodeRange u{std::max<Index>(r.first, 1) - 1, std::min<Index>(r.last, nodes_ - 2) - 1};
    return u;
  }

  /// Interfaces as unknown indices.
  std::vector<Index> interface_unknowns() const {
    std::vector<Index> u;
    u.reserve(interfaces_.size());
    for (Index s : interfaces_) u.push_back(s - 1);
    return u;
  }

 private:
  void validate() const {
    std::vector<int> seen(static_cast<std::size_t>(nodes_), 0);
    for (const auto& r : blocks_) {
      if (r.first < 0 || r.last >= nodes_ || r.empty()) throw GridError("block range out of bounds");
      for (Index i = r.first; i <= r.last; ++i) seen[static_cast<std::size_t>(i)]++;
    }
    for (Index s : interfaces_) {
      if (s <= 0 || s >= nodes_ - 1) throw GridError("interface must be an interior node");
      seen[static_cast<std::size_t>(s)]++;
    }
    for (int c : seen)
      if (c != 1) throw GridError("blocks and interfaces must cover every node exactly once");
  }

  Index nodes_ = 0;
  std::vector<NodeRange> blocks_;
  std::vector<Index> interfaces_;
  bool degenerate_ = false;
};

/// Left tail / uniform core / right tail, with separators at the core ends.
/// Without tails this degenerates to a single block (flagged).
inline BlockPartition partition_three(const Grid1D& g) {
  const auto core = g.core_nodes();
  const Index n = g.nodes();
  if (!core) return BlockPartition::single(n);
  std::vector<Index> seps;
  if (core->first > 0) seps.push_back(core->first);
  if (core->second < n - 1 && core->second != core->first) seps.push_back(core->second);
  if (seps.empty()) return BlockPartition::single(n);
  return BlockPartition::from_interfaces(n, std::move(seps));
}

/// Blocks of ceil(sqrt(N)) nodes separated by single interface nodes.
inline BlockPartition partition_sqrt(Index nodes) {
  if (nodes < 4) throw GridError("partition_sqrt needs at least 4 nodes");
  const auto b = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(nodes)) - 1e-12));
  std::vector<Index> seps;
  for (Index s = b; s < nodes - 1; s += b + 1) seps.push_back(s);
  return BlockPartition::from_interfaces(nodes, std::move(seps));
}

inline BlockPartition partition_sqrt(const Grid1D& g) { return partition_sqrt(g.nodes()); }

}  // namespace strata
