#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "lcsem/model.hpp"

namespace lcsem {

enum class DesignKind { single_node, binary, bounded };

/// One experiment per node, J_e = {e}. E = p.
inline ExperimentSystem design_single_node(int p) {
  require(p >= 2, "design_single_node: p must be >= 2");
  ExperimentSystem sys;
  sys.p = p;
  sys.experiments.reserve(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) sys.experiments.emplace_back(p, std::vector<int>{i});
  return sys;
}

/// Bisection design: for each bit of the ceil(log2 p)-bit node labels, one
/// experiment intervening on the nodes with the bit set and one on the
/// complement. E = 2 * ceil(log2 p).
inline ExperimentSystem design_binary(int p) {
  require(p >= 2, "design_binary: p must be >= 2");
  int bits = 0;
  while ((1 << bits) < p) ++bits;
  ExperimentSystem sys;
  sys.p = p;
  for (int b = 0; b < bits; ++b) {
    std::vector<int> ones, zeros;
    for (int i = 0; i < p; ++i) {
      if ((i >> b) & 1)
        ones.push_back(i);
      else
        zeros.push_back(i);
    }
    sys.experiments.emplace_back(p, std::move(ones));
    sys.experiments.emplace_back(p, std::move(zeros));
  }
  return sys;
}

/// Experiments of size at most k: [p] is covered by ceil(p/k) consecutive
/// blocks, each taken as one experiment; when any block has two or more
/// nodes, single-node experiments are appended to separate pairs inside a
/// block. E <= ceil(p/k) + p.
inline ExperimentSystem design_bounded(int p, int k) {
  require(p >= 2, "design_bounded: p must be >= 2");
  require(k >= 1 && k <= p, "design_bounded: need 1 <= k <= p");
  if (k == 1) return design_single_node(p);

  ExperimentSystem sys;
  sys.p = p;
  bool has_large_block = false;
  for (int start = 0; start < p; start += k) {
    std::vector<int> block;
    for (int i = start; i < std::min(start + k, p); ++i) block.push_back(i);
    if (block.size() >= 2) has_large_block = true;
    sys.experiments.emplace_back(p, std::move(block));
  }
  if (has_large_block) {
    for (int i = 0; i < p; ++i) sys.experiments.emplace_back(p, std::vector<int>{i});
  }
  return sys;
}

inline ExperimentSystem make_design(DesignKind kind, int p, int k = 1) {
  switch (kind) {
    case DesignKind::single_node:
      return design_single_node(p);
    case DesignKind::binary:
      return design_binary(p);
    case DesignKind::bounded:
      return design_bounded(p, k);
  }
  throw invalid_input("make_design: unknown design kind");
}

struct SeparationCheck {
  bool separating = true;
  // first ordered pair (i, j) with no experiment having i intervened, j untouched
  std::optional<std::pair<int, int>> witness;
};

/// Pair condition of a completely separating system: for every ordered pair
/// (i, j), i != j, some experiment has i intervened and j untouched.
inline SeparationCheck is_completely_separating(const ExperimentSystem& sys) {
  sys.check();
  for (int i = 0; i < sys.p; ++i) {
    for (int j = 0; j < sys.p; ++j) {
      if (i == j) continue;
      bool found = false;
      for (const Experiment& e : sys.experiments) {
        if (e.is_intervened(i) && !e.is_intervened(j)) {
          found = true;
          break;
        }
      }
      if (!found) return {false, std::make_pair(i, j)};
    }
  }
  return {true, std::nullopt};
}

/// Redundancy kappa: the maximum over ordered pairs (i, j) of the number of
/// experiments with i untouched and j intervened. Returns 0 when some pair is
/// never separated (system not completely separating).
inline int redundancy(const ExperimentSystem& sys) {
  sys.check();
  int kappa = 0;
  bool all_separated = true;
  for (int i = 0; i < sys.p; ++i) {
    for (int j = 0; j < sys.p; ++j) {
      if (i == j) continue;
      int count = 0;
      for (const Experiment& e : sys.experiments)
        if (!e.is_intervened(i) && e.is_intervened(j)) ++count;
      if (count == 0) all_separated = false;
      kappa = std::max(kappa, count);
    }
  }
  return all_separated ? kappa : 0;
}

}  // namespace lcsem
