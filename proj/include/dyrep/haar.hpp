#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dyrep/measure.hpp"

namespace dyrep {

// One Haar function of a cube: constant on each child, mean zero, unit L2(mu)
// norm.  child_value is indexed by the child's position in children(cube).
struct HaarEntry {
  CubeId cube;
  int node = 0;  // split-tree node ordinal (breadth-first)
  std::array<double, 8> child_value{};
};

// Measure-adapted Haar functions on one cube.  The 2^d children are laid out
// in Gray-code order and split in half d times; every split whose two halves
// both carry mass contributes one function.  The entries are orthonormal in
// L2(mu) and span the image of D_I, so their count is (massive children - 1).
class HaarBasis {
 public:
  HaarBasis(const MartingaleOps& ops, const CubeId& cube);

  const CubeId& cube() const { return cube_; }
  const std::vector<HaarEntry>& entries() const { return entries_; }

  Vec expand(const MartingaleOps& ops, const HaarEntry& e) const;
  double coefficient(const MartingaleOps& ops, const HaarEntry& e, const Vec& f) const;
  // sum_h <f,h> h; equals apply_DI(cube, f) exactly.
  Vec reconstruct_DI(const MartingaleOps& ops, const Vec& f) const;

  static double sup_norm(const HaarEntry& e);
  double l1_norm(const MartingaleOps& ops, const HaarEntry& e) const;

 private:
  CubeId cube_;
  std::vector<CubeId> children_;
  std::vector<HaarEntry> entries_;
};

}  // namespace dyrep
