#include "dyrep/haar.hpp"

#include <cmath>

namespace dyrep {

HaarBasis::HaarBasis(const MartingaleOps& ops, const CubeId& cube) : cube_(cube) {
  const GridConfig& g = ops.grid();
  if (cube.level < 0 || cube.level > g.N) return;  // no children to split
  children_ = ops.system().children(cube);
  const int count = 1 << g.d;
  std::vector<double> mass(static_cast<size_t>(count));
  std::vector<int> order(static_cast<size_t>(count));
  for (int t = 0; t < count; ++t) {
    order[static_cast<size_t>(t)] = t ^ (t >> 1);  // Gray-code layout
    mass[static_cast<size_t>(t)] = ops.cube_mass(children_[static_cast<size_t>(t)]);
  }
  // Breadth-first over the balanced split tree: depth q has 2^q blocks.
  int node = 0;
  for (int q = 0; q < g.d; ++q) {
    const int block = count >> q;
    for (int b = 0; b < (1 << q); ++b, ++node) {
      const int begin = b * block, mid = begin + block / 2, end = begin + block;
      double ma = 0.0, mb = 0.0;
      for (int t = begin; t < mid; ++t) ma += mass[static_cast<size_t>(order[static_cast<size_t>(t)])];
      for (int t = mid; t < end; ++t) mb += mass[static_cast<size_t>(order[static_cast<size_t>(t)])];
      if (ma <= 0.0 || mb <= 0.0) continue;
      const double a = std::sqrt(mb / (ma * (ma + mb)));
      const double bb = std::sqrt(ma / (mb * (ma + mb)));
      HaarEntry e;
      e.cube = cube;
      e.node = node;
      for (int t = begin; t < mid; ++t) {
        int child = order[static_cast<size_t>(t)];
        if (mass[static_cast<size_t>(child)] > 0.0) e.child_value[static_cast<size_t>(child)] = a;
      }
      for (int t = mid; t < end; ++t) {
        int child = order[static_cast<size_t>(t)];
        if (mass[static_cast<size_t>(child)] > 0.0) e.child_value[static_cast<size_t>(child)] = -bb;
      }
      entries_.push_back(e);
    }
  }
}

Vec HaarBasis::expand(const MartingaleOps& ops, const HaarEntry& e) const {
  Vec out = Vec::Zero(ops.grid().box_cells());
  for (size_t c = 0; c < children_.size(); ++c) {
    if (e.child_value[c] == 0.0) continue;
    for (std::int64_t cell : ops.cells_of(children_[c])) out[cell] = e.child_value[c];
  }
  return out;
}

double HaarBasis::coefficient(const MartingaleOps& ops, const HaarEntry& e, const Vec& f) const {
  KahanSum s;
  for (size_t c = 0; c < children_.size(); ++c) {
    if (e.child_value[c] == 0.0) continue;
    for (std::int64_t cell : ops.cells_of(children_[c]))
      s.add(f[cell] * e.child_value[c] * ops.measure().mass()[cell]);
  }
  return s.value();
}

Vec HaarBasis::reconstruct_DI(const MartingaleOps& ops, const Vec& f) const {
  Vec out = Vec::Zero(ops.grid().box_cells());
  for (const HaarEntry& e : entries_) out += coefficient(ops, e, f) * expand(ops, e);
  return out;
}

double HaarBasis::sup_norm(const HaarEntry& e) {
  double m = 0.0;
  for (double v : e.child_value) m = std::max(m, std::abs(v));
  return m;
}

double HaarBasis::l1_norm(const MartingaleOps& ops, const HaarEntry& e) const {
  KahanSum s;
  for (size_t c = 0; c < children_.size(); ++c)
    if (e.child_value[c] != 0.0)
      s.add(std::abs(e.child_value[c]) * ops.cube_mass(children_[c]));
  return s.value();
}

}  // namespace dyrep
