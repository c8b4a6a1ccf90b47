#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "dyrep/errors.hpp"
#include "dyrep/rational.hpp"

namespace dyrep {

// All geometry is exact integer arithmetic in units of the finest cell.
//
// The root cube K0 has real side 2 and lower corner -1; its upper-right
// quadrant K1 = [0,1)^d carries the measure.  N levels of refinement below K1
// give finest cells of side 2^-N (one unit).  Level L cubes have side
// 2^(N+1-L) units, so level 0 is K0 and level N+1 is a single cell.  Ancestors
// of K0 (negative levels) extend the lattice by doubling around K0's lower
// corner.  The bounding box [-1,2)^d contains every translate of K0 that can
// arise from a shift.

using Coord = std::array<std::int64_t, 3>;

constexpr int kMaxDim = 3;

std::int64_t floor_div(std::int64_t a, std::int64_t b);

struct GridConfig {
  int d = 1;
  int N = 3;

  void validate() const;

  std::int64_t k1_axis_cells() const { return std::int64_t{1} << N; }
  std::int64_t box_axis_cells() const { return 3 * k1_axis_cells(); }
  std::int64_t anchor() const { return -k1_axis_cells(); }  // K0 lower corner
  std::int64_t box_lo() const { return -k1_axis_cells(); }
  std::int64_t box_hi() const { return 2 * k1_axis_cells(); }

  std::int64_t k1_cells() const;
  std::int64_t box_cells() const;

  // Cube side in units at a given level (level <= N+1; negative allowed).
  std::int64_t side_units(int level) const;
  double side_real(int level) const;
  double cell_side() const;

  // Flat indexing, row-major with axis 0 most significant.
  std::int64_t box_flat(const Coord& c) const;
  Coord box_unflat(std::int64_t idx) const;
  std::int64_t k1_flat(const Coord& c) const;
  Coord k1_unflat(std::int64_t idx) const;
  bool in_k1(const Coord& c) const;
  bool in_box(const Coord& c) const;
  std::int64_t k1_to_box(std::int64_t k1_idx) const;

  double center(std::int64_t unit_coord) const;  // real coordinate of cell center
};

// One bit per (scale, axis): sigma_j in {0,1}^d for scales j = 1..N.
class ShiftVector {
 public:
  ShiftVector() = default;
  ShiftVector(int d, int N) : d_(d), N_(N), mask_(static_cast<size_t>(N), 0u) {}

  static ShiftVector zeros(const GridConfig& g) { return ShiftVector(g.d, g.N); }
  // Lexicographic enumeration: bit (j-1)*d + a of `index` is sigma_j[axis a].
  static ShiftVector from_index(const GridConfig& g, std::uint64_t index);
  static ShiftVector random(const GridConfig& g, std::mt19937_64& rng);

  int d() const { return d_; }
  int N() const { return N_; }
  int bit(int scale_j, int axis) const;
  void set_bit(int scale_j, int axis, int value);
  std::uint64_t to_index() const;
  bool is_zero() const;

 private:
  int d_ = 1;
  int N_ = 0;
  std::vector<std::uint32_t> mask_;  // mask_[j-1] bit a = sigma_j[a]
};

class DyadicSystem;

struct CubeId {
  int level = 0;
  Coord corner{};  // lower corner in finest-cell units
  const DyadicSystem* system = nullptr;

  bool operator==(const CubeId& o) const {
    return level == o.level && corner == o.corner;
  }
  bool operator<(const CubeId& o) const {  // deterministic ordering for maps
    if (level != o.level) return level < o.level;
    return corner < o.corner;
  }
};

enum class GoodnessMode { Idealized, Measured };

class DyadicSystem {
 public:
  DyadicSystem(const GridConfig& grid, const ShiftVector& sigma);
  static DyadicSystem reference(const GridConfig& grid);

  const GridConfig& grid() const { return grid_; }
  const ShiftVector& sigma() const { return sigma_; }

  // Lattice offset of the given level along one axis.  Shifts act on scales j
  // with 2^-N <= 2^-j < min(side, 1), so levels <= 1 share the full sum and
  // level N+1 is unshifted.
  std::int64_t offset(int level, int axis) const;

  CubeId root() const;                       // K0 realized in this system
  CubeId cube_from_corner(int level, const Coord& corner) const;
  CubeId realize(int level, const Coord& reference_corner) const;
  Coord reference_corner(const CubeId& c) const;
  CubeId locate(int level, const Coord& unit_point) const;

  CubeId parent(const CubeId& c) const { return ancestor(c, 1); }
  CubeId ancestor(const CubeId& c, int r) const;
  std::vector<CubeId> children(const CubeId& c) const;

  bool is_k_good(const CubeId& c, int k) const;

  // Translate by m cube sides per axis; stays on the same level lattice.
  // Throws domain_error when the result leaves the bounding box.
  CubeId translate(const CubeId& c, const Coord& m) const;
  CubeId translate_unchecked(const CubeId& c, const Coord& m) const;

  bool cube_in_box(const CubeId& c) const;

 private:
  GridConfig grid_;
  ShiftVector sigma_;
  // suffix_[axis][j] = sum_{j' >= j} 2^(N-j') sigma_j'[axis], j in [1, N+1]
  std::array<std::vector<std::int64_t>, kMaxDim> suffix_;
};

// Probability over sigma that the realized version of a reference cube is
// k-good.  Measured mode counts exactly over the scale bits that influence
// the cube's position inside its k-th ancestor (truncation can freeze some of
// them); idealized mode returns 2^-d.
Rational goodness_probability(const GridConfig& grid, int level, const Coord& reference_corner,
                              int k, GoodnessMode mode);

// The scales whose sigma bits move a level-`level` cube relative to its k-th
// ancestor: [max(1, level-k), min(level-1, N)].  Empty for level <= 1.
std::pair<int, int> relative_scale_range(const GridConfig& grid, int level, int k);

struct EnsembleSpec {
  enum class Mode { Exhaustive, MonteCarlo };
  Mode mode = Mode::Exhaustive;
  std::uint64_t count = 0;       // draws in MonteCarlo mode
  std::uint64_t seed = 0;        // MonteCarlo seed
  std::uint64_t cap = 1u << 16;  // refuse exhaustive enumeration beyond this
};

std::uint64_t exhaustive_ensemble_size(const GridConfig& grid);

// Invokes fn(sigma, weight) with weights summing to 1.  Exhaustive order is
// lexicographic in the shift index; MonteCarlo is driven by mt19937_64(seed).
template <class F>
void for_each_sigma(const GridConfig& grid, const EnsembleSpec& spec, F&& fn) {
  if (spec.mode == EnsembleSpec::Mode::Exhaustive) {
    const int bits = grid.d * grid.N;
    if (bits >= 63) throw input_error("exhaustive ensemble: 2^(d*N) overflows; use mc:COUNT");
    const std::uint64_t total = std::uint64_t{1} << bits;
    if (total > spec.cap)
      throw input_error("exhaustive ensemble of size " + std::to_string(total) +
                        " exceeds cap " + std::to_string(spec.cap) +
                        "; use mode mc:COUNT or raise the cap");
    const double w = 1.0 / static_cast<double>(total);
    for (std::uint64_t i = 0; i < total; ++i) fn(ShiftVector::from_index(grid, i), w);
  } else {
    if (spec.count == 0) throw input_error("monte-carlo ensemble: count must be positive");
    std::mt19937_64 rng(spec.seed);
    const double w = 1.0 / static_cast<double>(spec.count);
    for (std::uint64_t i = 0; i < spec.count; ++i) fn(ShiftVector::random(grid, rng), w);
  }
}

}  // namespace dyrep
