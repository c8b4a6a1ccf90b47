#include "dyrep/grid.hpp"

#include <cmath>
#include <string>

namespace dyrep {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if (a % b != 0 && (a < 0) != (b < 0)) --q;
  return q;
}

void GridConfig::validate() const {
  if (d < 1 || d > kMaxDim)
    throw input_error("grid: dimension must be 1, 2, or 3 (got " + std::to_string(d) + ")");
  if (N < 1 || N > 20)
    throw input_error("grid: refinement depth must be in [1, 20] (got " + std::to_string(N) + ")");
  if (d * (N + 2) > 60)
    throw input_error("grid: d * (N + 2) must stay <= 60 so flat indices fit in 64 bits");
}

std::int64_t GridConfig::k1_cells() const {
  std::int64_t n = 1;
  for (int a = 0; a < d; ++a) n *= k1_axis_cells();
  return n;
}

std::int64_t GridConfig::box_cells() const {
  std::int64_t n = 1;
  for (int a = 0; a < d; ++a) n *= box_axis_cells();
  return n;
}

std::int64_t GridConfig::side_units(int level) const {
  if (level > N + 1)
    throw domain_error("grid: no cubes below the finest level " + std::to_string(N + 1));
  const int e = N + 1 - level;
  if (e > 62) throw domain_error("grid: cube side overflows at level " + std::to_string(level));
  return std::int64_t{1} << e;
}

double GridConfig::side_real(int level) const {
  return std::ldexp(1.0, 1 - level);  // side_units(level) * 2^-N
}

double GridConfig::cell_side() const { return std::ldexp(1.0, -N); }

std::int64_t GridConfig::box_flat(const Coord& c) const {
  std::int64_t idx = 0;
  for (int a = 0; a < d; ++a) {
    const std::int64_t t = c[static_cast<size_t>(a)] - box_lo();
    if (t < 0 || t >= box_axis_cells()) throw domain_error("grid: cell outside bounding box");
    idx = idx * box_axis_cells() + t;
  }
  return idx;
}

Coord GridConfig::box_unflat(std::int64_t idx) const {
  Coord c{};
  for (int a = d - 1; a >= 0; --a) {
    c[static_cast<size_t>(a)] = idx % box_axis_cells() + box_lo();
    idx /= box_axis_cells();
  }
  return c;
}

std::int64_t GridConfig::k1_flat(const Coord& c) const {
  std::int64_t idx = 0;
  for (int a = 0; a < d; ++a) {
    const std::int64_t t = c[static_cast<size_t>(a)];
    if (t < 0 || t >= k1_axis_cells()) throw domain_error("grid: cell outside the unit cube");
    idx = idx * k1_axis_cells() + t;
  }
  return idx;
}

Coord GridConfig::k1_unflat(std::int64_t idx) const {
  Coord c{};
  for (int a = d - 1; a >= 0; --a) {
    c[static_cast<size_t>(a)] = idx % k1_axis_cells();
    idx /= k1_axis_cells();
  }
  return c;
}

bool GridConfig::in_k1(const Coord& c) const {
  for (int a = 0; a < d; ++a) {
    const std::int64_t t = c[static_cast<size_t>(a)];
    if (t < 0 || t >= k1_axis_cells()) return false;
  }
  return true;
}

bool GridConfig::in_box(const Coord& c) const {
  for (int a = 0; a < d; ++a) {
    const std::int64_t t = c[static_cast<size_t>(a)];
    if (t < box_lo() || t >= box_hi()) return false;
  }
  return true;
}

std::int64_t GridConfig::k1_to_box(std::int64_t k1_idx) const { return box_flat(k1_unflat(k1_idx)); }

double GridConfig::center(std::int64_t unit_coord) const {
  return (static_cast<double>(unit_coord) + 0.5) * cell_side();
}

ShiftVector ShiftVector::from_index(const GridConfig& g, std::uint64_t index) {
  ShiftVector s(g.d, g.N);
  for (int j = 1; j <= g.N; ++j)
    for (int a = 0; a < g.d; ++a) {
      const int bitpos = (j - 1) * g.d + a;
      s.set_bit(j, a, static_cast<int>((index >> bitpos) & 1u));
    }
  return s;
}

ShiftVector ShiftVector::random(const GridConfig& g, std::mt19937_64& rng) {
  // Draw raw bits so the stream is identical across platforms.
  ShiftVector s(g.d, g.N);
  std::uint64_t word = 0;
  int avail = 0;
  for (int j = 1; j <= g.N; ++j)
    for (int a = 0; a < g.d; ++a) {
      if (avail == 0) {
        word = rng();
        avail = 64;
      }
      s.set_bit(j, a, static_cast<int>(word & 1u));
      word >>= 1;
      --avail;
    }
  return s;
}

int ShiftVector::bit(int scale_j, int axis) const {
  if (scale_j < 1 || scale_j > N_ || axis < 0 || axis >= d_)
    throw domain_error("shift: scale or axis out of range");
  return static_cast<int>((mask_[static_cast<size_t>(scale_j - 1)] >> axis) & 1u);
}

void ShiftVector::set_bit(int scale_j, int axis, int value) {
  if (scale_j < 1 || scale_j > N_ || axis < 0 || axis >= d_)
    throw domain_error("shift: scale or axis out of range");
  auto& m = mask_[static_cast<size_t>(scale_j - 1)];
  const std::uint32_t b = 1u << axis;
  if (value)
    m |= b;
  else
    m &= ~b;
}

std::uint64_t ShiftVector::to_index() const {
  std::uint64_t idx = 0;
  for (int j = 1; j <= N_; ++j)
    for (int a = 0; a < d_; ++a)
      idx |= static_cast<std::uint64_t>(bit(j, a)) << ((j - 1) * d_ + a);
  return idx;
}

bool ShiftVector::is_zero() const {
  for (auto m : mask_)
    if (m) return false;
  return true;
}

DyadicSystem::DyadicSystem(const GridConfig& grid, const ShiftVector& sigma)
    : grid_(grid), sigma_(sigma) {
  grid_.validate();
  if (sigma_.d() != grid_.d || sigma_.N() != grid_.N)
    throw domain_error("dyadic system: shift vector does not match the grid");
  for (int a = 0; a < grid_.d; ++a) {
    auto& suf = suffix_[static_cast<size_t>(a)];
    suf.assign(static_cast<size_t>(grid_.N + 2), 0);
    for (int j = grid_.N; j >= 1; --j)
      suf[static_cast<size_t>(j)] =
          suf[static_cast<size_t>(j + 1)] +
          (std::int64_t{1} << (grid_.N - j)) * sigma_.bit(j, a);
  }
}

DyadicSystem DyadicSystem::reference(const GridConfig& grid) {
  return DyadicSystem(grid, ShiftVector::zeros(grid));
}

std::int64_t DyadicSystem::offset(int level, int axis) const {
  if (axis < 0 || axis >= grid_.d) throw domain_error("dyadic system: axis out of range");
  int j0 = level;
  if (j0 < 1) j0 = 1;
  if (j0 > grid_.N + 1) j0 = grid_.N + 1;
  return suffix_[static_cast<size_t>(axis)][static_cast<size_t>(j0)];
}

CubeId DyadicSystem::root() const {
  Coord ref{};
  for (int a = 0; a < grid_.d; ++a) ref[static_cast<size_t>(a)] = grid_.anchor();
  return realize(0, ref);
}

CubeId DyadicSystem::cube_from_corner(int level, const Coord& corner) const {
  grid_.side_units(level);  // validates the level
  CubeId c{level, corner, this};
  return c;
}

CubeId DyadicSystem::realize(int level, const Coord& reference_corner) const {
  CubeId c{level, reference_corner, this};
  for (int a = 0; a < grid_.d; ++a) c.corner[static_cast<size_t>(a)] += offset(level, a);
  grid_.side_units(level);
  return c;
}

Coord DyadicSystem::reference_corner(const CubeId& c) const {
  Coord ref = c.corner;
  for (int a = 0; a < grid_.d; ++a) ref[static_cast<size_t>(a)] -= offset(c.level, a);
  return ref;
}

CubeId DyadicSystem::locate(int level, const Coord& unit_point) const {
  const std::int64_t w = grid_.side_units(level);
  CubeId c{level, {}, this};
  for (int a = 0; a < grid_.d; ++a) {
    const std::int64_t base = grid_.anchor() + offset(level, a);
    const std::int64_t t = unit_point[static_cast<size_t>(a)] - base;
    c.corner[static_cast<size_t>(a)] = base + floor_div(t, w) * w;
  }
  return c;
}

CubeId DyadicSystem::ancestor(const CubeId& c, int r) const {
  if (r < 0) throw domain_error("dyadic system: ancestor distance must be >= 0");
  if (r == 0) return c;
  const int up = c.level - r;
  const std::int64_t w = grid_.side_units(up);
  CubeId anc{up, {}, this};
  for (int a = 0; a < grid_.d; ++a) {
    const std::int64_t base = grid_.anchor() + offset(up, a);
    const std::int64_t t = c.corner[static_cast<size_t>(a)] - base;
    anc.corner[static_cast<size_t>(a)] = base + floor_div(t, w) * w;
  }
  return anc;
}

std::vector<CubeId> DyadicSystem::children(const CubeId& c) const {
  if (c.level >= grid_.N + 1)
    throw domain_error("dyadic system: finest cells have no children");
  const std::int64_t w = grid_.side_units(c.level + 1);
  const int n = 1 << grid_.d;
  std::vector<CubeId> out;
  out.reserve(static_cast<size_t>(n));
  for (int bits = 0; bits < n; ++bits) {
    CubeId ch{c.level + 1, c.corner, this};
    for (int a = 0; a < grid_.d; ++a)
      if ((bits >> a) & 1) ch.corner[static_cast<size_t>(a)] += w;
    out.push_back(ch);
  }
  return out;
}

bool DyadicSystem::is_k_good(const CubeId& c, int k) const {
  if (k < 1) throw domain_error("dyadic system: goodness parameter must be >= 1");
  const CubeId anc = ancestor(c, k);
  const std::int64_t W = grid_.side_units(anc.level);
  const std::int64_t w = grid_.side_units(c.level);
  for (int a = 0; a < grid_.d; ++a) {
    const std::int64_t lo = c.corner[static_cast<size_t>(a)] - anc.corner[static_cast<size_t>(a)];
    const std::int64_t hi = W - w - lo;
    if (4 * std::min(lo, hi) < W) return false;
  }
  return true;
}

CubeId DyadicSystem::translate_unchecked(const CubeId& c, const Coord& m) const {
  const std::int64_t w = grid_.side_units(c.level);
  CubeId t = c;
  for (int a = 0; a < grid_.d; ++a) t.corner[static_cast<size_t>(a)] += m[static_cast<size_t>(a)] * w;
  return t;
}

CubeId DyadicSystem::translate(const CubeId& c, const Coord& m) const {
  CubeId t = translate_unchecked(c, m);
  if (!cube_in_box(t)) throw domain_error("dyadic system: translate leaves the bounding box");
  return t;
}

bool DyadicSystem::cube_in_box(const CubeId& c) const {
  const std::int64_t w = grid_.side_units(c.level);
  for (int a = 0; a < grid_.d; ++a) {
    const std::int64_t lo = c.corner[static_cast<size_t>(a)];
    if (lo < grid_.box_lo() || lo + w > grid_.box_hi()) return false;
  }
  return true;
}

std::pair<int, int> relative_scale_range(const GridConfig& grid, int level, int k) {
  const int jlo = std::max(1, level - k);
  const int jhi = std::min(level - 1, grid.N);
  return {jlo, jhi};
}

Rational goodness_probability(const GridConfig& grid, int level, const Coord& reference_corner,
                              int k, GoodnessMode mode) {
  grid.validate();
  if (k < 2) throw domain_error("goodness probability: separation parameter must be >= 2");
  if (level > grid.N + 1) throw domain_error("goodness probability: level out of range");
  if (mode == GoodnessMode::Idealized) return Rational(1, std::int64_t{1} << grid.d);

  const std::int64_t w = grid.side_units(level);
  const std::int64_t W = grid.side_units(level - k);
  const std::int64_t ratio = W / w;  // 2^k
  const std::int64_t good_lo = ratio / 4;
  const std::int64_t good_hi = 3 * (ratio / 4) - 1;

  const auto [jlo, jhi] = relative_scale_range(grid, level, k);
  const int nb = jhi >= jlo ? jhi - jlo + 1 : 0;
  if (nb > 30) throw domain_error("goodness probability: too many free scales to enumerate");

  Rational p(1, 1);
  for (int a = 0; a < grid.d; ++a) {
    const std::int64_t base = reference_corner[static_cast<size_t>(a)] - grid.anchor();
    std::int64_t cnt = 0;
    const std::int64_t combos = std::int64_t{1} << nb;
    for (std::int64_t bits = 0; bits < combos; ++bits) {
      std::int64_t x = base;
      for (int t = 0; t < nb; ++t)
        if ((bits >> t) & 1) x -= std::int64_t{1} << (grid.N - (jlo + t));
      std::int64_t o = ((x % W) + W) % W / w;
      if (o >= good_lo && o <= good_hi) ++cnt;
    }
    p = p * Rational(cnt, combos);
  }
  return p;
}

std::uint64_t exhaustive_ensemble_size(const GridConfig& grid) {
  const int bits = grid.d * grid.N;
  if (bits >= 63) throw input_error("exhaustive ensemble: 2^(d*N) overflows");
  return std::uint64_t{1} << bits;
}

}  // namespace dyrep
