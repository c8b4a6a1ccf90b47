#include "dyrep/measure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "csv_util.hpp"

namespace dyrep {

DiscreteMeasure::DiscreteMeasure(const GridConfig& grid, Vec box_mass, double order_n,
                                 double c_growth)
    : grid_(grid), mass_(std::move(box_mass)), n_(order_n), c_growth_(c_growth) {
  grid_.validate();
  if (mass_.size() != grid_.box_cells())
    throw domain_error("measure: mass vector must have one entry per bounding-box cell");
  if (!(n_ > 0.0) || n_ > static_cast<double>(grid_.d))
    throw domain_error("measure: growth order n must lie in (0, d]");
  if (!(c_growth_ > 0.0)) throw domain_error("measure: growth constant must be positive");
  KahanSum total;
  for (std::int64_t i = 0; i < mass_.size(); ++i) {
    double m = mass_[i];
    if (!(m >= 0.0)) throw domain_error("measure: cell masses must be nonnegative");
    if (m > 0.0) {
      if (!grid_.in_k1(grid_.box_unflat(i)))
        throw domain_error("measure: support must lie inside the unit cube");
      massive_.push_back(i);
      total.add(m);
    }
  }
  total_ = total.value();
  if (total_ <= 0.0) throw domain_error("measure: total mass must be positive");
}

DiscreteMeasure DiscreteMeasure::uniform(const GridConfig& grid, double total_mass,
                                         double order_n, double c_growth) {
  Vec m = Vec::Zero(grid.box_cells());
  const double per_cell = total_mass / static_cast<double>(grid.k1_cells());
  for (std::int64_t i = 0; i < grid.k1_cells(); ++i) m[grid.k1_to_box(i)] = per_cell;
  return DiscreteMeasure(grid, std::move(m), order_n, c_growth);
}

DiscreteMeasure DiscreteMeasure::power_law(const GridConfig& grid, double exponent,
                                           double order_n, double c_growth) {
  Vec m = Vec::Zero(grid.box_cells());
  const double vol = std::pow(grid.cell_side(), grid.d);
  for (std::int64_t i = 0; i < grid.k1_cells(); ++i) {
    Coord c = grid.k1_unflat(i);
    double r2 = 0.0;
    for (int a = 0; a < grid.d; ++a) {
      double x = grid.center(c[a]);
      r2 += x * x;
    }
    m[grid.k1_to_box(i)] = std::pow(std::sqrt(r2), exponent) * vol;
  }
  return DiscreteMeasure(grid, std::move(m), order_n, c_growth);
}

DiscreteMeasure DiscreteMeasure::point_mass_mixture(
    const GridConfig& grid, const std::vector<std::pair<Coord, double>>& atoms,
    double background_total, double order_n, double c_growth) {
  Vec m = Vec::Zero(grid.box_cells());
  if (background_total > 0.0) {
    const double per_cell = background_total / static_cast<double>(grid.k1_cells());
    for (std::int64_t i = 0; i < grid.k1_cells(); ++i) m[grid.k1_to_box(i)] = per_cell;
  }
  for (const auto& [cell, weight] : atoms) {
    if (!grid.in_k1(cell)) throw domain_error("point_mass_mixture: atom outside the unit cube");
    if (!(weight >= 0.0)) throw domain_error("point_mass_mixture: atom weight must be >= 0");
    m[grid.k1_to_box(grid.k1_flat(cell))] += weight;
  }
  return DiscreteMeasure(grid, std::move(m), order_n, c_growth);
}

DiscreteMeasure DiscreteMeasure::from_csv(const GridConfig& grid, const std::string& path,
                                          double order_n, double c_growth) {
  std::ifstream in(path);
  if (!in) throw input_error(path + ": cannot open measure CSV");
  Vec m = Vec::Zero(grid.box_cells());
  std::string line;
  int lineno = 0;
  bool saw_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = csv::split_line(line);
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (static_cast<int>(fields.size()) != grid.d + 1)
      csv::fail(path, lineno,
                "expected " + std::to_string(grid.d + 1) + " fields (cell indices, mass), got " +
                    std::to_string(fields.size()));
    std::int64_t probe;
    if (lineno == 1 && !csv::try_parse_int(fields[0], probe)) continue;  // header row
    Coord c{0, 0, 0};
    for (int a = 0; a < grid.d; ++a) {
      std::int64_t v;
      if (!csv::try_parse_int(fields[a], v))
        csv::fail(path, lineno, "cell index '" + fields[a] + "' is not an integer");
      if (v < 0 || v >= grid.k1_axis_cells())
        csv::fail(path, lineno,
                  "cell index " + std::to_string(v) + " outside [0, " +
                      std::to_string(grid.k1_axis_cells()) + ")");
      c[a] = v;
    }
    double w;
    if (!csv::try_parse_double(fields[grid.d], w))
      csv::fail(path, lineno, "mass '" + fields[grid.d] + "' is not a number");
    if (!(w >= 0.0)) csv::fail(path, lineno, "mass must be nonnegative");
    m[grid.k1_to_box(grid.k1_flat(c))] += w;
    saw_data = true;
  }
  if (!saw_data) throw input_error(path + ": no measure rows found");
  return DiscreteMeasure(grid, std::move(m), order_n, c_growth);
}

double DiscreteMeasure::inner(const Vec& f, const Vec& g) const {
  KahanSum s;
  for (std::int64_t i : massive_) s.add(f[i] * g[i] * mass_[i]);
  return s.value();
}

double DiscreteMeasure::norm2(const Vec& f) const {
  KahanSum s;
  for (std::int64_t i : massive_) s.add(f[i] * f[i] * mass_[i]);
  return std::sqrt(std::max(0.0, s.value()));
}

double DiscreteMeasure::norm1(const Vec& f) const {
  KahanSum s;
  for (std::int64_t i : massive_) s.add(std::abs(f[i]) * mass_[i]);
  return s.value();
}

Vec DiscreteMeasure::canonical(Vec f) const {
  if (f.size() != grid_.box_cells())
    throw domain_error("canonical: vector must have one entry per bounding-box cell");
  Vec out = Vec::Zero(grid_.box_cells());
  for (std::int64_t i : massive_) out[i] = f[i];
  return out;
}

namespace {

// Prefix sums over the unit-cube lattice for O(2^d) box-mass queries.
class K1Prefix {
 public:
  K1Prefix(const GridConfig& g, const Vec& box_mass) : g_(g), s_(g.k1_axis_cells()) {
    // Dummy axes keep a zero plane at index 0 and the data at index 1.
    std::int64_t dims[3] = {2, 2, 2};
    for (int a = 0; a < g.d; ++a) dims[a] = s_ + 1;
    p_.assign(static_cast<size_t>(dims[0] * dims[1] * dims[2]), 0.0);
    auto at = [&](std::int64_t i, std::int64_t j, std::int64_t k) -> double& {
      return p_[static_cast<size_t>((i * dims[1] + j) * dims[2] + k)];
    };
    for (std::int64_t i = 1; i <= (g.d > 0 ? s_ : 1); ++i)
      for (std::int64_t j = 1; j <= (g.d > 1 ? s_ : 1); ++j)
        for (std::int64_t k = 1; k <= (g.d > 2 ? s_ : 1); ++k) {
          Coord c{i - 1, j - 1, k - 1};
          double v = box_mass[g.k1_to_box(g.k1_flat(c))];
          at(i, j, k) = v + at(i - 1, j, k) + (g.d > 1 ? at(i, j - 1, k) : 0.0) +
                        (g.d > 2 ? at(i, j, k - 1) : 0.0) -
                        (g.d > 1 ? at(i - 1, j - 1, k) : 0.0) -
                        (g.d > 2 ? at(i - 1, j, k - 1) : 0.0) -
                        (g.d > 2 ? at(i, j - 1, k - 1) : 0.0) +
                        (g.d > 2 ? at(i - 1, j - 1, k - 1) : 0.0);
        }
    dims_[0] = dims[0];
    dims_[1] = dims[1];
    dims_[2] = dims[2];
  }

  // Mass of cells with index in [lo[a], hi[a]] per axis (clamped to the cube).
  double rect(Coord lo, Coord hi) const {
    for (int a = 0; a < g_.d; ++a) {
      lo[a] = std::max<std::int64_t>(lo[a], 0);
      hi[a] = std::min<std::int64_t>(hi[a], s_ - 1);
      if (lo[a] > hi[a]) return 0.0;
    }
    for (int a = g_.d; a < 3; ++a) {
      lo[a] = 0;
      hi[a] = 0;
    }
    auto p = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
      return p_[static_cast<size_t>((i * dims_[1] + j) * dims_[2] + k)];
    };
    std::int64_t a1 = lo[0], b1 = hi[0] + 1, a2 = lo[1], b2 = (g_.d > 1 ? hi[1] + 1 : 1),
                 a3 = lo[2], b3 = (g_.d > 2 ? hi[2] + 1 : 1);
    if (g_.d < 2) a2 = 0;
    if (g_.d < 3) a3 = 0;
    return p(b1, b2, b3) - p(a1, b2, b3) - p(b1, a2, b3) - p(b1, b2, a3) + p(a1, a2, b3) +
           p(a1, b2, a3) + p(b1, a2, a3) - p(a1, a2, a3);
  }

 private:
  GridConfig g_;
  std::int64_t s_;
  std::int64_t dims_[3] = {1, 1, 1};
  std::vector<double> p_;
};

}  // namespace

GrowthAudit DiscreteMeasure::growth_audit() const {
  GrowthAudit out;
  out.declared = c_growth_;
  // Audited family: sup-norm balls centred at massive-cell centres whose
  // half-width is a power of two in cells.  Each such ball is exactly a real
  // ball of radius (w - 1/2) * cell_side, and any real ball's ratio is at most
  // 4^n times the family maximum.
  out.family_slack = std::pow(4.0, n_);
  K1Prefix prefix(grid_, mass_);
  const double h = grid_.cell_side();
  for (std::int64_t cell : massive_) {
    Coord c = grid_.box_unflat(cell);
    for (int k = 0; k <= grid_.N + 2; ++k) {
      std::int64_t w = std::int64_t{1} << k;
      Coord lo{0, 0, 0}, hi{0, 0, 0};
      for (int a = 0; a < grid_.d; ++a) {
        lo[a] = c[a] - (w - 1);
        hi[a] = c[a] + (w - 1);
      }
      double ball_mass = prefix.rect(lo, hi);
      double radius = (static_cast<double>(w) - 0.5) * h;
      double ratio = ball_mass / std::pow(radius, n_);
      if (ratio > out.max_ratio) {
        out.max_ratio = ratio;
        out.witness_radius = radius;
        out.witness_cell = cell;
      }
    }
  }
  out.within_declared = out.max_ratio <= out.declared * (1.0 + 1e-12);
  return out;
}

double DiscreteMeasure::doubling_ratio(const DyadicSystem& sys) const {
  // Mass per realized cube, level by level; the audit value is the largest
  // parent/child mass ratio over massive nested pairs.
  std::vector<std::map<Coord, double>> level_mass(static_cast<size_t>(grid_.N + 2));
  for (std::int64_t cell : massive_) {
    Coord c = grid_.box_unflat(cell);
    for (int lev = 0; lev <= grid_.N + 1; ++lev)
      level_mass[static_cast<size_t>(lev)][sys.locate(lev, c).corner] += mass_[cell];
  }
  double worst = 1.0;
  for (int lev = 1; lev <= grid_.N + 1; ++lev) {
    for (const auto& [corner, m] : level_mass[static_cast<size_t>(lev)]) {
      CubeId child = sys.cube_from_corner(lev, corner);
      double pm = level_mass[static_cast<size_t>(lev - 1)].at(sys.parent(child).corner);
      worst = std::max(worst, pm / m);
    }
  }
  return worst;
}

MartingaleOps::MartingaleOps(const DyadicSystem& sys, const DiscreteMeasure& mu)
    : sys_(&sys), mu_(&mu) {
  if (sys.grid().d != mu.grid().d || sys.grid().N != mu.grid().N)
    throw domain_error("martingale ops: system and measure use different grids");
  const GridConfig& g = mu.grid();
  parts_.resize(static_cast<size_t>(g.N + 2));
  for (int lev = 0; lev <= g.N + 1; ++lev) {
    LevelPart& part = parts_[static_cast<size_t>(lev)];
    std::map<Coord, double> masses;
    for (std::int64_t cell : mu.massive_cells())
      masses[sys.locate(lev, g.box_unflat(cell)).corner] += mu.mass()[cell];
    part.cubes.reserve(masses.size());
    part.cube_mass.reserve(masses.size());
    std::map<Coord, std::int32_t> ordinal;
    for (const auto& [corner, m] : masses) {
      ordinal[corner] = static_cast<std::int32_t>(part.cubes.size());
      part.cubes.push_back(sys.cube_from_corner(lev, corner));
      part.cube_mass.push_back(m);
    }
    part.cube_cells.resize(part.cubes.size());
    part.cube_of_cell.assign(static_cast<size_t>(g.box_cells()), -1);
    for (std::int64_t cell : mu.massive_cells()) {
      std::int32_t ord = ordinal.at(sys.locate(lev, g.box_unflat(cell)).corner);
      part.cube_of_cell[static_cast<size_t>(cell)] = ord;
      part.cube_cells[static_cast<size_t>(ord)].push_back(cell);
    }
  }
}

const MartingaleOps::LevelPart& MartingaleOps::part(int level) const {
  int lev = std::clamp(level, 0, grid().N + 1);
  return parts_[static_cast<size_t>(lev)];
}

std::int64_t MartingaleOps::level_cube_ordinal(int level, std::int64_t box_cell) const {
  return part(level).cube_of_cell[static_cast<size_t>(box_cell)];
}

double MartingaleOps::level_cube_mass(int level, std::int64_t ordinal) const {
  return part(level).cube_mass[static_cast<size_t>(ordinal)];
}

namespace {

int ordinal_of(const std::vector<CubeId>& cubes, const Coord& corner) {
  auto it = std::lower_bound(cubes.begin(), cubes.end(), corner,
                             [](const CubeId& c, const Coord& x) { return c.corner < x; });
  if (it == cubes.end() || !(it->corner == corner)) return -1;
  return static_cast<int>(it - cubes.begin());
}

}  // namespace

double MartingaleOps::cube_mass(const CubeId& c) const {
  if (c.level <= 0) return mu_->total();
  if (c.level > grid().N + 1) throw domain_error("cube_mass: level beyond finest cells");
  const LevelPart& p = part(c.level);
  int ord = ordinal_of(p.cubes, c.corner);
  return ord < 0 ? 0.0 : p.cube_mass[static_cast<size_t>(ord)];
}

double MartingaleOps::average(const Vec& f, const CubeId& c) const {
  if (c.level <= 0) {
    KahanSum s;
    for (std::int64_t cell : mu_->massive_cells()) s.add(f[cell] * mu_->mass()[cell]);
    return s.value() / mu_->total();
  }
  const LevelPart& p = part(c.level);
  int ord = ordinal_of(p.cubes, c.corner);
  if (ord < 0) return 0.0;
  KahanSum s;
  for (std::int64_t cell : p.cube_cells[static_cast<size_t>(ord)])
    s.add(f[cell] * mu_->mass()[cell]);
  return s.value() / p.cube_mass[static_cast<size_t>(ord)];
}

std::vector<std::int64_t> MartingaleOps::cells_of(const CubeId& c) const {
  if (c.level <= 0) return mu_->massive_cells();
  if (c.level > grid().N + 1) throw domain_error("cells_of: level beyond finest cells");
  const LevelPart& p = part(c.level);
  int ord = ordinal_of(p.cubes, c.corner);
  if (ord < 0) return {};
  return p.cube_cells[static_cast<size_t>(ord)];
}

const std::vector<CubeId>& MartingaleOps::cubes_at(int level) const { return part(level).cubes; }

Vec MartingaleOps::apply_E(int level, const Vec& f) const {
  const GridConfig& g = grid();
  Vec out = Vec::Zero(g.box_cells());
  if (level >= g.N + 1) {
    for (std::int64_t cell : mu_->massive_cells()) out[cell] = f[cell];
    return out;
  }
  const LevelPart& p = part(level);
  for (size_t ord = 0; ord < p.cubes.size(); ++ord) {
    KahanSum s;
    for (std::int64_t cell : p.cube_cells[ord]) s.add(f[cell] * mu_->mass()[cell]);
    double avg = s.value() / p.cube_mass[ord];
    for (std::int64_t cell : p.cube_cells[ord]) out[cell] = avg;
  }
  return out;
}

Vec MartingaleOps::apply_D(int level, const Vec& f) const {
  return apply_E(level + 1, f) - apply_E(level, f);
}

Vec MartingaleOps::apply_EI(const CubeId& c, const Vec& f) const {
  Vec out = Vec::Zero(grid().box_cells());
  auto cells = cells_of(c);
  if (cells.empty()) return out;
  KahanSum s, m;
  for (std::int64_t cell : cells) {
    s.add(f[cell] * mu_->mass()[cell]);
    m.add(mu_->mass()[cell]);
  }
  double avg = s.value() / m.value();
  for (std::int64_t cell : cells) out[cell] = avg;
  return out;
}

Vec MartingaleOps::apply_DI(const CubeId& c, const Vec& f) const {
  Vec out = Vec::Zero(grid().box_cells());
  if (c.level < 0 || c.level > grid().N) return out;  // no refinement below this cube
  auto cells = cells_of(c);
  if (cells.empty()) return out;
  const LevelPart& fine = part(c.level + 1);
  KahanSum s;
  for (std::int64_t cell : cells) s.add(f[cell] * mu_->mass()[cell]);
  double avg = s.value() / cube_mass(c);
  std::map<std::int32_t, double> child_avg;
  for (std::int64_t cell : cells) {
    std::int32_t ord = fine.cube_of_cell[static_cast<size_t>(cell)];
    child_avg.emplace(ord, 0.0);
  }
  for (auto& [ord, val] : child_avg) {
    KahanSum cs;
    for (std::int64_t cell : fine.cube_cells[static_cast<size_t>(ord)])
      cs.add(f[cell] * mu_->mass()[cell]);
    val = cs.value() / fine.cube_mass[static_cast<size_t>(ord)];
  }
  for (std::int64_t cell : cells)
    out[cell] = child_avg.at(fine.cube_of_cell[static_cast<size_t>(cell)]) - avg;
  return out;
}

namespace {

bool cell_in_cube(const DyadicSystem& sys, const GridConfig& g, const CubeId& c,
                  std::int64_t box_cell) {
  if (c.level <= 0) return true;  // every massive cell lies in K0 and above
  return sys.locate(c.level, g.box_unflat(box_cell)).corner == c.corner;
}

}  // namespace

Vec MartingaleOps::apply_block(const Vec& f, const CubeId& H, int r, BlockVariant variant) const {
  if (r < 0) throw domain_error("apply_block: depth must be nonnegative");
  const int L = H.level;
  switch (variant) {
    case BlockVariant::D_r: {
      // 1_H (E_{L+r+1} - E_{L+r}) f, all depth-r descendants of H at once.
      Vec hi = apply_E(L + r + 1, f), lo = apply_E(L + r, f);
      Vec out = Vec::Zero(grid().box_cells());
      for (std::int64_t cell : cells_of(H)) out[cell] = hi[cell] - lo[cell];
      return out;
    }
    case BlockVariant::P_r: {
      Vec hi = apply_E(L + r, f), lo = apply_E(L, f);
      Vec out = Vec::Zero(grid().box_cells());
      for (std::int64_t cell : cells_of(H)) out[cell] = hi[cell] - lo[cell];
      return out;
    }
    case BlockVariant::D_r_good: {
      if (r < 2) throw domain_error("apply_block: good variants need depth >= 2");
      Vec out = Vec::Zero(grid().box_cells());
      if (L + r > grid().N) return out;
      for (const CubeId& I : descendants(H, r))
        if (sys_->is_k_good(I, r)) out += apply_DI(I, f);
      return out;
    }
    case BlockVariant::P_r_good: {
      Vec out = Vec::Zero(grid().box_cells());
      for (int j = 2; j <= r - 1; ++j) {
        if (L + j > grid().N) break;
        for (const CubeId& I : descendants(H, j))
          if (sys_->is_k_good(I, j)) out += apply_DI(I, f);
      }
      return out;
    }
  }
  throw domain_error("apply_block: unknown variant");
}

std::vector<CubeId> MartingaleOps::descendants(const CubeId& H, int depth) const {
  std::vector<CubeId> out;
  const int lev = H.level + depth;
  if (lev < 0 || lev > grid().N + 1) return out;
  const LevelPart& p = part(lev);
  std::vector<char> seen(p.cubes.size(), 0);
  for (std::int64_t cell : cells_of(H)) {
    std::int32_t ord = p.cube_of_cell[static_cast<size_t>(cell)];
    if (ord >= 0 && !seen[static_cast<size_t>(ord)]) {
      seen[static_cast<size_t>(ord)] = 1;
      out.push_back(p.cubes[static_cast<size_t>(ord)]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Vec MartingaleOps::apply_block_weighted(const Vec& f, const CubeId& H, int r,
                                        const std::function<double(const CubeId&)>& weight) const {
  Vec out = Vec::Zero(grid().box_cells());
  if (H.level + r > grid().N) return out;
  for (const CubeId& I : descendants(H, r)) {
    double w = weight(I);
    if (w != 0.0) out += w * apply_DI(I, f);
  }
  return out;
}

Mat MartingaleOps::E_sub(int level, const std::vector<std::int64_t>& rows,
                         const std::vector<std::int64_t>& cols) const {
  Mat out = Mat::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  if (level >= grid().N + 1) {
    for (size_t i = 0; i < rows.size(); ++i)
      for (size_t j = 0; j < cols.size(); ++j)
        if (rows[i] == cols[j]) out(i, j) = 1.0;
    return out;
  }
  const LevelPart& p = part(level);
  for (size_t i = 0; i < rows.size(); ++i) {
    std::int32_t ri = p.cube_of_cell[static_cast<size_t>(rows[i])];
    if (ri < 0) continue;
    for (size_t j = 0; j < cols.size(); ++j) {
      std::int32_t cj = p.cube_of_cell[static_cast<size_t>(cols[j])];
      if (cj == ri) out(i, j) = mu_->mass()[cols[j]] / p.cube_mass[static_cast<size_t>(ri)];
    }
  }
  return out;
}

Mat MartingaleOps::D_sub(int level, const std::vector<std::int64_t>& rows,
                         const std::vector<std::int64_t>& cols) const {
  return E_sub(level + 1, rows, cols) - E_sub(level, rows, cols);
}

Mat MartingaleOps::band_sub(const CubeId& H, int lo, int hi, const std::vector<std::int64_t>& rows,
                            const std::vector<std::int64_t>& cols) const {
  Mat out = E_sub(H.level + hi, rows, cols) - E_sub(H.level + lo, rows, cols);
  for (size_t i = 0; i < rows.size(); ++i)
    if (!cell_in_cube(*sys_, grid(), H, rows[i])) out.row(static_cast<Eigen::Index>(i)).setZero();
  return out;
}

Mat MartingaleOps::weighted_Dr_sub(const CubeId& H, int r,
                                   const std::function<double(const CubeId&)>& weight,
                                   const std::vector<std::int64_t>& rows,
                                   const std::vector<std::int64_t>& cols) const {
  Mat out = Mat::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  const int lev = H.level + r;
  if (lev < 0 || lev > grid().N) return out;
  const LevelPart& p = part(lev);
  std::map<std::int32_t, double> wcache;
  Mat d = D_sub(lev, rows, cols);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!cell_in_cube(*sys_, grid(), H, rows[i])) continue;
    std::int32_t ri = p.cube_of_cell[static_cast<size_t>(rows[i])];
    if (ri < 0) continue;
    auto [it, fresh] = wcache.try_emplace(ri, 0.0);
    if (fresh) it->second = weight(p.cubes[static_cast<size_t>(ri)]);
    double w = it->second;
    if (w == 0.0) continue;
    for (size_t j = 0; j < cols.size(); ++j) {
      std::int32_t cj = p.cube_of_cell[static_cast<size_t>(cols[j])];
      if (cj == ri) out(i, j) = w * d(i, j);
    }
  }
  return out;
}

Mat MartingaleOps::E_matrix(int level) const {
  std::vector<std::int64_t> all(static_cast<size_t>(grid().box_cells()));
  for (std::int64_t i = 0; i < grid().box_cells(); ++i) all[static_cast<size_t>(i)] = i;
  return E_sub(level, all, all);
}

Mat MartingaleOps::D_matrix(int level) const {
  return E_matrix(level + 1) - E_matrix(level);
}

double MartingaleOps::bessel_sum(const Vec& f, int k) const {
  KahanSum total;
  for (int lev = 0; lev <= grid().N + 1; ++lev) {
    Vec d = apply_D(lev + k, f);
    const LevelPart& p = part(lev);
    for (size_t ord = 0; ord < p.cubes.size(); ++ord) {
      KahanSum s;
      for (std::int64_t cell : p.cube_cells[ord]) s.add(d[cell] * d[cell] * mu_->mass()[cell]);
      total.add(s.value());
    }
  }
  return total.value();
}

}  // namespace dyrep
