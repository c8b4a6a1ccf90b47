#include "dyrep/operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "dyrep/errors.hpp"
#include "dyrep/haar.hpp"
#include "csv_util.hpp"

namespace dyrep {

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, std::int64_t panels) {
  if (b <= a) return 0.0;
  if (panels % 2 != 0) ++panels;
  const double h = (b - a) / static_cast<double>(panels);
  KahanSum s;
  s.add(f(a));
  s.add(f(b));
  for (std::int64_t i = 1; i < panels; ++i) {
    const double w = (i % 2 == 1) ? 4.0 : 2.0;
    s.add(w * f(a + h * static_cast<double>(i)));
  }
  return s.value() * h / 3.0;
}

// int_u0^inf s e^{-delta u} (1+u)^alpha du with a rigorous tail bound.
DiniResult integrate_exp_poly(double s, double delta, double alpha, double u0) {
  DiniResult out;
  if (s == 0.0) return out;
  const double upper = std::max({40.0, u0 + 40.0, (40.0 + 10.0 * alpha) / delta});
  const auto f = [&](double u) { return s * std::exp(-delta * u) * std::pow(1.0 + u, alpha); };
  const auto panels =
      std::min<std::int64_t>(1 << 22, std::max<std::int64_t>(4096, static_cast<std::int64_t>((upper - u0) * 64.0)));
  out.partial = simpson(f, u0, upper, panels);
  out.terms = static_cast<int>(std::min<std::int64_t>(panels, std::numeric_limits<int>::max()));
  const double slack = delta - alpha / (1.0 + upper);
  out.tail_bound = s * std::pow(1.0 + upper, alpha) * std::exp(-delta * upper) / slack;
  return out;
}

KernelSpec::Point center_point(const GridConfig& grid, const Coord& c) {
  KernelSpec::Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < grid.d; ++a)
    p[static_cast<std::size_t>(a)] = grid.center(c[static_cast<std::size_t>(a)]);
  return p;
}

double golden_minimize(const std::function<double(double)>& g, double lo, double hi, double tol) {
  if (hi - lo <= tol) return 0.5 * (lo + hi);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double gc = g(c), gd = g(d);
  while (b - a > tol) {
    if (gc < gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - gr * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + gr * (b - a);
      gd = g(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

Modulus Modulus::power(double delta, double scale) {
  if (!(delta > 0.0) || !(delta <= 1.0)) throw domain_error("power modulus needs exponent in (0,1]");
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw domain_error("power modulus needs scale >= 0");
  Modulus m;
  m.kind_ = Kind::Power;
  m.exponent_ = delta;
  m.scale_ = scale;
  return m;
}

Modulus Modulus::log_power(double beta, double scale) {
  if (!(beta > 0.0)) throw domain_error("log-power modulus needs exponent > 0");
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw domain_error("log-power modulus needs scale >= 0");
  Modulus m;
  m.kind_ = Kind::LogPower;
  m.exponent_ = beta;
  m.scale_ = scale;
  return m;
}

Modulus Modulus::table(std::vector<std::pair<double, double>> points) {
  std::sort(points.begin(), points.end());
  double prev_t = 0.0, prev_w = 0.0;
  for (const auto& [t, w] : points) {
    if (!(t > prev_t) || !(t <= 1.0)) throw domain_error("modulus table needs strictly increasing t in (0,1]");
    if (!(w >= prev_w) || !std::isfinite(w)) throw domain_error("modulus table values must be nondecreasing and finite");
    prev_t = t;
    prev_w = w;
  }
  Modulus m;
  m.kind_ = Kind::Table;
  m.points_ = std::move(points);
  return m;
}

Modulus Modulus::zero() { return table({}); }

double Modulus::at(double t) const {
  if (!(t >= 0.0)) throw domain_error("modulus argument must be >= 0");
  if (t == 0.0) return 0.0;
  t = std::min(t, 1.0);
  switch (kind_) {
    case Kind::Power:
      return scale_ * std::pow(t, exponent_);
    case Kind::LogPower:
      return scale_ * std::pow(1.0 + std::log(1.0 / t), -exponent_);
    case Kind::Table: {
      if (points_.empty()) return 0.0;
      if (t >= points_.back().first) return points_.back().second;
      // linear between consecutive anchors, with (0,0) implied on the left
      double t0 = 0.0, w0 = 0.0;
      for (const auto& [t1, w1] : points_) {
        if (t <= t1) return w0 + (w1 - w0) * (t - t0) / (t1 - t0);
        t0 = t1;
        w0 = w1;
      }
      return points_.back().second;
    }
  }
  return 0.0;
}

double Modulus::at_scale(int k) const { return at(std::ldexp(1.0, -k)); }

bool Modulus::audit(int samples, double* worst_ratio) const {
  if (samples < 2) throw domain_error("modulus audit needs at least 2 samples");
  bool ok = at(0.0) == 0.0;
  double worst = 0.0;
  std::vector<double> vals(static_cast<std::size_t>(samples) + 1);
  for (int i = 0; i <= samples; ++i) {
    vals[static_cast<std::size_t>(i)] = at(static_cast<double>(i) / samples);
    if (i > 0 && vals[static_cast<std::size_t>(i)] < vals[static_cast<std::size_t>(i - 1)] - 1e-15) ok = false;
  }
  for (int i = 1; i <= samples; ++i) {
    for (int j = i; i + j <= samples; ++j) {
      const double lhs = vals[static_cast<std::size_t>(i + j)];
      const double rhs = vals[static_cast<std::size_t>(i)] + vals[static_cast<std::size_t>(j)];
      if (rhs > 0.0) {
        worst = std::max(worst, lhs / rhs);
        if (lhs > rhs * (1.0 + 1e-12)) ok = false;
      } else if (lhs > 0.0) {
        ok = false;
        worst = std::numeric_limits<double>::infinity();
      }
    }
  }
  if (worst_ratio != nullptr) *worst_ratio = worst;
  return ok;
}

DiniResult dini_sum(const Modulus& omega, double alpha) {
  if (!(alpha >= 0.0)) throw domain_error("dini sum needs alpha >= 0");
  DiniResult out;
  if (omega.kind() == Modulus::Kind::LogPower) {
    const double beta = omega.exponent();
    const double s = omega.scale();
    out.convergent = beta - alpha > 1.0;
    const int cap = out.convergent ? 10000 : 64;
    KahanSum sum;
    // evaluate in log space: 2^-k underflows to zero past k ~ 1074
    for (int k = 1; k <= cap; ++k) {
      sum.add(s * std::pow(1.0 + k * std::log(2.0), -beta) * std::pow(1.0 + k, alpha));
    }
    out.partial = sum.value();
    out.terms = cap;
    if (out.convergent && s > 0.0) {
      out.tail_bound = s * std::pow(2.0, alpha) / std::pow(std::log(2.0), beta) *
                       std::pow(static_cast<double>(cap), alpha - beta + 1.0) / (beta - alpha - 1.0);
    }
    return out;
  }
  // Power and Table: geometric-times-polynomial tail once the argument is in
  // the linear (or pure power) zone.
  const bool is_table = omega.kind() == Modulus::Kind::Table;
  if (is_table && omega.points().empty()) return out;
  const double delta = is_table ? 1.0 : omega.exponent();
  const double t_min = is_table ? omega.points().front().first : 1.0;
  KahanSum sum;
  int k = 0;
  double term = 0.0;
  for (k = 1; k <= 2000000; ++k) {
    // the pure power form is evaluated in log space so small exponents never
    // hit the 2^-k underflow; tables break out long before underflow since
    // their linear zone starts at a representable positive anchor
    term = is_table ? omega.at_scale(k)
                    : omega.scale() * std::exp(-delta * k * std::log(2.0));
    term *= std::pow(1.0 + k, alpha);
    sum.add(term);
    if (k < 64) continue;
    if (is_table && std::ldexp(1.0, -k) >= t_min) continue;
    const double q = std::pow(2.0, -delta) * std::pow((k + 2.0) / (k + 1.0), alpha);
    if (q <= 0.99) break;
  }
  out.partial = sum.value();
  out.terms = std::min(k, 2000000);
  const double q = std::pow(2.0, -delta) * std::pow((k + 2.0) / (k + 1.0), alpha);
  out.tail_bound = (term * q) / (1.0 - q);
  return out;
}

DiniResult dini_integral(const Modulus& omega, double alpha) {
  if (!(alpha >= 0.0)) throw domain_error("dini integral needs alpha >= 0");
  switch (omega.kind()) {
    case Modulus::Kind::Power:
      return integrate_exp_poly(omega.scale(), omega.exponent(), alpha, 0.0);
    case Modulus::Kind::LogPower: {
      DiniResult out;
      const double beta = omega.exponent();
      if (beta - alpha > 1.0) {
        out.partial = omega.scale() / (beta - alpha - 1.0);
        out.convergent = true;
      } else {
        out.convergent = false;
        const auto f = [&](double u) { return omega.scale() * std::pow(1.0 + u, alpha - beta); };
        out.partial = simpson(f, 0.0, 64.0 * std::log(2.0), 1 << 14);
      }
      return out;
    }
    case Modulus::Kind::Table: {
      DiniResult out;
      const auto& pts = omega.points();
      if (pts.empty()) return out;
      // Breakpoints in u = log(1/t), integrated segment by segment.
      std::vector<double> breaks{0.0};
      for (auto it = pts.rbegin(); it != pts.rend(); ++it) breaks.push_back(std::log(1.0 / it->first));
      std::sort(breaks.begin(), breaks.end());
      breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
      const auto f = [&](double u) { return omega.at(std::exp(-u)) * std::pow(1.0 + u, alpha); };
      KahanSum val;
      for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double len = breaks[i + 1] - breaks[i];
        const auto panels = std::max<std::int64_t>(64, static_cast<std::int64_t>(len * 256.0));
        val.add(simpson(f, breaks[i], breaks[i + 1], panels));
      }
      out.partial = val.value();
      // Below the smallest anchor the interpolant is slope * t = slope * e^{-u}.
      const double slope = pts.front().second / pts.front().first;
      const DiniResult tail = integrate_exp_poly(slope, 1.0, alpha, breaks.back());
      out.partial += tail.partial;
      out.tail_bound = tail.tail_bound;
      out.terms = static_cast<int>(breaks.size());
      return out;
    }
  }
  return {};
}

KernelSpec KernelSpec::hilbert() {
  KernelSpec k;
  k.n = 1.0;
  k.omega = Modulus::power(1.0);
  k.c_size = 1.0;
  k.c_smooth = 4.0;
  k.name = "hilbert";
  k.eval = [](const Point& x, const Point& y, int) { return 1.0 / (x[0] - y[0]); };
  return k;
}

KernelSpec KernelSpec::riesz(double n) {
  if (!(n > 0.0)) throw domain_error("riesz kernel needs order n > 0");
  KernelSpec k;
  k.n = n;
  k.omega = Modulus::power(1.0);
  k.c_size = 1.0;
  k.c_smooth = 4.0 * (n + 2.0);
  k.name = "riesz";
  k.eval = [n](const Point& x, const Point& y, int d) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) r2 += (x[a] - y[a]) * (x[a] - y[a]);
    return (x[0] - y[0]) / std::pow(std::sqrt(r2), n + 1.0);
  };
  return k;
}

KernelSpec KernelSpec::from_samples(const GridConfig& grid, const std::string& path, double n,
                                    Modulus omega) {
  struct Table {
    GridConfig grid;
    Mat values;  // k1 flat x k1 flat, NaN = missing
  };
  auto table = std::make_shared<Table>();
  table->grid = grid;
  table->values =
      Mat::Constant(grid.k1_cells(), grid.k1_cells(), std::numeric_limits<double>::quiet_NaN());

  auto rows = csv::read_rows(path);
  const int want = 2 * grid.d + 1;
  for (const auto& row : rows) {
    if (row.line == 1 && !csv::looks_numeric(row.fields.empty() ? "" : row.fields[0])) continue;
    if (static_cast<int>(row.fields.size()) != want)
      csv::fail(path, row.line, "expected " + std::to_string(want) + " fields");
    Coord xc{0, 0, 0}, yc{0, 0, 0};
    for (int a = 0; a < grid.d; ++a) {
      xc[static_cast<std::size_t>(a)] = csv::parse_int(path, row.line, row.fields[static_cast<std::size_t>(a)]);
      yc[static_cast<std::size_t>(a)] =
          csv::parse_int(path, row.line, row.fields[static_cast<std::size_t>(grid.d + a)]);
    }
    if (!grid.in_k1(xc) || !grid.in_k1(yc)) csv::fail(path, row.line, "cell index outside the unit cube");
    const double v = csv::parse_double(path, row.line, row.fields.back());
    const auto i = grid.k1_flat(xc);
    const auto j = grid.k1_flat(yc);
    if (std::isfinite(table->values(i, j))) csv::fail(path, row.line, "duplicate kernel sample");
    table->values(i, j) = v;
  }

  KernelSpec k;
  k.n = n;
  k.omega = std::move(omega);
  k.name = "samples:" + path;
  k.eval = [table](const Point& x, const Point& y, int d) {
    const double h = table->grid.cell_side();
    Coord xc{0, 0, 0}, yc{0, 0, 0};
    for (int a = 0; a < d; ++a) {
      xc[static_cast<std::size_t>(a)] = std::llround(x[static_cast<std::size_t>(a)] / h - 0.5);
      yc[static_cast<std::size_t>(a)] = std::llround(y[static_cast<std::size_t>(a)] / h - 0.5);
    }
    if (!table->grid.in_k1(xc) || !table->grid.in_k1(yc)) return std::numeric_limits<double>::quiet_NaN();
    return table->values(table->grid.k1_flat(xc), table->grid.k1_flat(yc));
  };
  return k;
}

Mat assemble_operator(const KernelSpec& kernel, const DiscreteMeasure& mu) {
  const GridConfig& grid = mu.grid();
  if (!kernel.eval) throw input_error("kernel has no evaluator");
  if (kernel.diagonal == KernelSpec::Diagonal::Table &&
      kernel.diagonal_table.size() != grid.box_cells())
    throw input_error("kernel diagonal table must cover every box cell");
  Mat t = Mat::Zero(grid.box_cells(), grid.box_cells());
  const auto& cells = mu.massive_cells();
  std::vector<KernelSpec::Point> centers(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i)
    centers[i] = center_point(grid, grid.box_unflat(cells[i]));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (i == j) continue;
      const double v = kernel.eval(centers[i], centers[j], grid.d);
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "non-finite kernel value between cells " << cells[i] << " and " << cells[j];
        throw input_error(msg.str());
      }
      t(cells[i], cells[j]) = v * mu.mass()[cells[j]];
    }
    if (kernel.diagonal == KernelSpec::Diagonal::Table)
      t(cells[i], cells[i]) = kernel.diagonal_table[cells[i]] * mu.mass()[cells[i]];
  }
  return t;
}

Mat random_operator(const DiscreteMeasure& mu, std::uint64_t seed) {
  const auto& cells = mu.massive_cells();
  Mat t = Mat::Zero(mu.grid().box_cells(), mu.grid().box_cells());
  std::mt19937_64 rng(seed);
  for (const auto i : cells)
    for (const auto j : cells) t(i, j) = 2.0 * uniform01(rng) - 1.0;
  return t;
}

Mat operator_from_csv(const GridConfig& grid, const DiscreteMeasure& mu, const std::string& path) {
  auto rows = csv::read_rows(path);
  const auto k1 = grid.k1_cells();
  Mat vals = Mat::Zero(k1, k1);
  std::int64_t next_row = 0;
  for (const auto& row : rows) {
    if (row.line == 1 && !csv::looks_numeric(row.fields.empty() ? "" : row.fields[0])) continue;
    if (static_cast<std::int64_t>(row.fields.size()) != k1)
      csv::fail(path, row.line, "expected " + std::to_string(k1) + " fields");
    if (next_row >= k1) csv::fail(path, row.line, "too many matrix rows");
    for (std::int64_t j = 0; j < k1; ++j)
      vals(next_row, j) = csv::parse_double(path, row.line, row.fields[static_cast<std::size_t>(j)]);
    ++next_row;
  }
  if (next_row != k1) throw input_error(path + ": expected " + std::to_string(k1) + " matrix rows");
  Mat t = Mat::Zero(grid.box_cells(), grid.box_cells());
  for (std::int64_t i = 0; i < k1; ++i)
    for (std::int64_t j = 0; j < k1; ++j)
      t(grid.k1_to_box(i), grid.k1_to_box(j)) = vals(i, j);
  // canonical form: rows and columns at massless cells are zero
  for (std::int64_t c = 0; c < grid.box_cells(); ++c) {
    if (!mu.massive(c)) {
      t.row(c).setZero();
      t.col(c).setZero();
    }
  }
  return t;
}

Mat mu_adjoint(const DiscreteMeasure& mu, const Mat& t) {
  const auto& cells = mu.massive_cells();
  Mat out = Mat::Zero(t.rows(), t.cols());
  for (const auto x : cells)
    for (const auto y : cells) out(x, y) = mu.mass()[y] * t(y, x) / mu.mass()[x];
  return out;
}

Vec ones_canonical(const DiscreteMeasure& mu) {
  Vec v = Vec::Zero(mu.grid().box_cells());
  for (const auto c : mu.massive_cells()) v[c] = 1.0;
  return v;
}

Vec t1_vector(const DiscreteMeasure& mu, const Mat& t) { return t * ones_canonical(mu); }

TestingConstants testing_constants(const Mat& t, const DiscreteMeasure& mu) {
  const DyadicSystem sys = DyadicSystem::reference(mu.grid());
  const MartingaleOps ops(sys, mu);
  const Mat tstar = mu_adjoint(mu, t);
  TestingConstants out;

  const auto consider = [&](Mat const& op, const Vec& ind, double mass, const CubeId& cube,
                            bool whole, double& best, CubeId& witness, bool& best_whole) {
    const double val = mu.norm2(op * ind) / std::sqrt(mass);
    if (val > best) {
      best = val;
      witness = cube;
      best_whole = whole;
    }
  };

  const Vec ones = ones_canonical(mu);
  consider(t, ones, mu.total(), CubeId{}, true, out.forward, out.forward_witness,
           out.forward_whole_space);
  consider(tstar, ones, mu.total(), CubeId{}, true, out.adjoint, out.adjoint_witness,
           out.adjoint_whole_space);
  for (int level = 0; level <= mu.grid().N + 1; ++level) {
    for (const auto& q : ops.cubes_at(level)) {
      Vec ind = Vec::Zero(mu.grid().box_cells());
      for (const auto c : ops.cells_of(q)) ind[c] = 1.0;
      const double mass = ops.cube_mass(q);
      consider(t, ind, mass, q, false, out.forward, out.forward_witness, out.forward_whole_space);
      consider(tstar, ind, mass, q, false, out.adjoint, out.adjoint_witness,
               out.adjoint_whole_space);
    }
  }
  return out;
}

HaarImageBound haar_image_bound(const Mat& t, const MartingaleOps& ops) {
  const DiscreteMeasure& mu = ops.measure();
  HaarImageBound out;
  for (int level = 0; level <= ops.grid().N; ++level) {
    for (const auto& q : ops.cubes_at(level)) {
      const HaarBasis basis(ops, q);
      for (const auto& e : basis.entries()) {
        const Vec phi = basis.expand(ops, e);
        const double val = mu.norm2(t * phi);
        if (val > out.max_norm) {
          out.max_norm = val;
          out.witness = q;
          out.witness_node = e.node;
        }
      }
    }
  }
  return out;
}

double bmo_norm(const Vec& b, const DiscreteMeasure& mu, double lambda, double p) {
  if (!(lambda > 1.0)) throw domain_error("bmo dilation factor must be > 1");
  if (!(p >= 1.0)) throw domain_error("bmo exponent must be >= 1");
  const GridConfig& grid = mu.grid();
  if (b.size() != grid.box_cells()) throw input_error("bmo input must cover every box cell");
  const DyadicSystem sys = DyadicSystem::reference(grid);
  const MartingaleOps ops(sys, mu);

  const auto local_norm = [&](const std::vector<std::int64_t>& cells, double normalizer) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto c : cells) {
      lo = std::min(lo, b[c]);
      hi = std::max(hi, b[c]);
    }
    const auto cost = [&](double a) {
      KahanSum s;
      for (const auto c : cells) s.add(std::pow(std::abs(b[c] - a), p) * mu.mass()[c]);
      return s.value();
    };
    double a_star;
    if (p == 2.0) {
      KahanSum num, den;
      for (const auto c : cells) {
        num.add(b[c] * mu.mass()[c]);
        den.add(mu.mass()[c]);
      }
      a_star = num.value() / den.value();
    } else {
      a_star = lo < hi ? golden_minimize(cost, lo, hi, 1e-10) : lo;
    }
    return std::pow(cost(a_star) / normalizer, 1.0 / p);
  };

  // mass of the lattice-clipped concentric dilate: cells whose centers lie in
  // the closed dilate of Q (2*center and widths held in exact integers)
  const auto dilate_mass = [&](const CubeId& q) {
    const auto side = grid.side_units(q.level);
    KahanSum s;
    for (const auto c : mu.massive_cells()) {
      const Coord u = grid.box_unflat(c);
      bool inside = true;
      for (int a = 0; a < grid.d; ++a) {
        const double twice_center_gap = std::abs(
            static_cast<double>(2 * u[static_cast<std::size_t>(a)] + 1 -
                                2 * q.corner[static_cast<std::size_t>(a)] - side));
        if (twice_center_gap > lambda * static_cast<double>(side)) {
          inside = false;
          break;
        }
      }
      if (inside) s.add(mu.mass()[c]);
    }
    return s.value();
  };

  double best = local_norm(std::vector<std::int64_t>(mu.massive_cells().begin(),
                                                     mu.massive_cells().end()),
                           mu.total());
  for (int level = 0; level <= grid.N + 1; ++level) {
    for (const auto& q : ops.cubes_at(level)) {
      best = std::max(best, local_norm(ops.cells_of(q), dilate_mass(q)));
    }
  }
  return best;
}

RegularityAudit regularity_audit(const KernelSpec& kernel, const GridConfig& grid) {
  if (!kernel.eval) throw input_error("kernel has no evaluator");
  RegularityAudit out;
  const double h = grid.cell_side();
  const auto k1 = grid.k1_cells();
  std::vector<KernelSpec::Point> centers(static_cast<std::size_t>(k1));
  std::vector<Coord> coords(static_cast<std::size_t>(k1));
  for (std::int64_t i = 0; i < k1; ++i) {
    coords[static_cast<std::size_t>(i)] = grid.k1_unflat(i);
    centers[static_cast<std::size_t>(i)] = center_point(grid, coords[static_cast<std::size_t>(i)]);
  }
  const auto eval = [&](std::int64_t i, std::int64_t j) {
    const double v = kernel.eval(centers[static_cast<std::size_t>(i)],
                                 centers[static_cast<std::size_t>(j)], grid.d);
    if (!std::isfinite(v)) throw input_error("non-finite kernel value during regularity audit");
    return v;
  };
  for (std::int64_t i = 0; i < k1; ++i) {
    for (std::int64_t j = 0; j < k1; ++j) {
      if (i == j) continue;
      double r2 = 0.0;
      for (int a = 0; a < grid.d; ++a) {
        const double gap = centers[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] -
                           centers[static_cast<std::size_t>(j)][static_cast<std::size_t>(a)];
        r2 += gap * gap;
      }
      const double r = std::sqrt(r2);
      const double rn = std::pow(r, kernel.n);
      const double kxy = eval(i, j);
      out.c_size = std::max(out.c_size, std::abs(kxy) * rn);
      ++out.pairs;
      const double kyx = eval(j, i);
      for (int jexp = 0; jexp <= grid.N; ++jexp) {
        const std::int64_t step = std::int64_t{1} << jexp;
        const double gap = static_cast<double>(step) * h;
        if (!(gap <= 0.5 * r)) continue;
        for (int a = 0; a < grid.d; ++a) {
          for (int sign = -1; sign <= 1; sign += 2) {
            Coord c = coords[static_cast<std::size_t>(i)];
            c[static_cast<std::size_t>(a)] += sign * step;
            if (!grid.in_k1(c)) continue;
            const auto ip = grid.k1_flat(c);
            if (ip == j) continue;
            const double den = kernel.omega.at(gap / r);
            if (den == 0.0)
              throw input_error("kernel modulus vanishes at positive argument " +
                                std::to_string(gap / r));
            const double num = std::abs(kxy - eval(ip, j)) + std::abs(kyx - eval(j, ip));
            out.c_smooth = std::max(out.c_smooth, num * rn / den);
            ++out.triples;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace dyrep
