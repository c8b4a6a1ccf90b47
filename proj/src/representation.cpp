#include "dyrep/representation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>

#include "dyrep/errors.hpp"

namespace dyrep {

namespace {

using CellList = std::vector<std::int64_t>;

std::unordered_map<std::int64_t, int> index_map(const CellList& cells) {
  std::unordered_map<std::int64_t, int> idx;
  idx.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) idx.emplace(cells[i], static_cast<int>(i));
  return idx;
}

Mat submatrix(const Mat& t, const CellList& rows, const CellList& cols) {
  Mat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t(rows[i], cols[j]);
  return out;
}

// mu-adjoint restricted to one massive cell list (all cells carry mass).
Mat block_mu_adjoint(const DiscreteMeasure& mu, const CellList& rows, const CellList& cols,
                     const Mat& m) {
  Mat out(static_cast<Eigen::Index>(cols.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < cols.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          mu.mass()[rows[j]] * m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) /
          mu.mass()[cols[i]];
  return out;
}

// Translate offsets at separation k >= 2: the shell 2^{k-3} < |m|_inf <= 2^{k-2}
// (k = 2 gives |m|_inf = 1).
std::vector<Coord> shell_offsets(int d, int k) {
  if (k < 2) throw domain_error("translate shell: separation parameter must be >= 2");
  if (k - 2 > 20) throw domain_error("translate shell: separation parameter too large to enumerate");
  const std::int64_t hi = std::int64_t{1} << (k - 2);
  const std::int64_t lo = (k == 2) ? 0 : (std::int64_t{1} << (k - 3));
  std::vector<Coord> out;
  Coord m{0, 0, 0};
  std::function<void(int)> rec = [&](int axis) {
    if (axis == d) {
      std::int64_t norm = 0;
      for (int a = 0; a < d; ++a) norm = std::max<std::int64_t>(norm, std::abs(m[a]));
      if (norm > lo && norm <= hi) out.push_back(m);
      return;
    }
    for (std::int64_t v = -hi; v <= hi; ++v) {
      m[axis] = v;
      rec(axis + 1);
    }
  };
  rec(0);
  return out;
}

// The single massive cube at a realized level <= 0 (it contains the unit cube).
CubeId coarse_cube(const MartingaleOps& ops, int level) {
  const CubeId root = ops.cubes_at(0).at(0);
  if (level == 0) return root;
  return ops.system().ancestor(root, -level);
}

std::vector<CubeId> hosts_at(const MartingaleOps& ops, int level) {
  if (level >= 1) return ops.cubes_at(level);
  return {coarse_cube(ops, level)};
}

struct BlockAccum {
  CellList cells;
  std::unordered_map<std::int64_t, int> index;
  Mat mat;
  Mat positive;
  std::vector<BlockOperator::AveragePart> negative;
};

BlockAccum& block_for(std::map<CubeId, BlockAccum>& acc, const MartingaleOps& ops,
                      const CubeId& key, bool average) {
  auto it = acc.find(key);
  if (it == acc.end()) {
    BlockAccum b;
    b.cells = ops.cells_of(key);
    b.index = index_map(b.cells);
    const auto n = static_cast<Eigen::Index>(b.cells.size());
    b.mat = Mat::Zero(n, n);
    if (average) b.positive = Mat::Zero(n, n);
    it = acc.emplace(key, std::move(b)).first;
  }
  return it->second;
}

void embed_add(BlockAccum& b, const CellList& rows, const CellList& cols, const Mat& m,
               bool into_positive) {
  Mat& target = into_positive ? b.positive : b.mat;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int bi = b.index.at(rows[i]);
    for (std::size_t j = 0; j < cols.size(); ++j)
      target(bi, b.index.at(cols[j])) += m(static_cast<Eigen::Index>(i),
                                           static_cast<Eigen::Index>(j));
  }
}

void validate_params(const GridConfig& g, int k, const RepresentationParams& p) {
  if (p.r < 2) throw domain_error("representation: depth parameter must be >= 2");
  if (k == 0) throw domain_error("representation: separation parameter must be nonzero");
  if (std::abs(k) > g.N + 1)
    throw domain_error("representation: |k| exceeds the deepest scale N+1 = " +
                       std::to_string(g.N + 1));
  if (p.omega.at_scale(std::abs(k)) <= 0.0)
    throw domain_error("representation: modulus vanishes at scale 2^-" +
                       std::to_string(std::abs(k)) + "; the normalized component is undefined");
}

AssembledOperator finalize(std::map<CubeId, BlockAccum>&& acc, const DiscreteMeasure& mu, int k,
                           const RepresentationParams& params, bool average) {
  AssembledOperator op;
  op.k = k;
  op.r = params.r;
  op.average = average;
  op.mode = params.mode;
  op.omega_scale = params.omega.at_scale(std::abs(k));
  const bool adjoint_side = k < 0;
  for (auto& [key, b] : acc) {
    if (b.mat.size() == 0) continue;
    if (b.mat.cwiseAbs().maxCoeff() == 0.0 &&
        (!average || b.positive.cwiseAbs().maxCoeff() == 0.0))
      continue;
    BlockOperator blk;
    blk.kind = average ? BlockOperator::Kind::Average : BlockOperator::Kind::Band;
    blk.key = key;
    blk.k = k;
    blk.r = params.r;
    blk.cells = std::move(b.cells);
    if (adjoint_side) {
      blk.mat = block_mu_adjoint(mu, blk.cells, blk.cells, b.mat);
      if (average) {
        blk.positive = block_mu_adjoint(mu, blk.cells, blk.cells, b.positive);
        for (auto& part : b.negative)
          part.mat = block_mu_adjoint(mu, part.cells, part.cells, part.mat);
      }
    } else {
      blk.mat = std::move(b.mat);
      if (average) blk.positive = std::move(b.positive);
    }
    if (average) blk.negative = std::move(b.negative);
    op.blocks.push_back(std::move(blk));
  }
  return op;
}

}  // namespace

double good_weight(const DyadicSystem& sys, const CubeId& c, int k, GoodnessMode mode) {
  if (mode == GoodnessMode::Idealized)
    return sys.is_k_good(c, k) ? std::ldexp(1.0, sys.grid().d) : 0.0;
  const Rational p = goodness_probability(sys.grid(), c.level, sys.reference_corner(c), k,
                                          GoodnessMode::Measured);
  if (p.num == 0) return 1.0;  // position frozen and never good: keep the term whole
  if (!sys.is_k_good(c, k)) return 0.0;
  return static_cast<double>(p.den) / static_cast<double>(p.num);
}

GoodnessFilters make_goodness_filters(const MartingaleOps& ops, int r, GoodnessMode mode) {
  if (r < 2) throw domain_error("goodness filters: depth parameter must be >= 2");
  const GridConfig& g = ops.grid();
  GoodnessFilters out;
  out.phi.resize(static_cast<std::size_t>(g.N) + 1);
  for (int host = 0; host <= g.N; ++host) {
    Vec phi = Vec::Zero(g.box_cells());
    for (const CubeId& c : ops.cubes_at(host)) {
      const double w = good_weight(ops.system(), c, r, mode);
      if (w == 0.0) continue;
      for (std::int64_t cell : ops.cells_of(c)) phi[cell] = w;
    }
    out.phi[static_cast<std::size_t>(host)] = std::move(phi);
  }
  return out;
}

AssembledOperator build_band_component(const MartingaleOps& ops, const Mat& t, int k,
                                       const RepresentationParams& params) {
  const GridConfig& g = ops.grid();
  validate_params(g, k, params);
  const DiscreteMeasure& mu = ops.measure();
  const DyadicSystem& sys = ops.system();
  const bool adjoint_side = k < 0;
  const int kk = std::abs(k);
  const Mat tm = adjoint_side ? mu_adjoint(mu, t) : t;
  const int hi = adjoint_side ? params.r : params.r + 1;
  const double inv_omega = 1.0 / params.omega.at_scale(kk);
  const auto nu = [&](const CubeId& c) { return good_weight(sys, c, params.r, params.mode); };

  std::map<CubeId, BlockAccum> acc;
  if (kk == 1) {
    // Near component: no translate, no outer weight; hosts reach below the
    // root so every difference level down to the global average is covered.
    for (int level = -params.r; level <= g.N - params.r; ++level) {
      for (const CubeId& h : hosts_at(ops, level)) {
        const CellList cols = ops.cells_of(h);
        const Mat d_sub = ops.weighted_Dr_sub(h, params.r, nu, cols, cols);
        if (d_sub.size() == 0 || d_sub.cwiseAbs().maxCoeff() == 0.0) continue;
        const Mat p_sub = ops.band_sub(h, 0, hi, cols, cols);
        Mat contrib = inv_omega * (p_sub * submatrix(tm, cols, cols) * d_sub);
        if (contrib.cwiseAbs().maxCoeff() == 0.0) continue;
        BlockAccum& b = block_for(acc, ops, sys.parent(h), false);
        embed_add(b, cols, cols, contrib, false);
      }
    }
  } else {
    for (int level = 1; level <= g.N - params.r; ++level) {
      const auto offsets = shell_offsets(g.d, kk);
      for (const CubeId& h : ops.cubes_at(level)) {
        const double w = good_weight(sys, h, kk, params.mode);
        if (w == 0.0) continue;
        const CellList cols = ops.cells_of(h);
        const Mat d_sub = ops.weighted_Dr_sub(h, params.r, nu, cols, cols);
        if (d_sub.size() == 0 || d_sub.cwiseAbs().maxCoeff() == 0.0) continue;
        const CubeId key = sys.ancestor(h, kk);
        for (const Coord& m : offsets) {
          const CubeId hm = sys.translate_unchecked(h, m);
          const CellList rows = ops.cells_of(hm);
          if (rows.empty()) continue;
          const Mat p_sub = ops.band_sub(hm, 0, hi, rows, rows);
          Mat contrib = (w * inv_omega) * (p_sub * submatrix(tm, rows, cols) * d_sub);
          if (contrib.cwiseAbs().maxCoeff() == 0.0) continue;
          BlockAccum& b = block_for(acc, ops, key, false);
          embed_add(b, rows, cols, contrib, false);
        }
      }
    }
  }
  return finalize(std::move(acc), mu, k, params, false);
}

AssembledOperator build_average_component(const MartingaleOps& ops, const Mat& t, int k,
                                          const RepresentationParams& params) {
  const GridConfig& g = ops.grid();
  validate_params(g, k, params);
  const DiscreteMeasure& mu = ops.measure();
  const DyadicSystem& sys = ops.system();
  const int kk = std::abs(k);
  AssembledOperator empty;
  empty.k = k;
  empty.r = params.r;
  empty.average = true;
  empty.mode = params.mode;
  empty.omega_scale = params.omega.at_scale(kk);
  if (kk == 1) return empty;  // the near component has no translate average

  const bool adjoint_side = k < 0;
  const Mat tm = adjoint_side ? mu_adjoint(mu, t) : t;
  const double inv_omega = 1.0 / params.omega.at_scale(kk);
  const auto nu = [&](const CubeId& c) { return good_weight(sys, c, params.r, params.mode); };

  std::map<CubeId, BlockAccum> acc;
  for (int level = 1; level <= g.N - params.r; ++level) {
    const auto offsets = shell_offsets(g.d, kk);
    for (const CubeId& h : ops.cubes_at(level)) {
      const double w = good_weight(sys, h, kk, params.mode);
      if (w == 0.0) continue;
      const CellList cols = ops.cells_of(h);
      const Mat d_sub = ops.weighted_Dr_sub(h, params.r, nu, cols, cols);
      if (d_sub.size() == 0 || d_sub.cwiseAbs().maxCoeff() == 0.0) continue;
      const CubeId key = sys.ancestor(h, kk);
      Eigen::RowVectorXd row_total = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(cols.size()));
      bool touched = false;
      for (const Coord& m : offsets) {
        const CubeId hm = sys.translate_unchecked(h, m);
        const CellList rows = ops.cells_of(hm);
        if (rows.empty()) continue;
        Eigen::RowVectorXd masses(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
          masses(static_cast<Eigen::Index>(i)) = mu.mass()[rows[i]];
        // <T D_h f, 1_hm> as a row functional of f
        const Eigen::RowVectorXd row = masses * submatrix(tm, rows, cols) * d_sub;
        if (row.cwiseAbs().maxCoeff() == 0.0) continue;
        touched = true;
        row_total += row;
        const double hm_mass = ops.cube_mass(hm);
        Mat up = ((w * inv_omega / hm_mass) * Vec::Ones(static_cast<Eigen::Index>(rows.size()))) * row;
        BlockAccum& b = block_for(acc, ops, key, true);
        embed_add(b, rows, cols, up, true);
        embed_add(b, rows, cols, up, false);
      }
      if (!touched) continue;
      const double h_mass = ops.cube_mass(h);
      Mat down =
          ((-w * inv_omega / h_mass) * Vec::Ones(static_cast<Eigen::Index>(cols.size()))) * row_total;
      BlockAccum& b = block_for(acc, ops, key, true);
      embed_add(b, cols, cols, down, false);
      BlockOperator::AveragePart part;
      part.host = h;
      part.cells = cols;
      part.mat = std::move(down);
      b.negative.push_back(std::move(part));
    }
  }
  return finalize(std::move(acc), mu, k, params, true);
}

Mat build_paraproduct(const MartingaleOps& ops, const Vec& b, const RepresentationParams& params) {
  const GridConfig& g = ops.grid();
  if (params.r < 2) throw domain_error("paraproduct: depth parameter must be >= 2");
  const DiscreteMeasure& mu = ops.measure();
  const DyadicSystem& sys = ops.system();
  const auto nu = [&](const CubeId& c) { return good_weight(sys, c, params.r, params.mode); };
  Mat pi = Mat::Zero(g.box_cells(), g.box_cells());
  const double total = mu.total();
  for (int level = 1; level <= g.N - params.r; ++level) {
    for (const CubeId& h : ops.cubes_at(level)) {
      const Vec db = ops.apply_block_weighted(b, h, params.r, nu);
      const CellList hcells = ops.cells_of(h);
      const double h_mass = ops.cube_mass(h);
      for (std::int64_t x : hcells) {
        if (db[x] == 0.0) continue;
        for (std::int64_t y : hcells) pi(x, y) += db[x] * mu.mass()[y] / h_mass;
        for (std::int64_t y : mu.massive_cells()) pi(x, y) -= db[x] * mu.mass()[y] / total;
      }
    }
  }
  return pi;
}

Mat AssembledOperator::to_matrix(const MartingaleOps& ops) const {
  const auto n = ops.grid().box_cells();
  Mat out = Mat::Zero(n, n);
  for (const BlockOperator& b : blocks)
    for (std::size_t i = 0; i < b.cells.size(); ++i)
      for (std::size_t j = 0; j < b.cells.size(); ++j)
        out(b.cells[i], b.cells[j]) += b.mat(static_cast<Eigen::Index>(i),
                                             static_cast<Eigen::Index>(j));
  return out;
}

Vec AssembledOperator::apply(const MartingaleOps& ops, const Vec& f) const {
  Vec out = Vec::Zero(ops.grid().box_cells());
  for (const BlockOperator& b : blocks) {
    Vec fsub(static_cast<Eigen::Index>(b.cells.size()));
    for (std::size_t j = 0; j < b.cells.size(); ++j)
      fsub(static_cast<Eigen::Index>(j)) = f[b.cells[j]];
    const Vec v = b.mat * fsub;
    for (std::size_t i = 0; i < b.cells.size(); ++i)
      out[b.cells[i]] += v(static_cast<Eigen::Index>(i));
  }
  return out;
}

double AssembledOperator::pair(const MartingaleOps& ops, const Vec& f, const Vec& g) const {
  const DiscreteMeasure& mu = ops.measure();
  KahanSum sum;
  for (const BlockOperator& b : blocks) {
    Vec fsub(static_cast<Eigen::Index>(b.cells.size()));
    Vec gm(static_cast<Eigen::Index>(b.cells.size()));
    for (std::size_t j = 0; j < b.cells.size(); ++j) {
      fsub(static_cast<Eigen::Index>(j)) = f[b.cells[j]];
      gm(static_cast<Eigen::Index>(j)) = g[b.cells[j]] * mu.mass()[b.cells[j]];
    }
    sum.add(gm.dot(b.mat * fsub));
  }
  return sum.value();
}

ExpansionTriple goodness_inserted_expansion(const MartingaleOps& ops, const Mat& t, const Vec& f,
                                            const Vec& g, int r, GoodnessMode mode) {
  const GridConfig& grid = ops.grid();
  const DiscreteMeasure& mu = ops.measure();
  const GoodnessFilters filters = make_goodness_filters(ops, r, mode);

  std::vector<Vec> df(static_cast<std::size_t>(grid.N) + 1), dg(df.size());
  std::vector<Vec> tdf(df.size()), tfdf(df.size());
  for (int h = 0; h <= grid.N; ++h) {
    const auto s = static_cast<std::size_t>(h);
    df[s] = ops.apply_D(h, f);
    dg[s] = ops.apply_D(h, g);
    tdf[s] = t * df[s];
    tfdf[s] = t * filters.at_host(h).cwiseProduct(df[s]).eval();
  }

  ExpansionTriple out;
  KahanSum plain, inserted, pairwise;
  for (int h = 0; h <= grid.N; ++h) {
    const auto s = static_cast<std::size_t>(h);
    const Vec eg = ops.apply_E(h + 1, g);
    const Vec ef = ops.apply_E(h, f);
    plain.add(mu.inner(tdf[s], eg));
    plain.add(mu.inner(t * ef, dg[s]));
    inserted.add(mu.inner(tfdf[s], eg));
    inserted.add(mu.inner(t * ef, filters.at_host(h).cwiseProduct(dg[s]).eval()));
  }
  for (int hf = 0; hf <= grid.N; ++hf) {
    for (int hg = 0; hg <= grid.N; ++hg) {
      const auto sf = static_cast<std::size_t>(hf);
      const auto sg = static_cast<std::size_t>(hg);
      if (hf >= hg)
        pairwise.add(mu.inner(tfdf[sf], dg[sg]));
      else
        pairwise.add(mu.inner(tdf[sf], filters.at_host(hg).cwiseProduct(dg[sg]).eval()));
    }
  }
  out.plain = plain.value();
  out.inserted = inserted.value();
  out.max_level = pairwise.value();
  return out;
}

IdentityCheck near_band_regroup(const MartingaleOps& ops, const Mat& t, const Vec& f, const Vec& g,
                                int r, GoodnessMode mode) {
  const GridConfig& grid = ops.grid();
  const DiscreteMeasure& mu = ops.measure();
  const DyadicSystem& sys = ops.system();
  const GoodnessFilters filters = make_goodness_filters(ops, r, mode);
  const auto nu = [&](const CubeId& c) { return good_weight(sys, c, r, mode); };

  IdentityCheck out;
  KahanSum lhs;
  for (int hf = 0; hf <= grid.N; ++hf) {
    const Vec fd = filters.at_host(hf).cwiseProduct(ops.apply_D(hf, f));
    const Vec tfd = t * fd;
    for (int hg = std::max(0, hf - r); hg <= hf; ++hg) lhs.add(mu.inner(tfd, ops.apply_D(hg, g)));
  }
  out.lhs = lhs.value();

  KahanSum rhs;
  for (int level = -r; level <= grid.N - r; ++level) {
    const Vec window = ops.apply_E(level + r + 1, g) - ops.apply_E(level, g);
    const std::vector<CubeId> hosts = hosts_at(ops, level);
    for (const CubeId& h : hosts) {
      const Vec tu = t * ops.apply_block_weighted(f, h, r, nu);
      for (const CubeId& j : hosts) {
        KahanSum s;
        for (std::int64_t x : ops.cells_of(j)) s.add(mu.mass()[x] * tu[x] * window[x]);
        rhs.add(s.value());
      }
    }
  }
  out.rhs = rhs.value();
  return out;
}

IdentityCheck far_field_collapse(const MartingaleOps& ops, const Mat& t, const Vec& f, const Vec& g,
                                 int r, GoodnessMode mode) {
  const GridConfig& grid = ops.grid();
  const DiscreteMeasure& mu = ops.measure();
  const DyadicSystem& sys = ops.system();
  const GoodnessFilters filters = make_goodness_filters(ops, r, mode);
  const auto nu = [&](const CubeId& c) { return good_weight(sys, c, r, mode); };

  IdentityCheck out;
  KahanSum lhs;
  for (int hf = r + 1; hf <= grid.N; ++hf) {
    const Vec tfd = t * filters.at_host(hf).cwiseProduct(ops.apply_D(hf, f)).eval();
    for (int hg = 0; hg < hf - r; ++hg) lhs.add(mu.inner(tfd, ops.apply_D(hg, g)));
  }
  out.lhs = lhs.value();

  const double g_mean = mu.inner(g, Vec::Ones(grid.box_cells())) / mu.total();
  KahanSum rhs;
  for (int level = 1; level <= grid.N - r; ++level) {
    const std::vector<CubeId>& cubes = ops.cubes_at(level);
    for (const CubeId& h : cubes) {
      const Vec tu = t * ops.apply_block_weighted(f, h, r, nu);
      const double avg_h = ops.average(g, h);
      KahanSum whole;
      for (const CubeId& j : cubes) {
        KahanSum s;
        for (std::int64_t x : ops.cells_of(j)) s.add(mu.mass()[x] * tu[x]);
        whole.add(s.value());
        if (j == h) continue;
        rhs.add(s.value() * (ops.average(g, j) - avg_h));
      }
      rhs.add(whole.value() * (avg_h - g_mean));
    }
  }
  out.rhs = rhs.value();
  return out;
}

Vec project_mean_zero(const DiscreteMeasure& mu, const Vec& f) {
  Vec out = mu.canonical(f);
  const double mean = mu.inner(out, Vec::Ones(out.size())) / mu.total();
  for (std::int64_t cell : mu.massive_cells()) out[cell] -= mean;
  return out;
}

double mu_operator_norm(const DiscreteMeasure& mu, const Mat& t) {
  const auto& cells = mu.massive_cells();
  const auto n = static_cast<Eigen::Index>(cells.size());
  Mat s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ri = std::sqrt(mu.mass()[cells[static_cast<std::size_t>(i)]]);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double cj = std::sqrt(mu.mass()[cells[static_cast<std::size_t>(j)]]);
      s(i, j) = ri * t(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(j)]) / cj;
    }
  }
  return largest_singular_value(s).value;
}

DecompositionReport verify_representation(const DiscreteMeasure& mu, const Mat& t, const Vec& f,
                                          const Vec& g, const VerifyOptions& options) {
  const GridConfig& grid = mu.grid();
  const RepresentationParams& params = options.params;
  if (params.r < 2) throw domain_error("representation: depth parameter must be >= 2");
  for (int kk = 1; kk <= grid.N + 1; ++kk)
    if (params.omega.at_scale(kk) <= 0.0)
      throw domain_error("representation: modulus vanishes at scale 2^-" + std::to_string(kk) +
                         "; the normalized components are undefined");

  const Vec fc = mu.canonical(f);
  const Vec gc = mu.canonical(g);
  const Vec ones = Vec::Ones(grid.box_cells());
  const double f_int = mu.inner(fc, ones);
  const double g_int = mu.inner(gc, ones);
  const double f_gate = 1e-12 * (mu.norm2(fc) * std::sqrt(mu.total()) + 1.0);
  const double g_gate = 1e-12 * (mu.norm2(gc) * std::sqrt(mu.total()) + 1.0);
  if (std::abs(f_int) > f_gate)
    throw input_error("representation verify: f must have mean zero (integral = " +
                      std::to_string(f_int) + "); project it first");
  if (std::abs(g_int) > g_gate)
    throw input_error("representation verify: g must have mean zero (integral = " +
                      std::to_string(g_int) + "); project it first");

  DecompositionReport report;
  report.mode = params.mode;
  report.r = params.r;
  report.tolerance = options.tolerance;
  report.exhaustive = options.ensemble.mode == EnsembleSpec::Mode::Exhaustive;
  report.checked = report.exhaustive && params.mode == GoodnessMode::Measured;
  report.ensemble_size = report.exhaustive ? exhaustive_ensemble_size(grid) : options.ensemble.count;

  report.lhs = mu.inner(t * fc, gc);
  report.t_norm = mu_operator_norm(mu, t);
  report.f_norm = mu.norm2(fc);
  report.g_norm = mu.norm2(gc);

  const Vec b_forward = t1_vector(mu, t);
  const Vec b_adjoint = t1_vector(mu, mu_adjoint(mu, t));

  const int kmax = grid.N + 1;
  std::vector<KahanSum> band_stats(static_cast<std::size_t>(2 * kmax));
  std::vector<KahanSum> average_stats(static_cast<std::size_t>(2 * kmax));
  KahanSum pi_forward, pi_adjoint, rhs;

  for_each_sigma(grid, options.ensemble, [&](const ShiftVector& sigma, double weight) {
    const DyadicSystem sys(grid, sigma);
    const MartingaleOps ops(sys, mu);
    KahanSum sigma_sum;
    for (int kk = 1; kk <= kmax; ++kk) {
      const double scale = params.omega.at_scale(kk);
      const double pairs[4] = {
          build_band_component(ops, t, kk, params).pair(ops, fc, gc),
          build_band_component(ops, t, -kk, params).pair(ops, fc, gc),
          build_average_component(ops, t, kk, params).pair(ops, fc, gc),
          build_average_component(ops, t, -kk, params).pair(ops, fc, gc),
      };
      const auto fwd = static_cast<std::size_t>(2 * (kk - 1));
      band_stats[fwd].add(weight * scale * pairs[0]);
      band_stats[fwd + 1].add(weight * scale * pairs[1]);
      average_stats[fwd].add(weight * scale * pairs[2]);
      average_stats[fwd + 1].add(weight * scale * pairs[3]);
      for (double p : pairs) sigma_sum.add(scale * p);
    }
    const Mat pi1 = build_paraproduct(ops, b_forward, params);
    const Mat pi2 = build_paraproduct(ops, b_adjoint, params);
    const double p_fwd = mu.inner(pi1 * fc, gc);
    const double p_adj = mu.inner(fc, pi2 * gc);
    pi_forward.add(weight * p_fwd);
    pi_adjoint.add(weight * p_adj);
    sigma_sum.add(p_fwd);
    sigma_sum.add(p_adj);
    rhs.add(weight * sigma_sum.value());
  });

  report.rhs = rhs.value();
  report.paraproduct_forward = pi_forward.value();
  report.paraproduct_adjoint = pi_adjoint.value();
  for (int kk = 1; kk <= kmax; ++kk) {
    const auto fwd = static_cast<std::size_t>(2 * (kk - 1));
    report.terms.push_back({kk, band_stats[fwd].value(), average_stats[fwd].value()});
    report.terms.push_back({-kk, band_stats[fwd + 1].value(), average_stats[fwd + 1].value()});
  }
  report.residual = std::abs(report.lhs - report.rhs);
  const double denom = report.t_norm * report.f_norm * report.g_norm;
  report.relative = report.residual / (denom > 0.0 ? denom : 1.0);
  report.passed = !report.checked || report.relative <= report.tolerance;
  return report;
}

ComponentKernelBounds component_kernel_bounds(const MartingaleOps& ops,
                                              const AssembledOperator& op, double order_n) {
  const DiscreteMeasure& mu = ops.measure();
  ComponentKernelBounds out;
  const int kk = std::abs(op.k);
  for (const BlockOperator& b : op.blocks) {
    const double ell = ops.grid().side_real(b.key.level);
    const double scale = std::pow(ell, order_n);
    if (b.kind == BlockOperator::Kind::Band) {
      for (std::size_t i = 0; i < b.cells.size(); ++i)
        for (std::size_t j = 0; j < b.cells.size(); ++j) {
          const double v = b.mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          if (v == 0.0) continue;
          ++out.entries;
          out.band_const =
              std::max(out.band_const, std::abs(v) / mu.mass()[b.cells[j]] * scale);
        }
      continue;
    }
    const int translate_level = b.key.level + kk;
    for (std::size_t i = 0; i < b.cells.size(); ++i)
      for (std::size_t j = 0; j < b.cells.size(); ++j) {
        const double v = b.positive(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v == 0.0) continue;
        ++out.entries;
        // normalize by the mass of the translate cube whose average the
        // entry forms: the row cube forward, the column cube on the adjoint side
        const std::int64_t cell = op.k > 0 ? b.cells[i] : b.cells[j];
        const std::int64_t ord = ops.level_cube_ordinal(translate_level, cell);
        const double m_cube = ord >= 0 ? ops.level_cube_mass(translate_level, ord) : 0.0;
        out.positive_const =
            std::max(out.positive_const, std::abs(v) / mu.mass()[b.cells[j]] * m_cube);
      }
    for (const auto& part : b.negative) {
      const double host_mass = ops.cube_mass(part.host);
      for (std::size_t i = 0; i < part.cells.size(); ++i)
        for (std::size_t j = 0; j < part.cells.size(); ++j) {
          const double v = part.mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          if (v == 0.0) continue;
          ++out.entries;
          out.negative_const =
              std::max(out.negative_const, std::abs(v) / mu.mass()[part.cells[j]] * host_mass);
        }
    }
  }
  return out;
}

std::vector<NormRow> estimate_norms(const DiscreteMeasure& mu, const Mat& t,
                                    const RepresentationParams& params) {
  const GridConfig& grid = mu.grid();
  const DyadicSystem sys = DyadicSystem::reference(grid);
  const MartingaleOps ops(sys, mu);
  std::vector<NormRow> rows;
  for (int kk = 1; kk <= grid.N + 1; ++kk) {
    NormRow row;
    row.k = kk;
    row.band_norm = mu_operator_norm(mu, build_band_component(ops, t, kk, params).to_matrix(ops));
    row.average_norm =
        mu_operator_norm(mu, build_average_component(ops, t, kk, params).to_matrix(ops));
    row.average_norm_per_sqrt_k = row.average_norm / std::sqrt(static_cast<double>(kk));
    rows.push_back(row);
  }
  return rows;
}

T1Aggregate t1_aggregate(const DiscreteMeasure& mu, const Mat& t, const Modulus& omega) {
  T1Aggregate out;
  const TestingConstants tc = testing_constants(t, mu);
  out.c_emp = std::max(tc.forward, tc.adjoint);
  const DiniResult flat = dini_sum(omega, 0.0);
  const DiniResult weighted = dini_sum(omega, 0.5);
  out.series_sum = flat.partial + weighted.partial;
  out.series_tail = flat.tail_bound + weighted.tail_bound;
  out.series_convergent = flat.convergent && weighted.convergent;
  const DiniResult integral = dini_integral(omega, 0.5);
  out.comparison_integral = integral.value();
  out.integral_convergent = integral.convergent;
  out.bound = out.series_convergent
                  ? out.c_emp * (1.0 + out.series_sum + out.series_tail)
                  : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace dyrep
