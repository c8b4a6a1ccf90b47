#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dyrep/grid.hpp"
#include "dyrep/haar.hpp"
#include "dyrep/measure.hpp"

using namespace dyrep;

namespace {

DiscreteMeasure masses_1d(const GridConfig& g, const std::vector<double>& k1_masses,
                          double n = 1.0, double c = 1e6) {
  Vec m = Vec::Zero(g.box_cells());
  for (std::size_t i = 0; i < k1_masses.size(); ++i)
    m[g.k1_to_box(static_cast<std::int64_t>(i))] = k1_masses[i];
  return DiscreteMeasure(g, m, n, c);
}

Vec values_1d(const GridConfig& g, const std::vector<double>& k1_values) {
  Vec f = Vec::Zero(g.box_cells());
  for (std::size_t i = 0; i < k1_values.size(); ++i)
    f[g.k1_to_box(static_cast<std::int64_t>(i))] = k1_values[i];
  return f;
}

DiscreteMeasure random_measure(const GridConfig& g, std::mt19937_64& rng) {
  Vec m = Vec::Zero(g.box_cells());
  bool any = false;
  for (std::int64_t i = 0; i < g.k1_cells(); ++i) {
    if (uniform01(rng) < 0.3) continue;  // zero-mass cells are part of the contract
    m[g.k1_to_box(i)] = std::exp((2.0 * uniform01(rng) - 1.0) * std::log(1e3));
    any = true;
  }
  if (!any) m[g.k1_to_box(0)] = 1.0;
  return DiscreteMeasure(g, m, 1.0, 1e9);
}

Vec random_values(const GridConfig& g, std::mt19937_64& rng) {
  Vec f = Vec::Zero(g.box_cells());
  for (std::int64_t i = 0; i < g.box_cells(); ++i) f[i] = 2.0 * uniform01(rng) - 1.0;
  return f;
}

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

}  // namespace

TEST_CASE("measure constructors validate their inputs") {
  const GridConfig g{1, 2};
  const DiscreteMeasure u = DiscreteMeasure::uniform(g, 2.0, 1.0, 4.0);
  CHECK(u.total() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(u.massive_cells().size() == 4);
  for (const auto c : u.massive_cells()) CHECK(u.mass()[c] == 0.5);

  Vec bad = Vec::Zero(g.box_cells());
  bad[0] = 1.0;  // box cell 0 is outside K1
  CHECK_THROWS_AS(DiscreteMeasure(g, bad, 1.0, 1.0), domain_error);

  Vec neg = Vec::Zero(g.box_cells());
  neg[g.k1_to_box(0)] = -1.0;
  CHECK_THROWS_AS(DiscreteMeasure(g, neg, 1.0, 1.0), domain_error);

  CHECK_THROWS_AS(DiscreteMeasure(g, Vec::Zero(g.box_cells()), 1.0, 1.0), domain_error);

  CHECK_THROWS_AS(
      DiscreteMeasure::point_mass_mixture(g, {{Coord{-1, 0, 0}, 1.0}}, 0.0, 1.0, 1.0),
      domain_error);
  const DiscreteMeasure pm =
      DiscreteMeasure::point_mass_mixture(g, {{Coord{1, 0, 0}, 5.0}}, 0.0, 1.0, 1e3);
  CHECK(pm.total() == 5.0);
  CHECK(pm.massive_cells().size() == 1);
}

TEST_CASE("measure csv loading reports file and line on errors") {
  const GridConfig g{1, 2};
  const auto ok = write_temp("dyrep_m_ok.csv", "cell_index_0,mass\n0,1.0\n2,0.5\n2,0.25\n");
  const DiscreteMeasure m = DiscreteMeasure::from_csv(g, ok, 1.0, 1e3);
  CHECK(m.total() == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(m.mass()[g.k1_to_box(2)] == doctest::Approx(0.75).epsilon(1e-15));  // duplicates add
  CHECK(m.mass()[g.k1_to_box(1)] == 0.0);

  const auto short_row = write_temp("dyrep_m_short.csv", "0,1.0\n1\n");
  try {
    DiscreteMeasure::from_csv(g, short_row, 1.0, 1e3);
    FAIL("expected input_error");
  } catch (const input_error& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  const auto bad_num = write_temp("dyrep_m_nan.csv", "0,one\n");
  CHECK_THROWS_AS(DiscreteMeasure::from_csv(g, bad_num, 1.0, 1e3), input_error);
  const auto out_of_range = write_temp("dyrep_m_oor.csv", "9,1.0\n");
  CHECK_THROWS_AS(DiscreteMeasure::from_csv(g, out_of_range, 1.0, 1e3), input_error);
  const auto empty = write_temp("dyrep_m_empty.csv", "\n");
  CHECK_THROWS_AS(DiscreteMeasure::from_csv(g, empty, 1.0, 1e3), input_error);
  CHECK_THROWS_AS(DiscreteMeasure::from_csv(g, "/nonexistent/m.csv", 1.0, 1e3), input_error);
}

TEST_CASE("averages and martingale differences on a two-cell measure") {
  const GridConfig g{1, 1};
  const DiscreteMeasure mu = masses_1d(g, {1.0, 3.0});
  const DyadicSystem sys = DyadicSystem::reference(g);
  const MartingaleOps ops(sys, mu);

  const Vec f = values_1d(g, {2.0, 6.0});
  const CubeId k1_cube = sys.locate(1, Coord{0, 0, 0});
  CHECK(ops.cube_mass(k1_cube) == 4.0);
  CHECK(ops.average(f, k1_cube) == 5.0);

  // level <= 0 collapses to the global average
  const Vec e0 = ops.apply_E(0, f);
  const Vec em = ops.apply_E(-3, f);
  for (const auto c : mu.massive_cells()) {
    CHECK(e0[c] == 5.0);
    CHECK(em[c] == 5.0);
  }
  // level >= N+1 is the identity on massive cells
  const Vec id = ops.apply_E(g.N + 1, f);
  for (const auto c : mu.massive_cells()) CHECK(id[c] == f[c]);

  const DiscreteMeasure flat = masses_1d(g, {1.0, 1.0});
  const MartingaleOps fops(sys, flat);
  const Vec d1 = fops.apply_D(1, values_1d(g, {0.0, 2.0}));
  CHECK(d1[g.k1_to_box(0)] == -1.0);
  CHECK(d1[g.k1_to_box(1)] == 1.0);
}

TEST_CASE("expectation and difference algebra on random measures") {
  std::mt19937_64 rng(20240817);
  for (const GridConfig g : {GridConfig{1, 3}, GridConfig{2, 2}}) {
    for (int rep = 0; rep < 12; ++rep) {
      const DiscreteMeasure mu = random_measure(g, rng);
      const std::uint64_t bits = std::uint64_t{1} << (g.d * g.N);
      const DyadicSystem sys(g, ShiftVector::from_index(g, rng() % bits));
      const MartingaleOps ops(sys, mu);
      const Vec f = random_values(g, rng);
      const Vec h = random_values(g, rng);

      // levels partition the massive cells
      for (int level = 0; level <= g.N + 1; ++level) {
        std::set<std::int64_t> seen;
        for (const auto& q : ops.cubes_at(level)) {
          CHECK(ops.cube_mass(q) > 0.0);
          for (const auto c : ops.cells_of(q)) CHECK(seen.insert(c).second);
        }
        CHECK(seen.size() == mu.massive_cells().size());
      }

      for (int level = 0; level <= g.N + 1; ++level) {
        const Vec ef = ops.apply_E(level, f);
        const Vec eef = ops.apply_E(level, ef);
        CHECK((eef - ef).cwiseAbs().maxCoeff() <= 1e-12);
        for (int coarser = 0; coarser <= level; ++coarser) {
          const Vec a = ops.apply_E(coarser, ef);
          const Vec b = ops.apply_E(coarser, f);
          CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
        }
        // matrix forms agree with the appliers
        const Vec mef = ops.E_matrix(level) * mu.canonical(f);
        CHECK((mef - ef).cwiseAbs().maxCoeff() <= 1e-12);
        if (level <= g.N) {
          const Vec mdf = ops.D_matrix(level) * mu.canonical(f);
          CHECK((mdf - ops.apply_D(level, f)).cwiseAbs().maxCoeff() <= 1e-12);
        }
      }

      // f = E_0 f + sum_l D_l f on massive cells
      Vec sum = ops.apply_E(0, f);
      for (int level = 0; level <= g.N; ++level) sum += ops.apply_D(level, f);
      const Vec cf = mu.canonical(f);
      CHECK((sum - cf).cwiseAbs().maxCoeff() <= 1e-12);

      // differences across levels are mu-orthogonal, and orthogonal to coarser E
      for (int l1 = 0; l1 <= g.N; ++l1) {
        for (int l2 = l1 + 1; l2 <= g.N; ++l2)
          CHECK(std::abs(mu.inner(ops.apply_D(l1, f), ops.apply_D(l2, h))) <= 1e-12);
        CHECK(std::abs(mu.inner(ops.apply_E(l1, f), ops.apply_D(l1, h))) <= 1e-12);
      }

      for (int k = 0; k <= 2; ++k)
        CHECK(ops.bessel_sum(f, k) <= mu.norm2(f) * mu.norm2(f) + 1e-12);
    }
  }
}

TEST_CASE("block projections match their definitions") {
  std::mt19937_64 rng(99);
  const GridConfig g{1, 3};
  for (int rep = 0; rep < 8; ++rep) {
    const DiscreteMeasure mu = random_measure(g, rng);
    const DyadicSystem sys(g, ShiftVector::from_index(g, rng() % 8));
    const MartingaleOps ops(sys, mu);
    const Vec f = random_values(g, rng);
    const int r = 2;
    for (int level = 0; level + r <= g.N; ++level) {
      for (const auto& H : ops.cubes_at(level)) {
        // D_r block = 1_H (E_{L+r+1} - E_{L+r})
        Vec direct = ops.apply_E(level + r + 1, f) - ops.apply_E(level + r, f);
        const auto cells = ops.cells_of(H);
        Vec expect = Vec::Zero(g.box_cells());
        for (const auto c : cells) expect[c] = direct[c];
        const Vec got = ops.apply_block(f, H, r, BlockVariant::D_r);
        CHECK((got - expect).cwiseAbs().maxCoeff() <= 1e-12);

        // ... and also the sum of apply_DI over depth-r descendants
        Vec by_cubes = Vec::Zero(g.box_cells());
        for (const auto& I : ops.descendants(H, r)) by_cubes += ops.apply_DI(I, f);
        CHECK((got - by_cubes).cwiseAbs().maxCoeff() <= 1e-12);

        // P_r block = 1_H (E_{L+r} - E_L)
        Vec pdirect = ops.apply_E(level + r, f) - ops.apply_E(level, f);
        Vec pexpect = Vec::Zero(g.box_cells());
        for (const auto c : cells) pexpect[c] = pdirect[c];
        const Vec pgot = ops.apply_block(f, H, r, BlockVariant::P_r);
        CHECK((pgot - pexpect).cwiseAbs().maxCoeff() <= 1e-12);

        // good variant keeps exactly the r-good descendants
        Vec good = Vec::Zero(g.box_cells());
        for (const auto& I : ops.descendants(H, r))
          if (sys.is_k_good(I, r)) good += ops.apply_DI(I, f);
        const Vec ggot = ops.apply_block(f, H, r, BlockVariant::D_r_good);
        CHECK((ggot - good).cwiseAbs().maxCoeff() <= 1e-12);

        // weighted block with random weights, against the matrix form
        std::vector<std::pair<CubeId, double>> weights;
        for (const auto& I : ops.descendants(H, r))
          weights.emplace_back(I, std::floor(3.0 * uniform01(rng)));
        const auto weight_fn = [&](const CubeId& I) {
          for (const auto& [cube, w] : weights)
            if (cube == I) return w;
          return 0.0;
        };
        const Vec wgot = ops.apply_block_weighted(f, H, r, weight_fn);
        Vec wexpect = Vec::Zero(g.box_cells());
        for (const auto& [cube, w] : weights) wexpect += w * ops.apply_DI(cube, f);
        CHECK((wgot - wexpect).cwiseAbs().maxCoeff() <= 1e-12);

        const Mat wsub = ops.weighted_Dr_sub(H, r, weight_fn, cells, cells);
        Vec fcells(static_cast<Eigen::Index>(cells.size()));
        for (std::size_t i = 0; i < cells.size(); ++i)
          fcells[static_cast<Eigen::Index>(i)] = f[cells[i]];
        const Vec wrows = wsub * fcells;
        for (std::size_t i = 0; i < cells.size(); ++i)
          CHECK(wrows[static_cast<Eigen::Index>(i)] ==
                doctest::Approx(wgot[cells[i]]).epsilon(1e-12));

        // band_sub agrees with the E-difference restricted to H
        const Mat band = ops.band_sub(H, 0, r, cells, cells);
        const Vec brows = band * fcells;
        for (std::size_t i = 0; i < cells.size(); ++i)
          CHECK(brows[static_cast<Eigen::Index>(i)] ==
                doctest::Approx(pgot[cells[i]]).epsilon(1e-12));
      }
    }
    CHECK_THROWS_AS(ops.apply_block(f, ops.cubes_at(0).front(), 1, BlockVariant::D_r_good),
                    domain_error);
  }
}

TEST_CASE("haar basis closed form for masses (1,3)") {
  const GridConfig g{1, 1};
  const DiscreteMeasure mu = masses_1d(g, {1.0, 3.0});
  const DyadicSystem sys = DyadicSystem::reference(g);
  const MartingaleOps ops(sys, mu);
  const CubeId k1_cube = sys.locate(1, Coord{0, 0, 0});
  const HaarBasis basis(ops, k1_cube);
  REQUIRE(basis.entries().size() == 1);
  const HaarEntry& e = basis.entries()[0];
  CHECK(e.child_value[0] == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-15));
  CHECK(e.child_value[1] == doctest::Approx(-1.0 / (2.0 * std::sqrt(3.0))).epsilon(1e-15));
  CHECK(HaarBasis::sup_norm(e) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-15));
  CHECK(basis.l1_norm(ops, e) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
  CHECK(HaarBasis::sup_norm(e) * basis.l1_norm(ops, e) == doctest::Approx(1.5).epsilon(1e-14));

  const Vec phi = basis.expand(ops, e);
  CHECK(mu.norm2(phi) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(mu.inner(phi, Vec::Ones(g.box_cells()))) <= 1e-14);
}

TEST_CASE("haar battery over random measures") {
  std::mt19937_64 rng(4242);
  for (const GridConfig g : {GridConfig{1, 3}, GridConfig{2, 2}}) {
    for (int rep = 0; rep < 25; ++rep) {
      const DiscreteMeasure mu = random_measure(g, rng);
      const std::uint64_t bits = std::uint64_t{1} << (g.d * g.N);
      const DyadicSystem sys(g, ShiftVector::from_index(g, rng() % bits));
      const MartingaleOps ops(sys, mu);
      const Vec f = random_values(g, rng);
      for (int level = 0; level <= g.N; ++level) {
        for (const auto& q : ops.cubes_at(level)) {
          const HaarBasis basis(ops, q);
          int massive_children = 0;
          for (const auto& kid : sys.children(q))
            if (ops.cube_mass(kid) > 0.0) ++massive_children;
          CHECK(static_cast<int>(basis.entries().size()) ==
                std::max(0, massive_children - 1));

          std::vector<Vec> expanded;
          for (const auto& e : basis.entries()) expanded.push_back(basis.expand(ops, e));
          for (std::size_t i = 0; i < expanded.size(); ++i) {
            CHECK(mu.norm2(expanded[i]) == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(std::abs(mu.inner(expanded[i], Vec::Ones(g.box_cells()))) <= 1e-10);
            for (std::size_t j = i + 1; j < expanded.size(); ++j)
              CHECK(std::abs(mu.inner(expanded[i], expanded[j])) <= 1e-10);
            // supported inside the cube
            const auto cells = ops.cells_of(q);
            double outside = 0.0;
            for (const auto c : mu.massive_cells())
              if (std::find(cells.begin(), cells.end(), c) == cells.end())
                outside += std::abs(expanded[i][c]);
            CHECK(outside == 0.0);
            const auto& e = basis.entries()[i];
            CHECK(HaarBasis::sup_norm(e) * basis.l1_norm(ops, e) <= 2.0 + 1e-12);
            // coefficient matches the mu-inner product with the expansion
            CHECK(basis.coefficient(ops, e, f) ==
                  doctest::Approx(mu.inner(expanded[i], f)).epsilon(1e-10));
          }
          const Vec rec = basis.reconstruct_DI(ops, f);
          const Vec di = ops.apply_DI(q, f);
          CHECK((rec - di).cwiseAbs().maxCoeff() <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("growth audit on the uniform measure is exact") {
  const GridConfig g{1, 2};
  const DiscreteMeasure mu = DiscreteMeasure::uniform(g, 1.0, 1.0, 2.0);
  const GrowthAudit audit = mu.growth_audit();
  CHECK(audit.max_ratio == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(audit.declared == 2.0);
  CHECK(audit.within_declared);
  CHECK(audit.family_slack == 4.0);

  const DiscreteMeasure tight = DiscreteMeasure::uniform(g, 1.0, 1.0, 1.5);
  CHECK_FALSE(tight.growth_audit().within_declared);
}

TEST_CASE("doubling ratio of the uniform measure") {
  const GridConfig g{1, 3};
  const DiscreteMeasure mu = DiscreteMeasure::uniform(g, 1.0, 1.0, 2.0);
  const DyadicSystem sys = DyadicSystem::reference(g);
  CHECK(mu.doubling_ratio(sys) == doctest::Approx(2.0).epsilon(1e-14));

  // a lopsided measure has a big parent/child ratio
  const DiscreteMeasure lop = masses_1d(g, {1e6, 1, 1, 1, 1, 1, 1, 1});
  CHECK(mu.doubling_ratio(sys) < lop.doubling_ratio(sys));
}
