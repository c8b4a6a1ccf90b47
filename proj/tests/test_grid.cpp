#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "dyrep/grid.hpp"
#include "dyrep/linalg.hpp"
#include "dyrep/rational.hpp"

using namespace dyrep;

namespace {

Coord c1(std::int64_t x) { return Coord{x, 0, 0}; }

// Offset of a level along one axis, recomputed directly from the shift bits.
std::int64_t offset_oracle(const GridConfig& g, const ShiftVector& s, int level, int axis) {
  std::int64_t sum = 0;
  const int j0 = std::clamp(level, 1, g.N + 1);
  for (int j = j0; j <= g.N; ++j)
    sum += (std::int64_t{1} << (g.N - j)) * s.bit(j, axis);
  return sum;
}

bool good_oracle(const DyadicSystem& sys, const CubeId& c, int k) {
  const CubeId anc = sys.ancestor(c, k);
  const std::int64_t big = sys.grid().side_units(anc.level);
  const std::int64_t small = sys.grid().side_units(c.level);
  for (int a = 0; a < sys.grid().d; ++a) {
    const std::int64_t lo = c.corner[static_cast<std::size_t>(a)] -
                            anc.corner[static_cast<std::size_t>(a)];
    const std::int64_t hi = anc.corner[static_cast<std::size_t>(a)] + big -
                            (c.corner[static_cast<std::size_t>(a)] + small);
    if (4 * std::min(lo, hi) < big) return false;
  }
  return true;
}

std::vector<Coord> k1_reference_corners(const GridConfig& g, int level) {
  std::vector<Coord> out;
  const std::int64_t side = g.side_units(level);
  const std::int64_t per_axis = std::max<std::int64_t>(1, g.k1_axis_cells() / side);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(g.d), 0);
  while (true) {
    Coord c{0, 0, 0};
    for (int a = 0; a < g.d; ++a) c[static_cast<std::size_t>(a)] = idx[static_cast<std::size_t>(a)] * side;
    out.push_back(c);
    int a = g.d - 1;
    while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == per_axis) {
      idx[static_cast<std::size_t>(a)] = 0;
      --a;
    }
    if (a < 0) break;
  }
  return out;
}

}  // namespace

TEST_CASE("grid geometry basics") {
  GridConfig g{1, 3};
  g.validate();
  CHECK(g.k1_axis_cells() == 8);
  CHECK(g.box_axis_cells() == 24);
  CHECK(g.box_lo() == -8);
  CHECK(g.box_hi() == 16);
  CHECK(g.side_units(0) == 16);
  CHECK(g.side_units(1) == 8);
  CHECK(g.side_units(4) == 1);
  CHECK(g.side_units(-1) == 32);
  CHECK(g.cell_side() == 0.125);
  CHECK(g.center(0) == 0.0625);
  CHECK(g.center(-8) == -0.9375);

  for (std::int64_t i = 0; i < g.box_cells(); ++i) {
    CHECK(g.box_flat(g.box_unflat(i)) == i);
  }
  for (std::int64_t i = 0; i < g.k1_cells(); ++i) {
    const Coord c = g.k1_unflat(i);
    CHECK(g.in_k1(c));
    CHECK(g.k1_flat(c) == i);
    CHECK(g.box_unflat(g.k1_to_box(i)) == c);
  }

  GridConfig g2{2, 2};
  g2.validate();
  CHECK(g2.k1_cells() == 16);
  CHECK(g2.box_cells() == 144);
  for (std::int64_t i = 0; i < g2.box_cells(); ++i) CHECK(g2.box_flat(g2.box_unflat(i)) == i);
}

TEST_CASE("shift vector indexing round-trips lexicographically") {
  GridConfig g{2, 3};
  for (std::uint64_t i = 0; i < (1u << 6); ++i) {
    const ShiftVector s = ShiftVector::from_index(g, i);
    CHECK(s.to_index() == i);
    // bit (j-1)*d + a of the index is sigma_j[a]
    for (int j = 1; j <= g.N; ++j)
      for (int a = 0; a < g.d; ++a)
        CHECK(s.bit(j, a) == static_cast<int>((i >> ((j - 1) * g.d + a)) & 1u));
  }
  CHECK(ShiftVector::zeros(g).is_zero());
}

TEST_CASE("realized corners follow the suffix-sum offsets") {
  const GridConfig g{1, 3};
  ShiftVector s(1, 3);
  s.set_bit(1, 0, 1);
  s.set_bit(3, 0, 1);
  const DyadicSystem sys(g, s);
  // scale sums: level 3 -> 1, level 2 -> 0+1, level 1 -> 4+0+1, level <= 1 equal
  CHECK(sys.offset(3, 0) == 1);
  CHECK(sys.offset(2, 0) == 1);
  CHECK(sys.offset(1, 0) == 5);
  CHECK(sys.offset(0, 0) == 5);
  CHECK(sys.offset(-2, 0) == 5);
  CHECK(sys.offset(4, 0) == 0);

  for (int level = -2; level <= g.N + 1; ++level)
    CHECK(sys.offset(level, 0) == offset_oracle(g, s, level, 0));

  const CubeId c = sys.realize(2, c1(4));
  CHECK(c.level == 2);
  CHECK(c.corner[0] == 5);
  CHECK(sys.reference_corner(c) == c1(4));
}

TEST_CASE("lattice structure is exhaustively consistent") {
  for (const GridConfig g : {GridConfig{1, 3}, GridConfig{2, 2}}) {
    const std::uint64_t total = exhaustive_ensemble_size(g);
    for (std::uint64_t i = 0; i < total; ++i) {
      const DyadicSystem sys(g, ShiftVector::from_index(g, i));
      for (int level = 0; level <= g.N + 1; ++level) {
        // every box cell lies in exactly the cube locate() names
        std::map<Coord, std::int64_t> cells_per_cube;
        for (std::int64_t ci = 0; ci < g.box_cells(); ++ci) {
          const Coord p = g.box_unflat(ci);
          const CubeId q = sys.locate(level, p);
          CHECK(q.level == level);
          const std::int64_t side = g.side_units(level);
          for (int a = 0; a < g.d; ++a) {
            const std::int64_t lo = q.corner[static_cast<std::size_t>(a)];
            CHECK(lo <= p[static_cast<std::size_t>(a)]);
            CHECK(p[static_cast<std::size_t>(a)] < lo + side);
          }
          ++cells_per_cube[q.corner];
          // locate is stable on the whole cube
          CHECK(sys.locate(level, q.corner) == q);
          // round-trips through the reference labeling
          CHECK(sys.realize(level, sys.reference_corner(q)) == q);
          if (level >= 1) {
            const CubeId up = sys.parent(q);
            CHECK(up == sys.locate(level - 1, p));
            const auto kids = sys.children(up);
            CHECK(kids.size() == (std::size_t{1} << g.d));
            CHECK(std::count(kids.begin(), kids.end(), q) == 1);
            for (const auto& kid : kids) CHECK(sys.parent(kid) == up);
            CHECK(sys.ancestor(q, 2) == sys.parent(up));
          }
        }
        if (level <= 0) continue;
        // interior cubes are full; count a known interior one
        const Coord origin = sys.locate(level, c1(0) /* works for d=2 too: zero coord */).corner;
        const std::int64_t side = g.side_units(level);
        std::int64_t expect = 1;
        for (int a = 0; a < g.d; ++a) expect *= side;
        CHECK(cells_per_cube[origin] == expect);
      }
    }
  }
}

TEST_CASE("translate moves one lattice step and respects the box") {
  const GridConfig g{1, 3};
  const DyadicSystem sys = DyadicSystem::reference(g);
  const CubeId q = sys.locate(2, c1(0));
  const CubeId right = sys.translate(q, c1(1));
  CHECK(right.corner[0] == q.corner[0] + g.side_units(2));
  CHECK(sys.cube_in_box(right));
  CHECK_THROWS_AS(sys.translate(q, c1(100)), domain_error);
  const CubeId out = sys.translate_unchecked(q, c1(100));
  CHECK_FALSE(sys.cube_in_box(out));
}

TEST_CASE("goodness matches the quarter-distance rule") {
  const GridConfig g{1, 3};
  const DyadicSystem sys = DyadicSystem::reference(g);
  // level-3 cubes (side 2 units) inside the level-1 ancestor [0,8):
  // relative slots 0..3, good iff slot in {1,2}
  for (std::int64_t t = 0; t < 4; ++t) {
    const CubeId q = sys.locate(3, c1(2 * t));
    const bool good = sys.is_k_good(q, 2);
    CHECK(good == (t == 1 || t == 2));
    CHECK(good == good_oracle(sys, q, 2));
    // a child always touches its parent's boundary, so nothing is 1-good
    CHECK_FALSE(sys.is_k_good(q, 1));
  }

  const GridConfig g2{2, 2};
  const DyadicSystem sys2 = DyadicSystem::reference(g2);
  int good_count = 0;
  // all 16 level-2 cubes (side 2 units) inside the level-0 ancestor [-4,4)^2
  for (std::int64_t x = 0; x < 4; ++x)
    for (std::int64_t y = 0; y < 4; ++y) {
      const CubeId q = sys2.locate(2, Coord{-4 + 2 * x, -4 + 2 * y, 0});
      const bool good = sys2.is_k_good(q, 2);
      CHECK(good == good_oracle(sys2, q, 2));
      good_count += good ? 1 : 0;
    }
  CHECK(good_count == 4);  // the 2x2 interior block of the 4x4 layout
}

TEST_CASE("goodness probability equals the exhaustive count") {
  for (const GridConfig g : {GridConfig{1, 3}, GridConfig{2, 2}}) {
    const std::uint64_t total = exhaustive_ensemble_size(g);
    CHECK_THROWS_AS(goodness_probability(g, 2, Coord{0, 0, 0}, 1, GoodnessMode::Measured),
                    domain_error);
    for (int level = 1; level <= g.N + 1; ++level) {
      for (int k = 2; k <= g.N + 1; ++k) {
        for (const Coord& ref : k1_reference_corners(g, level)) {
          std::uint64_t hits = 0;
          for (std::uint64_t i = 0; i < total; ++i) {
            const DyadicSystem sys(g, ShiftVector::from_index(g, i));
            if (sys.is_k_good(sys.realize(level, ref), k)) ++hits;
          }
          const Rational p = goodness_probability(g, level, ref, k, GoodnessMode::Measured);
          CHECK(p.num * static_cast<std::int64_t>(total) ==
                p.den * static_cast<std::int64_t>(hits));
          const auto [s_lo, s_hi] = relative_scale_range(g, level, k);
          if (s_hi - s_lo + 1 == k && level - k >= 1) {
            // all k scales free: probability is exactly 2^-d
            CHECK(p.num * (std::int64_t{1} << g.d) == p.den);
          }
        }
      }
    }
  }
}

TEST_CASE("position and goodness are exactly independent") {
  const GridConfig g{1, 3};
  const std::uint64_t total = exhaustive_ensemble_size(g);
  for (int level = 2; level <= 3; ++level) {
    for (int k = 1; k <= 2; ++k) {
      for (const Coord& ref : k1_reference_corners(g, level)) {
        std::map<std::int64_t, std::uint64_t> pos_count;
        std::map<std::int64_t, std::uint64_t> joint_count;
        std::uint64_t good_count = 0;
        for (std::uint64_t i = 0; i < total; ++i) {
          const DyadicSystem sys(g, ShiftVector::from_index(g, i));
          const CubeId q = sys.realize(level, ref);
          ++pos_count[q.corner[0]];
          if (sys.is_k_good(q, k)) {
            ++good_count;
            ++joint_count[q.corner[0]];
          }
        }
        for (const auto& [corner, cnt] : pos_count) {
          // P(pos, good) * total == P(pos) * P(good) * total^2 / total
          CHECK(joint_count[corner] * total == cnt * good_count);
        }
      }
    }
  }
}

TEST_CASE("ensemble enumeration and caps") {
  const GridConfig g{1, 3};
  CHECK(exhaustive_ensemble_size(g) == 8);
  std::vector<std::uint64_t> seen;
  double weight_sum = 0.0;
  for_each_sigma(g, EnsembleSpec{}, [&](const ShiftVector& s, double w) {
    seen.push_back(s.to_index());
    weight_sum += w;
  });
  CHECK(seen.size() == 8);
  for (std::uint64_t i = 0; i < 8; ++i) CHECK(seen[i] == i);
  CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-15));

  EnsembleSpec tight;
  tight.cap = 4;
  CHECK_THROWS_AS(for_each_sigma(g, tight, [](const ShiftVector&, double) {}), input_error);

  const GridConfig big{3, 21};  // 63 shift bits
  CHECK_THROWS_AS(for_each_sigma(big, EnsembleSpec{}, [](const ShiftVector&, double) {}),
                  input_error);

  EnsembleSpec mc;
  mc.mode = EnsembleSpec::Mode::MonteCarlo;
  mc.count = 16;
  mc.seed = 7;
  std::vector<std::uint64_t> run1, run2;
  for_each_sigma(g, mc, [&](const ShiftVector& s, double) { run1.push_back(s.to_index()); });
  for_each_sigma(g, mc, [&](const ShiftVector& s, double) { run2.push_back(s.to_index()); });
  CHECK(run1 == run2);
  CHECK(run1.size() == 16);

  EnsembleSpec empty = mc;
  empty.count = 0;
  CHECK_THROWS_AS(for_each_sigma(g, empty, [](const ShiftVector&, double) {}), input_error);
}

TEST_CASE("rational arithmetic stays reduced") {
  const Rational half(1, 2);
  const Rational two_thirds(2, 3);
  const Rational prod = half * two_thirds;
  CHECK(prod.num == 1);
  CHECK(prod.den == 3);
  CHECK(prod.to_double() == doctest::Approx(1.0 / 3.0).epsilon(1e-16));
  const Rational inv = prod.inverse();
  CHECK(inv.num == 3);
  CHECK(inv.den == 1);
  CHECK(Rational(4, 8).num == 1);
  CHECK(Rational(4, 8).den == 2);
  CHECK(Rational(0, 5).is_zero());
}

TEST_CASE("power iteration finds the largest singular value") {
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = 3.0;
  a(1, 1) = 1.0;
  const OpNormResult r = largest_singular_value(a);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(3.0).epsilon(1e-7));

  Mat rot = Mat::Zero(2, 2);
  rot(0, 1) = -1.0;
  rot(1, 0) = 1.0;
  CHECK(largest_singular_value(rot).value == doctest::Approx(1.0).epsilon(1e-7));

  Mat outer = Mat::Zero(3, 3);
  outer(0, 1) = 2.0;
  CHECK(largest_singular_value(outer).value == doctest::Approx(2.0).epsilon(1e-7));

  CHECK(largest_singular_value(Mat::Zero(3, 3)).value == doctest::Approx(0.0));
}
