#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dyrep/grid.hpp"
#include "dyrep/linalg.hpp"

namespace dyrep {

struct GrowthAudit {
  double max_ratio = 0.0;     // max mu(B(x,r)) / r^n over the sampled family
  double declared = 0.0;      // declared growth constant
  bool within_declared = true;
  double witness_radius = 0.0;
  std::int64_t witness_cell = -1;
  double family_slack = 1.0;  // sup over all real balls <= slack * max_ratio
};

// Nonnegative cell masses on the finest lattice, supported inside K1.
// Functions are per-cell values over the whole bounding box; values on
// massless cells are irrelevant to every pairing and are normalized to zero.
class DiscreteMeasure {
 public:
  DiscreteMeasure(const GridConfig& grid, Vec box_mass, double order_n, double c_growth);

  static DiscreteMeasure uniform(const GridConfig& grid, double total_mass,
                                 double order_n, double c_growth);
  // Density |x|^exponent sampled at cell centers (distance from the origin).
  static DiscreteMeasure power_law(const GridConfig& grid, double exponent,
                                   double order_n, double c_growth);
  // Point masses at given K1 cells on top of a uniform background (may be 0).
  static DiscreteMeasure point_mass_mixture(const GridConfig& grid,
                                            const std::vector<std::pair<Coord, double>>& atoms,
                                            double background_total,
                                            double order_n, double c_growth);
  // CSV columns: cell_index_0..cell_index_{d-1}, mass.  Missing cells are 0.
  static DiscreteMeasure from_csv(const GridConfig& grid, const std::string& path,
                                  double order_n, double c_growth);

  const GridConfig& grid() const { return grid_; }
  const Vec& mass() const { return mass_; }
  double order_n() const { return n_; }
  double growth_constant() const { return c_growth_; }
  double total() const { return total_; }

  bool massive(std::int64_t box_cell) const { return mass_[box_cell] > 0.0; }
  const std::vector<std::int64_t>& massive_cells() const { return massive_; }

  double inner(const Vec& f, const Vec& g) const;
  double norm2(const Vec& f) const;
  double norm1(const Vec& f) const;
  Vec canonical(Vec f) const;  // zero out massless cells

  GrowthAudit growth_audit() const;
  // Max mass ratio parent/child over massive nested pairs; the doubling audit.
  double doubling_ratio(const DyadicSystem& sys) const;

 private:
  GridConfig grid_;
  Vec mass_;
  double n_ = 1.0;
  double c_growth_ = 1.0;
  double total_ = 0.0;
  std::vector<std::int64_t> massive_;
};

enum class BlockVariant { D_r, P_r, D_r_good, P_r_good };

// Conditional expectations, martingale differences and block projections for
// one realized system and one measure.  Level conventions: E at level l
// averages over the level-l cubes (l <= 0 collapses to the global average,
// l >= N+1 is the identity on massive cells); D at level l is E_{l+1} - E_l.
class MartingaleOps {
 public:
  MartingaleOps(const DyadicSystem& sys, const DiscreteMeasure& mu);

  const DyadicSystem& system() const { return *sys_; }
  const DiscreteMeasure& measure() const { return *mu_; }
  const GridConfig& grid() const { return mu_->grid(); }

  double cube_mass(const CubeId& c) const;
  double average(const Vec& f, const CubeId& c) const;  // 0 when massless
  // Massive cells covered by the cube, ascending flat order.  Levels < 0 are
  // treated as the whole space (such virtual ancestors contain every massive
  // cell).
  std::vector<std::int64_t> cells_of(const CubeId& c) const;
  // Massive cubes at a realized level (0..N+1), deterministic order.
  const std::vector<CubeId>& cubes_at(int level) const;
  // Massive depth-`depth` descendants of H, ascending corner order.
  std::vector<CubeId> descendants(const CubeId& H, int depth) const;

  Vec apply_E(int level, const Vec& f) const;
  Vec apply_D(int level, const Vec& f) const;  // nonzero for 0 <= level <= N
  Vec apply_EI(const CubeId& c, const Vec& f) const;
  Vec apply_DI(const CubeId& c, const Vec& f) const;

  // Block projections hanging below H: D_r sums D_I over the depth-r
  // descendants I of H; P_r sums the D-blocks of depths 0..r-1.  The good
  // variants keep only descendants that are j-good in this system (j = depth),
  // so they require depth >= 2.
  Vec apply_block(const Vec& f, const CubeId& H, int r, BlockVariant variant) const;
  // D-block with caller-supplied per-descendant weights (goodness
  // normalization lives in the caller).
  Vec apply_block_weighted(const Vec& f, const CubeId& H, int r,
                           const std::function<double(const CubeId&)>& weight) const;

  // Dense sub-matrices over explicit massive-cell lists; entry (i,j) is the
  // kernel of the operator at (rows[i], cols[j]).
  Mat E_sub(int level, const std::vector<std::int64_t>& rows,
            const std::vector<std::int64_t>& cols) const;
  Mat D_sub(int level, const std::vector<std::int64_t>& rows,
            const std::vector<std::int64_t>& cols) const;
  // Sandwich 1_H (E_{L+hi} - E_{L+lo}) restricted to given cells (rows must
  // already lie inside H); used for P/D-type factors of block operators.
  Mat band_sub(const CubeId& H, int lo, int hi, const std::vector<std::int64_t>& rows,
               const std::vector<std::int64_t>& cols) const;
  Mat weighted_Dr_sub(const CubeId& H, int r,
                      const std::function<double(const CubeId&)>& weight,
                      const std::vector<std::int64_t>& rows,
                      const std::vector<std::int64_t>& cols) const;

  Mat E_matrix(int level) const;  // full box-cell matrix (small grids/tests)
  Mat D_matrix(int level) const;

  // sum_K ||1_K (E_{L+k+1} - E_{L+k}) f||_2^2 over realized cubes K; always
  // bounded by ||f||_2^2.
  double bessel_sum(const Vec& f, int k) const;

  std::int64_t level_cube_ordinal(int level, std::int64_t box_cell) const;
  double level_cube_mass(int level, std::int64_t ordinal) const;

 private:
  struct LevelPart {
    std::vector<std::int32_t> cube_of_cell;  // per box cell; -1 when massless
    std::vector<CubeId> cubes;               // massive cubes only
    std::vector<double> cube_mass;
    std::vector<std::vector<std::int64_t>> cube_cells;
  };
  const LevelPart& part(int level) const;  // level clamped to [0, N+1]

  const DyadicSystem* sys_;
  const DiscreteMeasure* mu_;
  std::vector<LevelPart> parts_;  // index 0..N+1
};

}  // namespace dyrep
