#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dyrep/measure.hpp"

namespace dyrep {

// Modulus of continuity on [0,1].  Forms: scale*t^delta, scale*(1+log(1/t))^-beta,
// or a point table with linear interpolation (implied anchor at (0,0)).
// The log-power form is accepted for the Dini machinery even though it is not
// subadditive near t = 1; audit() reports that honestly.
class Modulus {
 public:
  enum class Kind { Power, LogPower, Table };

  static Modulus power(double delta, double scale = 1.0);
  static Modulus log_power(double beta, double scale = 1.0);
  static Modulus table(std::vector<std::pair<double, double>> points);
  static Modulus zero();

  Kind kind() const { return kind_; }
  double exponent() const { return exponent_; }
  double scale() const { return scale_; }
  const std::vector<std::pair<double, double>>& points() const { return points_; }

  double at(double t) const;
  double at_scale(int k) const;  // omega(2^-k)

  // Checks omega(0)=0, monotonicity, and subadditivity on a dyadic sample;
  // returns true when all hold, and reports the worst subadditivity ratio
  // omega(a+b)/(omega(a)+omega(b)).
  bool audit(int samples, double* worst_ratio = nullptr) const;

 private:
  Kind kind_ = Kind::Power;
  double exponent_ = 1.0;
  double scale_ = 1.0;
  std::vector<std::pair<double, double>> points_;
};

struct DiniResult {
  double partial = 0.0;     // finite part of the sum / quadrature value
  double tail_bound = 0.0;  // rigorous bound on the remainder (0 when divergent)
  bool convergent = true;
  int terms = 0;
  double value() const { return partial + tail_bound; }
};

// sum_{k>=1} omega(2^-k) (1+k)^alpha with a rigorous tail bound.
DiniResult dini_sum(const Modulus& omega, double alpha);
// int_0^1 omega(t) (1+log(1/t))^alpha dt/t; exact for the log-power form.
DiniResult dini_integral(const Modulus& omega, double alpha);

// CZ kernel data: evaluator at real points, order n, modulus, declared
// constants, and the diagonal convention for the discretization.
struct KernelSpec {
  using Point = std::array<double, 3>;

  double n = 1.0;
  Modulus omega = Modulus::power(1.0);
  double c_size = 1.0;
  double c_smooth = 1.0;
  enum class Diagonal { Zero, Table } diagonal = Diagonal::Zero;
  Vec diagonal_table;  // per box cell, used only with Diagonal::Table
  std::function<double(const Point&, const Point&, int d)> eval;
  std::string name = "custom";

  static KernelSpec hilbert();                      // d=1: 1/(x-y), n=1, omega=t
  static KernelSpec riesz(double n);                // (x1-y1)/|x-y|^{n+1}, omega=t
  // CSV columns: x cell indices, y cell indices, value (2d+1 fields).
  static KernelSpec from_samples(const GridConfig& grid, const std::string& path, double n,
                                 Modulus omega);
};

// Midpoint discretization: entry (x,y) = K(center_x, center_y) * mass(y) for
// massive x != y; the diagonal follows the kernel's convention.  Throws
// input_error on a non-finite kernel value.
Mat assemble_operator(const KernelSpec& kernel, const DiscreteMeasure& mu);

// Dense abstract operator with entries uniform in [-1,1), deterministic in the
// seed (row-major over massive cells).
Mat random_operator(const DiscreteMeasure& mu, std::uint64_t seed);
// Dense matrix over unit-cube cells (one CSV row per cell, k1_cells columns).
Mat operator_from_csv(const GridConfig& grid, const DiscreteMeasure& mu, const std::string& path);

// Adjoint w.r.t. the mu-inner product: T*[x,y] = m(y) T[y,x] / m(x).
Mat mu_adjoint(const DiscreteMeasure& mu, const Mat& t);

Vec ones_canonical(const DiscreteMeasure& mu);
Vec t1_vector(const DiscreteMeasure& mu, const Mat& t);  // T applied to 1

struct TestingConstants {
  double forward = 0.0;
  double adjoint = 0.0;
  CubeId forward_witness{};
  CubeId adjoint_witness{};
  bool forward_whole_space = false;
  bool adjoint_whole_space = false;
};
// sup over massive reference-lattice cubes (all levels) and the whole space of
// ||T 1_Q||_2 / mu(Q)^{1/2}, and the same for the mu-adjoint.
TestingConstants testing_constants(const Mat& t, const DiscreteMeasure& mu);

struct HaarImageBound {
  double max_norm = 0.0;
  CubeId witness{};
  int witness_node = -1;
};
// max over cubes I and Haar entries of ||T phi||_2; compare against
// 2^{d/2} * testing constant.
HaarImageBound haar_image_bound(const Mat& t, const MartingaleOps& ops);

// BMO^p_lambda norm: sup over massive lattice cubes (and the whole space) of
// inf_a ((1/mu(lambda Q)) int_Q |b-a|^p dmu)^{1/p}.  lambda Q is the
// lattice-clipped concentric dilate (cells whose centers lie in the closed
// dilate).  p = 2 uses the exact minimizer (the mu-average); other p >= 1 use
// golden-section search to 1e-10.
double bmo_norm(const Vec& b, const DiscreteMeasure& mu, double lambda, double p = 2.0);

struct RegularityAudit {
  double c_size = 0.0;
  double c_smooth = 0.0;
  std::int64_t pairs = 0;
  std::int64_t triples = 0;
};
// Measured size and smoothness constants over unit-cube cell centers; x' runs
// over axis-aligned dyadic offsets from x subject to |x-x'| <= 1/2 |x-y|.
RegularityAudit regularity_audit(const KernelSpec& kernel, const GridConfig& grid);

}  // namespace dyrep
