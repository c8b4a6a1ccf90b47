#pragma once

#include <cstdint>
#include <vector>

#include "dyrep/measure.hpp"
#include "dyrep/operator.hpp"

namespace dyrep {

// Goodness weight of a cube at separation k.  Measured mode divides the
// indicator by the exact lattice probability so the weight averages to one
// over the shift ensemble; cubes whose probability is zero (only possible
// when the k-th ancestor covers the whole space) carry constant weight one.
// Idealized mode uses the homogeneous value 2^d instead of 1/p.
double good_weight(const DyadicSystem& sys, const CubeId& c, int k, GoodnessMode mode);

// Per-level goodness filters: phi[host] = sum over cubes I at that level of
// good_weight(I, r) 1_I.  Host levels run 0..N; the difference operator at
// level host+1 acts inside those hosts.
struct GoodnessFilters {
  std::vector<Vec> phi;
  const Vec& at_host(int host_level) const { return phi.at(static_cast<std::size_t>(host_level)); }
  const Vec& at_diff(int diff_level) const { return at_host(diff_level - 1); }
};
GoodnessFilters make_goodness_filters(const MartingaleOps& ops, int r, GoodnessMode mode);

struct RepresentationParams {
  int r = 2;  // separation depth of the difference blocks (>= 2)
  Modulus omega = Modulus::power(1.0);
  GoodnessMode mode = GoodnessMode::Measured;
};

// One square sub-operator supported on the cells of its key cube.
struct BlockOperator {
  enum class Kind { Band, Average };

  // Per-host negative average part (the subtracted mean over the host cube).
  struct AveragePart {
    CubeId host{};
    std::vector<std::int64_t> cells;  // cells of the host, rows and cols of mat
    Mat mat;
  };

  Kind kind = Kind::Band;
  CubeId key{};  // the common k-th ancestor; level <= 0 keys span the whole space
  int k = 0;     // separation parameter (signed)
  int r = 0;
  std::vector<std::int64_t> cells;  // cells of the key cube; rows and cols of mat
  Mat mat;                          // the complete block
  Mat positive;                     // Average only: the translate-average part
  std::vector<AveragePart> negative;  // Average only: per-host subtracted parts
};

// A finite-band component of the operator decomposition: the signed parameter
// k selects how far mass moves across the lattice, negative values act on the
// adjoint side.  blocks are keyed by distinct ancestors.
struct AssembledOperator {
  int k = 0;
  int r = 0;
  bool average = false;  // false: band component, true: average component
  GoodnessMode mode = GoodnessMode::Measured;
  double omega_scale = 1.0;  // omega(2^-|k|), the folded normalizer
  std::vector<BlockOperator> blocks;

  Mat to_matrix(const MartingaleOps& ops) const;
  Vec apply(const MartingaleOps& ops, const Vec& f) const;
  // <Op f, g> in the mu inner product
  double pair(const MartingaleOps& ops, const Vec& f, const Vec& g) const;
};

// Band component ("R"): translates at distance ~2^k inside a common ancestor,
// projected onto a band of depth r+1 (depth r on the adjoint side).  k = 1 is
// the near-diagonal component with no translate and no outer goodness weight.
AssembledOperator build_band_component(const MartingaleOps& ops, const Mat& t, int k,
                                       const RepresentationParams& params);
// Average component ("Q"): the translate-average correction.  |k| = 1 is empty.
AssembledOperator build_average_component(const MartingaleOps& ops, const Mat& t, int k,
                                          const RepresentationParams& params);

// Paraproduct against the symbol b: (Pi_b f)(x) = sum_H (D_H b)(x) (<f>_H - <f>).
Mat build_paraproduct(const MartingaleOps& ops, const Vec& b, const RepresentationParams& params);

// Split <Tf, g> three ways for one fixed system: the unweighted two-sided
// expansion, the goodness-inserted collapsed form, and the per-pair max-level
// filter form.  The last two agree identically for every system; the first
// agrees after averaging over the full shift ensemble in measured mode.
struct ExpansionTriple {
  double plain = 0.0;
  double inserted = 0.0;
  double max_level = 0.0;
};
ExpansionTriple goodness_inserted_expansion(const MartingaleOps& ops, const Mat& t,
                                            const Vec& f, const Vec& g, int r,
                                            GoodnessMode mode);

// Exact per-system identities used to localize any decomposition error.
struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual() const { return lhs - rhs; }
};
// Near-band regroup: pairs with 0 <= i-j <= r against translate projections.
IdentityCheck near_band_regroup(const MartingaleOps& ops, const Mat& t, const Vec& f,
                                const Vec& g, int r, GoodnessMode mode);
// Far-field collapse: pairs with j < i-r against translate averages plus the
// paraproduct remainder.
IdentityCheck far_field_collapse(const MartingaleOps& ops, const Mat& t, const Vec& f,
                                 const Vec& g, int r, GoodnessMode mode);

Vec project_mean_zero(const DiscreteMeasure& mu, const Vec& f);

// Operator norm on L^2(mu): largest singular value after symmetrizing by the
// square root of the mass.
double mu_operator_norm(const DiscreteMeasure& mu, const Mat& t);

struct VerifyOptions {
  RepresentationParams params;
  EnsembleSpec ensemble{EnsembleSpec::Mode::Exhaustive, 0, 0};
  double tolerance = 1e-10;  // relative residual accepted in checked mode
};

struct KTermStat {
  int k = 0;
  double band_pair = 0.0;     // ensemble mean of omega(2^-|k|) <R_k f, g>
  double average_pair = 0.0;  // ensemble mean of omega(2^-|k|) <Q_k f, g>
};

struct DecompositionReport {
  double lhs = 0.0;       // <Tf, g>
  double rhs = 0.0;       // ensemble average of the decomposition
  double residual = 0.0;  // |lhs - rhs|
  double relative = 0.0;  // residual / (|T| |f| |g| + tiny)
  double t_norm = 0.0, f_norm = 0.0, g_norm = 0.0;
  double paraproduct_forward = 0.0;  // ensemble mean of <Pi_{T1} f, g>
  double paraproduct_adjoint = 0.0;  // ensemble mean of <f, Pi_{T*1} g>
  std::vector<KTermStat> terms;      // signed k, ordered 1,-1,2,-2,...
  GoodnessMode mode = GoodnessMode::Measured;
  bool exhaustive = false;
  bool checked = false;  // measured + exhaustive: the identity must be exact
  bool passed = true;
  double tolerance = 0.0;
  std::uint64_t ensemble_size = 0;
  int r = 0;
};

// Averages the full decomposition over the shift ensemble and compares it
// with <Tf, g>.  Inputs must have mean zero (input_error names the integral).
DecompositionReport verify_representation(const DiscreteMeasure& mu, const Mat& t, const Vec& f,
                                          const Vec& g, const VerifyOptions& options);

// Kernel-size constants of an assembled component, normalized the way the
// block supports dictate: band blocks against the ancestor side length,
// average parts against the mass of the cube whose mean they form.
struct ComponentKernelBounds {
  double band_const = 0.0;      // max |mat(x,y)/m(y)| ell(K)^n over band blocks
  double positive_const = 0.0;  // max |positive(x,y)/m(y)| mu(translate of x)
  double negative_const = 0.0;  // max |part(x,y)/m(y)| mu(host)
  std::int64_t entries = 0;
};
ComponentKernelBounds component_kernel_bounds(const MartingaleOps& ops,
                                              const AssembledOperator& op, double order_n);

struct NormRow {
  int k = 0;
  double band_norm = 0.0;
  double average_norm = 0.0;
  double average_norm_per_sqrt_k = 0.0;
};
// L^2(mu) norms of both components on the reference (zero-shift) system for
// k = 1 .. N+1.
std::vector<NormRow> estimate_norms(const DiscreteMeasure& mu, const Mat& t,
                                    const RepresentationParams& params);

// Aggregate testing-condition bound: empirical testing constant times the
// weighted series over scales, with the integral comparison reported alongside.
struct T1Aggregate {
  double c_emp = 0.0;          // max of the forward and adjoint testing constants
  double series_sum = 0.0;     // sum over scales of omega(2^-k)(1 + sqrt(1+k))
  double series_tail = 0.0;
  bool series_convergent = true;
  double comparison_integral = 0.0;  // integral of omega(t) sqrt(1+log(1/t)) dt/t
  bool integral_convergent = true;
  double bound = 0.0;  // c_emp * (1 + series_sum + series_tail)
};
T1Aggregate t1_aggregate(const DiscreteMeasure& mu, const Mat& t, const Modulus& omega);

}  // namespace dyrep
