#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

namespace dyrep {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Compensated accumulator; the reduction order of callers must stay fixed so
// that reports are byte-stable across runs.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

struct OpNormResult {
  double value = 0.0;       // largest singular value estimate
  bool converged = true;
  int iterations = 0;
  double lower = 0.0;       // Rayleigh bracket when not converged
  double upper = 0.0;
};

// Largest singular value by power iteration on A^T A with a deterministic
// start vector (all-ones). tol is on successive Rayleigh quotients.
inline OpNormResult largest_singular_value(const Mat& a, double tol = 1e-8,
                                           int max_iters = 10000) {
  OpNormResult out;
  const Eigen::Index n = a.cols();
  if (n == 0 || a.rows() == 0 || a.cwiseAbs().maxCoeff() == 0.0) return out;

  Vec v = Vec::Constant(n, 1.0 / std::sqrt(double(n)));
  double lambda = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    Vec w = a.transpose() * (a * v);
    double nw = w.norm();
    if (nw == 0.0) {
      // v happens to be in the kernel; perturb deterministically.
      v = Vec::Zero(n);
      v[it % n] = 1.0;
      continue;
    }
    v = w / nw;
    double next = v.dot(a.transpose() * (a * v));
    out.iterations = it;
    if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
      out.value = std::sqrt(std::max(0.0, next));
      out.lower = out.value;
      out.upper = out.value;
      return out;
    }
    lambda = next;
  }
  out.converged = false;
  out.lower = std::sqrt(std::max(0.0, lambda));
  double n1 = 0.0, ninf = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) n1 = std::max(n1, a.col(j).cwiseAbs().sum());
  for (Eigen::Index i = 0; i < a.rows(); ++i) ninf = std::max(ninf, a.row(i).cwiseAbs().sum());
  out.upper = std::sqrt(n1 * ninf);
  out.value = out.lower;
  return out;
}

// Deterministic uniform doubles in [0,1) from raw 64-bit generator words.
template <class Rng>
double uniform01(Rng& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

}  // namespace dyrep
