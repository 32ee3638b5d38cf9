#pragma once

// Core numeric primitives shared by the safety layer: small dense
// vectors/matrices (Eigen-backed), the domain records for the controlled
// object, and one-step mean prediction.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace safex {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

inline void require_domain(bool ok, const std::string& what) {
  if (!ok) throw std::domain_error(what);
}

// Symmetric PSD square root via eigendecomposition. Eigenvalues in
// [-1e-12, 0] are clamped to zero; anything more negative is rejected.
inline Matrix psd_sqrt(const Matrix& m) {
  require_shape(m.rows() == m.cols(), "psd_sqrt expects a square matrix");
  require_domain(all_finite(m), "psd_sqrt: non-finite entries");
  require_domain((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()),
                 "psd_sqrt: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  Vector ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-12) throw std::domain_error("psd_sqrt: matrix not positive semidefinite");
    if (ev[i] < 0.0) ev[i] = 0.0;
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

// Known linear approximation x_{k+1} ~= A x_k + B u_k + w_k of the
// unknown plant.
struct LinearModel {
  Matrix A;
  Matrix B;

  LinearModel(Matrix a, Matrix b) : A(std::move(a)), B(std::move(b)) {
    require_shape(A.rows() == A.cols(), "LinearModel: A must be square");
    require_shape(B.rows() == A.rows(), "LinearModel: B rows must match A");
    require_domain(all_finite(A) && all_finite(B), "LinearModel: non-finite entries");
  }

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
};

// Safe polytope X_s = { x : H x <= d }, one row h_j^T per constraint.
struct ConstraintSet {
  Matrix H;
  Vector d;

  ConstraintSet(Matrix h, Vector dd) : H(std::move(h)), d(std::move(dd)) {
    require_shape(H.rows() == d.size(), "ConstraintSet: H rows must match d");
    require_domain(H.rows() >= 1, "ConstraintSet: need at least one constraint");
    require_domain(all_finite(H) && all_finite(d), "ConstraintSet: non-finite entries");
    for (Eigen::Index j = 0; j < H.rows(); ++j)
      require_domain(H.row(j).norm() > 0.0, "ConstraintSet: zero constraint row");
  }

  int num_constraints() const { return static_cast<int>(H.rows()); }
  int state_dim() const { return static_cast<int>(H.cols()); }

  // h_j^T B != 0 for every row: required for the covariance tightening
  // to have feasible solutions.
  bool actuation_condition_holds(const LinearModel& model) const {
    if (model.state_dim() != state_dim()) return false;
    for (Eigen::Index j = 0; j < H.rows(); ++j)
      if ((H.row(j) * model.B).norm() == 0.0) return false;
    return true;
  }
};

// Gaussian disturbance/exploration model N(mean, cov). The symmetric
// square root is cached because sampling sits in hot loops.
struct GaussianNoise {
  Vector mean;
  Matrix cov;
  Matrix sqrt_cov;

  GaussianNoise(Vector mu, Matrix sigma)
      : mean(std::move(mu)), cov(std::move(sigma)) {
    require_shape(cov.rows() == cov.cols() && cov.rows() == mean.size(),
                  "GaussianNoise: cov must be n x n for n-vector mean");
    require_domain(all_finite(mean) && all_finite(cov), "GaussianNoise: non-finite entries");
    sqrt_cov = psd_sqrt(cov);  // also validates symmetry and PSD-ness
  }

  static GaussianNoise zero(int n) {
    return GaussianNoise(Vector::Zero(n), Matrix::Zero(n, n));
  }

  int dim() const { return static_cast<int>(mean.size()); }
};

// Probability schedule parameters: chance level eta, recovery level xi,
// recovery budget tau, horizon T, and the one-/tau-step approximation
// error bounds per constraint row.
struct SafetyConfig {
  double eta;
  double xi;
  int tau;
  int horizon;
  Vector delta_bar;
  Vector Delta_bar;

  SafetyConfig(double eta_, double xi_, int tau_, int horizon_, Vector delta, Vector Delta)
      : eta(eta_), xi(xi_), tau(tau_), horizon(horizon_),
        delta_bar(std::move(delta)), Delta_bar(std::move(Delta)) {
    require_domain(eta > 0.5 && eta < 1.0, "SafetyConfig: eta must lie in (0.5, 1)");
    require_domain(horizon >= 1, "SafetyConfig: horizon must be positive");
    require_domain(xi > std::pow(eta, 1.0 / horizon) && xi < 1.0,
                   "SafetyConfig: xi must satisfy eta^(1/T) < xi < 1");
    require_domain(tau >= 1, "SafetyConfig: tau must be a positive integer");
    require_domain(all_finite(delta_bar) && all_finite(Delta_bar),
                   "SafetyConfig: non-finite error bounds");
    require_domain(delta_bar.minCoeff() >= 0.0 && Delta_bar.minCoeff() >= 0.0,
                   "SafetyConfig: error bounds must be nonnegative");
  }
};

// Per-row slack d_j - h_j^T x. All components >= 0 iff x is safe.
inline Vector constraint_margins(const ConstraintSet& cs, const Vector& x) {
  require_shape(x.size() == cs.H.cols(), "constraint_margins: state dimension");
  return cs.d - cs.H * x;
}

// Closed safe set: the boundary counts as safe.
inline bool is_safe(const ConstraintSet& cs, const Vector& x) {
  return constraint_margins(cs, x).minCoeff() >= 0.0;
}

// One-step predicted mean A x + B u_mean + mu_w.
inline Vector predict_mean_next(const LinearModel& model, const GaussianNoise& noise,
                                const Vector& x, const Vector& u_mean) {
  require_shape(x.size() == model.A.cols(), "predict_mean_next: state dimension");
  require_shape(u_mean.size() == model.B.cols(), "predict_mean_next: input dimension");
  require_shape(noise.dim() == model.state_dim(), "predict_mean_next: noise dimension");
  return model.A * x + model.B * u_mean + noise.mean;
}

}  // namespace safex
