#include "robolin/riccati.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

namespace robolin::riccati {

namespace {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;

void check_shapes(const CareProblem& p) {
  const auto n = p.A.rows();
  if (p.A.cols() != n || p.M.rows() != n || p.M.cols() != n || p.Q.rows() != n || p.Q.cols() != n) {
    throw Error("CARE matrices must be square and of equal size");
  }
  if (!p.A.allFinite() || !p.M.allFinite() || !p.Q.allFinite()) throw Error("CARE data is not finite");
  const double sm = (p.M - p.M.transpose()).norm(), sq = (p.Q - p.Q.transpose()).norm();
  if (sm > 1e-12 * std::max(1.0, p.M.norm()) || sq > 1e-12 * std::max(1.0, p.Q.norm())) {
    throw Error("CARE M and Q must be symmetric");
  }
}

// Swap adjacent diagonal entries k, k+1 of the upper triangular T, updating U.
void swap_adjacent(CMat& T, CMat& U, Eigen::Index k) {
  const cd a = T(k, k), b = T(k + 1, k + 1), c = T(k, k + 1);
  cd x0 = c, x1 = b - a;
  const double nrm = std::hypot(std::abs(x0), std::abs(x1));
  if (nrm == 0.0) return;
  x0 /= nrm;
  x1 /= nrm;
  Eigen::Matrix2cd G;
  G << x0, -std::conj(x1), x1, std::conj(x0);
  T.middleRows(k, 2) = G.adjoint() * T.middleRows(k, 2);
  T.middleCols(k, 2) = T.middleCols(k, 2) * G;
  U.middleCols(k, 2) = U.middleCols(k, 2) * G;
  T(k + 1, k) = 0.0;
}

}  // namespace

double care_residual(const CareProblem& p, const Eigen::MatrixXd& X) {
  return (p.A.transpose() * X + X * p.A - X * p.M * X + p.Q).norm();
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& F, const Eigen::MatrixXd& W) {
  const auto n = F.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  // vec(F'Z + ZF) = (I kron F' + F' kron I) vec(Z)
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n * n, n * n);
  const Eigen::MatrixXd Ft = F.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) += I(i, j) * Ft;
      K.block(i * n, j * n, n, n) += Ft(i, j) * I;
    }
  }
  const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(W.data(), n * n);
  const Eigen::VectorXd z = K.partialPivLu().solve(rhs);
  return Eigen::Map<const Eigen::MatrixXd>(z.data(), n, n);
}

CareSolution solve_care(const CareProblem& p, double tol) {
  check_shapes(p);
  const auto n = p.A.rows();
  Eigen::MatrixXd H(2 * n, 2 * n);
  H << p.A, -p.M, -p.Q, -p.A.transpose();

  Eigen::ComplexSchur<Eigen::MatrixXd> schur(H);
  if (schur.info() != Eigen::Success) throw IllConditionedSubspace("Schur decomposition did not converge");
  CMat T = schur.matrixT();
  CMat U = schur.matrixU();

  const double margin = 1e-9 * std::max(1.0, H.norm());
  Eigen::Index stable = 0;
  for (Eigen::Index k = 0; k < 2 * n; ++k) {
    const double re = T(k, k).real();
    if (std::abs(re) <= margin) {
      std::ostringstream msg;
      msg << "Hamiltonian eigenvalue " << T(k, k) << " lies on the imaginary axis";
      throw ImaginaryAxisEigenvalue(msg.str());
    }
    if (re < 0) ++stable;
  }
  if (stable != n) throw ImaginaryAxisEigenvalue("Hamiltonian has no n-dimensional stable subspace");

  // Bubble stable eigenvalues to the leading block.
  Eigen::Index front = 0;
  for (Eigen::Index k = 0; k < 2 * n; ++k) {
    if (T(k, k).real() < 0) {
      for (Eigen::Index j = k; j > front; --j) swap_adjacent(T, U, j - 1);
      ++front;
    }
  }

  const CMat U1 = U.topLeftCorner(n, n), U2 = U.bottomLeftCorner(n, n);
  const Eigen::JacobiSVD<CMat> svd(U1);
  const auto& s = svd.singularValues();
  const double cond = s(n - 1) > 0 ? s(0) / s(n - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e12)) {
    std::ostringstream msg;
    msg << "stable subspace basis is ill conditioned (cond " << cond << ")";
    throw IllConditionedSubspace(msg.str());
  }
  // X U1 = U2
  const CMat Xc = U1.transpose().partialPivLu().solve(U2.transpose()).transpose();
  Eigen::MatrixXd X = Xc.real();
  X = 0.5 * (X + X.transpose()).eval();

  double res = care_residual(p, X);
  // one Newton step: (A - MX)' D + D (A - MX) = -R(X)
  {
    const Eigen::MatrixXd F = p.A - p.M * X;
    const Eigen::MatrixXd R = p.A.transpose() * X + X * p.A - X * p.M * X + p.Q;
    Eigen::MatrixXd D = solve_lyapunov(F, R);
    D = 0.5 * (D + D.transpose()).eval();
    const Eigen::MatrixXd Xn = X + D;
    const double rn = care_residual(p, Xn);
    if (Xn.allFinite() && rn < res) {
      X = Xn;
      res = rn;
    }
  }

  if (!X.allFinite() || !(res <= tol * (1.0 + X.squaredNorm()))) {
    std::ostringstream msg;
    msg << "Riccati residual " << res << " exceeds tolerance";
    throw IllConditionedSubspace(msg.str());
  }
  CareSolution sol;
  sol.X = X;
  sol.residual = res;
  sol.abscissa = spectral_abscissa(p.A - p.M * X);
  return sol;
}

double spectral_abscissa(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXcd ev = A.eigenvalues();
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) m = std::max(m, ev[i].real());
  return m;
}

bool is_hurwitz(const Eigen::MatrixXd& A) { return spectral_abscissa(A) < 0.0; }

double sigma_max_at(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C,
                    const Eigen::MatrixXd& D, double omega) {
  const auto n = A.rows();
  CMat S = cd(0.0, omega) * CMat::Identity(n, n) - A.cast<cd>();
  const CMat G = C.cast<cd>() * S.partialPivLu().solve(B.cast<cd>()) + D.cast<cd>();
  if (G.size() == 0) return 0.0;
  return Eigen::JacobiSVD<CMat>(G).singularValues()(0);
}

namespace {

// Imaginary-axis eigenvalue frequencies of the gamma-Hamiltonian (empty means
// gamma exceeds the norm).
std::vector<double> crossing_frequencies(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                         const Eigen::MatrixXd& C, const Eigen::MatrixXd& D, double gamma) {
  const auto n = A.rows();
  const auto m = B.cols(), p = C.rows();
  const Eigen::MatrixXd R = gamma * gamma * Eigen::MatrixXd::Identity(m, m) - D.transpose() * D;
  const Eigen::MatrixXd Ri = R.inverse();
  const Eigen::MatrixXd Ah = A + B * Ri * D.transpose() * C;
  Eigen::MatrixXd H(2 * n, 2 * n);
  H << Ah, B * Ri * B.transpose(),
      -C.transpose() * (Eigen::MatrixXd::Identity(p, p) + D * Ri * D.transpose()) * C, -Ah.transpose();
  const Eigen::VectorXcd ev = H.eigenvalues();
  const double scale = std::max(1.0, H.norm());
  std::vector<double> w;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i].real()) <= 1e-8 * scale) w.push_back(std::abs(ev[i].imag()));
  }
  return w;
}

}  // namespace

double hinf_norm(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C,
                 const Eigen::MatrixXd& D, double tol) {
  if (!is_hurwitz(A)) throw UnstableSystem("hinf_norm requires a Hurwitz A");
  double lb = 0.0;
  if (D.size() > 0) lb = Eigen::JacobiSVD<Eigen::MatrixXd>(D).singularValues()(0);
  lb = std::max(lb, sigma_max_at(A, B, C, D, 0.0));
  // a few probes at the modal frequencies
  const Eigen::VectorXcd ev = A.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) lb = std::max(lb, sigma_max_at(A, B, C, D, std::abs(ev[i])));
  if (lb == 0.0) {
    if (B.norm() == 0.0 || C.norm() == 0.0) return 0.0;
    lb = 1e-300;
  }
  double ub = 2.0 * lb;
  for (int k = 0; k < 200 && !crossing_frequencies(A, B, C, D, ub).empty(); ++k) ub *= 2.0;
  for (int k = 0; k < 200 && ub - lb > tol * lb; ++k) {
    const double g = 0.5 * (lb + ub);
    const auto w = crossing_frequencies(A, B, C, D, g);
    if (w.empty()) {
      ub = g;
    } else {
      lb = g;
      for (double wi : w) lb = std::max(lb, sigma_max_at(A, B, C, D, wi));
      if (lb > ub) ub = lb * (1.0 + tol);
    }
  }
  return 0.5 * (lb + ub);
}

Predicates matrix_predicates(const Eigen::MatrixXd& X) {
  Predicates p;
  if (X.rows() != X.cols() || !X.allFinite()) return p;
  const double norm2 = X.size() ? Eigen::JacobiSVD<Eigen::MatrixXd>(X).singularValues()(0) : 0.0;
  const double scale = std::max(1.0, norm2);
  p.spectral_norm = norm2;
  p.is_symmetric = (X - X.transpose()).norm() <= 1e-9 * scale;
  if (p.is_symmetric) {
    const Eigen::MatrixXd S = 0.5 * (X + X.transpose());
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly).eigenvalues()(0);
    p.is_pd = lmin > 1e-9 * scale;
    p.is_psd = lmin >= -1e-9 * scale;
  }
  p.is_hurwitz = X.size() > 0 && spectral_abscissa(X) < -1e-9 * scale;
  return p;
}

}  // namespace robolin::riccati
