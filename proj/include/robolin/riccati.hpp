#pragma once

// Continuous algebraic Riccati equations in the canonical form
//   A'X + XA - XMX + Q = 0
// with M possibly indefinite, solved through the stable invariant subspace of
// the Hamiltonian [[A, -M], [-Q, -A']]. Also: H-infinity norms and matrix
// predicates.

#include <Eigen/Dense>

#include "robolin/error.hpp"

namespace robolin::riccati {

class ImaginaryAxisEigenvalue : public Error {
 public:
  using Error::Error;
};

class IllConditionedSubspace : public Error {
 public:
  using Error::Error;
};

class UnstableSystem : public Error {
 public:
  using Error::Error;
};

struct CareProblem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd M;
  Eigen::MatrixXd Q;
};

struct CareSolution {
  Eigen::MatrixXd X;
  double residual = 0.0;  // Frobenius norm of the Riccati residual
  double abscissa = 0.0;  // spectral abscissa of A - MX
};

/// Frobenius norm of A'X + XA - XMX + Q.
double care_residual(const CareProblem& p, const Eigen::MatrixXd& X);

/// Accepts when residual <= tol (1 + ||X||_F^2).
CareSolution solve_care(const CareProblem& p, double tol = 1e-9);

/// Continuous Lyapunov solve F'Z + ZF = -W by Kronecker expansion (small n).
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& F, const Eigen::MatrixXd& W);

double spectral_abscissa(const Eigen::MatrixXd& A);
bool is_hurwitz(const Eigen::MatrixXd& A);

/// L-infinity norm of C (sI - A)^{-1} B + D to relative accuracy `tol`.
/// Throws UnstableSystem when A is not Hurwitz.
double hinf_norm(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C,
                 const Eigen::MatrixXd& D, double tol = 1e-6);

/// Largest singular value of C (jw I - A)^{-1} B + D.
double sigma_max_at(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C,
                    const Eigen::MatrixXd& D, double omega);

struct Predicates {
  bool is_symmetric = false;
  bool is_pd = false;
  bool is_psd = false;
  bool is_hurwitz = false;
  double spectral_norm = 0.0;
};

Predicates matrix_predicates(const Eigen::MatrixXd& X);

}  // namespace robolin::riccati
