#pragma once

// Exact feedback linearization of the nominal plant: Lie chains, vector
// relative degree, the decoupling matrix, the linearizing law and the
// integrator-chain (Brunovsky) coordinates.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "robolin/expr.hpp"
#include "robolin/plant.hpp"

namespace robolin::feedlin {

class DegreeUndetermined : public Error {
 public:
  explicit DegreeUndetermined(std::size_t output);
  std::size_t output() const noexcept { return output_; }

 private:
  std::size_t output_;
};

class SingularDecoupling : public Error {
 public:
  SingularDecoupling(std::vector<double> state, double condition);
  const std::vector<double>& state() const noexcept { return state_; }
  double condition() const noexcept { return condition_; }

 private:
  std::vector<double> state_;
  double condition_;
};

class NotFullRelativeDegree : public Error {
 public:
  using Error::Error;
};

class TransformInversionError : public Error {
 public:
  using Error::Error;
};

/// sum_j dh/dx_j * field_j over the first field.size() variables (the states).
expr::Expr lie_derivative(const expr::Expr& h, std::span<const expr::Expr> field);

struct RelativeDegreeProfile {
  std::vector<int> r;
  int total() const;
  bool full(std::size_t n) const { return static_cast<std::size_t>(total()) == n; }
};

struct LieChain {
  std::vector<std::vector<expr::Expr>> lf;       // lf[i][j] = L_f^j nu_i, j = 0..r_i
  std::vector<expr::Expr> f_star;                // m
  std::vector<std::vector<expr::Expr>> g_star;   // m x m
};

/// Chain of the given relative degrees along the fields f and g.
LieChain build_chain(std::span<const expr::Expr> f, const std::vector<std::vector<expr::Expr>>& g,
                     std::span<const expr::Expr> outputs, std::span<const int> r);

struct RelativeDegreeResult {
  RelativeDegreeProfile profile;
  LieChain chain;  // nominal
  std::vector<std::vector<double>> singular_points;  // |det g*| < 1e-10
};

/// Relative degree of every output, certified on `samples` uniform draws from
/// the state region (an entry counts when |value| > 1e-8 (1 + |L_f^j nu|)).
RelativeDegreeResult relative_degree(const plant::DecomposedPlant& plant, const plant::Box& region,
                                     std::uint64_t seed, std::size_t samples = 200);

/// Compiled u = g*^{-1}(v - f*) for the nominal plant.
class LinearizingLaw {
 public:
  LinearizingLaw() = default;
  LinearizingLaw(const LieChain& chain, const expr::VariableSpace& space);

  std::size_t m() const noexcept { return m_; }

  /// Throws SingularDecoupling when cond(g*) > 1e12.
  Eigen::VectorXd control(const Eigen::VectorXd& x, const Eigen::VectorXd& v) const;
  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& f_star, Eigen::MatrixXd& g_star) const;

 private:
  std::shared_ptr<const expr::Tape> tape_;
  std::size_t vars_ = 0, n_ = 0, m_ = 0;
};

Eigen::VectorXd linearizing_control(const LieChain& chain, const expr::VariableSpace& space,
                                    const Eigen::VectorXd& x, const Eigen::VectorXd& v);

struct BrunovskyModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  std::vector<int> blocks;  // chain length per output
};

BrunovskyModel brunovsky_form(const RelativeDegreeProfile& profile, bool with_integrators);

/// chi = T(x, p, commands): per output [int(y - yc), y - yc, y', ..., y^(r-1)]
/// (the integral entry only when integrators are on).
class Diffeomorphism {
 public:
  Diffeomorphism() = default;
  Diffeomorphism(const plant::DecomposedPlant& plant, const RelativeDegreeProfile& profile,
                 bool with_integrators);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t core_dim() const noexcept { return core_nominal_.size(); }
  std::size_t state_count() const noexcept { return n_; }
  bool integrators() const noexcept { return integrators_; }
  const std::vector<int>& degrees() const noexcept { return r_; }

  std::size_t block_offset(std::size_t i) const { return offsets_.at(i); }
  std::size_t output_index(std::size_t i) const { return offsets_.at(i) + (integrators_ ? 1 : 0); }
  std::size_t last_index(std::size_t i) const;
  /// Position in chi of each core entry.
  const std::vector<std::size_t>& core_positions() const noexcept { return core_pos_; }

  /// Core entries [y_i, y_i', ..., y_i^(r_i-1)] stacked, no command offsets.
  Eigen::VectorXd core(const Eigen::VectorXd& x, const Eigen::VectorXd& p, bool nominal) const;
  /// Jacobians of the core with respect to x (square) and p.
  void core_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& p, bool nominal,
                     Eigen::MatrixXd& tx, Eigen::MatrixXd* tp) const;

  Eigen::VectorXd apply(const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                        const Eigen::VectorXd& commands, const Eigen::VectorXd& integrals,
                        bool nominal) const;

  /// Newton solve of core(x, p) = target starting at `guess`.
  Eigen::VectorXd invert(const Eigen::VectorXd& target, const Eigen::VectorXd& p,
                         const Eigen::VectorXd& guess, bool nominal) const;

  const std::vector<expr::Expr>& core_exprs(bool nominal) const {
    return nominal ? core_nominal_ : core_uncertain_;
  }

 private:
  std::vector<double> bind(const Eigen::VectorXd& x, const Eigen::VectorXd& p) const;

  std::vector<int> r_;
  bool integrators_ = true;
  std::size_t n_ = 0, m_ = 0, q_ = 0, vars_ = 0, dim_ = 0;
  std::vector<std::size_t> offsets_, core_pos_;
  std::vector<expr::Expr> core_uncertain_, core_nominal_;
  // per instance: [core, d core/dx (row major), d core/dp (row major)]
  std::shared_ptr<const expr::Tape> tape_uncertain_, tape_nominal_;
};

Diffeomorphism build_transform(const plant::DecomposedPlant& plant, const RelativeDegreeProfile& profile,
                               bool with_integrators);

}  // namespace robolin::feedlin
