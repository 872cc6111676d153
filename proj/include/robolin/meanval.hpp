#pragma once

// Mean-value linearization of the transformed uncertainty, the over-bound
// rho = max ||Phi(c)|| over a hyper-rectangle, and assembly of the uncertain
// linear design model.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "robolin/expr.hpp"
#include "robolin/feedlin.hpp"
#include "robolin/plant.hpp"

namespace robolin::meanval {

class AxisExplosion : public Error {
 public:
  using Error::Error;
};

/// Bounds on the transformed states chi and the new inputs v.
struct HyperBox {
  plant::Box chi;
  plant::Box v;
};

/// w(chi, v, dp): the nonzero rows of the transformed uncertainty, one per
/// output. Implementations must be safe to call concurrently.
class ResidualMap {
 public:
  virtual ~ResidualMap() = default;

  virtual std::size_t output_count() const = 0;
  virtual std::size_t chi_dim() const = 0;
  virtual std::size_t param_dim() const = 0;
  std::size_t arg_dim() const { return chi_dim() + output_count() + param_dim(); }

  /// Row of chi that residual i enters (last state of chain i).
  virtual std::vector<std::size_t> rows() const = 0;

  virtual Eigen::VectorXd value(const Eigen::VectorXd& chi, const Eigen::VectorXd& v,
                                const Eigen::VectorXd& dp) const = 0;
  /// Phi = d w / d [chi v dp], output_count x arg_dim.
  virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& chi, const Eigen::VectorXd& v,
                                   const Eigen::VectorXd& dp) const = 0;
};

/// Residual given directly as expressions over (chi, v, dp) variables.
class SymbolicResidualMap : public ResidualMap {
 public:
  /// `space` states are chi, inputs are v, parameters are dp.
  SymbolicResidualMap(expr::VariableSpace space, std::vector<expr::Expr> w, std::vector<std::size_t> rows);

  std::size_t output_count() const override { return w_.size(); }
  std::size_t chi_dim() const override { return space_.state_count(); }
  std::size_t param_dim() const override { return space_.parameter_count(); }
  std::vector<std::size_t> rows() const override { return rows_; }
  Eigen::VectorXd value(const Eigen::VectorXd& chi, const Eigen::VectorXd& v, const Eigen::VectorXd& dp) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& chi, const Eigen::VectorXd& v, const Eigen::VectorXd& dp) const override;

 private:
  std::vector<double> bind(const Eigen::VectorXd& chi, const Eigen::VectorXd& v, const Eigen::VectorXd& dp) const;

  expr::VariableSpace space_;
  std::vector<expr::Expr> w_;
  std::vector<std::size_t> rows_;
  std::shared_ptr<const expr::Tape> tape_;  // [w, dw/dvars row major]
};

/// The residual of a feedback-linearized plant in transformed coordinates:
/// x = T^{-1}(chi, p), u = g*0(x)^{-1}(v - f*0(x)), w = f*_p(x) + g*_p(x) u - v.
class TransformedResidualMap : public ResidualMap {
 public:
  TransformedResidualMap(const plant::DecomposedPlant& plant, const feedlin::LieChain& nominal,
                         const feedlin::Diffeomorphism& transform);

  std::size_t output_count() const override { return m_; }
  std::size_t chi_dim() const override { return transform_.dim(); }
  std::size_t param_dim() const override { return q_; }
  std::vector<std::size_t> rows() const override;
  Eigen::VectorXd value(const Eigen::VectorXd& chi, const Eigen::VectorXd& v, const Eigen::VectorXd& dp) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& chi, const Eigen::VectorXd& v, const Eigen::VectorXd& dp) const override;

  /// Plant state for transformed coordinates (commands zero).
  Eigen::VectorXd state_of(const Eigen::VectorXd& chi, const Eigen::VectorXd& p) const;
  /// Uncertain minus nominal highest output derivatives at (x, u, p).
  Eigen::VectorXd model_mismatch(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& p) const;

 private:
  struct Pack {
    std::shared_ptr<const expr::Tape> tape;  // [F (m), G (m*m), dF/dx, dG/dx, dF/dp, dG/dp]
  };
  void eval_pack(const Pack& pack, const Eigen::VectorXd& x, const Eigen::VectorXd& p, std::vector<double>& out) const;

  feedlin::Diffeomorphism transform_;
  std::vector<double> p0_;
  std::size_t n_ = 0, m_ = 0, q_ = 0, vars_ = 0;
  Pack nominal_, uncertain_;
};

std::unique_ptr<TransformedResidualMap> build_residual_map(const plant::DecomposedPlant& plant,
                                                           const feedlin::LieChain& nominal,
                                                           const feedlin::Diffeomorphism& transform);

/// Phi at c = [chi; v; dp].
Eigen::MatrixXd jacobian_phi(const ResidualMap& map, const Eigen::VectorXd& c);

double spectral_norm(const Eigen::MatrixXd& M);

struct SamplingPlan {
  std::size_t grid_points = 5;      // per axis
  std::size_t max_grid_axes = 6;    // grid only when this many or fewer axes vary
  std::size_t random = 4096;        // Latin-hypercube points
  std::size_t max_vertex_axes = 12; // vertices only when this many or fewer axes vary
  std::size_t budget = 1'000'000;   // cap on grid + vertex points
  std::size_t refine_starts = 8;    // local maximization from the best samples
  std::size_t refine_evals = 600;   // evaluations per refinement start
  double safety = 1.0;              // multiplies the reported rho
  std::uint64_t seed = 1;
};

struct UncertaintyBound {
  double rho = 0.0;          // safety * sampled maximum
  double sampled_max = 0.0;  // max over the deterministic sample set before refinement
  Eigen::VectorXd argmax;    // c* = [chi; v; dp]
  std::size_t samples = 0;
  std::size_t failed = 0;    // samples where the map could not be evaluated
  std::uint64_t seed = 0;
};

/// Sample box over [chi; v; dp] built from the hyper-rectangle and Omega.
plant::Box argument_box(const HyperBox& box, const plant::Box& omega, std::span<const double> p0);

/// OpenMP-parallel sampler. Result is independent of thread count.
UncertaintyBound bound_rho(const ResidualMap& map, const HyperBox& box, const plant::Box& omega,
                           std::span<const double> p0, const SamplingPlan& plan);
/// Sequential reference with identical results.
UncertaintyBound bound_rho_serial(const ResidualMap& map, const HyperBox& box, const plant::Box& omega,
                                  std::span<const double> p0, const SamplingPlan& plan);

struct AssemblyConventions {
  std::vector<std::size_t> measured;  // chi indices forming y~
  std::vector<double> sensor_scale;   // optional, one per measured index
  Eigen::MatrixXd E1;                 // m x m, empty means identity
};

struct LinearizedDesignModel {
  Eigen::MatrixXd A, B1, B2, C1, C2, D1, D2;
  Eigen::MatrixXd C1bar, D1bar, E1;
  double rho = 0.0;
  std::vector<int> blocks;
  std::vector<std::size_t> measured;
  std::vector<double> sensor_scale;
  std::vector<std::string> warnings;

  std::size_t n() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t m() const { return static_cast<std::size_t>(B1.cols()); }
  std::size_t measurements() const { return static_cast<std::size_t>(C2.rows()); }
  std::vector<std::size_t> last_states() const;
};

LinearizedDesignModel assemble_design_model(const feedlin::BrunovskyModel& brunovsky, double rho,
                                            const AssemblyConventions& conventions);

bool controllable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);
bool observable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C);

}  // namespace robolin::meanval
