#include "robolin/meanval.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace robolin::meanval {

using expr::Expr;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double spectral_norm(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

// ---------------------------------------------------------------------------

SymbolicResidualMap::SymbolicResidualMap(expr::VariableSpace space, std::vector<Expr> w,
                                         std::vector<std::size_t> rows)
    : space_(std::move(space)), w_(std::move(w)), rows_(std::move(rows)) {
  if (w_.size() != space_.input_count()) throw Error("residual map needs one entry per input");
  if (rows_.size() != w_.size()) throw Error("residual map needs one row index per entry");
  std::vector<Expr> outs = w_;
  for (const auto& e : w_) {
    for (std::size_t j = 0; j < space_.size(); ++j) outs.push_back(expr::diff(e, j));
  }
  tape_ = std::make_shared<const expr::Tape>(outs);
}

std::vector<double> SymbolicResidualMap::bind(const Eigen::VectorXd& chi, const Eigen::VectorXd& v,
                                              const Eigen::VectorXd& dp) const {
  std::vector<double> vars;
  vars.reserve(space_.size());
  vars.insert(vars.end(), chi.data(), chi.data() + chi.size());
  vars.insert(vars.end(), v.data(), v.data() + v.size());
  vars.insert(vars.end(), dp.data(), dp.data() + dp.size());
  if (vars.size() != space_.size()) throw Error("residual map argument has the wrong size");
  return vars;
}

Eigen::VectorXd SymbolicResidualMap::value(const Eigen::VectorXd& chi, const Eigen::VectorXd& v,
                                           const Eigen::VectorXd& dp) const {
  std::vector<double> out(tape_->output_count()), scratch;
  tape_->eval(bind(chi, v, dp), out, scratch);
  return Eigen::Map<const Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(w_.size()));
}

Eigen::MatrixXd SymbolicResidualMap::jacobian(const Eigen::VectorXd& chi, const Eigen::VectorXd& v,
                                              const Eigen::VectorXd& dp) const {
  std::vector<double> out(tape_->output_count()), scratch;
  tape_->eval(bind(chi, v, dp), out, scratch);
  return Eigen::Map<const RowMat>(out.data() + w_.size(), static_cast<Eigen::Index>(w_.size()),
                                  static_cast<Eigen::Index>(space_.size()));
}

// ---------------------------------------------------------------------------

namespace {

std::shared_ptr<const expr::Tape> compile_pack(const std::vector<Expr>& F, const std::vector<std::vector<Expr>>& G,
                                               const expr::VariableSpace& space) {
  const std::size_t n = space.state_count(), q = space.parameter_count();
  std::vector<Expr> outs = F;
  for (const auto& row : G) outs.insert(outs.end(), row.begin(), row.end());
  for (const auto& e : F) {
    for (std::size_t j = 0; j < n; ++j) outs.push_back(expr::diff(e, j));
  }
  for (const auto& row : G) {
    for (const auto& e : row) {
      for (std::size_t j = 0; j < n; ++j) outs.push_back(expr::diff(e, j));
    }
  }
  for (const auto& e : F) {
    for (std::size_t k = 0; k < q; ++k) outs.push_back(expr::diff(e, space.parameter(k)));
  }
  for (const auto& row : G) {
    for (const auto& e : row) {
      for (std::size_t k = 0; k < q; ++k) outs.push_back(expr::diff(e, space.parameter(k)));
    }
  }
  return std::make_shared<const expr::Tape>(outs);
}

}  // namespace

TransformedResidualMap::TransformedResidualMap(const plant::DecomposedPlant& dp, const feedlin::LieChain& nominal,
                                               const feedlin::Diffeomorphism& transform)
    : transform_(transform), p0_(dp.plant.p0) {
  const auto& p = dp.plant;
  n_ = p.n();
  m_ = p.m();
  q_ = p.q();
  vars_ = p.space.size();
  const auto uncertain = feedlin::build_chain(p.f, p.g, p.outputs, transform.degrees());
  nominal_.tape = compile_pack(nominal.f_star, nominal.g_star, p.space);
  uncertain_.tape = compile_pack(uncertain.f_star, uncertain.g_star, p.space);
}

std::vector<std::size_t> TransformedResidualMap::rows() const {
  std::vector<std::size_t> r;
  for (std::size_t i = 0; i < m_; ++i) r.push_back(transform_.last_index(i));
  return r;
}

void TransformedResidualMap::eval_pack(const Pack& pack, const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                                       std::vector<double>& out) const {
  std::vector<double> vars(vars_, 0.0), scratch;
  for (std::size_t i = 0; i < n_; ++i) vars[i] = x[static_cast<Eigen::Index>(i)];
  for (std::size_t k = 0; k < q_; ++k) vars[n_ + m_ + k] = p[static_cast<Eigen::Index>(k)];
  out.resize(pack.tape->output_count());
  pack.tape->eval(vars, out, scratch);
}

Eigen::VectorXd TransformedResidualMap::state_of(const Eigen::VectorXd& chi, const Eigen::VectorXd& p) const {
  const auto& pos = transform_.core_positions();
  Eigen::VectorXd target(static_cast<Eigen::Index>(pos.size()));
  for (std::size_t k = 0; k < pos.size(); ++k) target[static_cast<Eigen::Index>(k)] = chi[static_cast<Eigen::Index>(pos[k])];
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
  try {
    return transform_.invert(target, p, zero, false);
  } catch (const Error&) {
  }
  // continuation from the origin, which maps to chi = 0
  Eigen::VectorXd x = zero;
  for (int s = 1; s <= 8; ++s) x = transform_.invert(target * (s / 8.0), p, x, false);
  return x;
}

namespace {

struct PackView {
  Eigen::VectorXd F;
  Eigen::MatrixXd G;
  const double* dFdx;
  const double* dGdx;
  const double* dFdp;
  const double* dGdp;
};

PackView view(const std::vector<double>& out, std::size_t n, std::size_t m, std::size_t q) {
  PackView v;
  const auto mm = static_cast<Eigen::Index>(m);
  v.F = Eigen::Map<const Eigen::VectorXd>(out.data(), mm);
  v.G = Eigen::Map<const RowMat>(out.data() + m, mm, mm);
  v.dFdx = out.data() + m + m * m;
  v.dGdx = v.dFdx + m * n;
  v.dFdp = v.dGdx + m * m * n;
  v.dGdp = v.dFdp + m * q;
  return v;
}

}  // namespace

Eigen::VectorXd TransformedResidualMap::model_mismatch(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                                       const Eigen::VectorXd& p) const {
  std::vector<double> on, ou;
  eval_pack(nominal_, x, p, on);
  eval_pack(uncertain_, x, p, ou);
  const PackView a = view(on, n_, m_, q_), b = view(ou, n_, m_, q_);
  return (b.F + b.G * u) - (a.F + a.G * u);
}

Eigen::VectorXd TransformedResidualMap::value(const Eigen::VectorXd& chi, const Eigen::VectorXd& v,
                                              const Eigen::VectorXd& dp) const {
  const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(p0_.data(), static_cast<Eigen::Index>(q_)) + dp;
  const Eigen::VectorXd x = state_of(chi, p);
  std::vector<double> on, ou;
  eval_pack(nominal_, x, p, on);
  eval_pack(uncertain_, x, p, ou);
  const PackView a = view(on, n_, m_, q_), b = view(ou, n_, m_, q_);
  const Eigen::VectorXd u = a.G.partialPivLu().solve(v - a.F);
  return b.F + b.G * u - v;
}

Eigen::MatrixXd TransformedResidualMap::jacobian(const Eigen::VectorXd& chi, const Eigen::VectorXd& v,
                                                 const Eigen::VectorXd& dp) const {
  const auto n = static_cast<Eigen::Index>(n_), m = static_cast<Eigen::Index>(m_), q = static_cast<Eigen::Index>(q_);
  const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(p0_.data(), q) + dp;
  const Eigen::VectorXd x = state_of(chi, p);

  Eigen::MatrixXd tx, tp;
  transform_.core_jacobian(x, p, false, tx, &tp);
  const Eigen::PartialPivLU<Eigen::MatrixXd> tlu(tx);
  const Eigen::MatrixXd tx_inv = tlu.inverse();

  std::vector<double> on, ou;
  eval_pack(nominal_, x, p, on);
  eval_pack(uncertain_, x, p, ou);
  const PackView a = view(on, n_, m_, q_), b = view(ou, n_, m_, q_);
  const Eigen::PartialPivLU<Eigen::MatrixXd> glu(a.G);
  const Eigen::VectorXd u = glu.solve(v - a.F);

  // u_x, W_x, W_p
  Eigen::MatrixXd ux(m, n), wx(m, n), wp(m, q);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd df0(m), dfu(m);
    Eigen::MatrixXd dg0(m, m), dgu(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      df0[i] = a.dFdx[i * n + j];
      dfu[i] = b.dFdx[i * n + j];
      for (Eigen::Index k = 0; k < m; ++k) {
        dg0(i, k) = a.dGdx[(i * m + k) * n + j];
        dgu(i, k) = b.dGdx[(i * m + k) * n + j];
      }
    }
    ux.col(j) = -glu.solve(df0 + dg0 * u);
    wx.col(j) = dfu + dgu * u;
  }
  for (Eigen::Index k = 0; k < q; ++k) {
    Eigen::VectorXd dfp(m);
    Eigen::MatrixXd dgp(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      dfp[i] = b.dFdp[i * q + k];
      for (Eigen::Index l = 0; l < m; ++l) dgp(i, l) = b.dGdp[(i * m + l) * q + k];
    }
    wp.col(k) = dfp + dgp * u;
  }
  const Eigen::MatrixXd mx = wx + b.G * ux;

  const auto nbar = static_cast<Eigen::Index>(transform_.dim());
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(m, nbar + m + q);
  const Eigen::MatrixXd core_cols = mx * tx_inv;
  const auto& pos = transform_.core_positions();
  for (std::size_t k = 0; k < pos.size(); ++k) phi.col(static_cast<Eigen::Index>(pos[k])) = core_cols.col(static_cast<Eigen::Index>(k));
  phi.middleCols(nbar, m) = b.G * glu.inverse() - Eigen::MatrixXd::Identity(m, m);
  if (q > 0) phi.rightCols(q) = mx * (-(tx_inv * tp)) + wp;
  return phi;
}

std::unique_ptr<TransformedResidualMap> build_residual_map(const plant::DecomposedPlant& plant,
                                                           const feedlin::LieChain& nominal,
                                                           const feedlin::Diffeomorphism& transform) {
  return std::make_unique<TransformedResidualMap>(plant, nominal, transform);
}

Eigen::MatrixXd jacobian_phi(const ResidualMap& map, const Eigen::VectorXd& c) {
  const auto nc = static_cast<Eigen::Index>(map.chi_dim()), m = static_cast<Eigen::Index>(map.output_count()),
             q = static_cast<Eigen::Index>(map.param_dim());
  if (c.size() != nc + m + q) throw Error("evaluation point has the wrong size");
  return map.jacobian(c.head(nc), c.segment(nc, m), c.tail(q));
}

// ---------------------------------------------------------------------------
// Sampling

plant::Box argument_box(const HyperBox& box, const plant::Box& omega, std::span<const double> p0) {
  plant::Box b;
  b.lower = box.chi.lower;
  b.upper = box.chi.upper;
  b.lower.insert(b.lower.end(), box.v.lower.begin(), box.v.lower.end());
  b.upper.insert(b.upper.end(), box.v.upper.begin(), box.v.upper.end());
  for (std::size_t k = 0; k < omega.size(); ++k) {
    b.lower.push_back(omega.lower[k] - p0[k]);
    b.upper.push_back(omega.upper[k] - p0[k]);
  }
  return b;
}

namespace {

class SampleSet {
 public:
  SampleSet(const plant::Box& box, const SamplingPlan& plan) : box_(box) {
    for (std::size_t i = 0; i < box.size(); ++i) {
      if (box.upper[i] > box.lower[i]) axes_.push_back(i);
    }
    const std::size_t nd = axes_.size();
    gp_ = std::max<std::size_t>(plan.grid_points, 2);
    double structured = 0.0;
    if (nd <= plan.max_grid_axes) {
      n_grid_ = 1;
      for (std::size_t k = 0; k < nd; ++k) n_grid_ *= gp_;
      structured += static_cast<double>(n_grid_);
    }
    if (nd <= plan.max_vertex_axes) {
      n_vert_ = std::size_t{1} << nd;
      structured += static_cast<double>(n_vert_);
    }
    if (structured > static_cast<double>(plan.budget)) {
      throw AxisExplosion(std::to_string(nd) + " varying axes need " + std::to_string(structured) +
                          " grid and vertex points, above the budget of " + std::to_string(plan.budget));
    }
    n_lhs_ = nd > 0 ? plan.random : 0;
    std::mt19937_64 rng(plan.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    lhs_.resize(n_lhs_ * nd);
    std::vector<std::size_t> perm(n_lhs_);
    for (std::size_t k = 0; k < nd; ++k) {
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (std::size_t s = 0; s < n_lhs_; ++s) {
        lhs_[s * nd + k] = (static_cast<double>(perm[s]) + u01(rng)) / static_cast<double>(n_lhs_);
      }
    }
    if (nd == 0) n_grid_ = 1;  // the single point
  }

  std::size_t size() const { return n_grid_ + n_vert_ + n_lhs_; }

  Eigen::VectorXd operator[](std::size_t idx) const {
    Eigen::VectorXd c(static_cast<Eigen::Index>(box_.size()));
    for (std::size_t i = 0; i < box_.size(); ++i) c[static_cast<Eigen::Index>(i)] = box_.lower[i];
    const std::size_t nd = axes_.size();
    auto set = [&](std::size_t k, double frac) {
      const std::size_t a = axes_[k];
      c[static_cast<Eigen::Index>(a)] = box_.lower[a] + frac * (box_.upper[a] - box_.lower[a]);
    };
    if (idx < n_grid_) {
      std::size_t r = idx;
      for (std::size_t k = 0; k < nd; ++k) {
        set(k, static_cast<double>(r % gp_) / static_cast<double>(gp_ - 1));
        r /= gp_;
      }
      return c;
    }
    idx -= n_grid_;
    if (idx < n_vert_) {
      for (std::size_t k = 0; k < nd; ++k) set(k, (idx >> k) & 1u ? 1.0 : 0.0);
      return c;
    }
    idx -= n_vert_;
    for (std::size_t k = 0; k < nd; ++k) set(k, lhs_[idx * nd + k]);
    return c;
  }

  const std::vector<std::size_t>& axes() const { return axes_; }

 private:
  plant::Box box_;
  std::vector<std::size_t> axes_;
  std::size_t gp_ = 5, n_grid_ = 0, n_vert_ = 0, n_lhs_ = 0;
  std::vector<double> lhs_;
};

// -1 marks a point where the map cannot be evaluated.
double norm_at(const ResidualMap& map, const Eigen::VectorXd& c) {
  try {
    const double s = spectral_norm(jacobian_phi(map, c));
    return std::isfinite(s) ? s : -1.0;
  } catch (const Error&) {
    return -1.0;
  }
}

// Compass search for a local maximum of ||Phi|| inside the box.
std::pair<double, Eigen::VectorXd> refine(const ResidualMap& map, const plant::Box& box,
                                          const std::vector<std::size_t>& axes, Eigen::VectorXd c, double f,
                                          std::size_t evals) {
  std::vector<double> step;
  for (std::size_t a : axes) step.push_back(0.25 * (box.upper[a] - box.lower[a]));
  std::size_t used = 0;
  while (used < evals) {
    bool improved = false;
    for (std::size_t k = 0; k < axes.size() && used < evals; ++k) {
      const auto a = static_cast<Eigen::Index>(axes[k]);
      for (double sgn : {1.0, -1.0}) {
        Eigen::VectorXd t = c;
        t[a] = std::clamp(t[a] + sgn * step[k], box.lower[axes[k]], box.upper[axes[k]]);
        if (t[a] == c[a]) continue;
        const double ft = norm_at(map, t);
        ++used;
        if (ft > f) {
          f = ft;
          c = t;
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      bool tiny = true;
      for (std::size_t k = 0; k < step.size(); ++k) {
        step[k] *= 0.5;
        tiny = tiny && step[k] <= 1e-9 * (1.0 + box.upper[axes[k]] - box.lower[axes[k]]);
      }
      if (tiny) break;
    }
  }
  return {f, c};
}

UncertaintyBound bound_impl(const ResidualMap& map, const HyperBox& hb, const plant::Box& omega,
                            std::span<const double> p0, const SamplingPlan& plan, bool parallel) {
  if (hb.chi.size() != map.chi_dim() || hb.v.size() != map.output_count() || omega.size() != map.param_dim() ||
      p0.size() != map.param_dim()) {
    throw Error("hyper-rectangle or parameter box does not match the residual map");
  }
  const plant::Box box = argument_box(hb, omega, p0);
  const SampleSet set(box, plan);
  const auto N = static_cast<std::int64_t>(set.size());
  std::vector<double> norms(static_cast<std::size_t>(N));

#pragma omp parallel for schedule(dynamic, 16) if (parallel)
  for (std::int64_t i = 0; i < N; ++i) {
    norms[static_cast<std::size_t>(i)] = norm_at(map, set[static_cast<std::size_t>(i)]);
  }

  UncertaintyBound b;
  b.samples = set.size();
  b.seed = plan.seed;
  std::size_t best = 0;
  double best_val = -1.0;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (norms[i] < 0) {
      ++b.failed;
    } else if (norms[i] > best_val) {
      best_val = norms[i];
      best = i;
    }
  }
  if (best_val < 0) throw Error("residual map could not be evaluated at any sample");
  b.sampled_max = best_val;
  b.argmax = set[best];
  double rho = best_val;

  if (plan.refine_starts > 0 && !set.axes().empty()) {
    std::vector<std::size_t> order(norms.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t k = std::min(plan.refine_starts, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t c) { return norms[a] > norms[c] || (norms[a] == norms[c] && a < c); });
    std::vector<std::pair<double, Eigen::VectorXd>> found(k);
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
    for (std::int64_t s = 0; s < static_cast<std::int64_t>(k); ++s) {
      const std::size_t idx = order[static_cast<std::size_t>(s)];
      found[static_cast<std::size_t>(s)] = refine(map, box, set.axes(), set[idx], norms[idx], plan.refine_evals);
    }
    for (const auto& [f, c] : found) {
      if (f > rho) {
        rho = f;
        b.argmax = c;
      }
    }
  }
  b.rho = plan.safety * rho;
  return b;
}

}  // namespace

UncertaintyBound bound_rho(const ResidualMap& map, const HyperBox& box, const plant::Box& omega,
                           std::span<const double> p0, const SamplingPlan& plan) {
  return bound_impl(map, box, omega, p0, plan, true);
}

UncertaintyBound bound_rho_serial(const ResidualMap& map, const HyperBox& box, const plant::Box& omega,
                                  std::span<const double> p0, const SamplingPlan& plan) {
  return bound_impl(map, box, omega, p0, plan, false);
}

// ---------------------------------------------------------------------------
// Assembly

std::vector<std::size_t> LinearizedDesignModel::last_states() const {
  std::vector<std::size_t> r;
  std::size_t off = 0;
  for (int b : blocks) {
    off += static_cast<std::size_t>(b);
    r.push_back(off - 1);
  }
  return r;
}

bool controllable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const auto n = A.rows();
  Eigen::MatrixXd K(n, n * B.cols());
  Eigen::MatrixXd Ak = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    K.middleCols(k * B.cols(), B.cols()) = Ak;
    Ak = A * Ak;
  }
  return Eigen::FullPivLU<Eigen::MatrixXd>(K).rank() == n;
}

bool observable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C) {
  return controllable(A.transpose(), C.transpose());
}

LinearizedDesignModel assemble_design_model(const feedlin::BrunovskyModel& bm, double rho,
                                            const AssemblyConventions& conv) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw Error("rho must be finite and nonnegative");
  LinearizedDesignModel d;
  const auto n = bm.A.rows(), m = bm.B.cols();
  d.A = bm.A;
  d.B1 = bm.B;
  d.blocks = bm.blocks;
  d.rho = rho;
  d.E1 = conv.E1.size() == 0 ? Eigen::MatrixXd::Identity(m, m) : conv.E1;
  if (d.E1.rows() != m || d.E1.cols() != m) throw Error("E1 must be m x m");
  const Eigen::FullPivLU<Eigen::MatrixXd> elu(d.E1);
  if (!elu.isInvertible()) throw Error("E1 is singular");

  d.C1bar = Eigen::MatrixXd::Zero(m, n);
  const auto last = d.last_states();
  for (Eigen::Index i = 0; i < m; ++i) d.C1bar(i, static_cast<Eigen::Index>(last[static_cast<std::size_t>(i)])) = rho;
  d.D1bar = rho * Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd Ei = elu.inverse();
  d.C1 = Ei * d.C1bar;
  d.D1 = Ei * d.D1bar;

  d.measured = conv.measured;
  const auto p = static_cast<Eigen::Index>(conv.measured.size());
  if (p == 0) throw Error("at least one measured state is required");
  if (!conv.sensor_scale.empty() && conv.sensor_scale.size() != conv.measured.size()) {
    throw Error("sensor_scale must have one entry per measured state");
  }
  d.sensor_scale = conv.sensor_scale.empty() ? std::vector<double>(conv.measured.size(), 1.0) : conv.sensor_scale;
  d.C2 = Eigen::MatrixXd::Zero(p, n);
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto col = conv.measured[static_cast<std::size_t>(i)];
    if (col >= static_cast<std::size_t>(n)) throw Error("measured index out of range");
    d.C2(i, static_cast<Eigen::Index>(col)) = d.sensor_scale[static_cast<std::size_t>(i)];
  }
  d.B2 = Eigen::MatrixXd::Zero(n, m + p);
  d.B2.leftCols(m) = d.B1 * d.E1;
  d.D2 = Eigen::MatrixXd::Zero(p, m + p);
  d.D2.rightCols(p) = Eigen::MatrixXd::Identity(p, p);

  if (!controllable(d.A, d.B1)) d.warnings.push_back("(A, B1) is not controllable");
  if (!observable(d.A, d.C2)) d.warnings.push_back("(A, C2) is not observable");
  return d;
}

}  // namespace robolin::meanval
