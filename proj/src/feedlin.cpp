#include "robolin/feedlin.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace robolin::feedlin {

using expr::Expr;

DegreeUndetermined::DegreeUndetermined(std::size_t output)
    : Error("relative degree of output " + std::to_string(output) + " is not determined (no j <= n qualifies)"),
      output_(output) {}

namespace {

std::string format_state(const std::vector<double>& x) {
  std::ostringstream s;
  s << "[";
  for (std::size_t i = 0; i < x.size(); ++i) s << (i ? ", " : "") << x[i];
  s << "]";
  return s.str();
}

}  // namespace

SingularDecoupling::SingularDecoupling(std::vector<double> state, double condition)
    : Error("decoupling matrix is singular (cond " + std::to_string(condition) + ") at x = " + format_state(state)),
      state_(std::move(state)),
      condition_(condition) {}

Expr lie_derivative(const Expr& h, std::span<const Expr> field) {
  Expr sum;
  for (std::size_t j = 0; j < field.size(); ++j) {
    if (field[j].is_zero()) continue;
    const Expr dh = expr::diff(h, j);
    if (dh.is_zero()) continue;
    sum = sum + dh * field[j];
  }
  return sum;
}

int RelativeDegreeProfile::total() const {
  int t = 0;
  for (int ri : r) t += ri;
  return t;
}

namespace {

std::vector<Expr> column(const std::vector<std::vector<Expr>>& g, std::size_t k) {
  std::vector<Expr> c;
  c.reserve(g.size());
  for (const auto& row : g) c.push_back(row[k]);
  return c;
}

}  // namespace

LieChain build_chain(std::span<const Expr> f, const std::vector<std::vector<Expr>>& g,
                     std::span<const Expr> outputs, std::span<const int> r) {
  const std::size_t m = outputs.size();
  LieChain chain;
  chain.lf.resize(m);
  chain.f_star.resize(m);
  chain.g_star.assign(m, std::vector<Expr>(m));
  std::vector<std::vector<Expr>> cols;
  for (std::size_t k = 0; k < m; ++k) cols.push_back(column(g, k));
  for (std::size_t i = 0; i < m; ++i) {
    chain.lf[i].push_back(outputs[i]);
    for (int j = 1; j <= r[i]; ++j) chain.lf[i].push_back(lie_derivative(chain.lf[i].back(), f));
    chain.f_star[i] = chain.lf[i][static_cast<std::size_t>(r[i])];
    for (std::size_t k = 0; k < m; ++k) {
      chain.g_star[i][k] = lie_derivative(chain.lf[i][static_cast<std::size_t>(r[i] - 1)], cols[k]);
    }
  }
  return chain;
}

RelativeDegreeResult relative_degree(const plant::DecomposedPlant& dp, const plant::Box& region,
                                     std::uint64_t seed, std::size_t samples) {
  const auto& p = dp.plant;
  const std::size_t n = p.n(), m = p.m();
  if (region.size() != n) throw Error("sampling region must have one axis per state");

  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> points;
  const std::vector<double> zeros_u(m, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    points.push_back(p.bind(plant::sample_box(region, rng), zeros_u, p.p0));
  }

  std::vector<std::vector<Expr>> cols;
  for (std::size_t k = 0; k < m; ++k) cols.push_back(column(dp.g0, k));

  RelativeDegreeResult result;
  result.profile.r.assign(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    Expr h = p.outputs[i];
    for (std::size_t j = 1; j <= n && result.profile.r[i] == 0; ++j) {
      std::vector<Expr> outs;
      for (std::size_t k = 0; k < m; ++k) outs.push_back(lie_derivative(h, cols[k]));
      const Expr next = lie_derivative(h, dp.f0);
      bool all_zero = true;
      for (const auto& e : outs) all_zero = all_zero && e.is_zero();
      if (!all_zero) {
        outs.push_back(next);
        const expr::Tape tape(outs);
        std::vector<double> val(outs.size()), scratch;
        for (const auto& pt : points) {
          try {
            tape.eval(pt, val, scratch);
          } catch (const expr::DomainError&) {
            continue;
          }
          const double scale = 1.0 + std::abs(val[m]);
          bool hit = false;
          for (std::size_t k = 0; k < m; ++k) hit = hit || std::abs(val[k]) > 1e-8 * scale;
          if (hit) {
            result.profile.r[i] = static_cast<int>(j);
            break;
          }
        }
      }
      h = next;
    }
    if (result.profile.r[i] == 0) throw DegreeUndetermined(i);
  }

  result.chain = build_chain(dp.f0, dp.g0, p.outputs, result.profile.r);

  std::vector<Expr> gs;
  for (const auto& row : result.chain.g_star) gs.insert(gs.end(), row.begin(), row.end());
  const expr::Tape tape(gs);
  std::vector<double> val(gs.size()), scratch;
  for (const auto& pt : points) {
    try {
      tape.eval(pt, val, scratch);
    } catch (const expr::DomainError&) {
      continue;
    }
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> g(
        val.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    if (!(std::abs(g.determinant()) >= 1e-10)) {
      result.singular_points.emplace_back(pt.begin(), pt.begin() + static_cast<std::ptrdiff_t>(n));
    }
  }
  return result;
}

LinearizingLaw::LinearizingLaw(const LieChain& chain, const expr::VariableSpace& space)
    : vars_(space.size()), n_(space.state_count()), m_(chain.f_star.size()) {
  std::vector<Expr> outs = chain.f_star;
  for (const auto& row : chain.g_star) outs.insert(outs.end(), row.begin(), row.end());
  tape_ = std::make_shared<const expr::Tape>(outs);
}

void LinearizingLaw::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& f_star, Eigen::MatrixXd& g_star) const {
  std::vector<double> vars(vars_, 0.0), out(m_ + m_ * m_), scratch;
  for (std::size_t i = 0; i < n_; ++i) vars[i] = x[static_cast<Eigen::Index>(i)];
  tape_->eval(vars, out, scratch);
  const auto m = static_cast<Eigen::Index>(m_);
  f_star = Eigen::Map<const Eigen::VectorXd>(out.data(), m);
  g_star = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out.data() + m_, m, m);
}

Eigen::VectorXd LinearizingLaw::control(const Eigen::VectorXd& x, const Eigen::VectorXd& v) const {
  Eigen::VectorXd fs;
  Eigen::MatrixXd gs;
  evaluate(x, fs, gs);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(gs);
  const auto& s = svd.singularValues();
  const double cond = s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e12)) throw SingularDecoupling(std::vector<double>(x.data(), x.data() + x.size()), cond);
  return gs.partialPivLu().solve(v - fs);
}

Eigen::VectorXd linearizing_control(const LieChain& chain, const expr::VariableSpace& space,
                                    const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
  return LinearizingLaw(chain, space).control(x, v);
}

BrunovskyModel brunovsky_form(const RelativeDegreeProfile& profile, bool with_integrators) {
  BrunovskyModel b;
  int total = 0;
  for (int ri : profile.r) {
    if (ri < 1) throw Error("relative degrees must be positive");
    b.blocks.push_back(ri + (with_integrators ? 1 : 0));
    total += b.blocks.back();
  }
  b.A = Eigen::MatrixXd::Zero(total, total);
  b.B = Eigen::MatrixXd::Zero(total, static_cast<Eigen::Index>(profile.r.size()));
  int off = 0;
  for (std::size_t i = 0; i < b.blocks.size(); ++i) {
    const int len = b.blocks[i];
    for (int j = 0; j + 1 < len; ++j) b.A(off + j, off + j + 1) = 1.0;
    b.B(off + len - 1, static_cast<Eigen::Index>(i)) = 1.0;
    off += len;
  }
  return b;
}

// ---------------------------------------------------------------------------

Diffeomorphism::Diffeomorphism(const plant::DecomposedPlant& dp, const RelativeDegreeProfile& profile,
                               bool with_integrators)
    : r_(profile.r), integrators_(with_integrators) {
  const auto& p = dp.plant;
  n_ = p.n();
  m_ = p.m();
  q_ = p.q();
  vars_ = p.space.size();
  if (r_.size() != m_) throw Error("relative degree profile does not match the output count");
  if (!profile.full(n_)) {
    throw NotFullRelativeDegree("relative degrees sum to " + std::to_string(profile.total()) +
                                " but the plant has " + std::to_string(n_) + " states");
  }
  std::size_t off = 0;
  for (std::size_t i = 0; i < m_; ++i) {
    offsets_.push_back(off);
    const std::size_t first = off + (integrators_ ? 1 : 0);
    Expr hu = p.outputs[i], hn = p.outputs[i];
    for (int j = 0; j < r_[i]; ++j) {
      core_uncertain_.push_back(hu);
      core_nominal_.push_back(hn);
      core_pos_.push_back(first + static_cast<std::size_t>(j));
      if (j + 1 < r_[i]) {
        hu = lie_derivative(hu, p.f);
        hn = lie_derivative(hn, dp.f0);
      }
    }
    off = first + static_cast<std::size_t>(r_[i]);
  }
  dim_ = off;

  auto compile = [&](const std::vector<Expr>& core) {
    std::vector<Expr> outs = core;
    for (const auto& e : core) {
      for (std::size_t j = 0; j < n_; ++j) outs.push_back(expr::diff(e, j));
    }
    for (const auto& e : core) {
      for (std::size_t k = 0; k < q_; ++k) outs.push_back(expr::diff(e, p.space.parameter(k)));
    }
    return std::make_shared<const expr::Tape>(outs);
  };
  tape_uncertain_ = compile(core_uncertain_);
  tape_nominal_ = compile(core_nominal_);
}

std::size_t Diffeomorphism::last_index(std::size_t i) const {
  return output_index(i) + static_cast<std::size_t>(r_.at(i)) - 1;
}

std::vector<double> Diffeomorphism::bind(const Eigen::VectorXd& x, const Eigen::VectorXd& p) const {
  std::vector<double> v(vars_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) v[i] = x[static_cast<Eigen::Index>(i)];
  for (std::size_t k = 0; k < q_ && k < static_cast<std::size_t>(p.size()); ++k) {
    v[n_ + m_ + k] = p[static_cast<Eigen::Index>(k)];
  }
  return v;
}

Eigen::VectorXd Diffeomorphism::core(const Eigen::VectorXd& x, const Eigen::VectorXd& p, bool nominal) const {
  const std::size_t N = core_nominal_.size();
  std::vector<double> out((nominal ? tape_nominal_ : tape_uncertain_)->output_count()), scratch;
  (nominal ? tape_nominal_ : tape_uncertain_)->eval(bind(x, p), out, scratch);
  return Eigen::Map<const Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(N));
}

void Diffeomorphism::core_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& p, bool nominal,
                                   Eigen::MatrixXd& tx, Eigen::MatrixXd* tp) const {
  const auto& tape = nominal ? tape_nominal_ : tape_uncertain_;
  const std::size_t N = core_nominal_.size();
  std::vector<double> out(tape->output_count()), scratch;
  tape->eval(bind(x, p), out, scratch);
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  tx = Eigen::Map<const RowMat>(out.data() + N, static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(n_));
  if (tp) {
    *tp = Eigen::Map<const RowMat>(out.data() + N + N * n_, static_cast<Eigen::Index>(N),
                                   static_cast<Eigen::Index>(q_));
  }
}

Eigen::VectorXd Diffeomorphism::apply(const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                                      const Eigen::VectorXd& commands, const Eigen::VectorXd& integrals,
                                      bool nominal) const {
  const Eigen::VectorXd c = core(x, p, nominal);
  Eigen::VectorXd chi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t k = 0; k < core_pos_.size(); ++k) chi[static_cast<Eigen::Index>(core_pos_[k])] = c[static_cast<Eigen::Index>(k)];
  for (std::size_t i = 0; i < m_; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (commands.size() > 0) chi[static_cast<Eigen::Index>(output_index(i))] -= commands[ii];
    if (integrators_) chi[static_cast<Eigen::Index>(offsets_[i])] = integrals.size() > 0 ? integrals[ii] : 0.0;
  }
  return chi;
}

Eigen::VectorXd Diffeomorphism::invert(const Eigen::VectorXd& target, const Eigen::VectorXd& p,
                                       const Eigen::VectorXd& guess, bool nominal) const {
  Eigen::VectorXd x = guess;
  Eigen::MatrixXd tx;
  Eigen::VectorXd resid = core(x, p, nominal) - target;
  const double scale = 1.0 + target.lpNorm<Eigen::Infinity>();
  for (int iter = 0; iter < 60; ++iter) {
    if (resid.lpNorm<Eigen::Infinity>() <= 1e-11 * scale) return x;
    core_jacobian(x, p, nominal, tx, nullptr);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(tx);
    if (!lu.isInvertible()) break;
    const Eigen::VectorXd dx = lu.solve(resid);
    double step = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Eigen::VectorXd trial = x - step * dx;
      Eigen::VectorXd r;
      try {
        r = core(trial, p, nominal) - target;
      } catch (const expr::DomainError&) {
        step *= 0.5;
        continue;
      }
      if (r.allFinite() && r.norm() < resid.norm()) {
        x = trial;
        resid = r;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      if (dx.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + x.lpNorm<Eigen::Infinity>()) &&
          resid.lpNorm<Eigen::Infinity>() <= 1e-8 * scale) {
        return x;
      }
      break;
    }
  }
  if (resid.lpNorm<Eigen::Infinity>() <= 1e-9 * scale) return x;
  std::ostringstream msg;
  msg << "transform inversion did not converge (residual " << resid.lpNorm<Eigen::Infinity>() << ")";
  throw TransformInversionError(msg.str());
}

Diffeomorphism build_transform(const plant::DecomposedPlant& plant, const RelativeDegreeProfile& profile,
                               bool with_integrators) {
  return Diffeomorphism(plant, profile, with_integrators);
}

}  // namespace robolin::feedlin
