#include "robolin/plant.hpp"

#include <cmath>
#include <sstream>

namespace robolin::plant {

using expr::Expr;

Box::Box(std::vector<double> lo, std::vector<double> hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) throw Error("box bounds have different lengths");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw Error("box axis " + std::to_string(i) + " is not finite");
    }
    if (lower[i] > upper[i]) throw Error("box axis " + std::to_string(i) + " has lower > upper");
  }
}

bool Box::contains(std::span<const double> v, double slack) const {
  if (v.size() != size()) return false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double tol = slack * (1.0 + std::max(std::abs(lower[i]), std::abs(upper[i])));
    if (v[i] < lower[i] - tol || v[i] > upper[i] + tol) return false;
  }
  return true;
}

bool Box::interior(std::span<const double> v) const {
  if (v.size() != size()) return false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > lower[i] && v[i] < upper[i])) return false;
  }
  return true;
}

std::vector<double> Box::center() const {
  std::vector<double> c(size());
  for (std::size_t i = 0; i < size(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
  return c;
}

Box Box::scaled(std::span<const double> about, double factor) const {
  Box b = *this;
  for (std::size_t i = 0; i < size(); ++i) {
    b.lower[i] = about[i] + factor * (lower[i] - about[i]);
    b.upper[i] = about[i] + factor * (upper[i] - about[i]);
  }
  return b;
}

std::vector<double> UncertainPlant::bind(std::span<const double> x, std::span<const double> u,
                                         std::span<const double> p) const {
  std::vector<double> v(space.size(), 0.0);
  std::copy(x.begin(), x.end(), v.begin());
  std::copy(u.begin(), u.end(), v.begin() + static_cast<std::ptrdiff_t>(n()));
  std::copy(p.begin(), p.end(), v.begin() + static_cast<std::ptrdiff_t>(n() + m()));
  return v;
}

namespace {

bool uses_kind(const Expr& e, const expr::VariableSpace& space, expr::VariableSpace::Kind kind) {
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (space.kind(i) == kind && expr::depends_on(e, i)) return true;
  }
  return false;
}

}  // namespace

void check_structure(const UncertainPlant& plant) {
  const std::size_t n = plant.n(), m = plant.m(), q = plant.q();
  if (n == 0) throw Error("plant has no states");
  if (plant.f.size() != n) throw Error("f has " + std::to_string(plant.f.size()) + " entries, expected " + std::to_string(n));
  if (plant.g.size() != n) throw Error("g has " + std::to_string(plant.g.size()) + " rows, expected " + std::to_string(n));
  for (const auto& row : plant.g) {
    if (row.size() != m) throw Error("g row has " + std::to_string(row.size()) + " columns, expected " + std::to_string(m));
  }
  if (plant.outputs.size() != m) {
    throw Error("plant has " + std::to_string(m) + " inputs but " + std::to_string(plant.outputs.size()) + " outputs");
  }
  if (plant.p0.size() != q) throw Error("p0 has wrong length");
  if (plant.omega.size() != q) throw Error("Omega has wrong length");
  using K = expr::VariableSpace::Kind;
  for (std::size_t i = 0; i < n; ++i) {
    if (uses_kind(plant.f[i], plant.space, K::kInput)) throw Error("f[" + std::to_string(i) + "] depends on an input");
    for (std::size_t k = 0; k < m; ++k) {
      if (uses_kind(plant.g[i][k], plant.space, K::kInput)) throw Error("g depends on an input");
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (uses_kind(plant.outputs[i], plant.space, K::kInput) ||
        uses_kind(plant.outputs[i], plant.space, K::kParameter)) {
      throw Error("output " + std::to_string(i) + " must depend on states only");
    }
  }
}

UncertainPlant parse_plant(const PlantText& text) {
  UncertainPlant p;
  p.space = expr::VariableSpace(text.states, text.inputs, text.parameters);
  for (const auto& s : text.f) p.f.push_back(expr::parse(s, p.space));
  for (const auto& row : text.g) {
    std::vector<Expr> r;
    for (const auto& s : row) r.push_back(expr::parse(s, p.space));
    p.g.push_back(std::move(r));
  }
  for (const auto& s : text.outputs) p.outputs.push_back(expr::parse(s, p.space));
  p.p0 = text.p0;
  p.omega = text.omega;
  check_structure(p);
  return p;
}

std::vector<std::optional<Expr>> parameter_binding(const expr::VariableSpace& space,
                                                   std::span<const double> values) {
  std::vector<std::optional<Expr>> rep(space.size());
  for (std::size_t k = 0; k < space.parameter_count(); ++k) {
    rep[space.parameter(k)] = Expr::constant(values[k]);
  }
  return rep;
}

DecomposedPlant decompose(const UncertainPlant& plant) {
  DecomposedPlant d;
  d.plant = plant;
  const auto rep = parameter_binding(plant.space, plant.p0);
  const std::size_t n = plant.n(), m = plant.m();
  d.f0.resize(n);
  d.df.resize(n);
  d.g0.assign(n, std::vector<Expr>(m));
  d.dg.assign(n, std::vector<Expr>(m));
  for (std::size_t i = 0; i < n; ++i) {
    d.f0[i] = expr::substitute(plant.f[i], rep);
    d.df[i] = plant.f[i] - d.f0[i];
    for (std::size_t k = 0; k < m; ++k) {
      d.g0[i][k] = expr::substitute(plant.g[i][k], rep);
      d.dg[i][k] = plant.g[i][k] - d.g0[i][k];
    }
  }
  return d;
}

std::vector<double> sample_box(const Box& box, std::mt19937_64& rng) {
  std::vector<double> v(box.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < box.size(); ++i) {
    v[i] = box.lower[i] + u(rng) * (box.upper[i] - box.lower[i]);
  }
  return v;
}

bool ValidationReport::passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

const Check* ValidationReport::find(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

ValidationReport validate(const UncertainPlant& plant, std::size_t samples, std::uint64_t seed) {
  ValidationReport report;

  Check counts{"square", true, "", {}};
  if (plant.outputs.size() != plant.m()) {
    counts.passed = false;
    counts.detail = std::to_string(plant.m()) + " inputs vs " + std::to_string(plant.outputs.size()) + " outputs";
  } else {
    counts.detail = "m = " + std::to_string(plant.m());
  }
  report.checks.push_back(counts);

  Check interior{"p0_interior", true, "", {}};
  if (!plant.omega.interior(plant.p0)) {
    interior.passed = false;
    interior.detail = "p0 is not strictly inside Omega";
    interior.witness = plant.p0;
  }
  report.checks.push_back(interior);

  Check eq{"equilibrium", true, "", {}};
  if (plant.f.size() == plant.n() && plant.omega.size() == plant.q()) {
    const DecomposedPlant d = decompose(plant);
    std::vector<Expr> outs = plant.f;
    outs.insert(outs.end(), d.df.begin(), d.df.end());
    const expr::Tape tape(outs);
    std::mt19937_64 rng(seed);
    const std::vector<double> zeros_x(plant.n(), 0.0), zeros_u(plant.m(), 0.0);
    std::vector<double> out(outs.size()), scratch;
    for (std::size_t s = 0; s <= samples && eq.passed; ++s) {
      const std::vector<double> p = s == 0 ? plant.p0 : sample_box(plant.omega, rng);
      tape.eval(plant.bind(zeros_x, zeros_u, p), out, scratch);
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(std::abs(out[i]) <= 1e-10)) {
          std::ostringstream msg;
          msg << (i < plant.n() ? "f" : "df") << "[" << i % plant.n() << "](0, p) = " << out[i];
          eq.passed = false;
          eq.detail = msg.str();
          eq.witness = p;
          break;
        }
      }
    }
    if (eq.passed) eq.detail = std::to_string(samples) + " parameter samples";
  } else {
    eq.passed = false;
    eq.detail = "malformed plant";
  }
  report.checks.push_back(eq);
  return report;
}

}  // namespace robolin::plant
