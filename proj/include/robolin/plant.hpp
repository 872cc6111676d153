#pragma once

// Uncertain control-affine MIMO plants
//   x' = f(x, p) + sum_k g_k(x, p) u_k,   y_i = nu_i(x)
// with a nominal parameter vector p0 inside a parameter box Omega.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "robolin/expr.hpp"

namespace robolin::plant {

/// Axis-aligned box; used for parameter sets and sampling regions.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  Box() = default;
  Box(std::vector<double> lo, std::vector<double> hi);

  std::size_t size() const noexcept { return lower.size(); }
  bool contains(std::span<const double> v, double slack = 0.0) const;
  bool interior(std::span<const double> v) const;
  std::vector<double> center() const;
  /// Box scaled about `about` by `factor` (factor > 1 enlarges).
  Box scaled(std::span<const double> about, double factor) const;
};

using ParameterBox = Box;

struct UncertainPlant {
  expr::VariableSpace space;
  std::vector<expr::Expr> f;               // n
  std::vector<std::vector<expr::Expr>> g;  // n rows, m columns; column k is g_k
  std::vector<expr::Expr> outputs;         // m, states only
  std::vector<double> p0;                  // q
  ParameterBox omega;

  std::size_t n() const noexcept { return space.state_count(); }
  std::size_t m() const noexcept { return space.input_count(); }
  std::size_t q() const noexcept { return space.parameter_count(); }

  /// Full variable vector [x, u, p] as used by expr evaluation.
  std::vector<double> bind(std::span<const double> x, std::span<const double> u,
                           std::span<const double> p) const;
};

/// Plant written as expression strings.
struct PlantText {
  std::vector<std::string> states, inputs, parameters;
  std::vector<std::string> f;
  std::vector<std::vector<std::string>> g;  // n rows of m entries
  std::vector<std::string> outputs;
  std::vector<double> p0;
  Box omega;
};

/// Parses and structurally checks a plant.
UncertainPlant parse_plant(const PlantText& text);

/// Checks the structural invariants (dimensions, names, box shape, square
/// plant, outputs free of inputs and parameters, f and g free of inputs).
/// Throws robolin::Error describing the first violation.
void check_structure(const UncertainPlant& plant);

/// Nominal / residual split. Nominal parts have every parameter replaced by
/// its p0 constant; residuals are the symbolic differences and still depend on
/// the parameters (Δp = p - p0 is implicit).
struct DecomposedPlant {
  UncertainPlant plant;
  std::vector<expr::Expr> f0;
  std::vector<std::vector<expr::Expr>> g0;
  std::vector<expr::Expr> df;
  std::vector<std::vector<expr::Expr>> dg;
};

DecomposedPlant decompose(const UncertainPlant& plant);

/// Replacement table binding every parameter of `space` to `values`.
std::vector<std::optional<expr::Expr>> parameter_binding(const expr::VariableSpace& space,
                                                         std::span<const double> values);

struct Check {
  std::string name;
  bool passed = true;
  std::string detail;
  std::vector<double> witness;
};

struct ValidationReport {
  std::vector<Check> checks;
  bool passed() const;
  const Check* find(std::string_view name) const;
};

/// Sampled check of the standing assumptions: equilibrium at the origin that
/// no admissible parameter moves, square plant, p0 interior to Omega.
ValidationReport validate(const UncertainPlant& plant, std::size_t samples, std::uint64_t seed);

/// Uniform draw from a box (degenerate axes return their single value).
std::vector<double> sample_box(const Box& box, std::mt19937_64& rng);

}  // namespace robolin::plant
