#pragma once

#include <random>

#include "robolin/expr.hpp"

namespace robolin::testing {

// Random expressions over x0..x(k-1) that stay inside every operator's domain
// for arguments in [-1, 1]: ln/sqrt see e^2 + c, divisors are e^2 + c, tan and
// exp only see sin-bounded arguments.
class RandomExprGen {
 public:
  RandomExprGen(std::size_t vars, std::uint64_t seed) : vars_(vars), rng_(seed) {}

  expr::Expr make(int depth) {
    using namespace expr;
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 13);
    const int k = pick(rng_);
    if (k == 0 || depth <= 0) {
      if (std::uniform_int_distribution<int>(0, 3)(rng_) == 0) {
        return Expr::constant(std::uniform_real_distribution<double>(-2.0, 2.0)(rng_));
      }
      const std::size_t v = std::uniform_int_distribution<std::size_t>(0, vars_ - 1)(rng_);
      return Expr::variable(v, "x" + std::to_string(v));
    }
    if (k == 1) {
      const std::size_t v = std::uniform_int_distribution<std::size_t>(0, vars_ - 1)(rng_);
      return Expr::variable(v, "x" + std::to_string(v));
    }
    const Expr a = make(depth - 1);
    switch (k) {
      case 2: return a + make(depth - 1);
      case 3: return a - make(depth - 1);
      case 4: return 0.5 * a * sin(make(depth - 1));
      case 5: return a / (pow(make(depth - 1), 2) + 1.0);
      case 6: return -a;
      case 7: return pow(sin(a), std::uniform_int_distribution<int>(2, 3)(rng_)) + pow(cos(a) + 2.0, -1);
      case 8: return sin(a);
      case 9: return cos(a);
      case 10: return tan(0.5 * sin(a));
      case 11: return exp(sin(a));
      case 12: return ln(pow(a, 2) + 0.5) + sqrt(pow(a, 2) + 0.25);
      default: return abs(pow(sin(a), 2) + 0.1);
    }
  }

  std::vector<double> point() {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x(vars_);
    for (double& xi : x) xi = u(rng_);
    return x;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::size_t vars_;
  std::mt19937_64 rng_;
};

}  // namespace robolin::testing
