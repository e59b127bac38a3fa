#pragma once

#include <cmath>
#include <string>

#include "dissipkit/supply.hpp"
#include "dissipkit/systems.hpp"

namespace dissipkit {

inline OutputMap output_map(const BenchmarkSystem& sys) {
  return [sys](const VectorXd& x, const VectorXd& u) { return sys.output(x, u); };
}

/// Finite-gain supply beta u^2 - y^2 with y = x1 (polynomial map).
inline SupplyRateSpec case1_supply(double beta) {
  QsrSupply qsr{MatrixXd::Constant(1, 1, -1.0), MatrixXd::Zero(1, 1), MatrixXd::Constant(1, 1, beta)};
  return SupplyRateSpec::from_qsr(2, 1, qsr, output_map(BenchmarkSystem(SystemId::Poly1)), "case1");
}

/// beta sin^2(y1) + y2 u with y = x (pendulum).
inline SupplyRateSpec case2_supply(double beta) {
  FactorList f;
  f.push_back({[](const VectorXd& x, const VectorXd&) { return std::sin(x(0)); },
               [beta](const VectorXd& x, const VectorXd&) { return beta * std::sin(x(0)); }, "sin_y1"});
  f.push_back({[](const VectorXd& x, const VectorXd&) { return x(1); },
               [](const VectorXd&, const VectorXd& u) { return u(0); }, "y2_u"});
  return SupplyRateSpec(2, 1, std::move(f), "case2");
}

/// q y^2 + y u with y = x2 (bioreactor).
inline SupplyRateSpec case3_supply(double q) {
  QsrSupply qsr{MatrixXd::Constant(1, 1, q), MatrixXd::Constant(1, 1, 0.5), MatrixXd::Zero(1, 1)};
  return SupplyRateSpec::from_qsr(2, 1, qsr, output_map(BenchmarkSystem(SystemId::Bioreactor)), "case3");
}

}  // namespace dissipkit
