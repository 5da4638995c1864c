#include "switchcert/dwell.hpp"

#include <cmath>
#include <string>

#include "switchcert/errors.hpp"

namespace switchcert {

namespace {

void check(double zeta, double kappa) {
  if (!(zeta >= 1.0) || !std::isfinite(zeta)) {
    throw ValidationError("dwell: zeta must be >= 1, got " + std::to_string(zeta));
  }
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ValidationError("dwell: kappa must be positive");
}

void check_tau(double tau_d) {
  if (!(tau_d > 0.0) || !std::isfinite(tau_d)) throw ValidationError("dwell: tau_d must be positive");
}

}  // namespace

double dwell_time_min(double zeta, double kappa) {
  check(zeta, kappa);
  return std::log(zeta) / kappa;
}

double contraction_factor(double zeta, double kappa, double tau_d) {
  check(zeta, kappa);
  check_tau(tau_d);
  return zeta * std::exp(-kappa * tau_d);
}

double iss_decay_rate(double zeta, double kappa, double tau_d) {
  check(zeta, kappa);
  check_tau(tau_d);
  return kappa - std::log(zeta) / tau_d;
}

double iss_gain(double zeta, double kappa, double tau_d) {
  const double rho = contraction_factor(zeta, kappa, tau_d);
  if (rho >= 1.0) {
    throw ValidationError("dwell: contraction factor " + std::to_string(rho) +
                          " >= 1; increase tau_d above " +
                          std::to_string(dwell_time_min(zeta, kappa)));
  }
  return (zeta / (1.0 - rho) + 1.0) / kappa;
}

}  // namespace switchcert
