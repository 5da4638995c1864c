#pragma once

namespace switchcert {

/// Minimum dwell time ln(zeta)/kappa. Requires zeta >= 1 and kappa > 0.
double dwell_time_min(double zeta, double kappa);

/// Per-switch contraction rho = zeta exp(-kappa tau_d); below 1 iff tau_d exceeds the dwell bound.
double contraction_factor(double zeta, double kappa, double tau_d);

/// Decay rate lambda = kappa - ln(zeta)/tau_d of the switched ISS estimate.
double iss_decay_rate(double zeta, double kappa, double tau_d);

/// Disturbance gain gamma0 = (zeta/(1 - rho) + 1)/kappa. Throws ValidationError when rho >= 1.
double iss_gain(double zeta, double kappa, double tau_d);

}  // namespace switchcert
