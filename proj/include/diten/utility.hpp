#pragma once

#include <span>

#include "diten/config.hpp"

namespace diten {

/// L1 distance between a user's label distribution and the global one. Always in [0, 2].
/// Throws std::domain_error on length mismatch or if either input is not a distribution.
double emd(std::span<const double> p_user, std::span<const double> p_all);

/// EMD penalty factor: a4 * exp(-((a5 + phi) / a6)^2).
double upsilon(double phi, const UtilityCoefficients& c);

/// Closed-form accuracy predictor rho(phi, D) = upsilon - a1 * exp(-a2 * (a3 * D)^upsilon),
/// D in samples. Not clamped; callers that report it clamp to [0, 1].
double data_utility(double phi, double samples, const UtilityCoefficients& c);

struct ScalarDerivatives {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

/// rho and its first two derivatives with respect to the sample count.
ScalarDerivatives data_utility_derivatives(double phi, double samples, const UtilityCoefficients& c);

/// Sigmoid normalization 2 / (1 + exp(-x / (2 f0))) - 1, i.e. tanh(x / (4 f0)).
double norm(double x, double f0);
ScalarDerivatives norm_derivatives(double x, double f0);

}  // namespace diten
