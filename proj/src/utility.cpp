#include "diten/utility.hpp"

#include <cmath>
#include <stdexcept>

namespace diten {

namespace {

void require_distribution(std::span<const double> p, const char* name) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw std::domain_error(std::string("emd: negative entry in ") + name);
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::domain_error(std::string("emd: ") + name + " does not sum to 1");
}

}  // namespace

double emd(std::span<const double> p_user, std::span<const double> p_all) {
    if (p_user.size() != p_all.size()) throw std::domain_error("emd: length mismatch");
    require_distribution(p_user, "p_user");
    require_distribution(p_all, "p_all");
    double d = 0.0;
    for (std::size_t i = 0; i < p_user.size(); ++i) d += std::abs(p_user[i] - p_all[i]);
    return d;
}

double upsilon(double phi, const UtilityCoefficients& c) {
    const double r = (c.a5 + phi) / c.a6;
    return c.a4 * std::exp(-r * r);
}

double data_utility(double phi, double samples, const UtilityCoefficients& c) {
    if (!(samples > 0.0)) throw std::domain_error("data_utility: sample count must be positive");
    const double u = upsilon(phi, c);
    return u - c.a1 * std::exp(-c.a2 * std::pow(c.a3 * samples, u));
}

ScalarDerivatives data_utility_derivatives(double phi, double samples, const UtilityCoefficients& c) {
    if (!(samples > 0.0)) throw std::domain_error("data_utility: sample count must be positive");
    const double u = upsilon(phi, c);
    const double z = c.a3 * samples;
    const double zu = std::pow(z, u);
    const double e = std::exp(-c.a2 * zu);
    ScalarDerivatives out;
    out.value = u - c.a1 * e;
    // d/dD of -a1 exp(-a2 z^u) with z = a3 D
    const double k = c.a1 * c.a2 * u * e * zu;  // a1 a2 u z^u e
    out.d1 = k * c.a3 / z;
    out.d2 = k * c.a3 * c.a3 / (z * z) * ((u - 1.0) - c.a2 * u * zu);
    return out;
}

double norm(double x, double f0) {
    if (!(f0 > 0.0)) throw std::domain_error("norm: f0 must be positive");
    return std::tanh(x / (4.0 * f0));
}

ScalarDerivatives norm_derivatives(double x, double f0) {
    if (!(f0 > 0.0)) throw std::domain_error("norm: f0 must be positive");
    const double t = std::tanh(x / (4.0 * f0));
    const double sech2 = 1.0 - t * t;
    return {t, sech2 / (4.0 * f0), -sech2 * t / (8.0 * f0 * f0)};
}

}  // namespace diten
