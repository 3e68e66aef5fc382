#pragma once

// Reference implementations used only by the tests. Written from the defining
// integrals so that they share no code with the library.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace oracle {

inline double normal_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

// sigma = scale / sqrt(chi^2_shape)
inline double inverse_gamma_sigma_pdf(double sigma, double shape, double scale) {
    if (sigma <= 0.0) return 0.0;
    const double log_d = (1.0 - shape / 2.0) * std::log(2.0) - std::lgamma(shape / 2.0) + shape * std::log(scale) -
                         (shape + 1.0) * std::log(sigma) - scale * scale / (2.0 * sigma * sigma);
    return std::exp(log_d);
}

template <class F>
double integrate_line(F f) {
    boost::math::quadrature::tanh_sinh<double> ts;
    return ts.integrate(f, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
}

template <class F>
double integrate_positive(F f) {
    boost::math::quadrature::exp_sinh<double> es;
    return es.integrate(f, 0.0, std::numeric_limits<double>::infinity());
}

template <class F>
double integrate(F f, double lo, double hi) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-13);
}

// sigma integral over a finite window around the bulk of an inverse-Gamma law, in log sigma.
template <class F>
double integrate_sigma(F f, double lo, double hi) {
    auto g = [&](double u) {
        const double s = std::exp(u);
        return f(s) * s;
    };
    return integrate(g, std::log(lo), std::log(hi));
}

}  // namespace oracle
