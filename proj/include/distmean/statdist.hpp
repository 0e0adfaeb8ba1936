#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace distmean::statdist {

/// Degrees of freedom of a central F distribution.
struct FParams {
    long d1 = 1;  // numerator degrees of freedom
    long d2 = 1;  // denominator degrees of freedom
};

/// Standard normal CDF. |error| is at the erfc level, well below 1e-14.
inline double normal_cdf(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("normal_cdf: non-finite argument");
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

namespace detail {

inline double normal_pdf(double x) {
    return 0.3989422804014326779 * std::exp(-0.5 * x * x);
}

// Acklam's rational approximation of the standard normal quantile,
// |relative error| < 1.15e-9 over (0,1). Used as the Newton seed.
inline double normal_quantile_seed(double q) {
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    if (q < p_low) {
        const double r = std::sqrt(-2.0 * std::log(q));
        return (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
               ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
    }
    if (q > 1.0 - p_low) {
        const double r = std::sqrt(-2.0 * std::log(1.0 - q));
        return -(((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
               ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
    }
    const double r = q - 0.5;
    const double s = r * r;
    return (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * r /
           (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0);
}

}  // namespace detail

/// Standard normal quantile: Acklam seed polished with Newton steps on
/// normal_cdf, so that normal_cdf(normal_quantile(q)) recovers q to well
/// under 1e-12 away from the extreme tails.
inline double normal_quantile(double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("normal_quantile: q must be in (0,1)");
    double x = detail::normal_quantile_seed(q);
    for (int i = 0; i < 2; ++i) {
        const double pdf = detail::normal_pdf(x);
        if (pdf <= 0.0) break;
        x -= (normal_cdf(x) - q) / pdf;
    }
    return x;
}

namespace detail {

// Continued fraction for the regularized incomplete beta (modified Lentz).
// Valid for x < (a+1)/(a+b+2); the caller applies the symmetry switch.
inline double beta_cont_frac(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double rel_tol = 1e-15;
    constexpr int max_iter = 10000;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((qap + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < rel_tol) return h;
    }
    throw std::runtime_error("reg_inc_beta: continued fraction did not converge");
}

// log of the prefactor x^a (1-x)^b / Beta(a,b)
inline double log_beta_prefactor(double a, double b, double x) {
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
           b * std::log1p(-x);
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double reg_inc_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0))
        throw std::invalid_argument("reg_inc_beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("reg_inc_beta: x must be in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    const double bt = std::exp(detail::log_beta_prefactor(a, b, x));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * detail::beta_cont_frac(a, b, x) / a;
    }
    return 1.0 - bt * detail::beta_cont_frac(b, a, 1.0 - x) / b;
}

namespace detail {

inline void validate_fparams(const FParams& fp) {
    if (fp.d1 < 1 || fp.d2 < 1)
        throw std::invalid_argument("FParams: degrees of freedom must be >= 1");
}

inline double f_log_pdf(double x, const FParams& fp) {
    const double d1 = static_cast<double>(fp.d1);
    const double d2 = static_cast<double>(fp.d2);
    return 0.5 * d1 * std::log(d1 / d2) + (0.5 * d1 - 1.0) * std::log(x) -
           0.5 * (d1 + d2) * std::log1p(d1 * x / d2) - std::lgamma(0.5 * d1) -
           std::lgamma(0.5 * d2) + std::lgamma(0.5 * (d1 + d2));
}

}  // namespace detail

/// CDF of the central F distribution with degrees of freedom fp.
inline double f_cdf(double x, const FParams& fp) {
    detail::validate_fparams(fp);
    if (!(x >= 0.0)) throw std::invalid_argument("f_cdf: x must be nonnegative");
    if (std::isinf(x)) return 1.0;
    const double d1 = static_cast<double>(fp.d1);
    const double d2 = static_cast<double>(fp.d2);
    const double u = d1 * x / (d1 * x + d2);
    return reg_inc_beta(0.5 * d1, 0.5 * d2, u);
}

/// Quantile of the central F distribution: bracketed bisection on f_cdf
/// refined with Newton steps, absolute tolerance 1e-12 in probability.
inline double f_quantile(double q, const FParams& fp) {
    detail::validate_fparams(fp);
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("f_quantile: q must be in (0,1)");

    double lo = 0.0;
    double hi = 1.0;
    int expand = 0;
    while (f_cdf(hi, fp) < q) {
        lo = hi;
        hi *= 2.0;
        if (++expand > 1200) throw std::runtime_error("f_quantile: failed to bracket");
    }

    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        mid = 0.5 * (lo + hi);
        const double err = f_cdf(mid, fp) - q;
        if (std::fabs(err) <= 1e-12 || (hi - lo) <= 1e-15 * std::max(1.0, mid)) break;
        if (err < 0.0)
            lo = mid;
        else
            hi = mid;
    }

    double x = mid;
    for (int i = 0; i < 3; ++i) {
        if (x <= 0.0) break;
        const double pdf = std::exp(detail::f_log_pdf(x, fp));
        if (!(pdf > 0.0)) break;
        double next = x - (f_cdf(x, fp) - q) / pdf;
        if (next <= lo || next >= hi) break;  // keep the bracket
        x = next;
    }
    return x;
}

}  // namespace distmean::statdist
