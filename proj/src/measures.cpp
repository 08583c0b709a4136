#include "relsyn/measures.hpp"

#include <cmath>
#include <stdexcept>

namespace relsyn {

double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

namespace {

// Acklam's rational approximation, then one Halley step against std_normal_cdf.
double quantile_acklam(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > phigh) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

}  // namespace

double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("std_normal_quantile: p outside (0,1)");
    double x = quantile_acklam(p);
    // Halley refinement.
    for (int i = 0; i < 2; ++i) {
        double e = std_normal_cdf(x) - p;
        double u = e / std_normal_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

void GaussianMeasure::validate() const {
    if (var.size() != mean.size()) throw std::invalid_argument("GaussianMeasure: var/mean size mismatch");
    for (double v : var)
        if (!(v > 0.0)) throw std::invalid_argument("GaussianMeasure: variances must be positive");
    if (support && support->dim() != mean.size())
        throw std::invalid_argument("GaussianMeasure: support dim mismatch");
}

namespace {

// Mass of N(mu, sigma^2) on [lo, hi]; endpoints may be infinite.
double mass_1d(double mu, double sigma, double lo, double hi) {
    double zl = std::isfinite(lo) ? (lo - mu) / sigma : -kInf;
    double zh = std::isfinite(hi) ? (hi - mu) / sigma : kInf;
    double cl = std::isinf(zl) ? (zl < 0 ? 0.0 : 1.0) : std_normal_cdf(zl);
    double ch = std::isinf(zh) ? (zh < 0 ? 0.0 : 1.0) : std_normal_cdf(zh);
    return std::max(0.0, ch - cl);
}

}  // namespace

double support_mass(const GaussianMeasure& g) {
    if (!g.truncated()) return 1.0;
    double m = 1.0;
    for (size_t d = 0; d < g.dim(); ++d)
        m *= mass_1d(g.mean[d], std::sqrt(g.var[d]), g.support->lo[d], g.support->hi[d]);
    return m;
}

double cell_mass(const GaussianMeasure& g, const Box& cell) {
    g.validate();
    if (cell.dim() != g.dim()) throw std::invalid_argument("cell_mass: cell dim mismatch");
    double num = 1.0;
    for (size_t d = 0; d < g.dim(); ++d) {
        double lo = cell.lo[d], hi = cell.hi[d];
        if (g.truncated()) {
            lo = std::max(lo, g.support->lo[d]);
            hi = std::min(hi, g.support->hi[d]);
            if (lo > hi) return 0.0;
        }
        num *= mass_1d(g.mean[d], std::sqrt(g.var[d]), lo, hi);
    }
    if (!g.truncated()) return num;
    double den = support_mass(g);
    if (den <= 0.0) throw std::domain_error("cell_mass: support has zero mass");
    return num / den;
}

double deficiency_from_distance(double c) {
    if (c < 0.0) throw std::invalid_argument("deficiency_from_distance: negative distance");
    return 1.0 - 2.0 * std_normal_cdf(-0.5 * c);
}

double coupling_deficiency(const std::vector<double>& shift,
                           const std::vector<double>& var, NormMode mode) {
    if (shift.size() != var.size())
        throw std::invalid_argument("coupling_deficiency: shift/var size mismatch");
    double s2 = 0.0;
    for (size_t d = 0; d < shift.size(); ++d) {
        if (!(var[d] > 0.0)) throw std::invalid_argument("coupling_deficiency: variances must be positive");
        double num = shift[d] * shift[d];
        s2 += mode == NormMode::weighted ? num / var[d] : num;
    }
    return deficiency_from_distance(std::sqrt(s2));
}

namespace {

constexpr double kMinAcceptance = 0.10;

double sample_1d(double mu, double sigma, double lo, double hi, Rng& rng) {
    bool unbounded = !std::isfinite(lo) && !std::isfinite(hi);
    if (unbounded) return mu + sigma * rng.normal();
    double acc = mass_1d(mu, sigma, lo, hi);
    if (acc <= 0.0) throw std::domain_error("sample: support slice has zero mass");
    if (acc >= kMinAcceptance) {
        for (;;) {
            double x = mu + sigma * rng.normal();
            if (x >= lo && x <= hi) return x;
        }
    }
    // Inverse-CDF on the conditional distribution.
    double zl = std::isfinite(lo) ? (lo - mu) / sigma : -kInf;
    double zh = std::isfinite(hi) ? (hi - mu) / sigma : kInf;
    double cl = std::isinf(zl) ? 0.0 : std_normal_cdf(zl);
    double ch = std::isinf(zh) ? 1.0 : std_normal_cdf(zh);
    double u = cl + (ch - cl) * rng.uniform();
    u = std::min(std::nextafter(1.0, 0.0), std::max(std::nextafter(0.0, 1.0), u));
    double x = mu + sigma * std_normal_quantile(u);
    return std::min(std::isfinite(hi) ? hi : x, std::max(std::isfinite(lo) ? lo : x, x));
}

}  // namespace

std::vector<double> sample(const GaussianMeasure& g, Rng& rng) {
    g.validate();
    std::vector<double> x(g.dim());
    for (size_t d = 0; d < g.dim(); ++d) {
        double lo = g.truncated() ? g.support->lo[d] : -kInf;
        double hi = g.truncated() ? g.support->hi[d] : kInf;
        x[d] = sample_1d(g.mean[d], std::sqrt(g.var[d]), lo, hi, rng);
    }
    return x;
}

double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    // Continued fraction (Lentz), numerically stable for x < (a+1)/(a+b+2).
    auto betacf = [](double a, double b, double x) {
        const int kMaxIter = 300;
        const double eps = 3e-16, fpmin = 1e-300;
        double qab = a + b, qap = a + 1.0, qam = a - 1.0;
        double c = 1.0, d = 1.0 - qab * x / qap;
        if (std::fabs(d) < fpmin) d = fpmin;
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= kMaxIter; ++m) {
            int m2 = 2 * m;
            double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if (std::fabs(d) < fpmin) d = fpmin;
            c = 1.0 + aa / c;
            if (std::fabs(c) < fpmin) c = fpmin;
            d = 1.0 / d;
            h *= d * c;
            aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if (std::fabs(d) < fpmin) d = fpmin;
            c = 1.0 + aa / c;
            if (std::fabs(c) < fpmin) c = fpmin;
            d = 1.0 / d;
            double del = d * c;
            h *= del;
            if (std::fabs(del - 1.0) < eps) break;
        }
        return h;
    };
    double lnbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    double front = std::exp(a * std::log(x) + b * std::log1p(-x) - lnbeta);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

namespace {

// Smallest x with I_x(a,b) >= p, via bisection (monotone CDF).
double beta_quantile(double a, double b, double p) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (reg_inc_beta(a, b, mid) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

BinomialInterval clopper_pearson(long k, long n, double conf) {
    if (n <= 0 || k < 0 || k > n) throw std::invalid_argument("clopper_pearson: bad counts");
    if (!(conf > 0.0 && conf < 1.0)) throw std::invalid_argument("clopper_pearson: bad confidence");
    double alpha = 1.0 - conf;
    BinomialInterval iv{0.0, 1.0};
    if (k > 0) iv.lo = beta_quantile(static_cast<double>(k), static_cast<double>(n - k + 1), alpha / 2);
    if (k < n) iv.hi = beta_quantile(static_cast<double>(k + 1), static_cast<double>(n - k), 1.0 - alpha / 2);
    return iv;
}

}  // namespace relsyn
