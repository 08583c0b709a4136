#pragma once

#include <optional>
#include <vector>

#include "relsyn/box.hpp"
#include "relsyn/rng.hpp"

namespace relsyn {

// Standard normal CDF, abs error < 1e-14 (erfc based).
double std_normal_cdf(double x);

// Inverse of std_normal_cdf on (0,1); ~1e-14 relative after refinement.
double std_normal_quantile(double p);

enum class NormMode { weighted, unweighted };

// Diagonal-covariance Gaussian, optionally truncated to an axis-aligned support
// box (mass renormalized on the support).
struct GaussianMeasure {
    std::vector<double> mean;
    std::vector<double> var;             // per-coordinate variances
    std::optional<Box> support;          // absent = all of R^n

    size_t dim() const { return mean.size(); }
    bool truncated() const { return support.has_value(); }
    void validate() const;
};

// Mass the measure assigns to an axis-aligned cell. Exact per coordinate via
// CDF differences; truncated measures are renormalized by the support mass.
double cell_mass(const GaussianMeasure& g, const Box& cell);

// Mass of the support box under the un-truncated Gaussian (1 if untruncated).
double support_mass(const GaussianMeasure& g);

// 1 - 2*Phi(-c/2): deficiency of the min-density coupling of two Gaussians
// N(0, S) and N(shift, S) whose centers are c apart in the scaled metric.
double deficiency_from_distance(double c);

// Deficiency for a mean offset `shift` under shared diagonal covariance `var`.
// weighted: c = ||S^{-1/2} shift||_2 (matches the min-density overlap);
// unweighted: c = ||shift||_2 (literal distance, kept as a reporting mode).
double coupling_deficiency(const std::vector<double>& shift,
                           const std::vector<double>& var, NormMode mode);

// One draw. Per-coordinate rejection against the support; coordinates whose
// acceptance probability is below 10% switch to inverse-CDF sampling.
std::vector<double> sample(const GaussianMeasure& g, Rng& rng);

// Exact Clopper-Pearson binomial interval at confidence `conf` (e.g. 0.95).
struct BinomialInterval {
    double lo, hi;
};
BinomialInterval clopper_pearson(long k, long n, double conf);

// Regularized incomplete beta I_x(a,b); exposed for the interval tests.
double reg_inc_beta(double a, double b, double x);

}  // namespace relsyn
