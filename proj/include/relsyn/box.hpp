#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace relsyn {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Closed interval [lo, hi]; endpoints may be infinite.
struct Interval {
    double lo = -kInf;
    double hi = kInf;

    double width() const { return hi - lo; }
    double center() const { return 0.5 * (lo + hi); }
    bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
    bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }

    Interval operator+(const Interval& o) const { return {lo + o.lo, hi + o.hi}; }
    Interval operator-(const Interval& o) const { return {lo - o.hi, hi - o.lo}; }
    Interval operator*(double c) const {
        return c >= 0 ? Interval{lo * c, hi * c} : Interval{hi * c, lo * c};
    }
    // Hull of {a*b : a in this, b in o}.
    Interval operator*(const Interval& o) const {
        double c[4] = {lo * o.lo, lo * o.hi, hi * o.lo, hi * o.hi};
        Interval r{c[0], c[0]};
        for (double v : c) {
            r.lo = std::min(r.lo, v);
            r.hi = std::max(r.hi, v);
        }
        return r;
    }
    double mag() const { return std::max(std::fabs(lo), std::fabs(hi)); }
};

inline Interval hull_cos(const Interval& a) {
    // Exact on |width| < 2*pi, conservative otherwise.
    if (a.width() >= 2.0 * M_PI) return {-1.0, 1.0};
    double c0 = std::cos(a.lo), c1 = std::cos(a.hi);
    Interval r{std::min(c0, c1), std::max(c0, c1)};
    // Extrema where the argument crosses k*pi.
    double k0 = std::ceil(a.lo / M_PI);
    for (double k = k0; k * M_PI <= a.hi; k += 1.0) {
        double v = std::cos(k * M_PI);  // +1 or -1
        r.lo = std::min(r.lo, v);
        r.hi = std::max(r.hi, v);
    }
    return r;
}

inline Interval hull_sin(const Interval& a) {
    return hull_cos(Interval{a.lo - M_PI_2, a.hi - M_PI_2});
}

// Axis-aligned box; the workhorse domain type.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    Box() = default;
    Box(std::vector<double> l, std::vector<double> h) : lo(std::move(l)), hi(std::move(h)) {
        if (lo.size() != hi.size()) throw std::invalid_argument("Box: lo/hi size mismatch");
        for (size_t i = 0; i < lo.size(); ++i)
            if (lo[i] > hi[i]) throw std::invalid_argument("Box: lo > hi in dim " + std::to_string(i));
    }

    static Box unbounded(size_t dim) {
        return Box(std::vector<double>(dim, -kInf), std::vector<double>(dim, kInf));
    }

    size_t dim() const { return lo.size(); }
    Interval axis(size_t d) const { return {lo[d], hi[d]}; }

    bool contains(const std::vector<double>& x, double tol = 0.0) const {
        if (x.size() != dim()) return false;
        for (size_t d = 0; d < dim(); ++d)
            if (x[d] < lo[d] - tol || x[d] > hi[d] + tol) return false;
        return true;
    }

    bool bounded() const {
        for (size_t d = 0; d < dim(); ++d)
            if (!std::isfinite(lo[d]) || !std::isfinite(hi[d])) return false;
        return true;
    }

    std::vector<double> center() const {
        std::vector<double> c(dim());
        for (size_t d = 0; d < dim(); ++d) c[d] = 0.5 * (lo[d] + hi[d]);
        return c;
    }

    std::vector<double> halfwidth() const {
        std::vector<double> h(dim());
        for (size_t d = 0; d < dim(); ++d) h[d] = 0.5 * (hi[d] - lo[d]);
        return h;
    }

    // Euclidean distance from x to the box (0 if inside), with per-axis weights
    // applied as sqrt(sum w_d * gap_d^2).
    double distance(const std::vector<double>& x, const std::vector<double>* weights = nullptr) const {
        double s = 0.0;
        for (size_t d = 0; d < dim(); ++d) {
            double g = 0.0;
            if (x[d] < lo[d]) g = lo[d] - x[d];
            else if (x[d] > hi[d]) g = x[d] - hi[d];
            double w = weights ? (*weights)[d] : 1.0;
            s += w * g * g;
        }
        return std::sqrt(s);
    }
};

}  // namespace relsyn
