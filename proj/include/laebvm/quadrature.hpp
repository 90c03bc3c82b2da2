#pragma once

// Numerical integration used throughout the library: fixed-order
// Gauss-Legendre panels for smooth integrands on known breakpoints, and a
// globally adaptive Gauss-Kronrod (7/15) rule for everything else.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <vector>

namespace laebvm::quad {

template <std::size_t N>
struct GaussLegendreRule {
    std::array<double, N> nodes{};
    std::array<double, N> weights{};
};

/// N-point Gauss-Legendre rule on [-1, 1], built by Newton iteration on P_N.
template <std::size_t N>
GaussLegendreRule<N> make_gauss_legendre() {
    GaussLegendreRule<N> rule;
    const std::size_t half = (N + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(N) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = 0.0;
            for (std::size_t j = 1; j <= N; ++j) {
                const double p2 = p1;
                p1 = p0;
                const double jd = static_cast<double>(j);
                p0 = ((2.0 * jd - 1.0) * z * p1 - (jd - 1.0) * p2) / jd;
            }
            dp = static_cast<double>(N) * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes[i] = -z;
        rule.nodes[N - 1 - i] = z;
        rule.weights[i] = w;
        rule.weights[N - 1 - i] = w;
    }
    return rule;
}

inline const GaussLegendreRule<10>& gl10() {
    static const auto rule = make_gauss_legendre<10>();
    return rule;
}

/// Ten-point Gauss-Legendre on a single panel [a, b].
template <class F>
double gauss_legendre(F&& f, double a, double b) {
    const auto& rule = gl10();
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    }
    return sum * half;
}

/// Composite ten-point Gauss-Legendre with `panels` equal panels on [a, b].
template <class F>
double gauss_legendre_composite(F&& f, double a, double b, std::size_t panels) {
    if (panels == 0) panels = 1;
    const double width = (b - a) / static_cast<double>(panels);
    double sum = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + width * static_cast<double>(p);
        const double hi = (p + 1 == panels) ? b : lo + width;
        sum += gauss_legendre(f, lo, hi);
    }
    return sum;
}

namespace detail {

// QUADPACK Kronrod 15 / Gauss 7 abscissae and weights.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a;
    double b;
    double value;
    double error;
    bool operator<(const Segment& other) const { return error < other.error; }
};

template <class F>
Segment kronrod15(F& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double sum = f(center - dx) + f(center + dx);
        kronrod += kWgk[j] * sum;
        if (j % 2 == 1) gauss += kWg[j / 2] * sum;
    }
    return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace detail

struct AdaptiveOptions {
    double abs_tol = 1e-14;
    double rel_tol = 1e-12;
    std::size_t max_segments = 4000;
};

/// Globally adaptive G7/K15 quadrature on a finite interval: the segment with
/// the largest error estimate is bisected until the summed estimate meets
/// max(abs_tol, rel_tol * |I|) or the segment budget is exhausted.
template <class F>
double integrate(F&& f, double a, double b, const AdaptiveOptions& opts = {}) {
    if (!(std::isfinite(a) && std::isfinite(b))) {
        throw std::invalid_argument("integrate: finite limits required");
    }
    if (a == b) return 0.0;
    if (b < a) return -integrate(f, b, a, opts);

    std::priority_queue<detail::Segment> heap;
    auto first = detail::kronrod15(f, a, b);
    double total = first.value;
    double error = first.error;
    heap.push(first);
    while (error > std::max(opts.abs_tol, opts.rel_tol * std::abs(total)) &&
           heap.size() < opts.max_segments) {
        const auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            heap.push(worst);
            break;
        }
        const auto left = detail::kronrod15(f, worst.a, mid);
        const auto right = detail::kronrod15(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    double sum = 0.0;
    while (!heap.empty()) {
        sum += heap.top().value;
        heap.pop();
    }
    return sum;
}

/// Integral over [a, inf) via x = a + s / (1 - s).
template <class F>
double integrate_to_infinity(F&& f, double a, const AdaptiveOptions& opts = {}) {
    auto mapped = [&](double s) {
        if (s >= 1.0) return 0.0;
        const double one_minus = 1.0 - s;
        const double x = a + s / one_minus;
        const double fx = f(x);
        if (fx == 0.0) return 0.0;
        return fx / (one_minus * one_minus);
    };
    return integrate(mapped, 0.0, 1.0, opts);
}

/// Adaptive integral over [a, b] (b may be +inf) split at the given breakpoints.
template <class F>
double integrate_piecewise(F&& f, double a, double b, std::vector<double> breaks,
                           const AdaptiveOptions& opts = {}) {
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double lo = breaks[i];
        const double hi = breaks[i + 1];
        if (lo < a || hi > b || !(hi > lo)) continue;
        if (std::isinf(hi)) {
            sum += integrate_to_infinity(f, lo, opts);
        } else {
            sum += integrate(f, lo, hi, opts);
        }
    }
    return sum;
}

}  // namespace laebvm::quad
