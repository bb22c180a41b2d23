#pragma once

// Test-side oracles, deliberately independent of the library's numeric paths:
// brute-force statistics over long double and adaptive Simpson quadrature of
// the raw densities. Nothing in here calls into sandman::stats.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

inline long double adaptive_simpson_rec(const std::function<long double(long double)>& f, long double a,
                                        long double b, long double fa, long double fb, long double fm,
                                        long double whole, long double eps, int depth) {
    const long double m = (a + b) / 2;
    const long double lm = (a + m) / 2, rm = (m + b) / 2;
    const long double flm = f(lm), frm = f(rm);
    const long double left = (m - a) / 6 * (fa + 4 * flm + fm);
    const long double right = (b - m) / 6 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::fabs(left + right - whole) <= 15 * eps) {
        return left + right + (left + right - whole) / 15;
    }
    return adaptive_simpson_rec(f, a, m, fa, fm, flm, left, eps / 2, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, fb, frm, right, eps / 2, depth - 1);
}

inline long double adaptive_simpson(const std::function<long double(long double)>& f, long double a,
                                    long double b, long double eps = 1e-13L) {
    const long double m = (a + b) / 2;
    const long double fa = f(a), fb = f(b), fm = f(m);
    const long double whole = (b - a) / 6 * (fa + 4 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fb, fm, whole, eps, 40);
}

// Integral of f over [a, inf) via u = a + s/(1-s).
inline long double integrate_upper_tail(const std::function<long double(long double)>& f, long double a,
                                        long double eps = 1e-13L) {
    auto g = [&](long double s) -> long double {
        if (s >= 1.0L) return 0.0L;
        const long double u = a + s / (1 - s);
        const long double jac = 1 / ((1 - s) * (1 - s));
        return f(u) * jac;
    };
    return adaptive_simpson(g, 0.0L, 1.0L - 1e-9L, eps);
}

// ---------------------------------------------------------------------------
// Densities and p-values
// ---------------------------------------------------------------------------

inline long double t_density(long double u, long double dof) {
    const long double c = std::exp(std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2)) /
                          std::sqrt(dof * 3.14159265358979323846264338327950288L);
    return c * std::pow(1 + u * u / dof, -(dof + 1) / 2);
}

inline double t_two_tailed_p(double t, double dof) {
    const long double tail =
        integrate_upper_tail([dof](long double u) { return t_density(u, dof); }, std::fabs((long double)t));
    return static_cast<double>(2 * tail);
}

inline long double chi_square_density(long double u, long double dof) {
    if (u <= 0) return 0;
    const long double k2 = dof / 2;
    return std::exp((k2 - 1) * std::log(u) - u / 2 - k2 * std::log(2.0L) - std::lgamma(k2));
}

// The chi-square bulk sits around dof with width ~sqrt(2*dof); blind
// adaptive quadrature from a small x can step right over it, so integrate
// over explicit segments bracketing the mass before switching to the
// substituted tail.
inline double chi_square_upper_p(double x, double dof) {
    auto f = [dof](long double u) { return chi_square_density(u, dof); };
    const long double k = dof;
    const long double sigma = std::sqrt(2.0L * dof);
    const long double far = std::max((long double)x, k + 40 * sigma);
    std::vector<long double> cuts{(long double)x};
    for (long double c : {k - 10 * sigma, k - 3 * sigma, k, k + 3 * sigma, k + 10 * sigma, far}) {
        if (c > cuts.back() && c < far) cuts.push_back(c);
    }
    cuts.push_back(far);
    long double total = 0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] > cuts[i]) total += adaptive_simpson(f, cuts[i], cuts[i + 1]);
    }
    total += integrate_upper_tail(f, far);
    return static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Direct-formula statistics (two-pass, long double)
// ---------------------------------------------------------------------------

struct MeanVar {
    long double mean = 0;
    long double var = 0;  // n-1 denominator
    std::size_t n = 0;
};

inline MeanVar mean_var(std::span<const double> xs) {
    MeanVar out;
    out.n = xs.size();
    long double sum = 0;
    for (double x : xs) sum += x;
    out.mean = sum / xs.size();
    long double ss = 0;
    for (double x : xs) {
        const long double d = x - out.mean;
        ss += d * d;
    }
    out.var = xs.size() > 1 ? ss / (xs.size() - 1) : 0;
    return out;
}

struct WelchResult {
    double t = 0;
    double dof = 0;
    double p = 1;
};

inline WelchResult welch(std::span<const double> a, std::span<const double> b) {
    const MeanVar sa = mean_var(a), sb = mean_var(b);
    const long double va = sa.var / sa.n, vb = sb.var / sb.n;
    WelchResult out;
    out.t = static_cast<double>((sa.mean - sb.mean) / std::sqrt(va + vb));
    out.dof = static_cast<double>((va + vb) * (va + vb) /
                                  (va * va / (sa.n - 1) + vb * vb / (sb.n - 1)));
    out.p = t_two_tailed_p(out.t, out.dof);
    return out;
}

struct ChiSquareResult {
    double chi2 = 0;
    double dof = 0;
    double p = 1;
};

inline ChiSquareResult chi_square(const std::vector<std::vector<double>>& counts) {
    const std::size_t r = counts.size(), c = counts.front().size();
    std::vector<long double> row(r, 0), col(c, 0);
    long double total = 0;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            row[i] += counts[i][j];
            col[j] += counts[i][j];
            total += counts[i][j];
        }
    }
    long double chi2 = 0;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const long double expected = row[i] * col[j] / total;
            const long double d = counts[i][j] - expected;
            chi2 += d * d / expected;
        }
    }
    ChiSquareResult out;
    out.chi2 = static_cast<double>(chi2);
    out.dof = static_cast<double>((r - 1) * (c - 1));
    out.p = chi_square_upper_p(out.chi2, out.dof);
    return out;
}

inline double pearson_rho(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    long double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const long double mx = sx / n, my = sy / n;
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// Independent modal tally: per slot, walk a tie-order list and count matches
// explicitly (structured differently from the implementation on purpose).
struct ModalSlot {
    std::string task;
    std::size_t count = 0;
    bool tie = false;
};

inline std::vector<ModalSlot> modal_tally(const std::vector<std::vector<std::string>>& sequences,
                                          const std::vector<std::string>& tie_order,
                                          const std::string& end_marker) {
    std::size_t slots = 0;
    for (const auto& s : sequences) slots = std::max(slots, s.size());
    ++slots;
    std::vector<std::string> order = tie_order;
    order.push_back(end_marker);

    std::vector<ModalSlot> out;
    for (std::size_t slot = 0; slot < slots; ++slot) {
        ModalSlot best;
        for (const auto& candidate : order) {
            std::size_t count = 0;
            for (const auto& seq : sequences) {
                const std::string& name = slot < seq.size() ? seq[slot] : end_marker;
                if (name == candidate) ++count;
            }
            if (count > best.count) {
                best.task = candidate;
                best.count = count;
                best.tie = false;
            } else if (count == best.count && count > 0 && candidate != best.task) {
                best.tie = true;
            }
        }
        out.push_back(best);
    }
    return out;
}

}  // namespace oracle
