#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

// Descriptive statistics, Welch/pooled two-sample t-tests, chi-square test of
// independence, Pearson correlation and the per-slot modal schedule, with
// in-house CDF evaluation (regularised incomplete beta / lower incomplete
// gamma). Everything here is pure and reentrant.

namespace sandman::stats {

constexpr double kAlpha = 0.05;

struct EmptySample : std::invalid_argument {
    EmptySample() : std::invalid_argument("stats: empty sample") {}
};
struct InsufficientData : std::invalid_argument {
    explicit InsufficientData(const std::string& what) : std::invalid_argument("stats: " + what) {}
};
struct DegenerateTable : std::invalid_argument {
    explicit DegenerateTable(const std::string& what) : std::invalid_argument("stats: " + what) {}
};
struct UndefinedCorrelation : std::invalid_argument {
    explicit UndefinedCorrelation(const std::string& what) : std::invalid_argument("stats: " + what) {}
};
struct DomainError : std::invalid_argument {
    explicit DomainError(const std::string& what) : std::invalid_argument("stats: " + what) {}
};

struct SampleStats {
    double mean = 0.0;
    double std_dev = 0.0;  // sample std, n-1 denominator
    std::size_t n = 0;

    double variance() const { return std_dev * std_dev; }
};

inline SampleStats describe(std::span<const double> xs) {
    if (xs.empty()) throw EmptySample{};
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    if (xs.size() == 1) return {mean, 0.0, 1};
    double ss = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(xs.size() - 1);
    return {mean, std::sqrt(var), xs.size()};
}

struct StatResult {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
    bool significant = false;  // p <= 0.05
};

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

namespace detail {

constexpr int kMaxIter = 500;
constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;

// Continued fraction for the regularised incomplete beta (modified Lentz).
inline double beta_cont_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

// Regularised incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw DomainError("incomplete beta requires a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::beta_cont_fraction(a, b, x) / a;
    }
    return 1.0 - front * detail::beta_cont_fraction(b, a, 1.0 - x) / b;
}

// Regularised lower incomplete gamma P(a, x).
inline double regularized_lower_gamma(double a, double x) {
    if (a <= 0.0) throw DomainError("incomplete gamma requires a > 0");
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) {
        // series expansion
        double ap = a;
        double term = 1.0 / a;
        double sum = term;
        for (int n = 0; n < detail::kMaxIter; ++n) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::fabs(term) < std::fabs(sum) * detail::kEps) break;
        }
        return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    // continued fraction for Q(a, x), modified Lentz
    double b = x + 1.0 - a;
    double c = 1.0 / detail::kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= detail::kMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < detail::kTiny) d = detail::kTiny;
        c = b + an / c;
        if (std::fabs(c) < detail::kTiny) c = detail::kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < detail::kEps) break;
    }
    const double q = std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
    return 1.0 - q;
}

// CDF of Student's t with `dof` degrees of freedom.
inline double student_t_cdf(double x, double dof) {
    if (!(dof > 0.0)) throw DomainError("student_t_cdf requires dof > 0");
    if (x == 0.0) return 0.5;
    const double tail = regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + x * x));
    return x > 0.0 ? 1.0 - 0.5 * tail : 0.5 * tail;
}

// Two-tailed p-value for a t statistic.
inline double student_t_two_tailed_p(double t, double dof) {
    if (!(dof > 0.0)) throw DomainError("student_t_two_tailed_p requires dof > 0");
    if (std::isinf(t)) return 0.0;
    return regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

// CDF of the chi-square distribution with `dof` degrees of freedom.
inline double chi_square_cdf(double x, double dof) {
    if (!(dof > 0.0)) throw DomainError("chi_square_cdf requires dof > 0");
    if (x <= 0.0) return 0.0;
    return regularized_lower_gamma(dof / 2.0, x / 2.0);
}

inline double chi_square_upper_tail(double x, double dof) { return 1.0 - chi_square_cdf(x, dof); }

// ---------------------------------------------------------------------------
// Two-sample t-tests
// ---------------------------------------------------------------------------

enum class VarianceModel { Unequal, Pooled };

inline StatResult two_sample_t_test(std::span<const double> a, std::span<const double> b,
                                    VarianceModel model = VarianceModel::Unequal) {
    if (a.size() < 2 || b.size() < 2) throw InsufficientData("t-test needs at least 2 samples per side");
    const SampleStats sa = describe(a);
    const SampleStats sb = describe(b);
    const double na = static_cast<double>(sa.n);
    const double nb = static_cast<double>(sb.n);

    double se2 = 0.0;
    double dof = 0.0;
    if (model == VarianceModel::Unequal) {
        const double va = sa.variance() / na;
        const double vb = sb.variance() / nb;
        se2 = va + vb;
        if (se2 > 0.0) {
            dof = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
        }
    } else {
        dof = na + nb - 2.0;
        const double pooled = ((na - 1.0) * sa.variance() + (nb - 1.0) * sb.variance()) / dof;
        se2 = pooled * (1.0 / na + 1.0 / nb);
    }

    StatResult r;
    if (se2 <= 0.0) {
        // both samples constant
        dof = na + nb - 2.0;
        if (sa.mean == sb.mean) {
            r = {0.0, dof, 1.0, false};
        } else {
            const double inf = std::numeric_limits<double>::infinity();
            r = {sa.mean > sb.mean ? inf : -inf, dof, 0.0, true};
        }
        return r;
    }
    r.statistic = (sa.mean - sb.mean) / std::sqrt(se2);
    r.dof = dof;
    r.p_value = student_t_two_tailed_p(r.statistic, dof);
    r.significant = r.p_value <= kAlpha;
    return r;
}

inline StatResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    return two_sample_t_test(a, b, VarianceModel::Unequal);
}

inline StatResult pooled_t_test(std::span<const double> a, std::span<const double> b) {
    return two_sample_t_test(a, b, VarianceModel::Pooled);
}

// ---------------------------------------------------------------------------
// Chi-square test of independence
// ---------------------------------------------------------------------------

struct ContingencyTable {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<std::vector<double>> counts;  // rows x cols, non-negative

    std::size_t rows() const { return counts.size(); }
    std::size_t cols() const { return counts.empty() ? 0 : counts.front().size(); }

    void validate() const {
        if (rows() < 2 || cols() < 2) throw DegenerateTable("contingency table needs at least 2x2");
        for (const auto& row : counts) {
            if (row.size() != cols()) throw DegenerateTable("ragged contingency table");
            for (double c : row) {
                if (c < 0.0 || !std::isfinite(c)) throw DegenerateTable("negative or non-finite count");
            }
        }
    }

    // Drops all-zero category columns; used when building occurrence tables
    // from sparse data.
    ContingencyTable without_zero_columns() const {
        ContingencyTable out;
        out.row_labels = row_labels;
        std::vector<std::size_t> keep;
        for (std::size_t c = 0; c < cols(); ++c) {
            double total = 0.0;
            for (std::size_t r = 0; r < rows(); ++r) total += counts[r][c];
            if (total > 0.0) keep.push_back(c);
        }
        for (std::size_t c : keep) {
            if (c < col_labels.size()) out.col_labels.push_back(col_labels[c]);
        }
        out.counts.resize(rows());
        for (std::size_t r = 0; r < rows(); ++r) {
            for (std::size_t c : keep) out.counts[r].push_back(counts[r][c]);
        }
        return out;
    }
};

inline StatResult chi_square_independence(const ContingencyTable& table) {
    table.validate();
    const std::size_t r = table.rows();
    const std::size_t c = table.cols();
    std::vector<double> row_tot(r, 0.0), col_tot(c, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            row_tot[i] += table.counts[i][j];
            col_tot[j] += table.counts[i][j];
            total += table.counts[i][j];
        }
    }
    for (double t : row_tot)
        if (t == 0.0) throw DegenerateTable("all-zero row");
    for (double t : col_tot)
        if (t == 0.0) throw DegenerateTable("all-zero column");

    double chi2 = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double expected = row_tot[i] * col_tot[j] / total;
            const double d = table.counts[i][j] - expected;
            chi2 += d * d / expected;
        }
    }
    const double dof = static_cast<double>((r - 1) * (c - 1));
    StatResult res;
    res.statistic = chi2;
    res.dof = dof;
    res.p_value = chi_square_upper_tail(chi2, dof);
    res.significant = res.p_value <= kAlpha;
    return res;
}

// ---------------------------------------------------------------------------
// Pearson correlation
// ---------------------------------------------------------------------------

struct CorrelationResult {
    double rho = 0.0;
    std::size_t n = 0;
    double p_value = 1.0;
};

inline CorrelationResult pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw InsufficientData("correlation inputs must pair up");
    if (xs.size() < 3) throw InsufficientData("correlation needs at least 3 pairs");
    const std::size_t n = xs.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("constant input sequence");
    double rho = sxy / std::sqrt(sxx * syy);
    rho = std::clamp(rho, -1.0, 1.0);

    CorrelationResult res;
    res.rho = rho;
    res.n = n;
    const double dof = static_cast<double>(n - 2);
    const double denom = 1.0 - rho * rho;
    if (denom <= 0.0) {
        res.p_value = 0.0;
    } else {
        const double t = rho * std::sqrt(dof / denom);
        res.p_value = student_t_two_tailed_p(t, dof);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Expected schedule (per-slot modal task)
// ---------------------------------------------------------------------------

struct ExpectedSlot {
    std::size_t slot = 0;  // 1-based
    std::string task;
    std::size_t frequency = 0;
    bool tie = false;
};

struct ExpectedSchedule {
    std::vector<ExpectedSlot> slots;
};

// `sequences` are per-schedule task-name lists (without the terminal marker);
// each is treated as ending with one `end_marker` slot and shorter schedules
// are right-padded with the marker. Ties break by position in
// `tie_break_order`, with the marker ranking after every named task.
inline ExpectedSchedule expected_schedule(const std::vector<std::vector<std::string>>& sequences,
                                          std::span<const std::string> tie_break_order,
                                          std::string_view end_marker) {
    if (sequences.empty()) throw EmptySample{};

    std::unordered_map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < tie_break_order.size(); ++i) rank.emplace(tie_break_order[i], i);
    const std::size_t end_rank = tie_break_order.size();
    auto rank_of = [&](const std::string& name) -> std::size_t {
        if (name == end_marker) return end_rank;
        auto it = rank.find(name);
        return it == rank.end() ? end_rank + 1 : it->second;
    };

    std::size_t max_len = 0;
    for (const auto& seq : sequences) max_len = std::max(max_len, seq.size());
    const std::size_t slot_count = max_len + 1;  // every schedule terminates with the marker
    const std::string end_name(end_marker);

    ExpectedSchedule out;
    out.slots.reserve(slot_count);
    for (std::size_t s = 0; s < slot_count; ++s) {
        std::unordered_map<std::string, std::size_t> tally;
        for (const auto& seq : sequences) {
            ++tally[s < seq.size() ? seq[s] : end_name];
        }
        ExpectedSlot slot;
        slot.slot = s + 1;
        std::size_t best = 0;
        for (const auto& [name, count] : tally) {
            if (count > best) best = count;
        }
        std::vector<std::string> winners;
        for (const auto& [name, count] : tally) {
            if (count == best) winners.push_back(name);
        }
        std::sort(winners.begin(), winners.end(), [&](const std::string& a, const std::string& b) {
            const std::size_t ra = rank_of(a), rb = rank_of(b);
            return ra != rb ? ra < rb : a < b;
        });
        slot.task = winners.front();
        slot.frequency = best;
        slot.tie = winners.size() > 1;
        out.slots.push_back(std::move(slot));
    }
    return out;
}

}  // namespace sandman::stats
