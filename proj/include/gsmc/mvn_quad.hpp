#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/random/sobol.hpp>

#include "gsmc/error.hpp"
#include "gsmc/normal.hpp"
#include "gsmc/random.hpp"

namespace gsmc {

/// P(lower <= X <= upper) for X ~ N(0, corr). Infinite bounds are allowed.
struct MvnProblem {
    std::vector<double> lower;
    std::vector<double> upper;
    Eigen::MatrixXd corr;
    double accuracy = 1e-5;           // target absolute error at 99% confidence
    std::uint64_t seed = 12345;
    int replicates = 5;
    int shifts = 10;                  // random digital shifts per estimate
    std::size_t max_points = 10'000'000;
    bool force_qmc = false;           // sample every coordinate, no closed-form steps
    bool parallel = false;            // run replicates on separate threads

    std::size_t dim() const { return upper.size(); }
};

struct MvnResult {
    double value = 0.0;
    double error = 0.0;
    bool imprecise = false;
    std::size_t points = 0;
};

/// P(X > h, Y > k) for a standard bivariate normal with correlation r.
inline double bvn_upper(double h, double k, double r) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (h == inf || k == inf) return 0.0;
    if (h == -inf) return norm_cdf(-k);
    if (k == -inf) return norm_cdf(-h);

    using boost::math::quadrature::gauss;
    const double twopi = 2.0 * std::numbers::pi;
    const double ar = std::abs(r);
    std::span<const double> x, w;
    if (ar < 0.3) {
        x = gauss<double, 6>::abscissa();
        w = gauss<double, 6>::weights();
    } else if (ar < 0.75) {
        x = gauss<double, 12>::abscissa();
        w = gauss<double, 12>::weights();
    } else {
        x = gauss<double, 20>::abscissa();
        w = gauss<double, 20>::weights();
    }
    // boost stores the nonnegative half of each symmetric rule; nodes are used at +-x
    const std::size_t lg = x.size();

    double hk = h * k;
    double bvn = 0.0;
    if (ar < 0.925) {
        const double hs = 0.5 * (h * h + k * k);
        const double asr = std::asin(r);
        for (std::size_t i = 0; i < lg; ++i) {
            for (double sgn : {1.0, -1.0}) {
                const double sn = std::sin(asr * (sgn * x[i] + 1.0) / 2.0);
                bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        return bvn * asr / (2.0 * twopi) + norm_cdf(-h) * norm_cdf(-k);
    }

    if (r < 0.0) {
        k = -k;
        hk = -hk;
    }
    if (ar < 1.0) {
        const double as = (1.0 - r) * (1.0 + r);
        double a = std::sqrt(as);
        const double bs = (h - k) * (h - k);
        const double c = (4.0 - hk) / 8.0;
        const double d = (12.0 - hk) / 16.0;
        bvn = a * std::exp(-(bs / as + hk) / 2.0) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
        if (hk > -160.0) {
            const double b = std::sqrt(bs);
            bvn -= std::exp(-hk / 2.0) * std::sqrt(twopi) * norm_cdf(-b / a) * b *
                   (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (std::size_t i = 0; i < lg; ++i) {
            for (double sgn : {1.0, -1.0}) {
                const double xs = std::pow(a * (sgn * x[i] + 1.0), 2);
                const double rs = std::sqrt(1.0 - xs);
                bvn += a * w[i] *
                       (std::exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs -
                        std::exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs)));
            }
        }
        bvn = -bvn / twopi;
    }
    if (r > 0.0) return bvn + norm_cdf(-std::max(h, k));
    return -bvn + std::max(0.0, norm_cdf(-h) - norm_cdf(-k));
}

/// Rectangle probability for a standard bivariate normal.
inline double bvn_rectangle(double a1, double a2, double b1, double b2, double r) {
    const double p = bvn_upper(a1, a2, r) - bvn_upper(a1, b2, r) - bvn_upper(b1, a2, r) +
                     bvn_upper(b1, b2, r);
    return std::clamp(p, 0.0, 1.0);
}

namespace detail {

/// Standardized and reduced problem after dropping unconstrained coordinates.
struct Reduced {
    std::vector<double> a, b;
    Eigen::MatrixXd r;
    bool empty = false;  // some coordinate has lower >= upper
};

inline Reduced reduce(const MvnProblem& pb) {
    const std::size_t d = pb.dim();
    if (pb.lower.size() != d || static_cast<std::size_t>(pb.corr.rows()) != d ||
        static_cast<std::size_t>(pb.corr.cols()) != d)
        throw DomainError("mvn: bounds and matrix dimensions differ");
    Reduced out;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < d; ++i) {
        if (pb.lower[i] > pb.upper[i] || std::isnan(pb.lower[i]) || std::isnan(pb.upper[i]))
            throw DomainError("mvn: need lower <= upper");
        if (pb.lower[i] == pb.upper[i]) out.empty = true;
        if (!(pb.corr(i, i) > 0.0)) throw DomainError("mvn: matrix diagonal must be positive");
        if (std::isinf(pb.lower[i]) && std::isinf(pb.upper[i])) continue;
        keep.push_back(i);
    }
    const std::size_t m = keep.size();
    out.r.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
        const double si = std::sqrt(pb.corr(keep[i], keep[i]));
        out.a.push_back(pb.lower[keep[i]] / si);
        out.b.push_back(pb.upper[keep[i]] / si);
        for (std::size_t j = 0; j < m; ++j) {
            const double sj = std::sqrt(pb.corr(keep[j], keep[j]));
            out.r(i, j) = pb.corr(keep[i], keep[j]) / (si * sj);
        }
    }
    if ((out.r - out.r.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw DomainError("mvn: matrix must be symmetric");
    return out;
}

/// Cholesky factor with variables reordered so the most constrained come first;
/// a zero pivot marks a coordinate that is a linear function of earlier ones.
struct SovFactor {
    Eigen::MatrixXd L;
    std::vector<double> a, b;
};

inline SovFactor pivoted_cholesky(Reduced rd) {
    const auto d = static_cast<Eigen::Index>(rd.a.size());
    Eigen::MatrixXd& C = rd.r;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
    std::vector<double> y(static_cast<std::size_t>(d), 0.0);
    constexpr double tiny = 1e-10;
    for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::Index best = i;
        double best_p = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = i; j < d; ++j) {
            double s = C(j, j);
            double mu = 0.0;
            for (Eigen::Index k = 0; k < i; ++k) {
                s -= L(j, k) * L(j, k);
                mu += L(j, k) * y[static_cast<std::size_t>(k)];
            }
            if (s < -1e-8) throw DomainError("mvn: matrix is not positive semidefinite");
            double p;
            if (s > tiny) {
                const double sd = std::sqrt(s);
                p = norm_cdf((rd.b[j] - mu) / sd) - norm_cdf((rd.a[j] - mu) / sd);
            } else {
                p = 2.0;  // degenerate coordinates go last
            }
            if (p < best_p) {
                best_p = p;
                best = j;
            }
        }
        if (best != i) {
            C.row(i).swap(C.row(best));
            C.col(i).swap(C.col(best));
            L.row(i).swap(L.row(best));
            std::swap(rd.a[i], rd.a[best]);
            std::swap(rd.b[i], rd.b[best]);
        }
        double s = C(i, i);
        double mu = 0.0;
        for (Eigen::Index k = 0; k < i; ++k) {
            s -= L(i, k) * L(i, k);
            mu += L(i, k) * y[static_cast<std::size_t>(k)];
        }
        if (s <= tiny) {
            L(i, i) = 0.0;
            y[static_cast<std::size_t>(i)] = 0.0;
            continue;
        }
        const double sd = std::sqrt(s);
        L(i, i) = sd;
        for (Eigen::Index j = i + 1; j < d; ++j) {
            double v = C(j, i);
            for (Eigen::Index k = 0; k < i; ++k) v -= L(j, k) * L(i, k);
            L(j, i) = v / sd;
        }
        const double lo = (rd.a[i] - mu) / sd, hi = (rd.b[i] - mu) / sd;
        const double mass = norm_cdf(hi) - norm_cdf(lo);
        y[static_cast<std::size_t>(i)] = mass > 1e-300 ? (norm_pdf(lo) - norm_pdf(hi)) / mass : 0.0;
    }
    return {std::move(L), std::move(rd.a), std::move(rd.b)};
}

/// Separation-of-variables integrand at a point of [0,1]^{d-1}. With `close`
/// the last two coordinates are integrated exactly by the bivariate normal,
/// so only the first d-2 entries of w are used.
inline double sov_integrand(const SovFactor& f, const double* w, double* y, bool close) {
    const auto d = f.L.rows();
    const Eigen::Index open = close ? d - 2 : d;
    double e = 1.0;
    for (Eigen::Index i = 0; i < open; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        double mu = 0.0;
        for (Eigen::Index k = 0; k < i; ++k) mu += f.L(i, k) * y[k];
        const double lii = f.L(i, i);
        if (lii == 0.0) {
            if (mu < f.a[iu] || mu > f.b[iu]) return 0.0;
            y[i] = 0.0;
            continue;
        }
        const double ai = f.a[iu], bi = f.b[iu];
        const double lo = std::isinf(ai) ? (ai < 0.0 ? 0.0 : 1.0) : norm_cdf((ai - mu) / lii);
        const double hi = std::isinf(bi) ? (bi < 0.0 ? 0.0 : 1.0) : norm_cdf((bi - mu) / lii);
        e *= hi - lo;
        if (e <= 0.0) return 0.0;
        if (i + 1 < d) y[i] = norm_quantile(std::clamp(lo + w[i] * (hi - lo), 1e-300, 1.0 - 1e-16));
    }
    if (!close) return e;

    const Eigen::Index i = d - 2, j = d - 1;
    double m1 = 0.0, m2 = 0.0;
    for (Eigen::Index k = 0; k < i; ++k) {
        m1 += f.L(i, k) * y[k];
        m2 += f.L(j, k) * y[k];
    }
    const double s1 = f.L(i, i), s2 = std::hypot(f.L(j, i), f.L(j, j));
    const auto iu = static_cast<std::size_t>(i), ju = static_cast<std::size_t>(j);
    return e * bvn_rectangle((f.a[iu] - m1) / s1, (f.a[ju] - m2) / s2, (f.b[iu] - m1) / s1,
                             (f.b[ju] - m2) / s2, std::clamp(f.L(j, i) / s2, -1.0, 1.0));
}

/// Randomized QMC: a Sobol point set under independent random digital shifts,
/// each point paired with its antithetic reflection. The point count doubles
/// until the 99% Student-t half-width across shifts meets the accuracy target.
inline MvnResult qmc_estimate(const SovFactor& f, const MvnProblem& pb, std::uint64_t stream, bool allow_close) {
    const auto d = static_cast<std::size_t>(f.L.rows());
    const bool close = allow_close && d >= 3 && f.L(static_cast<Eigen::Index>(d - 2), static_cast<Eigen::Index>(d - 2)) > 0.0 &&
                       f.L(static_cast<Eigen::Index>(d - 1), static_cast<Eigen::Index>(d - 1)) > 0.0;
    const std::size_t dims = close ? std::max<std::size_t>(d - 2, 1) : std::max<std::size_t>(d - 1, 1);
    const int M = std::max(pb.shifts, 2);

    CounterStream rng(pb.seed, stream);
    std::vector<std::uint32_t> shift(static_cast<std::size_t>(M) * dims);
    for (auto& s : shift) s = static_cast<std::uint32_t>(rng.next_u64() >> 32);

    boost::random::sobol sobol(dims);
    std::vector<std::uint32_t> points;

    std::vector<double> sums(static_cast<std::size_t>(M), 0.0);
    std::vector<double> w(dims), w2(dims), y(d);
    const double tq = boost::math::quantile(
        boost::math::complement(boost::math::students_t_distribution<double>(M - 1), 0.005));
    constexpr double scale = 1.0 / 4294967296.0;

    std::size_t n_done = 0;
    std::size_t n_target = 256;
    MvnResult res;
    for (;;) {
        points.reserve(n_target * dims);
        while (points.size() < n_target * dims) points.push_back(static_cast<std::uint32_t>(sobol() >> 32));
        for (int m = 0; m < M; ++m) {
            const std::uint32_t* sh = &shift[static_cast<std::size_t>(m) * dims];
            double acc = 0.0;
            for (std::size_t k = n_done; k < n_target; ++k) {
                for (std::size_t i = 0; i < dims; ++i) {
                    w[i] = ((points[k * dims + i] ^ sh[i]) + 0.5) * scale;
                    w2[i] = 1.0 - w[i];
                }
                acc += 0.5 * (sov_integrand(f, w.data(), y.data(), close) + sov_integrand(f, w2.data(), y.data(), close));
            }
            sums[static_cast<std::size_t>(m)] += acc;
        }
        n_done = n_target;
        double mean = 0.0;
        for (double s : sums) mean += s / static_cast<double>(n_done);
        mean /= M;
        double var = 0.0;
        for (double s : sums) {
            const double dv = s / static_cast<double>(n_done) - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(M) * (M - 1);
        res.value = std::clamp(mean, 0.0, 1.0);
        res.error = tq * std::sqrt(var);
        res.points = 2 * n_done * static_cast<std::size_t>(M);
        if (res.error <= pb.accuracy) break;
        if (4 * n_done * static_cast<std::size_t>(M) > pb.max_points) {
            res.imprecise = true;
            break;
        }
        n_target = 2 * n_done;
    }
    return res;
}

inline MvnResult mvn_single(const MvnProblem& pb, std::uint64_t stream) {
    Reduced rd = reduce(pb);
    if (rd.empty) return {};
    const std::size_t d = rd.a.size();
    if (d == 0) return {1.0, 0.0, false, 0};
    if (!pb.force_qmc) {
        if (d == 1) return {std::max(0.0, norm_cdf(rd.b[0]) - norm_cdf(rd.a[0])), 0.0, false, 0};
        if (d == 2) {
            const double r = rd.r(0, 1);
            if (std::abs(r) > 1.0 + 1e-10) throw DomainError("mvn: matrix is not positive semidefinite");
            return {bvn_rectangle(rd.a[0], rd.a[1], rd.b[0], rd.b[1], std::clamp(r, -1.0, 1.0)), 0.0,
                    false, 0};
        }
    }
    const SovFactor f = pivoted_cholesky(std::move(rd));
    return qmc_estimate(f, pb, stream, !pb.force_qmc);
}

}  // namespace detail

/// One randomized estimate; deterministic given the problem's seed.
inline MvnResult mvn_rectangle(const MvnProblem& pb) { return detail::mvn_single(pb, 0); }

/// Median of r independent estimates (streams 0..r-1 of the seed).
inline MvnResult median_of_replicates(const MvnProblem& pb, int r) {
    if (r < 1 || r % 2 == 0) throw DomainError("median_of_replicates: r must be odd and >= 1");
    const detail::Reduced rd = detail::reduce(pb);
    const bool closed = !pb.force_qmc && rd.a.size() <= 2;
    if (r == 1 || closed) return detail::mvn_single(pb, 0);

    std::vector<MvnResult> runs(static_cast<std::size_t>(r));
    if (pb.parallel) {
        std::vector<std::thread> pool;
        for (int i = 0; i < r; ++i)
            pool.emplace_back([&, i] { runs[static_cast<std::size_t>(i)] = detail::mvn_single(pb, static_cast<std::uint64_t>(i)); });
        for (auto& th : pool) th.join();
    } else {
        for (int i = 0; i < r; ++i) runs[static_cast<std::size_t>(i)] = detail::mvn_single(pb, static_cast<std::uint64_t>(i));
    }
    auto mid = runs.begin() + r / 2;
    std::nth_element(runs.begin(), mid, runs.end(),
                     [](const MvnResult& x, const MvnResult& y) { return x.value < y.value; });
    MvnResult out = *mid;
    for (const auto& x : runs) out.imprecise = out.imprecise || x.imprecise;
    return out;
}

inline MvnResult median_of_replicates(const MvnProblem& pb) { return median_of_replicates(pb, pb.replicates); }

/// P(X <= upper) with the problem's replicate count.
inline double mvn_cdf(std::vector<double> upper, const Eigen::MatrixXd& corr, const MvnProblem& opts) {
    MvnProblem pb = opts;
    pb.lower.assign(upper.size(), -std::numeric_limits<double>::infinity());
    pb.upper = std::move(upper);
    pb.corr = corr;
    return median_of_replicates(pb).value;
}

}  // namespace gsmc
