// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cortexkit/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "cortexkit/io.hpp"
#include "cortexkit/log.hpp"

namespace cortexkit::evalstats {

// ---------------------------------------------------------------------------
// Distribution functions (incomplete-beta backed, relative tolerance 1e-10)
// ---------------------------------------------------------------------------

namespace {

double beta_continued_fraction(double a, double b, double x) {
    constexpr double kTol = 1e-12;
    constexpr int kMaxIter = 500;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    const double tiny = 1e-300;

    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kTol) return h;
    }
    throw DegenerateVariance("incomplete beta continued fraction did not converge");
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0)) throw DegenerateVariance("incomplete beta requires a, b > 0");
    if (x <= 0) return 0.0;
    if (x >= 1) return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double student_t_two_sided_p(double t, double dof) {
    if (!(dof > 0)) throw DegenerateVariance("t distribution requires dof > 0");
    return regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

namespace {

double f_cdf(double f, double d1, double d2) {
    if (f <= 0) return 0.0;
    return regularized_incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * f / (d1 * f + d2));
}

} // namespace

double f_quantile(double prob, double d1, double d2) {
    if (!(d1 > 0) || !(d2 > 0)) throw DegenerateVariance("F quantile requires positive dof");
    if (prob <= 0) return 0.0;
    if (prob >= 1) return std::numeric_limits<double>::infinity();

    double lo = 0.0, hi = 1.0;
    while (f_cdf(hi, d1, d2) < prob) {
        hi *= 2.0;
        if (hi > 1e300) return std::numeric_limits<double>::infinity();
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f_cdf(mid, d1, d2) < prob)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-12 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Overlap metrics
// ---------------------------------------------------------------------------

double dice(const LabelMaskPair& pair) {
    if (!(pair.truth.header == pair.prediction.header))
        throw GridMismatch("dice: masks live on different grids");
    std::size_t g = 0, p = 0, both = 0;
    for (std::size_t i = 0; i < pair.truth.values.size(); ++i) {
        const bool in_g = pair.truth.values[i] != 0, in_p = pair.prediction.values[i] != 0;
        g += in_g;
        p += in_p;
        both += in_g && in_p;
    }
    if (g + p == 0) {
        log::info("dice: both masks empty, returning 1 by convention");
        return 1.0;
    }
    return 2.0 * double(both) / double(g + p);
}

namespace {

// Felzenszwalb-Huttenlocher exact squared Euclidean distance transform,
// one lower-envelope pass per axis with anisotropic weights.
void edt_pass(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
              std::vector<double>& z, int n, double w2) {
    const double inf = std::numeric_limits<double>::infinity();

    // lower envelope over the finite parabolas f[p] + w2 (q - p)^2
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[std::size_t(q)] == inf) continue;
        double s = -inf;
        while (k >= 0) {
            const int p = v[std::size_t(k)];
            s = (f[std::size_t(q)] + w2 * q * q - f[std::size_t(p)] - w2 * p * p) /
                (2.0 * w2 * (q - p));
            if (s > z[std::size_t(k)]) break;
            --k;
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
        } else {
            ++k;
            v[std::size_t(k)] = q;
            z[std::size_t(k)] = s;
        }
        z[std::size_t(k) + 1] = inf;
    }
    if (k < 0) {
        std::fill(d.begin(), d.begin() + n, inf);
        return;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[std::size_t(k) + 1] < q) ++k;
        const int p = v[std::size_t(k)];
        d[std::size_t(q)] = w2 * double(q - p) * double(q - p) + f[std::size_t(p)];
    }
}

/// Squared distance (mm^2) from every voxel center to the nearest set voxel.
std::vector<double> squared_distance_transform(const BinaryMask& mask) {
    const int nx = int(mask.header.dims[0]), ny = int(mask.header.dims[1]),
              nz = int(mask.header.dims[2]);
    const double wx = mask.header.voxel_size_mm[0], wy = mask.header.voxel_size_mm[1],
                 wz = mask.header.voxel_size_mm[2];
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> dist(mask.values.size());
    for (std::size_t i = 0; i < mask.values.size(); ++i) dist[i] = mask.values[i] ? 0.0 : inf;

    const auto nmax = std::size_t(std::max({nx, ny, nz}));
    std::vector<double> f(nmax), d(nmax), z(nmax + 1);
    std::vector<int> v(nmax);

    // x passes
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j) {
            const std::size_t base = mask.index(0, j, k);
            for (int i = 0; i < nx; ++i) f[std::size_t(i)] = dist[base + std::size_t(i)];
            edt_pass(f, d, v, z, nx, wx * wx);
            for (int i = 0; i < nx; ++i) dist[base + std::size_t(i)] = d[std::size_t(i)];
        }
    // y passes
    for (int k = 0; k < nz; ++k)
        for (int i = 0; i < nx; ++i) {
            for (int j = 0; j < ny; ++j) f[std::size_t(j)] = dist[mask.index(i, j, k)];
            edt_pass(f, d, v, z, ny, wy * wy);
            for (int j = 0; j < ny; ++j) dist[mask.index(i, j, k)] = d[std::size_t(j)];
        }
    // z passes
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            for (int k = 0; k < nz; ++k) f[std::size_t(k)] = dist[mask.index(i, j, k)];
            edt_pass(f, d, v, z, nz, wz * wz);
            for (int k = 0; k < nz; ++k) dist[mask.index(i, j, k)] = d[std::size_t(k)];
        }
    return dist;
}

double directed_mean_distance(const BinaryMask& from, const std::vector<double>& sq_dist_to_other) {
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < from.values.size(); ++i)
        if (from.values[i]) {
            sum += std::sqrt(sq_dist_to_other[i]);
            ++count;
        }
    return sum / double(count);
}

} // namespace

double avg_hausdorff(const LabelMaskPair& pair, bool halved) {
    if (!(pair.truth.header == pair.prediction.header))
        throw GridMismatch("avg_hausdorff: masks live on different grids");
    const bool g_empty = std::all_of(pair.truth.values.begin(), pair.truth.values.end(),
                                     [](auto v) { return v == 0; });
    const bool p_empty = std::all_of(pair.prediction.values.begin(), pair.prediction.values.end(),
                                     [](auto v) { return v == 0; });
    if (g_empty) throw EmptySet("avg_hausdorff: ground-truth mask G is empty");
    if (p_empty) throw EmptySet("avg_hausdorff: prediction mask P is empty");

    const auto dist_to_p = squared_distance_transform(pair.prediction);
    const auto dist_to_g = squared_distance_transform(pair.truth);
    const double total =
        directed_mean_distance(pair.truth, dist_to_p) + directed_mean_distance(pair.prediction, dist_to_g);
    return halved ? 0.5 * total : total;
}

PerLabelReport dice_per_label(const LabelVolume& truth, const LabelVolume& prediction,
                              const LabelTable& table) {
    if (!(truth.header == prediction.header))
        throw GridMismatch("dice_per_label: volumes live on different grids");

    PerLabelReport report;
    double cort_sum = 0, sub_sum = 0;
    int cort_n = 0, sub_n = 0;
    for (const auto& e : table.entries()) {
        BinaryMask g(truth.header), p(truth.header);
        g.header.dtype = p.header.dtype = Dtype::U8;
        bool g_any = false, p_any = false;
        for (std::size_t i = 0; i < truth.values.size(); ++i) {
            g.values[i] = truth.values[i] == e.internal_id;
            p.values[i] = prediction.values[i] == e.internal_id;
            g_any |= g.values[i] != 0;
            p_any |= p.values[i] != 0;
        }
        LabelMetrics metrics;
        if (g_any || p_any) {
            metrics.dice = dice({g, p});
            if (g_any && p_any) metrics.avg_hd = avg_hausdorff({g, p});
            if (e.is_cortical()) {
                cort_sum += *metrics.dice;
                ++cort_n;
            } else {
                sub_sum += *metrics.dice;
                ++sub_n;
            }
        }
        report.per_label[e.internal_id] = metrics;
    }
    if (cort_n) report.cortical_mean_dice = cort_sum / cort_n;
    if (sub_n) report.subcortical_mean_dice = sub_sum / sub_n;
    return report;
}

// ---------------------------------------------------------------------------
// ICC
// ---------------------------------------------------------------------------

IccResult icc_absolute(const Eigen::MatrixXd& measurements) {
    const int n = int(measurements.rows()); // subjects
    const int k = int(measurements.cols()); // repeats
    if (n < 2 || k < 2) throw DegenerateVariance("ICC needs >= 2 subjects and >= 2 repeats");
    if (!measurements.allFinite()) throw DegenerateVariance("ICC input contains non-finite values");

    const double grand = measurements.mean();
    const Eigen::VectorXd row_means = measurements.rowwise().mean();
    const Eigen::VectorXd col_means = measurements.colwise().mean();

    const double msr = k * (row_means.array() - grand).square().sum() / (n - 1);
    const double msc = n * (col_means.array() - grand).square().sum() / (k - 1);
    double sse = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) {
            const double r = measurements(i, j) - row_means[i] - col_means[j] + grand;
            sse += r * r;
        }
    const double mse = sse / ((n - 1) * (k - 1));

    const double scale = measurements.array().abs().maxCoeff();
    const double eps = 1e-12 * std::max(1.0, scale * scale);
    const double denom = msr + (k - 1) * mse + (double(k) / n) * (msc - mse);
    if (std::abs(denom) <= eps)
        throw DegenerateVariance("all measurements identical; ICC undefined");

    IccResult result;
    result.icc = (msr - mse) / denom;

    if (mse <= eps && msc <= eps) {
        // perfect repeats: agreement is exact
        result.icc = 1.0;
        result.lower = result.upper = 1.0;
        return result;
    }

    // McGraw & Wong (1996) interval for ICC(A,1)
    constexpr double alpha = 0.05;
    const double r = result.icc;
    const double a = (k * r) / (n * (1.0 - r));
    const double b = 1.0 + (k * r * (n - 1.0)) / (n * (1.0 - r));
    const double num = a * msc + b * mse;
    const double df_denom = (a * msc) * (a * msc) / (k - 1) +
                            (b * mse) * (b * mse) / ((n - 1.0) * (k - 1.0));
    if (!(df_denom > 0) || !std::isfinite(num) || r >= 1.0) {
        result.lower = result.upper = result.icc;
        return result;
    }
    const double v = num * num / df_denom;

    const double f_l = f_quantile(1.0 - alpha / 2.0, n - 1.0, v);
    const double f_u = f_quantile(1.0 - alpha / 2.0, v, n - 1.0);
    const double shared = k * msc + (k * double(n) - k - n) * mse;
    result.lower = n * (msr - f_l * mse) / (f_l * shared + n * msr);
    result.upper = n * (f_u * msr - mse) / (shared + n * f_u * msr);
    result.lower = std::min(result.lower, result.icc);
    result.upper = std::max(result.upper, result.icc);
    return result;
}

// ---------------------------------------------------------------------------
// GLM
// ---------------------------------------------------------------------------

GlmResult glm_group(const MeasureTable& table, const std::string& roi, bool use_head_size) {
    const auto it = std::find(table.roi_names.begin(), table.roi_names.end(), roi);
    if (it == table.roi_names.end()) throw RankDeficient("unknown ROI '" + roi + "'");
    const int col = int(it - table.roi_names.begin());

    const int n = int(table.subjects.size());
    const int p = use_head_size ? 5 : 4;
    if (n <= p) throw RankDeficient("need more subjects than model parameters");

    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const auto& s = table.subjects[std::size_t(i)];
        x(i, 0) = 1.0;
        x(i, 1) = s.diagnosis == "CN" ? 0.0 : 1.0;
        x(i, 2) = s.age;
        x(i, 3) = double(s.sex);
        if (use_head_size) x(i, 4) = s.head_size;
        y[i] = table.values(i, col);
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw RankDeficient("design matrix is rank deficient");

    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd residual = y - x * beta;
    const double dof = n - p;
    const double sigma2 = residual.squaredNorm() / dof;
    const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
    const double se = std::sqrt(sigma2 * xtx_inv(1, 1));
    if (!(se > 0)) throw RankDeficient("zero standard error for the diagnosis effect");

    GlmResult result;
    result.beta_dx = beta[1];
    result.t = beta[1] / se;
    const double pval = student_t_two_sided_p(result.t, dof);
    result.signed_p = (result.beta_dx < 0 ? -1.0 : 1.0) * pval;
    return result;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank
// ---------------------------------------------------------------------------

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw TooFewPairs("paired samples differ in length");

    std::vector<double> diffs;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        if (d != 0.0) diffs.push_back(d);
    }
    const std::size_t n = diffs.size();
    if (n < 6)
        throw TooFewPairs("only " + std::to_string(n) +
                          " nonzero pairs; >= 6 required for the normal approximation");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(diffs[a]) < std::abs(diffs[b]);
    });

    // average ranks across ties and accumulate the tie variance correction
    std::vector<double> ranks(n);
    double tie_correction = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
        const double avg_rank = 0.5 * double(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg_rank;
        const double ties = double(j - i + 1);
        tie_correction += (ties * ties * ties - ties);
        i = j + 1;
    }

    double t_plus = 0, t_minus = 0;
    for (std::size_t d = 0; d < n; ++d)
        (diffs[d] > 0 ? t_plus : t_minus) += ranks[d];

    WilcoxonResult result;
    result.w = std::min(t_plus, t_minus);
    const double nn = double(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_correction / 48.0;
    if (!(variance > 0)) throw TooFewPairs("zero variance in signed ranks");
    const double z = (result.w - mean + 0.5) / std::sqrt(variance); // continuity corrected
    result.p = std::min(1.0, 2.0 * normal_cdf(z));
    return result;
}

// ---------------------------------------------------------------------------
// CSV emitters
// ---------------------------------------------------------------------------

void write_dice_csv(const std::vector<DiceRow>& rows, const std::string& path) {
    io::CsvTable table;
    table.header = {"label", "dice", "avg_hd"};
    for (const auto& r : rows)
        table.rows.push_back({r.label, r.dice ? io::format_double(*r.dice) : "NA",
                              r.avg_hd ? io::format_double(*r.avg_hd) : "NA"});
    io::write_csv(table, path);
}

void write_glm_csv(const std::vector<GlmRow>& rows, const std::string& path) {
    io::CsvTable table;
    table.header = {"roi", "beta", "t", "signed_p"};
    for (const auto& r : rows)
        table.rows.push_back({r.roi, io::format_double(r.result.beta_dx),
                              io::format_double(r.result.t), io::format_double(r.result.signed_p)});
    io::write_csv(table, path);
}

void write_icc_csv(const std::vector<IccRow>& rows, const std::string& path) {
    io::CsvTable table;
    table.header = {"roi", "icc", "lower", "upper"};
    for (const auto& r : rows)
        table.rows.push_back({r.roi, io::format_double(r.result.icc),
                              io::format_double(r.result.lower),
                              io::format_double(r.result.upper)});
    io::write_csv(table, path);
}

} // namespace cortexkit::evalstats
