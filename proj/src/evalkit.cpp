#include "tdd/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace tdd {

namespace {

// Min-max to [0,1]; a constant map normalizes to 0.5 everywhere so the ROC
// sweep still sees one interior step.
std::vector<double> normalize_scores(const std::vector<double>& scores) {
    double lo = scores[0], hi = scores[0];
    for (const double v : scores) {
        if (!std::isfinite(v)) throw DataError("data error: non-finite score");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<double> out(scores.size());
    if (hi == lo) {
        std::fill(out.begin(), out.end(), 0.5);
    } else {
        for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - lo) / (hi - lo);
    }
    return out;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double area = 0.0;
    for (std::size_t k = 1; k < x.size(); ++k)
        area += (x[k] - x[k - 1]) * (y[k] + y[k - 1]) * 0.5;
    return area;
}

} // namespace

RocSeries roc_series(const ScoreMap& scores, const BinaryMask& gt) {
    if (scores.height != gt.height || scores.width != gt.width)
        throw ArgumentError("argument error: score map " + std::to_string(scores.height) + "x" +
                            std::to_string(scores.width) + " vs ground truth " + std::to_string(gt.height) +
                            "x" + std::to_string(gt.width));
    const std::size_t n = scores.scores.size();
    std::size_t n_anom = gt.ones();
    if (n_anom == 0 || n_anom == n)
        throw ArgumentError("argument error: ground truth must contain both classes");
    const std::size_t n_bg = n - n_anom;

    const std::vector<double> norm = normalize_scores(scores.scores);

    std::vector<double> anom_sorted, bg_sorted;
    anom_sorted.reserve(n_anom);
    bg_sorted.reserve(n_bg);
    for (std::size_t i = 0; i < n; ++i)
        (gt.values[i] ? anom_sorted : bg_sorted).push_back(norm[i]);
    std::sort(anom_sorted.begin(), anom_sorted.end());
    std::sort(bg_sorted.begin(), bg_sorted.end());

    std::vector<double> thresholds = norm;
    thresholds.push_back(1.0);
    thresholds.push_back(0.0);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    RocSeries series;
    series.thresholds = thresholds;
    series.pd.reserve(thresholds.size());
    series.pf.reserve(thresholds.size());
    for (const double t : thresholds) {
        // count of values >= t via first position not less than t
        const auto count_ge = [t](const std::vector<double>& sorted) {
            return static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
        };
        series.pd.push_back(count_ge(anom_sorted) / static_cast<double>(n_anom));
        series.pf.push_back(count_ge(bg_sorted) / static_cast<double>(n_bg));
    }
    return series;
}

AucReport auc_report(const RocSeries& series) {
    if (series.thresholds.size() < 2 || series.pd.size() != series.thresholds.size() ||
        series.pf.size() != series.thresholds.size())
        throw ArgumentError("argument error: malformed roc series");
    // (P_F, P_D) is traversed in threshold order, which sweeps P_F from its
    // smallest to largest value; (t, P_D)/(t, P_F) integrate over t in [0,1].
    const double auc_df = trapezoid(series.pf, series.pd);
    std::vector<double> t_asc(series.thresholds.rbegin(), series.thresholds.rend());
    std::vector<double> pd_asc(series.pd.rbegin(), series.pd.rend());
    std::vector<double> pf_asc(series.pf.rbegin(), series.pf.rend());
    const double auc_dt = trapezoid(t_asc, pd_asc);
    const double auc_ft = trapezoid(t_asc, pf_asc);
    return auc_report_from_base(auc_df, auc_dt, auc_ft);
}

AucReport auc_report_from_base(double auc_df, double auc_dt, double auc_ft) {
    AucReport r;
    r.auc_df = auc_df;
    r.auc_dt = auc_dt;
    r.auc_ft = auc_ft;
    r.auc_td = auc_df + auc_dt;
    r.auc_bs = auc_df - auc_ft;
    r.auc_odp = auc_dt - auc_ft + 1.0;
    if (auc_ft == 0.0) {
        r.snpr_infinite = true;
        r.auc_snpr = std::numeric_limits<double>::infinity();
    } else {
        r.auc_snpr = auc_dt / auc_ft;
    }
    return r;
}

ScoreMap grx(const HsiCube& cube, double eps) {
    const int b = cube.bands;
    const std::size_t n = static_cast<std::size_t>(cube.height) * cube.width;

    // mean spectrum
    std::vector<double> mu(static_cast<std::size_t>(b), 0.0);
    for (int k = 0; k < b; ++k) {
        double acc = 0.0;
        const float* plane = cube.data.data() + static_cast<std::size_t>(k) * n;
        for (std::size_t i = 0; i < n; ++i) acc += plane[i];
        mu[static_cast<std::size_t>(k)] = acc / static_cast<double>(n);
    }

    // covariance (population normalization, 1/N)
    std::vector<double> cov(static_cast<std::size_t>(b) * b, 0.0);
    for (int i = 0; i < b; ++i) {
        const float* pi = cube.data.data() + static_cast<std::size_t>(i) * n;
        for (int j = i; j < b; ++j) {
            const float* pj = cube.data.data() + static_cast<std::size_t>(j) * n;
            double acc = 0.0;
            for (std::size_t px = 0; px < n; ++px)
                acc += (pi[px] - mu[static_cast<std::size_t>(i)]) * (pj[px] - mu[static_cast<std::size_t>(j)]);
            const double v = acc / static_cast<double>(n);
            cov[static_cast<std::size_t>(i) * b + j] = v;
            cov[static_cast<std::size_t>(j) * b + i] = v;
        }
    }

    if (eps < 0.0) {
        double trace = 0.0;
        for (int i = 0; i < b; ++i) trace += cov[static_cast<std::size_t>(i) * b + i];
        eps = 1e-6 * trace / static_cast<double>(b);
    }
    for (int i = 0; i < b; ++i) cov[static_cast<std::size_t>(i) * b + i] += eps;

    // lower Cholesky factor; failure means the regularized covariance is not PD
    std::vector<double> chol(static_cast<std::size_t>(b) * b, 0.0);
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j <= i; ++j) {
            double acc = cov[static_cast<std::size_t>(i) * b + j];
            for (int k = 0; k < j; ++k)
                acc -= chol[static_cast<std::size_t>(i) * b + k] * chol[static_cast<std::size_t>(j) * b + k];
            if (i == j) {
                if (acc <= 0.0)
                    throw NumericError("numeric error: covariance is not positive definite; "
                                       "increase the regularization eps");
                chol[static_cast<std::size_t>(i) * b + i] = std::sqrt(acc);
            } else {
                chol[static_cast<std::size_t>(i) * b + j] = acc / chol[static_cast<std::size_t>(j) * b + j];
            }
        }
    }

    // score(x) = d^T Sigma^{-1} d = ||L^{-1} d||^2 via forward substitution
    ScoreMap out;
    out.height = cube.height;
    out.width = cube.width;
    out.scores.resize(n);
    std::vector<double> d(static_cast<std::size_t>(b)), y(static_cast<std::size_t>(b));
    for (std::size_t px = 0; px < n; ++px) {
        for (int k = 0; k < b; ++k)
            d[static_cast<std::size_t>(k)] =
                cube.data[static_cast<std::size_t>(k) * n + px] - mu[static_cast<std::size_t>(k)];
        double score = 0.0;
        for (int i = 0; i < b; ++i) {
            double acc = d[static_cast<std::size_t>(i)];
            for (int k = 0; k < i; ++k)
                acc -= chol[static_cast<std::size_t>(i) * b + k] * y[static_cast<std::size_t>(k)];
            y[static_cast<std::size_t>(i)] = acc / chol[static_cast<std::size_t>(i) * b + i];
            score += y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
        }
        out.scores[px] = score;
    }
    return out;
}

namespace {

// linear-interpolation quantile on sorted data, h = (n-1)p
double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t i = static_cast<std::size_t>(h);
    if (i + 1 >= sorted.size()) return sorted.back();
    const double f = h - static_cast<double>(i);
    return sorted[i] + f * (sorted[i + 1] - sorted[i]);
}

FiveNumber five_number(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    FiveNumber f;
    f.min = values.front();
    f.q1 = quantile_sorted(values, 0.25);
    f.median = quantile_sorted(values, 0.5);
    f.q3 = quantile_sorted(values, 0.75);
    f.max = values.back();
    return f;
}

} // namespace

SeparabilityStats separability_stats(const ScoreMap& scores, const BinaryMask& gt) {
    if (scores.height != gt.height || scores.width != gt.width)
        throw ArgumentError("argument error: score map and ground truth sizes differ");
    const std::vector<double> norm = normalize_scores(scores.scores);
    std::vector<double> anom, bg;
    for (std::size_t i = 0; i < norm.size(); ++i) (gt.values[i] ? anom : bg).push_back(norm[i]);
    if (anom.empty() || bg.empty())
        throw ArgumentError("argument error: separability needs both classes nonempty");
    SeparabilityStats s;
    s.background = five_number(std::move(bg));
    s.anomaly = five_number(std::move(anom));
    return s;
}

namespace {
std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}
} // namespace

std::string auc_csv_header() {
    return "dataset,method,auc_df,auc_dt,auc_ft,auc_td,auc_bs,auc_odp,auc_snpr";
}

std::string auc_csv_row(const std::string& dataset, const std::string& method, const AucReport& r) {
    return dataset + "," + method + "," + fmt(r.auc_df) + "," + fmt(r.auc_dt) + "," + fmt(r.auc_ft) + "," +
           fmt(r.auc_td) + "," + fmt(r.auc_bs) + "," + fmt(r.auc_odp) + "," +
           (r.snpr_infinite ? "inf" : fmt(r.auc_snpr));
}

std::string roc_csv(const RocSeries& series) {
    std::string out = "threshold,pd,pf\n";
    for (std::size_t i = 0; i < series.thresholds.size(); ++i)
        out += fmt(series.thresholds[i]) + "," + fmt(series.pd[i]) + "," + fmt(series.pf[i]) + "\n";
    return out;
}

std::string separability_csv_header() {
    return "map,background_min,background_q1,background_median,background_q3,background_max,"
           "anomaly_min,anomaly_q1,anomaly_median,anomaly_q3,anomaly_max";
}

std::string separability_csv_row(const std::string& map_name, const SeparabilityStats& s) {
    return map_name + "," + fmt(s.background.min) + "," + fmt(s.background.q1) + "," + fmt(s.background.median) +
           "," + fmt(s.background.q3) + "," + fmt(s.background.max) + "," + fmt(s.anomaly.min) + "," +
           fmt(s.anomaly.q1) + "," + fmt(s.anomaly.median) + "," + fmt(s.anomaly.q3) + "," + fmt(s.anomaly.max);
}

} // namespace tdd
