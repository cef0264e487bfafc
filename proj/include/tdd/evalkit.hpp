#pragma once

#include <string>
#include <vector>

#include "tdd/hsi.hpp"

namespace tdd {

// Threshold-swept detection/false-alarm series. Thresholds descend from 1
// to 0; a pixel counts as detected at t when its normalized score >= t.
struct RocSeries {
    std::vector<double> thresholds; // descending, starts at 1, ends at 0
    std::vector<double> pd;         // detection probability at each threshold
    std::vector<double> pf;         // false-alarm rate at each threshold
};

// The three base AUCs of the 3D ROC plus the four derived scores.
struct AucReport {
    double auc_df = 0.0; // area under (P_F, P_D)
    double auc_dt = 0.0; // area under (t, P_D)
    double auc_ft = 0.0; // area under (t, P_F)
    double auc_td = 0.0;   // auc_df + auc_dt
    double auc_bs = 0.0;   // auc_df - auc_ft
    double auc_odp = 0.0;  // auc_dt - auc_ft + 1
    double auc_snpr = 0.0; // auc_dt / auc_ft
    bool snpr_infinite = false; // set instead of dividing by zero
};

// Min-max normalize scores to [0,1] (constant maps go to all 0.5), then
// count detections at every threshold in {1} U {unique scores} U {0}.
RocSeries roc_series(const ScoreMap& scores, const BinaryMask& gt);

// Trapezoidal integration of the three curves plus the derived metrics.
AucReport auc_report(const RocSeries& series);

// Derived metrics from given base values (also used by `report` checking).
AucReport auc_report_from_base(double auc_df, double auc_dt, double auc_ft);

// Global Reed-Xiaoli detector: squared Mahalanobis distance of every pixel
// spectrum to the global mean under the global covariance (+ eps*I),
// solved with a Cholesky factorization. Negative eps selects the default
// regularization 1e-6 * trace(cov)/bands.
ScoreMap grx(const HsiCube& cube, double eps = -1.0);

struct FiveNumber {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct SeparabilityStats {
    FiveNumber background;
    FiveNumber anomaly;
};

// Five-number summaries of normalized scores per class (linear-interpolation
// quantiles), the box-plot data of a separability map.
SeparabilityStats separability_stats(const ScoreMap& scores, const BinaryMask& gt);

// CSV emission helpers (schemas shared with the CLI).
std::string auc_csv_header();
std::string auc_csv_row(const std::string& dataset, const std::string& method, const AucReport& r);
std::string roc_csv(const RocSeries& series);
std::string separability_csv_header();
std::string separability_csv_row(const std::string& map_name, const SeparabilityStats& s);

} // namespace tdd
