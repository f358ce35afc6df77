#ifndef POPSYNTH_REPORT_H_
#define POPSYNTH_REPORT_H_

#include <string>

#include "popsynth/csv.h"
#include "popsynth/validate.h"

namespace popsynth {

// Summary JSON: record counts and, per order, cell count, SRMSE, Pearson,
// R² (null when undefined) and the Bland-Altman summary.
std::string validation_report_json(const ValidationReport& report);

// One row per cell: cell, original, synthetic, mean, difference, outlier.
CsvTable cells_csv(const MetricSet& metrics);

// Synthetic against original frequency with the identity line.
std::string scatter_svg(const MetricSet& metrics);

// Difference against mean with the mean and limit-of-agreement lines.
// Empty string when the metric set has no Bland-Altman report.
std::string bland_altman_svg(const MetricSet& metrics);

std::string fringe_report_json(const FringeAuditReport& report);

// One row per (key cell, value).
CsvTable fringe_csv(const FringeAuditReport& report);

}  // namespace popsynth

#endif  // POPSYNTH_REPORT_H_
