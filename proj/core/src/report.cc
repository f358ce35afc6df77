#include "popsynth/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "json.hpp"

namespace popsynth {
namespace {

using Json = nlohmann::ordered_json;

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

// Linear map from a data range onto a pixel range; flat ranges are widened.
struct Axis {
  double lo, hi, px_lo, px_hi;
  double operator()(double v) const {
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

Axis make_axis(double lo, double hi, double px_lo, double px_hi) {
  if (!(hi > lo)) {
    const double pad = std::max(std::abs(lo) * 0.1, 1e-3);
    lo -= pad;
    hi += pad;
  } else {
    const double pad = (hi - lo) * 0.05;
    lo -= pad;
    hi += pad;
  }
  return {lo, hi, px_lo, px_hi};
}

constexpr double kWidth = 480;
constexpr double kHeight = 400;
constexpr double kMargin = 56;

class Svg {
 public:
  Svg(const std::string& title, const std::string& x_label, const std::string& y_label) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
         << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out_ << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">"
         << escape_xml(title) << "</text>\n";
    out_ << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
         << "\" text-anchor=\"middle\">" << escape_xml(x_label) << "</text>\n";
    out_ << "<text x=\"14\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
         << kHeight / 2 << ")\">" << escape_xml(y_label) << "</text>\n";
    out_ << "<rect x=\"" << kMargin << "\" y=\"" << kMargin / 2 << "\" width=\""
         << kWidth - 1.5 * kMargin << "\" height=\"" << kHeight - 2 * kMargin
         << "\" fill=\"none\" stroke=\"#444\"/>\n";
  }

  void ticks(const Axis& x, const Axis& y) {
    for (double v : {x.lo, (x.lo + x.hi) / 2, x.hi}) {
      out_ << "<text x=\"" << fixed(x(v)) << "\" y=\"" << kHeight - kMargin + 26
           << "\" text-anchor=\"middle\">" << fixed(v) << "</text>\n";
    }
    for (double v : {y.lo, (y.lo + y.hi) / 2, y.hi}) {
      out_ << "<text x=\"" << kMargin - 4 << "\" y=\"" << fixed(y(v))
           << "\" text-anchor=\"end\">" << fixed(v) << "</text>\n";
    }
  }

  void line(double x1, double y1, double x2, double y2, const std::string& style) {
    out_ << "<line x1=\"" << fixed(x1) << "\" y1=\"" << fixed(y1) << "\" x2=\"" << fixed(x2)
         << "\" y2=\"" << fixed(y2) << "\" " << style << "/>\n";
  }

  void point(double x, double y, bool highlight, const std::string& title) {
    out_ << "<circle cx=\"" << fixed(x) << "\" cy=\"" << fixed(y) << "\" r=\"3\" fill=\""
         << (highlight ? "#d62728" : "#1f77b4") << "\" fill-opacity=\"0.7\"><title>"
         << escape_xml(title) << "</title></circle>\n";
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  std::ostringstream out_;
};

}  // namespace

std::string validation_report_json(const ValidationReport& report) {
  Json out;
  out["n_original"] = report.n_original;
  out["n_synthetic"] = report.n_synthetic;
  Json orders = Json::array();
  for (const auto& m : report.metrics) {
    Json o;
    o["order"] = m.order;
    o["n_cells"] = m.original.cells.size();
    o["n_groups"] = m.original.n_groups;
    o["srmse"] = m.srmse;
    o["pearson"] = optional_number(m.pearson);
    o["r_squared"] = optional_number(m.r_squared);
    if (m.bland_altman) {
      const auto& ba = *m.bland_altman;
      o["bland_altman"] = {{"mean_diff", ba.mean_diff},
                           {"sd", ba.sd},
                           {"lower", ba.lower},
                           {"upper", ba.upper},
                           {"n_outliers", ba.outliers.size()},
                           {"outliers", ba.outliers}};
    } else {
      o["bland_altman"] = nullptr;
    }
    orders.push_back(std::move(o));
  }
  out["metrics"] = std::move(orders);
  return out.dump(2) + "\n";
}

CsvTable cells_csv(const MetricSet& metrics) {
  CsvTable csv;
  csv.header = {"cell", "original", "synthetic", "mean", "difference", "outlier"};
  std::set<std::string> outliers;
  if (metrics.bland_altman) {
    outliers.insert(metrics.bland_altman->outliers.begin(),
                    metrics.bland_altman->outliers.end());
  }
  for (std::size_t i = 0; i < metrics.original.cells.size(); ++i) {
    const auto& o = metrics.original.cells[i];
    const double s = metrics.synthetic.cells.at(i).frequency;
    csv.rows.push_back({o.id, format_double(o.frequency), format_double(s),
                        format_double(0.5 * (o.frequency + s)),
                        format_double(o.frequency - s), outliers.count(o.id) ? "1" : "0"});
  }
  return csv;
}

std::string scatter_svg(const MetricSet& metrics) {
  double hi = 0.0;
  for (std::size_t i = 0; i < metrics.original.cells.size(); ++i) {
    hi = std::max({hi, metrics.original.cells[i].frequency,
                   metrics.synthetic.cells.at(i).frequency});
  }
  const Axis x = make_axis(0.0, hi, kMargin, kWidth - kMargin / 2);
  const Axis y = make_axis(0.0, hi, kHeight - kMargin, kMargin / 2);
  std::string title = "Order-" + std::to_string(metrics.order) + " frequencies";
  if (metrics.pearson) title += ", r = " + fixed(*metrics.pearson);
  title += ", SRMSE = " + fixed(metrics.srmse);
  Svg svg(title, "original", "synthetic");
  svg.ticks(x, y);
  svg.line(x(x.lo), y(x.lo), x(x.hi), y(x.hi), "stroke=\"#888\" stroke-dasharray=\"4 3\"");
  for (std::size_t i = 0; i < metrics.original.cells.size(); ++i) {
    const auto& o = metrics.original.cells[i];
    svg.point(x(o.frequency), y(metrics.synthetic.cells[i].frequency), false, o.id);
  }
  return svg.finish();
}

std::string bland_altman_svg(const MetricSet& metrics) {
  if (!metrics.bland_altman) return {};
  const auto& ba = *metrics.bland_altman;
  double x_lo = 0.0, x_hi = 0.0, y_lo = ba.lower, y_hi = ba.upper;
  for (const auto& p : ba.points) {
    x_hi = std::max(x_hi, p.mean);
    y_lo = std::min(y_lo, p.difference);
    y_hi = std::max(y_hi, p.difference);
  }
  const Axis x = make_axis(x_lo, x_hi, kMargin, kWidth - kMargin / 2);
  const Axis y = make_axis(y_lo, y_hi, kHeight - kMargin, kMargin / 2);
  Svg svg("Bland-Altman, order " + std::to_string(metrics.order), "mean of frequencies",
          "original - synthetic");
  svg.ticks(x, y);
  svg.line(x(x.lo), y(ba.mean_diff), x(x.hi), y(ba.mean_diff), "stroke=\"#444\"");
  for (double limit : {ba.lower, ba.upper}) {
    svg.line(x(x.lo), y(limit), x(x.hi), y(limit),
             "stroke=\"#d62728\" stroke-dasharray=\"6 3\"");
  }
  const std::set<std::string> outliers(ba.outliers.begin(), ba.outliers.end());
  for (const auto& p : ba.points) {
    svg.point(x(p.mean), y(p.difference), outliers.count(p.id) > 0, p.id);
  }
  return svg.finish();
}

std::string fringe_report_json(const FringeAuditReport& report) {
  Json out;
  out["key_variables"] = report.key_variables;
  out["target_variable"] = report.target_variable;
  out["thresholds"] = {{"under", report.thresholds.under}, {"over", report.thresholds.over}};
  out["key_cells"] = report.key_cells;
  out["n_flagged_under"] = report.flagged(FringeFlag::kUnder);
  out["n_flagged_over"] = report.flagged(FringeFlag::kOver);
  Json entries = Json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"key", e.key},
                       {"value", e.value},
                       {"original_count", e.original_count},
                       {"synthetic_count", e.synthetic_count},
                       {"original_share", e.original_share},
                       {"synthetic_share", e.synthetic_share},
                       {"ratio", finite_or_null(e.ratio)},
                       {"flag", std::string(to_string(e.flag))}});
  }
  out["entries"] = std::move(entries);
  return out.dump(2) + "\n";
}

CsvTable fringe_csv(const FringeAuditReport& report) {
  CsvTable csv;
  csv.header = {"key", "value", "original_count", "synthetic_count", "original_share",
                "synthetic_share", "ratio", "flag"};
  for (const auto& e : report.entries) {
    std::string ratio = std::isnan(e.ratio)   ? ""
                        : std::isinf(e.ratio) ? "inf"
                                              : format_double(e.ratio);
    csv.rows.push_back({cell_label(report.key_variables, e.key), e.value,
                        std::to_string(e.original_count), std::to_string(e.synthetic_count),
                        format_double(e.original_share), format_double(e.synthetic_share),
                        ratio, std::string(to_string(e.flag))});
  }
  return csv;
}

}  // namespace popsynth
