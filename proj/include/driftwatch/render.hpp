/*
 * Copyright 2026 The driftwatch Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Text, CSV and SVG renderings of drift series and bootstrap summaries.
// Missing values (no KL, threshold not yet active) render as empty CSV
// cells and "-" in tables.

#include <algorithm>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>

#include "driftwatch/drift.hpp"
#include "driftwatch/eval.hpp"

namespace driftwatch {

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string opt_fixed(const std::optional<double>& v, const char* missing) {
  return v ? fixed(*v) : std::string(missing);
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

inline std::string drift_table(std::span<const DriftReport> reports) {
  std::ostringstream os;
  os << std::left << std::setw(9) << "month" << std::setw(10) << "kl" << std::setw(11) << "threshold" << std::setw(9)
     << "exceeded" << "action\n";
  for (const auto& r : reports) {
    os << std::setw(9) << r.month.to_string() << std::setw(10)
       << (r.kl ? detail::fixed(r.kl->value) : std::string("-")) << std::setw(11)
       << detail::opt_fixed(r.threshold, "-") << std::setw(9) << (r.exceeded ? "yes" : "no") << to_string(r.action)
       << '\n';
  }
  return os.str();
}

inline std::string drift_csv(std::span<const DriftReport> reports) {
  std::ostringstream os;
  os << "month,kind,kl,threshold,exceeded,action\n";
  for (const auto& r : reports) {
    os << r.month.to_string() << ',' << to_string(r.kind) << ','
       << (r.kl ? detail::fixed(r.kl->value, 9) : std::string()) << ','
       << (r.threshold ? detail::fixed(*r.threshold, 9) : std::string()) << ',' << (r.exceeded ? "true" : "false")
       << ',' << to_string(r.action) << '\n';
  }
  return os.str();
}

/// Month-by-KL line chart. One <circle> per report with a KL (red when
/// exceeded) and a dashed step line through the active thresholds.
inline std::string drift_svg(std::span<const DriftReport> reports, std::string_view title) {
  constexpr double W = 720, H = 360, L = 60, R = 20, T = 40, B = 50;
  double ymax = 0.0;
  for (const auto& r : reports) {
    if (r.kl) ymax = std::max(ymax, r.kl->value);
    if (r.threshold) ymax = std::max(ymax, *r.threshold);
  }
  if (ymax <= 0.0) ymax = 1.0;
  ymax *= 1.1;
  const std::size_t n = reports.size();
  auto x_of = [&](std::size_t i) { return L + (n <= 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1)) * (W - L - R); };
  auto y_of = [&](double v) { return T + (1.0 - v / ymax) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
     << detail::xml_escape(title) << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = ymax * t / 4.0;
    os << "<text x=\"" << L - 6 << "\" y=\"" << detail::fixed(y_of(v), 1)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << detail::fixed(v, 2) << "</text>\n";
  }

  std::string kl_points, thr_points;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = reports[i];
    const std::string x = detail::fixed(x_of(i), 1);
    os << "<text x=\"" << x << "\" y=\"" << H - B + 16
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">" << r.month.to_string()
       << "</text>\n";
    if (r.kl) kl_points += x + "," + detail::fixed(y_of(r.kl->value), 1) + " ";
    if (r.threshold) thr_points += x + "," + detail::fixed(y_of(*r.threshold), 1) + " ";
  }
  if (!thr_points.empty())
    os << "<polyline class=\"threshold\" fill=\"none\" stroke=\"gray\" stroke-dasharray=\"4 3\" points=\""
       << thr_points << "\"/>\n";
  if (!kl_points.empty())
    os << "<polyline class=\"kl\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"" << kl_points
       << "\"/>\n";
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = reports[i];
    if (!r.kl) continue;
    os << "<circle cx=\"" << detail::fixed(x_of(i), 1) << "\" cy=\"" << detail::fixed(y_of(r.kl->value), 1)
       << "\" r=\"4\" fill=\"" << (r.exceeded ? "crimson" : "steelblue") << "\"><title>" << r.month.to_string()
       << " KL " << detail::fixed(r.kl->value) << "</title></circle>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// One row per histogram bin: bin_start,bin_end,count.
inline std::string bootstrap_histogram_csv(const BootstrapSummary& s) {
  std::ostringstream os;
  os << "bin_start,bin_end,count\n";
  const double width = 1.0 / static_cast<double>(s.histogram.size());
  for (std::size_t i = 0; i < s.histogram.size(); ++i)
    os << detail::fixed(width * static_cast<double>(i), 4) << ',' << detail::fixed(width * static_cast<double>(i + 1), 4)
       << ',' << s.histogram[i] << '\n';
  return os.str();
}

}  // namespace driftwatch
