// Copyright 2026 The dpens Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpens/svg_plot.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "dpens/error.h"

namespace dpens {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void WriteSvgPlot(const std::filesystem::path& path, const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  for (const PlotSeries& s : series) {
    for (double x : s.x) {
      if (!std::isfinite(x) || (spec.log_x && x <= 0)) continue;
      const double v = spec.log_x ? std::log10(x) : x;
      x_lo = std::min(x_lo, v);
      x_hi = std::max(x_hi, v);
    }
  }
  if (!(x_lo < x_hi)) {
    x_lo = 0;
    x_hi = 1;
  }
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + ((spec.log_x ? std::log10(x) : x) - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) {
    y = std::clamp(y, spec.y_min, spec.y_max);
    return kTop + (spec.y_max - y) / (spec.y_max - spec.y_min) * ph;
  };

  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << Escape(spec.title)
      << "</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = spec.y_min + (spec.y_max - spec.y_min) * k / 4.0;
    out << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << Num(py(y)) << "\" y2=\"" << Num(py(y))
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << Num(py(y) + 4) << "\" text-anchor=\"end\">" << Num(y)
        << "</text>\n";
  }
  for (int e = static_cast<int>(std::ceil(x_lo)); spec.log_x && e <= static_cast<int>(std::floor(x_hi)); ++e) {
    const double x = px(std::pow(10.0, e));
    out << "<text x=\"" << Num(x) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">1e" << e
        << "</text>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\">"
      << Escape(spec.x_label) << "</text>\n";
  out << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << Escape(spec.y_label) << "</text>\n";

  for (size_t i = 0; i < series.size(); ++i) {
    const PlotSeries& s = series[i];
    const char* color = kColors[i % std::size(kColors)];
    if (s.y_low.size() == s.y.size() && s.y_high.size() == s.y.size() && !s.y.empty()) {
      std::string pts;
      for (size_t k = 0; k < s.x.size(); ++k) pts += Num(px(s.x[k])) + "," + Num(py(s.y_high[k])) + " ";
      for (size_t k = s.x.size(); k-- > 0;) pts += Num(px(s.x[k])) + "," + Num(py(s.y_low[k])) + " ";
      out << "<polygon points=\"" << pts << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      if (!std::isfinite(s.y[k])) continue;
      pts += Num(px(s.x[k])) + "," + Num(py(s.y[k])) + " ";
    }
    out << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    const double ly = kTop + 16 + 18 * static_cast<double>(i);
    out << "<line x1=\"" << kLeft + pw + 10 << "\" x2=\"" << kLeft + pw + 30 << "\" y1=\"" << ly << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kLeft + pw + 35 << "\" y=\"" << ly + 4 << "\">" << Escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace dpens
