#include "hyperq/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace hyperq::svg {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  bool log_y;

  double px(double x) const {
    const double w = kWidth - kLeft - kRight;
    return kLeft + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * w;
  }
  double py(double y) const {
    const double h = kHeight - kTop - kBottom;
    double t = 0.5;
    if (log_y) {
      const double ly = std::log10(std::max(y, 1e-300));
      if (y1 > y0) t = (ly - std::log10(y0)) / (std::log10(y1) - std::log10(y0));
    } else if (y1 > y0) {
      t = (y - y0) / (y1 - y0);
    }
    return kTop + (1.0 - t) * h;
  }
};

void header(std::ostringstream& os, const Axes& axes) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kWidth / 2 - kRight / 2 + kLeft / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(axes.title) << "</text>\n";
  os << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << num(kHeight - 10)
     << "\" text-anchor=\"middle\">" << escape(axes.x_label) << "</text>\n";
  os << "<text transform=\"translate(16," << num((kTop + kHeight - kBottom) / 2)
     << ") rotate(-90)\" text-anchor=\"middle\">" << escape(axes.y_label) << "</text>\n";
}

void y_axis(std::ostringstream& os, const Frame& f) {
  std::vector<double> ticks;
  if (f.log_y) {
    for (double e = std::floor(std::log10(f.y0)); e <= std::ceil(std::log10(f.y1)); e += 1.0) {
      const double v = std::pow(10.0, e);
      if (v >= f.y0 * (1 - 1e-9) && v <= f.y1 * (1 + 1e-9)) ticks.push_back(v);
    }
  } else {
    for (int i = 0; i <= 4; ++i) ticks.push_back(f.y0 + (f.y1 - f.y0) * i / 4.0);
  }
  for (double v : ticks) {
    const double y = f.py(v);
    os << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kWidth - kRight) << "\" y1=\"" << num(y)
       << "\" y2=\"" << num(y) << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << num(kLeft - 4) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
       << tick_label(v) << "</text>\n";
  }
  os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\""
     << num(kWidth - kLeft - kRight) << "\" height=\"" << num(kHeight - kTop - kBottom)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
}

void legend_entry(std::ostringstream& os, std::size_t i, const std::string& label) {
  const double y = kTop + 14.0 * static_cast<double>(i) + 6;
  const double x = kWidth - kRight + 10;
  os << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 8) << "\" width=\"10\" height=\"10\" fill=\""
     << kPalette[i % 8] << "\"/>\n";
  os << "<text x=\"" << num(x + 14) << "\" y=\"" << num(y + 1) << "\">" << escape(label)
     << "</text>\n";
}

}  // namespace

std::string line_chart(const Axes& axes, const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (axes.log_y && s.y[i] <= 0)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = axes.log_y ? 0.1 : 0, y1 = 1;
  if (!axes.log_y && y0 == y1) y0 -= 0.5, y1 += 0.5;
  if (axes.log_y && y0 == y1) y0 /= 2, y1 *= 2;
  const Frame f{x0, x1, y0, y1, axes.log_y};

  std::ostringstream os;
  header(os, axes);
  y_axis(os, f);
  for (int i = 0; i <= 4; ++i) {
    const double v = x0 + (x1 - x0) * i / 4.0;
    os << "<text x=\"" << num(f.px(v)) << "\" y=\"" << num(kHeight - kBottom + 14)
       << "\" text-anchor=\"middle\">" << tick_label(v) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[k % 8] << "\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (axes.log_y && s.y[i] <= 0)) continue;
      if (!first) os << ' ';
      os << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i]));
      first = false;
    }
    os << "\"/>\n";
    legend_entry(os, k, s.label);
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart(const Axes& axes, const std::vector<Bar>& bars) {
  std::vector<std::string> groups, labels;
  for (const auto& b : bars) {
    if (std::find(groups.begin(), groups.end(), b.group) == groups.end()) groups.push_back(b.group);
    if (std::find(labels.begin(), labels.end(), b.label) == labels.end()) labels.push_back(b.label);
  }
  double y1 = 0;
  double y0 = std::numeric_limits<double>::infinity();
  for (const auto& b : bars) {
    y1 = std::max(y1, b.value + b.error);
    if (b.value > 0) y0 = std::min(y0, b.value);
  }
  if (axes.log_y) {
    if (!std::isfinite(y0)) y0 = 0.1;
    y0 /= 2;
    if (y1 <= y0) y1 = y0 * 10;
  } else {
    y0 = 0;
    if (y1 <= 0) y1 = 1;
  }
  const Frame f{0, 1, y0, y1, axes.log_y};

  std::ostringstream os;
  header(os, axes);
  y_axis(os, f);
  const double plot_w = kWidth - kLeft - kRight;
  const double group_w = plot_w / static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(labels.size(), 1));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = kLeft + group_w * static_cast<double>(g);
    os << "<text x=\"" << num(gx + group_w / 2) << "\" y=\"" << num(kHeight - kBottom + 14)
       << "\" text-anchor=\"middle\">" << escape(groups[g]) << "</text>\n";
  }
  for (const auto& b : bars) {
    const auto g = static_cast<std::size_t>(std::find(groups.begin(), groups.end(), b.group) - groups.begin());
    const auto l = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), b.label) - labels.begin());
    const double x = kLeft + group_w * static_cast<double>(g) + group_w * 0.1 + bar_w * static_cast<double>(l);
    const double top = f.py(std::max(b.value, axes.log_y ? y0 : 0.0));
    const double base = f.py(y0);
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(top) << "\" width=\"" << num(bar_w)
       << "\" height=\"" << num(std::max(base - top, 0.0)) << "\" fill=\"" << kPalette[l % 8] << "\"/>\n";
    if (b.error > 0) {
      const double cx = x + bar_w / 2;
      const double lo = f.py(std::max(b.value - b.error, y0));
      const double hi = f.py(b.value + b.error);
      os << "<line x1=\"" << num(cx) << "\" x2=\"" << num(cx) << "\" y1=\"" << num(lo) << "\" y2=\""
         << num(hi) << "\" stroke=\"black\"/>\n";
    }
  }
  for (std::size_t l = 0; l < labels.size(); ++l) legend_entry(os, l, labels[l]);
  os << "</svg>\n";
  return os.str();
}

}  // namespace hyperq::svg
