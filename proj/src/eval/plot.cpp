#include "ptdt/eval/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <map>
#include <set>

namespace ptdt::eval {

namespace {

constexpr double kW = 560, kH = 360, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

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

std::string header(double w, double h, const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{3}</text>\n",
      w, h, w / 2, escape(title));
}

std::string size_label(int size) { return size < 0 ? "full" : std::to_string(size); }

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series, const std::vector<std::string>& x_ticks) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 1, y1 += 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::string svg = header(kW, kH, title);
  svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n", kLeft,
                     kTop, pw, ph);
  for (int i = 0; i <= 4; ++i) {
    const double y = y0 + (y1 - y0) * i / 4.0;
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.1f}</text>\n", kLeft - 6, py(y) + 4, y);
  }
  std::set<double> xs;
  for (const auto& s : series) xs.insert(s.x.begin(), s.x.end());
  for (double x : xs) {
    const auto i = std::size_t(std::lround(x));
    const std::string label = x == double(i) && i < x_ticks.size() ? x_ticks[i] : fmt::format("{:g}", x);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", px(x), kTop + ph + 16,
                       escape(label));
  }
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2, kH - 12,
                     escape(x_label));
  svg += fmt::format("<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
                     kTop + ph / 2, escape(y_label));
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    std::string pts;
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      pts += fmt::format("{:.2f},{:.2f} ", px(series[s].x[i]), py(series[s].y[i]));
      svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", px(series[s].x[i]),
                         py(series[s].y[i]), color);
    }
    svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", pts, color);
    const double ly = kTop + 12 + 18 * double(s);
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                       kW - kRight + 12, ly, kW - kRight + 32, color);
    svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", kW - kRight + 38, ly + 4, escape(series[s].name));
  }
  return svg + "</svg>\n";
}

std::string svg_heatmap(const std::string& title, const std::vector<std::string>& rows,
                        const std::vector<std::string>& cols, const std::vector<std::vector<double>>& values) {
  const double cell = 70, left = 110, top = 60;
  const double w = left + cell * double(cols.size()) + 20, h = top + cell * double(rows.size()) + 40;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : values)
    for (double v : r) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!(hi > lo)) hi = lo + 1;
  std::string svg = header(w, h, title);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + cell * (double(c) + 0.5),
                       top - 8, escape(cols[c]));
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 8,
                       top + cell * (double(r) + 0.5) + 4, escape(rows[r]));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v = values[r][c];
      const int shade = int(std::lround(235 - 180 * (v - lo) / (hi - lo)));
      svg += fmt::format(
          "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"rgb({},{},255)\" stroke=\"white\"/>\n",
          left + cell * double(c), top + cell * double(r), cell, cell, shade, shade);
      svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.1f}</text>\n",
                         left + cell * (double(c) + 0.5), top + cell * (double(r) + 0.5) + 4, v);
    }
  }
  return svg + "</svg>\n";
}

std::vector<std::pair<std::string, std::string>> plot_results(const std::vector<ResultRow>& rows) {
  std::map<std::pair<std::string, int>, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) groups[{r.experiment, r.task}].push_back(&r);

  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, group] : groups) {
    const auto& [experiment, task] = key;
    const std::string stem = fmt::format("{}_task{}", experiment, task);
    std::set<std::string> methods;
    for (const auto* r : group) methods.insert(r->method);

    if (experiment == "samples" || experiment == "prompt_length") {
      const bool by_size = experiment == "samples";
      std::set<int> xs_set;
      for (const auto* r : group) xs_set.insert(by_size ? r->size : r->kstar);
      // "full" (-1) sorts last on the size axis.
      std::vector<int> xs(xs_set.begin(), xs_set.end());
      std::stable_partition(xs.begin(), xs.end(), [](int v) { return v >= 0; });
      std::vector<std::string> ticks;
      for (int v : xs) ticks.push_back(by_size ? size_label(v) : std::to_string(v));
      std::vector<Series> series;
      for (const auto& m : methods) {
        Series s{m, {}, {}};
        for (std::size_t i = 0; i < xs.size(); ++i) {
          std::vector<double> vals;
          for (const auto* r : group) {
            if (r->method == m && (by_size ? r->size : r->kstar) == xs[i]) vals.push_back(r->normalized);
          }
          if (vals.empty()) continue;
          s.x.push_back(double(i));
          s.y.push_back(mean(vals));
        }
        series.push_back(std::move(s));
      }
      out.emplace_back(stem, svg_line_plot(fmt::format("{} (task {})", experiment, task),
                                           by_size ? "samples" : "prompt length K*", "normalized score", series,
                                           ticks));
    } else {
      const std::vector<std::string> q = {"expert", "medium", "random"};
      for (const auto& m : methods) {
        std::vector<std::vector<double>> grid(q.size(), std::vector<double>(q.size(), 0.0));
        for (std::size_t i = 0; i < q.size(); ++i) {
          for (std::size_t j = 0; j < q.size(); ++j) {
            std::vector<double> vals;
            for (const auto* r : group) {
              if (r->method == m && r->prompt_quality == q[i] && r->data_quality == q[j]) vals.push_back(r->normalized);
            }
            grid[i][j] = mean(vals);
          }
        }
        out.emplace_back(stem + "_" + m,
                         svg_heatmap(fmt::format("{} {} (rows: prompt, cols: data)", experiment, m), q, q, grid));
      }
    }
  }
  return out;
}

}  // namespace ptdt::eval
