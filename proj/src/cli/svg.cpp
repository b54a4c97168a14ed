#include "gnp/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace gnp::cli {

namespace {

std::string escape(const std::string& s) {
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

std::string num(double v) { return fmt::format("{:.2f}", v); }

std::string tick(double v) { return fmt::format("{:.3g}", v); }

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  void widen() {
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

Range span_of(std::initializer_list<const std::vector<double>*> series) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto* s : series) {
    for (double v : *s) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  Range r;
  if (lo <= hi) r = {lo, hi};
  r.widen();
  return r;
}

}  // namespace

std::string diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  // Blue (negative) through white to red (positive).
  const double a = std::abs(t);
  const auto lerp = [&](double from, double to) { return static_cast<int>(std::lround(255.0 * (from + (to - from) * a))); };
  int r, g, b;
  if (t < 0) {
    r = lerp(1.0, 0.02);
    g = lerp(1.0, 0.19);
    b = lerp(1.0, 0.58);
  } else {
    r = lerp(1.0, 0.70);
    g = lerp(1.0, 0.02);
    b = lerp(1.0, 0.09);
  }
  return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
}

std::string heatmap_svg(const std::vector<HeatmapPanel>& panels) {
  double vmax = 0.0;
  for (const auto& p : panels) {
    if (p.matrix.rows() != p.matrix.cols()) throw std::invalid_argument("heatmap_svg: matrix is not square");
    for (std::size_t i = 0; i < p.matrix.size(); ++i)
      if (std::isfinite(p.matrix[i])) vmax = std::max(vmax, std::abs(p.matrix[i]));
  }
  if (vmax == 0.0) vmax = 1.0;

  const double size = 320.0, pad = 40.0, bar_w = 16.0;
  const double width = pad + static_cast<double>(panels.size()) * (size + pad) + bar_w + 60.0;
  const double height = size + 2.0 * pad;
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      num(width), num(height), num(width), num(height));

  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto& m = panels[k].matrix;
    const double x0 = pad + static_cast<double>(k) * (size + pad), y0 = pad;
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(x0), num(y0 - 10), escape(panels[k].title));
    const std::size_t n = m.rows();
    const double cell = n > 0 ? size / static_cast<double>(n) : size;
    out += "<g shape-rendering=\"crispEdges\">\n";
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                           num(x0 + static_cast<double>(j) * cell), num(y0 + static_cast<double>(i) * cell),
                           num(cell + 0.05), num(cell + 0.05), diverging_color(m(i, j) / vmax));
      }
    }
    out += "</g>\n";
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                       num(x0), num(y0), num(size), num(size));
  }

  // Colour bar.
  const double bx = pad + static_cast<double>(panels.size()) * (size + pad), steps = 64;
  for (int s = 0; s < steps; ++s) {
    const double t = 1.0 - 2.0 * (s + 0.5) / steps;
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n", num(bx),
                       num(pad + s * size / steps), num(bar_w), num(size / steps + 0.05), diverging_color(t));
  }
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", num(bx),
                     num(pad), num(bar_w), num(size));
  for (double t : {1.0, 0.5, 0.0, -0.5, -1.0}) {
    const double y = pad + (1.0 - t) / 2.0 * size;
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(bx + bar_w + 4), num(y + 4), tick(t * vmax));
  }
  out += "</svg>\n";
  return out;
}

std::string samples_svg(const std::vector<SamplePanel>& panels) {
  const double w = 640.0, h = 260.0, left = 60.0, top = 30.0, gap = 50.0;
  const double height = top + static_cast<double>(panels.size()) * (h + gap);
  const double width = left + w + 30.0;
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      num(width), num(height), num(width), num(height));

  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto& p = panels[k];
    if (p.mean.size() != p.x.size() || p.lower.size() != p.x.size() || p.upper.size() != p.x.size()) {
      throw std::invalid_argument("samples_svg: mean and band must match the grid");
    }
    const double y0 = top + static_cast<double>(k) * (h + gap);
    Range rx = span_of({&p.x, &p.ctx_x, &p.tgt_x});
    Range ry = span_of({&p.lower, &p.upper, &p.ctx_y, &p.tgt_y});
    for (const auto& s : p.samples) {
      const Range r = span_of({&s});
      ry.lo = std::min(ry.lo, r.lo);
      ry.hi = std::max(ry.hi, r.hi);
    }
    const double margin = 0.05 * (ry.hi - ry.lo);
    ry.lo -= margin;
    ry.hi += margin;
    const auto px = [&](double x) { return left + (x - rx.lo) / (rx.hi - rx.lo) * w; };
    const auto py = [&](double y) { return y0 + (1.0 - (y - ry.lo) / (ry.hi - ry.lo)) * h; };
    const auto polyline = [&](const std::vector<double>& ys) {
      std::string pts;
      for (std::size_t i = 0; i < p.x.size(); ++i) {
        if (!std::isfinite(ys[i])) continue;
        pts += fmt::format("{}{},{}", pts.empty() ? "" : " ", num(px(p.x[i])), num(py(ys[i])));
      }
      return pts;
    };

    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(left), num(y0 - 8), escape(p.title));
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                       num(left), num(y0), num(w), num(h));
    for (double t : {0.0, 0.5, 1.0}) {
      const double xv = rx.lo + t * (rx.hi - rx.lo), yv = ry.lo + t * (ry.hi - ry.lo);
      out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(px(xv)), num(y0 + h + 16),
                         tick(xv));
      out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(left - 4), num(py(yv) + 4),
                         tick(yv));
    }

    // Band: upper edge left to right, lower edge back.
    std::string band;
    for (std::size_t i = 0; i < p.x.size(); ++i)
      band += fmt::format("{}{},{}", band.empty() ? "" : " ", num(px(p.x[i])), num(py(p.upper[i])));
    for (std::size_t i = p.x.size(); i-- > 0;) band += fmt::format(" {},{}", num(px(p.x[i])), num(py(p.lower[i])));
    out += fmt::format("<polygon points=\"{}\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>\n", band);
    for (const auto& s : p.samples) {
      if (s.size() != p.x.size()) throw std::invalid_argument("samples_svg: sample path must match the grid");
      out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"#6a51a3\" stroke-width=\"0.8\"/>\n",
                         polyline(s));
    }
    out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\"/>\n",
                       polyline(p.mean));
    for (std::size_t i = 0; i < p.tgt_x.size(); ++i) {
      out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"none\" stroke=\"#636363\"/>\n", num(px(p.tgt_x[i])),
                         num(py(p.tgt_y[i])));
    }
    for (std::size_t i = 0; i < p.ctx_x.size(); ++i) {
      out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"black\"/>\n", num(px(p.ctx_x[i])),
                         num(py(p.ctx_y[i])));
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace gnp::cli
