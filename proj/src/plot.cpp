/*
 * Copyright 2026 The MotionFlow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "motionflow/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace motionflow {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
                                    "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.2f", v);
  return buffer;
}

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

}  // namespace

std::array<double, 2> ViewTransform::apply(double x, double y) const {
  const double sx = (width - 2 * margin) / (max_x - min_x);
  const double sy = (height - 2 * margin) / (max_y - min_y);
  return {margin + (x - min_x) * sx, height - margin - (y - min_y) * sy};
}

ViewTransform fit_view(const std::vector<std::array<double, 2>>& points, double width, double height, double margin) {
  if (points.empty()) throw std::invalid_argument("fit_view: no points");
  double lo_x = points[0][0], hi_x = lo_x, lo_y = points[0][1], hi_y = lo_y;
  for (const auto& p : points) {
    lo_x = std::min(lo_x, p[0]);
    hi_x = std::max(hi_x, p[0]);
    lo_y = std::min(lo_y, p[1]);
    hi_y = std::max(hi_y, p[1]);
  }
  const double half = std::max({(hi_x - lo_x) / 2, (hi_y - lo_y) / 2, 1e-6}) * 1.05;
  const double cx = (lo_x + hi_x) / 2, cy = (lo_y + hi_y) / 2;
  return {cx - half, cy - half, cx + half, cy + half, width, height, margin};
}

std::string render_svg(const Tensor<double>& ground_truth, const Tensor<double>& prediction,
                       const PlotOptions& options) {
  require_rank(ground_truth, 3, "plot ground truth");
  require_rank(prediction, 3, "plot prediction");
  const Index steps = ground_truth.dim(0), entities = ground_truth.dim(1), d = ground_truth.dim(2);
  const Index future = prediction.dim(0);
  if (prediction.dim(1) != entities || prediction.dim(2) != d || future > steps) {
    throw ShapeError("plot: prediction " + to_string(prediction.shape()) + " does not match ground truth " +
                     to_string(ground_truth.shape()));
  }
  if (options.x_feature >= d || options.y_feature >= d) throw ShapeError("plot: coordinate feature out of range");
  auto point = [&](const Tensor<double>& t, Index step, Index e) {
    const Index base = (step * entities + e) * d;
    return std::array<double, 2>{t[base + options.x_feature], t[base + options.y_feature]};
  };
  std::vector<std::array<double, 2>> all;
  for (Index t = 0; t < steps; ++t)
    for (Index e = 0; e < entities; ++e) all.push_back(point(ground_truth, t, e));
  for (Index t = 0; t < future; ++t)
    for (Index e = 0; e < entities; ++e) all.push_back(point(prediction, t, e));
  const ViewTransform view = fit_view(all, options.width, options.height, options.margin);

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << fmt(options.width) << ' '
      << fmt(options.height) << "\" width=\"" << fmt(options.width) << "\" height=\"" << fmt(options.height)
      << "\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << fmt(options.width) << "\" height=\"" << fmt(options.height)
      << "\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    svg << "  <text x=\"" << fmt(options.width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(options.title) << "</text>\n";
  }
  const double r = 3.5, half = 3.5;
  for (Index e = 0; e < entities; ++e) {
    const char* color = kPalette[e % 10];
    svg << "  <g class=\"particle\" id=\"particle-" << e << "\" stroke=\"" << color << "\" fill=\"" << color
        << "\">\n    <polyline fill=\"none\" stroke-width=\"1.5\" points=\"";
    for (Index t = 0; t < steps; ++t) {
      const auto p = view.apply(point(ground_truth, t, e)[0], point(ground_truth, t, e)[1]);
      svg << (t ? " " : "") << fmt(p[0]) << ',' << fmt(p[1]);
    }
    svg << "\"/>\n";
    for (Index t = 0; t < steps; ++t) {
      const auto p = view.apply(point(ground_truth, t, e)[0], point(ground_truth, t, e)[1]);
      svg << "    <circle class=\"truth\" cx=\"" << fmt(p[0]) << "\" cy=\"" << fmt(p[1]) << "\" r=\"" << fmt(r)
          << "\" stroke=\"none\"/>\n";
    }
    for (Index t = 0; t < future; ++t) {
      const auto p = view.apply(point(prediction, t, e)[0], point(prediction, t, e)[1]);
      svg << "    <rect class=\"prediction\" x=\"" << fmt(p[0] - half) << "\" y=\"" << fmt(p[1] - half)
          << "\" width=\"" << fmt(2 * half) << "\" height=\"" << fmt(2 * half)
          << "\" fill-opacity=\"0.4\" stroke-opacity=\"0.7\"/>\n";
    }
    svg << "  </g>\n";
  }
  const double lx = options.width - 150, ly = options.height - 18.0 * double(entities + 2) - 8;
  svg << "  <g id=\"legend\" font-size=\"12\" fill=\"black\">\n"
      << "    <circle cx=\"" << fmt(lx) << "\" cy=\"" << fmt(ly) << "\" r=\"" << fmt(r) << "\" fill=\"#444\"/>\n"
      << "    <text x=\"" << fmt(lx + 10) << "\" y=\"" << fmt(ly + 4) << "\">ground truth</text>\n"
      << "    <rect x=\"" << fmt(lx - half) << "\" y=\"" << fmt(ly + 18 - half) << "\" width=\"" << fmt(2 * half)
      << "\" height=\"" << fmt(2 * half) << "\" fill=\"#444\" fill-opacity=\"0.4\"/>\n"
      << "    <text x=\"" << fmt(lx + 10) << "\" y=\"" << fmt(ly + 22) << "\">prediction</text>\n";
  for (Index e = 0; e < entities; ++e) {
    const double y = ly + 18.0 * double(e + 2);
    svg << "    <rect x=\"" << fmt(lx - half) << "\" y=\"" << fmt(y - half) << "\" width=\"" << fmt(2 * half)
        << "\" height=\"" << fmt(2 * half) << "\" fill=\"" << kPalette[e % 10] << "\"/>\n"
        << "    <text x=\"" << fmt(lx + 10) << "\" y=\"" << fmt(y + 4) << "\">particle " << e + 1 << "</text>\n";
  }
  svg << "  </g>\n</svg>\n";
  return svg.str();
}

void plot_svg(const Tensor<double>& ground_truth, const Tensor<double>& prediction, const std::string& path,
              const PlotOptions& options) {
  const std::string svg = render_svg(ground_truth, prediction, options);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << svg;
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace motionflow
