#include "ctx/explain/tsne.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "ctx/core/error.hpp"

namespace ctx {

namespace {

struct Group {
  const char* name;
  int label;
  Split split;
  cv::Scalar color; // BGR
};

} // namespace

int scatter_plot(const Embedding2D& embedding, const std::string& out_path) {
  const int size = 900, margin = 60;
  cv::Mat canvas(size, size, CV_8UC3, cv::Scalar(255, 255, 255));

  const size_t n = embedding.size();
  double min_x = n ? embedding.x(0) : 0, max_x = min_x;
  double min_y = n ? embedding.y(0) : 0, max_y = min_y;
  for (size_t i = 1; i < n; ++i) {
    min_x = std::min(min_x, embedding.x(i));
    max_x = std::max(max_x, embedding.x(i));
    min_y = std::min(min_y, embedding.y(i));
    max_y = std::max(max_y, embedding.y(i));
  }
  const double span_x = std::max(max_x - min_x, 1e-9);
  const double span_y = std::max(max_y - min_y, 1e-9);

  const Group groups[4] = {
      {"COVID train", 1, Split::train, cv::Scalar(36, 28, 214)},    // red
      {"COVID test", 1, Split::test, cv::Scalar(180, 119, 31)},     // blue
      {"NonCOVID train", 0, Split::train, cv::Scalar(14, 189, 255)}, // yellow
      {"NonCOVID test", 0, Split::test, cv::Scalar(44, 160, 44)},   // green
  };

  int drawn_groups = 0;
  int legend_y = margin / 2;
  for (const auto& group : groups) {
    bool any = false;
    for (size_t i = 0; i < n; ++i) {
      const auto& meta = embedding.point_meta[i];
      if (meta.label != group.label || meta.split != group.split) continue;
      const int px = margin + static_cast<int>(
                                  (embedding.x(i) - min_x) / span_x *
                                  (size - 2 * margin));
      const int py = size - margin -
                     static_cast<int>((embedding.y(i) - min_y) / span_y *
                                      (size - 2 * margin));
      cv::circle(canvas, cv::Point(px, py), 3, group.color, cv::FILLED,
                 cv::LINE_AA);
      any = true;
    }
    if (any) {
      ++drawn_groups;
      cv::circle(canvas, cv::Point(margin, legend_y), 5, group.color,
                 cv::FILLED, cv::LINE_AA);
      cv::putText(canvas, group.name, cv::Point(margin + 12, legend_y + 5),
                  cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(20, 20, 20), 1,
                  cv::LINE_AA);
      legend_y += 22;
    }
  }

  if (!cv::imwrite(out_path, canvas)) {
    throw CtxError(ErrorKind::io, "cannot write figure: " + out_path);
  }
  return drawn_groups;
}

} // namespace ctx
