#include "ganomaly/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <opencv2/imgcodecs.hpp>

namespace fs = std::filesystem;

namespace ganomaly::io {

RawImage load_image(const std::string& path) {
  if (!fs::exists(path)) throw IoError("image file not found: " + path);
  cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw IoError("cannot decode image: " + path);

  if (mat.depth() != CV_8U) {
    cv::Mat tmp;
    // 16-bit sources get range-compressed to 8 bit.
    mat.convertTo(tmp, CV_8U, mat.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
    mat = tmp;
  }
  const int src_c = mat.channels();
  if (src_c != 1 && src_c != 3 && src_c != 4) {
    throw FormatError("unsupported channel count in " + path);
  }

  RawImage img;
  img.h = mat.rows;
  img.w = mat.cols;
  img.c = src_c == 1 ? 1 : 3;  // alpha channel gets dropped
  img.pixels.resize(static_cast<size_t>(img.h * img.w * img.c));
  for (int64_t y = 0; y < img.h; ++y) {
    const uint8_t* row = mat.ptr<uint8_t>(static_cast<int>(y));
    for (int64_t x = 0; x < img.w; ++x) {
      if (img.c == 1) {
        img.px(y, x, 0) = row[x];
      } else {
        // OpenCV stores BGR(A).
        img.px(y, x, 0) = row[x * src_c + 2];
        img.px(y, x, 1) = row[x * src_c + 1];
        img.px(y, x, 2) = row[x * src_c + 0];
      }
    }
  }
  return img;
}

void save_image(const RawImage& img, const std::string& path) {
  cv::Mat mat(static_cast<int>(img.h), static_cast<int>(img.w),
              img.c == 1 ? CV_8UC1 : CV_8UC3);
  for (int64_t y = 0; y < img.h; ++y) {
    uint8_t* row = mat.ptr<uint8_t>(static_cast<int>(y));
    for (int64_t x = 0; x < img.w; ++x) {
      if (img.c == 1) {
        row[x] = img.px(y, x, 0);
      } else {
        row[x * 3 + 0] = img.px(y, x, 2);
        row[x * 3 + 1] = img.px(y, x, 1);
        row[x * 3 + 2] = img.px(y, x, 0);
      }
    }
  }
  if (!cv::imwrite(path, mat)) throw IoError("cannot write image: " + path);
}

void make_dirs(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw IoError("short write to " + path);
}

void write_score_scatter_svg(const ScoreSet& scores, double tau, const std::string& path) {
  const int W = 960, H = 420, ML = 64, MR = 24, MT = 36, MB = 44;
  const int plot_w = W - ML - MR, plot_h = H - MT - MB;

  // Normals first, then novel, keeping within-group order.
  std::vector<const ScoredSample*> ordered;
  for (const auto& s : scores.samples)
    if (!s.anomaly_label) ordered.push_back(&s);
  const size_t normal_count = ordered.size();
  for (const auto& s : scores.samples)
    if (s.anomaly_label) ordered.push_back(&s);
  if (ordered.empty()) throw DataError("scatter: empty score set");

  auto value = [&](const ScoredSample& s) { return s.has_scaled ? s.scaled : s.raw; };
  double lo = value(*ordered.front()), hi = lo;
  for (const auto* s : ordered) {
    lo = std::min(lo, value(*s));
    hi = std::max(hi, value(*s));
  }
  if (tau >= 0.0) {
    lo = std::min(lo, tau);
    hi = std::max(hi, tau);
  }
  if (hi == lo) hi = lo + 1.0;
  const double pad = 0.04 * (hi - lo);
  lo -= pad;
  hi += pad;

  auto ypix = [&](double v) { return MT + plot_h - (v - lo) / (hi - lo) * plot_h; };
  auto xpix = [&](size_t i) {
    return ML + (ordered.size() > 1
                     ? static_cast<double>(i) / static_cast<double>(ordered.size() - 1) * plot_w
                     : plot_w / 2.0);
  };

  std::string svg;
  char buf[512];
  auto emit = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof(buf), fmt, args...);
    svg += buf;
  };

  emit("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
       "viewBox=\"0 0 %d %d\">\n",
       W, H, W, H);
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  emit("<text x=\"%d\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\">anomaly scores "
       "(variant %s, scaling %s)</text>\n",
       ML, to_string(scores.variant), to_string(scores.scaling));
  // axes
  emit("<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"#444\"/>\n", ML, MT + plot_h,
       ML + plot_w, MT + plot_h);
  emit("<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"#444\"/>\n", ML, MT, ML,
       MT + plot_h);
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    emit("<text x=\"%d\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\" "
         "text-anchor=\"end\">%.3g</text>\n",
         ML - 6, ypix(v) + 4.0, v);
    emit("<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"#ddd\"/>\n", ML, ypix(v),
         ML + plot_w, ypix(v));
  }
  // group divider between normals and novel
  if (normal_count > 0 && normal_count < ordered.size()) {
    const double x = (xpix(normal_count - 1) + xpix(normal_count)) / 2.0;
    emit("<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"#bbb\" "
         "stroke-dasharray=\"2,3\"/>\n",
         x, MT, x, MT + plot_h);
  }
  if (tau >= 0.0) {
    emit("<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"#111\" "
         "stroke-dasharray=\"6,4\"/>\n",
         ML, ypix(tau), ML + plot_w, ypix(tau));
    emit("<text x=\"%d\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\">tau=%.3g"
         "</text>\n",
         ML + plot_w - 70, ypix(tau) - 5.0, tau);
  }
  for (size_t i = 0; i < ordered.size(); ++i) {
    emit("<circle cx=\"%.1f\" cy=\"%.1f\" r=\"2.2\" fill=\"%s\" fill-opacity=\"0.7\"/>\n",
         xpix(i), ypix(value(*ordered[i])), ordered[i]->anomaly_label ? "#d34e4e" : "#2b7bba");
  }
  emit("<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#2b7bba\">"
       "normal (%zu)</text>\n",
       ML, H - 12, normal_count);
  emit("<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#d34e4e\">"
       "novel (%zu)</text>\n",
       ML + 140, H - 12, ordered.size() - normal_count);
  svg += "</svg>\n";
  write_text_file(path, svg);
}

}  // namespace ganomaly::io
