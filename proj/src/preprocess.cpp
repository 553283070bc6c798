#include <algorithm>
#include <cmath>

#include "ganomaly/datasets.hpp"

namespace ganomaly {

namespace {

// One bilinear-resized plane, pixel-center convention: the sample point for
// output x is (x + 0.5) * in/out - 0.5, clamped at the borders. Weights sum
// to one, so constant planes stay constant.
void resize_plane(const float* src, int64_t ih, int64_t iw, float* dst, int64_t oh, int64_t ow) {
  if (ih == oh && iw == ow) {
    std::copy(src, src + ih * iw, dst);
    return;
  }
  const double sy = static_cast<double>(ih) / static_cast<double>(oh);
  const double sx = static_cast<double>(iw) / static_cast<double>(ow);
  for (int64_t y = 0; y < oh; ++y) {
    const double fy = std::max(0.0, (static_cast<double>(y) + 0.5) * sy - 0.5);
    const int64_t y0 = std::min<int64_t>(static_cast<int64_t>(fy), ih - 1);
    const int64_t y1 = std::min<int64_t>(y0 + 1, ih - 1);
    const double wy = fy - static_cast<double>(y0);
    for (int64_t x = 0; x < ow; ++x) {
      const double fx = std::max(0.0, (static_cast<double>(x) + 0.5) * sx - 0.5);
      const int64_t x0 = std::min<int64_t>(static_cast<int64_t>(fx), iw - 1);
      const int64_t x1 = std::min<int64_t>(x0 + 1, iw - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = (1.0 - wx) * src[y0 * iw + x0] + wx * src[y0 * iw + x1];
      const double bot = (1.0 - wx) * src[y1 * iw + x0] + wx * src[y1 * iw + x1];
      dst[y * ow + x] = static_cast<float>((1.0 - wy) * top + wy * bot);
    }
  }
}

}  // namespace

Tensor<float> preprocess(const RawImage& img, const PreprocessOptions& opts) {
  if (img.h <= 0 || img.w <= 0 || (img.c != 1 && img.c != 3))
    throw DataError("preprocess: bad raw image geometry");
  if (img.pixels.size() != static_cast<size_t>(img.h * img.w * img.c))
    throw DataError("preprocess: pixel buffer does not match dimensions");
  if (opts.channels != 1 && opts.channels != 3)
    throw ConfigError("preprocess: target channels must be 1 or 3");

  // To float planes (0..255) with the channel count adapted first: Rec.601
  // luma for 3->1, replication for 1->3. No intermediate quantization.
  const int64_t c = opts.channels, ih = img.h, iw = img.w;
  std::vector<float> planes(static_cast<size_t>(c * ih * iw));
  for (int64_t y = 0; y < ih; ++y) {
    for (int64_t x = 0; x < iw; ++x) {
      if (img.c == 3 && c == 1) {
        planes[static_cast<size_t>(y * iw + x)] =
            0.299f * img.px(y, x, 0) + 0.587f * img.px(y, x, 1) + 0.114f * img.px(y, x, 2);
      } else {
        for (int64_t ch = 0; ch < c; ++ch) {
          const int64_t src_ch = img.c == 1 ? 0 : ch;
          planes[static_cast<size_t>((ch * ih + y) * iw + x)] =
              static_cast<float>(img.px(y, x, src_ch));
        }
      }
    }
  }

  const int64_t s = opts.target_size;
  Tensor<float> out({c, s, s});
  std::vector<float> resized(static_cast<size_t>(s * s));
  for (int64_t ch = 0; ch < c; ++ch) {
    resize_plane(planes.data() + ch * ih * iw, ih, iw, resized.data(), s, s);
    float* dst = out.data() + ch * s * s;
    for (int64_t i = 0; i < s * s; ++i) dst[i] = resized[static_cast<size_t>(i)] / 127.5f - 1.0f;
  }
  return out;
}

RawImage to_raw_image(const Tensor<float>& chw) {
  if (chw.ndim() != 3 || (chw.dim(0) != 1 && chw.dim(0) != 3))
    throw ShapeError("to_raw_image: want [1|3, h, w], got " + Tensor<float>::shape_str(chw.shape()));
  RawImage img;
  img.c = chw.dim(0);
  img.h = chw.dim(1);
  img.w = chw.dim(2);
  img.pixels.resize(static_cast<size_t>(img.c * img.h * img.w));
  for (int64_t ch = 0; ch < img.c; ++ch) {
    for (int64_t y = 0; y < img.h; ++y) {
      for (int64_t x = 0; x < img.w; ++x) {
        float v = chw.at(ch, y, x);
        if (!(v >= -1.0f)) v = -1.0f;  // also catches NaN
        if (v > 1.0f) v = 1.0f;
        img.px(y, x, ch) = static_cast<uint8_t>(std::lround((v + 1.0f) * 127.5f));
      }
    }
  }
  return img;
}

}  // namespace ganomaly
