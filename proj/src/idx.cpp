#include <cstdint>
#include <fstream>
#include <vector>

#include "ganomaly/datasets.hpp"

namespace ganomaly {

namespace {

// IDX files store everything big-endian.
uint32_t read_u32_be(std::istream& f, const std::string& path) {
  uint8_t b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw IoError("truncated idx file " + path);
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

constexpr uint32_t kImagesMagic = 0x00000803;  // ubyte, 3 dimensions
constexpr uint32_t kLabelsMagic = 0x00000801;  // ubyte, 1 dimension

}  // namespace

std::vector<IdxPair> load_idx_pairs(const std::string& images_path,
                                    const std::string& labels_path) {
  std::ifstream imgf(images_path, std::ios::binary);
  if (!imgf) throw IoError("cannot open idx images file " + images_path);
  std::ifstream lblf(labels_path, std::ios::binary);
  if (!lblf) throw IoError("cannot open idx labels file " + labels_path);

  const uint32_t img_magic = read_u32_be(imgf, images_path);
  if (img_magic != kImagesMagic)
    throw FormatError("bad magic in " + images_path + " (expected idx3-ubyte)");
  const uint32_t n = read_u32_be(imgf, images_path);
  const uint32_t h = read_u32_be(imgf, images_path);
  const uint32_t w = read_u32_be(imgf, images_path);
  if (h == 0 || w == 0 || h > 4096 || w > 4096)
    throw FormatError("implausible image dimensions in " + images_path);

  const uint32_t lbl_magic = read_u32_be(lblf, labels_path);
  if (lbl_magic != kLabelsMagic)
    throw FormatError("bad magic in " + labels_path + " (expected idx1-ubyte)");
  const uint32_t ln = read_u32_be(lblf, labels_path);
  if (ln != n) {
    throw DataError("idx count mismatch: " + images_path + " has " + std::to_string(n) +
                    " images, " + labels_path + " has " + std::to_string(ln) + " labels");
  }

  std::vector<IdxPair> out(n);
  for (uint32_t i = 0; i < n; ++i) {
    RawImage& img = out[i].image;
    img.h = h;
    img.w = w;
    img.c = 1;
    img.pixels.resize(static_cast<size_t>(h) * w);
    imgf.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(h) * w);
    if (!imgf) throw IoError("truncated idx file " + images_path);
    uint8_t lbl;
    lblf.read(reinterpret_cast<char*>(&lbl), 1);
    if (!lblf) throw IoError("truncated idx file " + labels_path);
    out[i].label = lbl;
  }
  return out;
}

}  // namespace ganomaly
