#pragma once

#include <string>
#include <vector>

#include "ganomaly/datasets.hpp"
#include "ganomaly/evalmetrics.hpp"
#include "ganomaly/scoring.hpp"

namespace ganomaly::io {

/// Decodes PNG/JPEG/PPM-style image files (RGB or grayscale kept as stored).
/// Missing file or undecodable content raises IoError.
RawImage load_image(const std::string& path);

/// Encodes by extension (.png, .jpg, .ppm, ...).
void save_image(const RawImage& img, const std::string& path);

/// Creates the directory (and parents); IoError on failure.
void make_dirs(const std::string& dir);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// Scatter plot of a score set: sample index on x (normals first, then
/// novel), score on y, one dot per sample, threshold line if tau >= 0.
/// Hand-rolled SVG so reports render anywhere.
void write_score_scatter_svg(const ScoreSet& scores, double tau, const std::string& path);

}  // namespace ganomaly::io
