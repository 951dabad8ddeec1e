#pragma once

#include <string>
#include <vector>

#include "mshinf/pyramid.hpp"

namespace mshinf {

/// Three independent planes in R, G, B order, all the same side.
struct RgbImage {
  std::vector<ImagePlane> channels;  // size 3
};

/// Binary PGM (P5, maxval 255). Samples map to [0, 1] by dividing by 255, so
/// a read-write round trip is byte identical. Only square power-of-two
/// images are accepted.
ImagePlane read_pgm(const std::string& path);
void write_pgm(const std::string& path, const ImagePlane& plane);

/// Binary PPM (P6, maxval 255), same conventions per channel.
RgbImage read_ppm(const std::string& path);
void write_ppm(const std::string& path, const RgbImage& image);

/// Serialized forms, used when artifacts are hashed before being written.
std::string encode_pgm(const ImagePlane& plane);
std::string encode_ppm(const RgbImage& image);

/// True when the file starts with the P6 magic (otherwise P5 is assumed).
bool is_ppm_file(const std::string& path);

}  // namespace mshinf
