#include "mshinf/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mshinf/errors.hpp"

namespace mshinf {

namespace {

// Next whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& in, const std::string& path) {
  std::string token;
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  while (ch != EOF && !std::isspace(ch)) {
    token.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  if (token.empty())
    throw IoError("unexpected end of header in '" + path + "'");
  return token;
}

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
};

PnmHeader read_header(std::istream& in, const std::string& path,
                      const std::string& expected_magic) {
  PnmHeader h;
  h.magic = next_token(in, path);
  if (h.magic != expected_magic)
    throw IoError("'" + path + "': expected " + expected_magic +
                  " magic, got '" + h.magic + "'");
  h.width = std::stoi(next_token(in, path));
  h.height = std::stoi(next_token(in, path));
  const int maxval = std::stoi(next_token(in, path));
  if (maxval != 255)
    throw IoError("'" + path + "': only maxval 255 is supported, got " +
                  std::to_string(maxval));
  if (h.width != h.height)
    throw IoError("'" + path + "': image must be square, got " +
                  std::to_string(h.width) + "x" + std::to_string(h.height));
  if (h.width <= 0 || (h.width & (h.width - 1)) != 0)
    throw IoError("'" + path + "': image side must be a power of two, got " +
                  std::to_string(h.width));
  return h;
}

std::vector<unsigned char> read_payload(std::istream& in, std::size_t bytes,
                                        const std::string& path) {
  std::vector<unsigned char> data(bytes);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes)
    throw IoError("'" + path + "': truncated pixel data");
  return data;
}

unsigned char quantize(double sample) {
  const double clamped = std::clamp(sample, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(clamped * 255.0));
}

}  // namespace

ImagePlane read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const PnmHeader h = read_header(in, path, "P5");
  const auto data = read_payload(
      in, static_cast<std::size_t>(h.width) * h.height, path);
  std::vector<double> samples(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    samples[i] = static_cast<double>(data[i]) / 255.0;
  return ImagePlane(h.width, std::move(samples));
}

std::string encode_pgm(const ImagePlane& plane) {
  std::ostringstream out;
  out << "P5\n" << plane.side << " " << plane.side << "\n255\n";
  for (double s : plane.samples) out.put(static_cast<char>(quantize(s)));
  return out.str();
}

void write_pgm(const std::string& path, const ImagePlane& plane) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  const std::string data = encode_pgm(plane);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed while writing '" + path + "'");
}

RgbImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const PnmHeader h = read_header(in, path, "P6");
  const auto data = read_payload(
      in, static_cast<std::size_t>(h.width) * h.height * 3, path);
  RgbImage image;
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> samples(static_cast<std::size_t>(h.width) * h.height);
    for (std::size_t i = 0; i < samples.size(); ++i)
      samples[i] = static_cast<double>(data[3 * i + ch]) / 255.0;
    image.channels.push_back(ImagePlane(h.width, std::move(samples)));
  }
  return image;
}

std::string encode_ppm(const RgbImage& image) {
  if (image.channels.size() != 3)
    throw DimensionError("PPM image needs exactly 3 channels");
  const int side = image.channels[0].side;
  for (const ImagePlane& p : image.channels)
    if (p.side != side)
      throw DimensionError("PPM channels must share one side length");
  std::ostringstream out;
  out << "P6\n" << side << " " << side << "\n255\n";
  for (std::size_t i = 0; i < image.channels[0].samples.size(); ++i)
    for (int ch = 0; ch < 3; ++ch)
      out.put(static_cast<char>(quantize(image.channels[ch].samples[i])));
  return out.str();
}

void write_ppm(const std::string& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  const std::string data = encode_ppm(image);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed while writing '" + path + "'");
}

bool is_ppm_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  return magic[0] == 'P' && magic[1] == '6';
}

}  // namespace mshinf
