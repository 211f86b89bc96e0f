#include "nams/sim/image.hpp"

#include <fstream>
#include <string>

#include "nams/common/error.hpp"

namespace nams::sim {
namespace {

struct Header {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

Header read_header(std::istream& in, const std::filesystem::path& path) {
  Header h;
  auto next_token = [&]() {
    std::string tok;
    for (;;) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        continue;
      }
      in >> tok;
      return tok;
    }
  };
  h.magic = next_token();
  try {
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed netpbm header");
  }
  in.get();  // single whitespace before the raster
  if (h.width <= 0 || h.height <= 0 || h.maxval != 255) throw IoError(path.string() + ": unsupported netpbm header");
  return h;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Header h = read_header(in, path);
  if (h.magic != "P6") throw IoError(path.string() + ": not a binary PPM");
  Image img(h.width, h.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw IoError(path.string() + ": truncated raster");
  return img;
}

void write_pgm(const std::filesystem::path& path, const LabelMap& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(mask.labels.data()), static_cast<std::streamsize>(mask.labels.size()));
}

LabelMap read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Header h = read_header(in, path);
  if (h.magic != "P5") throw IoError(path.string() + ": not a binary PGM");
  LabelMap mask(h.width, h.height);
  in.read(reinterpret_cast<char*>(mask.labels.data()), static_cast<std::streamsize>(mask.labels.size()));
  if (!in) throw IoError(path.string() + ": truncated raster");
  return mask;
}

}  // namespace nams::sim
