#include "wend/image.hpp"

#include <fstream>
#include <string>

#include "wend/error.hpp"

namespace wend {

void write_ppm(const std::filesystem::path& path, const Image& image) {
  require(image.channels == 1 || image.channels == 3, "PPM output supports 1 or 3 channels");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open image for writing: " + path.string());
  os << (image.channels == 1 ? "P5" : "P6") << "\n" << image.width << " " << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.pixels.data()),
           static_cast<std::streamsize>(image.pixels.size()));
  if (!os) throw IoError("failed writing image: " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& is) {
  std::string tok;
  char ch;
  while (is.get(ch)) {
    if (ch == '#') {
      std::string discard;
      std::getline(is, discard);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open image: " + path.string());
  const std::string magic = header_token(is);
  int channels = 0;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else throw IoError("unsupported image format '" + magic + "' in " + path.string());
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(header_token(is));
    h = std::stoi(header_token(is));
    maxval = std::stoi(header_token(is));
  } catch (const std::exception&) {
    throw IoError("malformed image header in " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError("unsupported image geometry in " + path.string());
  Image img(w, h, channels);
  if (!is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()))) {
    throw IoError("truncated image data in " + path.string());
  }
  return img;
}

void append_planar(const Image& image, std::vector<double>& out) {
  const std::size_t base = out.size();
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  out.resize(base + plane * image.channels);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < image.channels; ++c) {
      out[base + c * plane + p] = image.pixels[p * image.channels + c] / 255.0;
    }
  }
}

}  // namespace wend
