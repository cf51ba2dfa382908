#include "cfdepth/codec.hpp"

#include "cfdepth/errors.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace cfd {
namespace {

void append(Bytes& out, const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }

bool is_space(std::uint8_t c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }

// Netpbm-style header tokenizer with byte offsets for error reporting.
class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string token(bool allow_comments) {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (allow_comments && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !is_space(bytes_[pos_])) ++pos_;
    if (start == pos_) throw ParseError(start, "unexpected end of header");
    return {bytes_.begin() + start, bytes_.begin() + pos_};
  }

  int positive_int(bool allow_comments, const char* what) {
    const std::size_t at = skip_to_token(allow_comments);
    const std::string t = token(allow_comments);
    int v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || v <= 0) {
      throw ParseError(at, std::string("bad ") + what + " '" + t + "'");
    }
    return v;
  }

  // Exactly one whitespace byte separates the header from the payload.
  std::size_t end_header() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) {
      throw ParseError(pos_, "missing separator after header");
    }
    return ++pos_;
  }

  std::size_t skip_to_token(bool allow_comments) {
    std::size_t p = pos_;
    while (p < bytes_.size() && (is_space(bytes_[p]) || (allow_comments && bytes_[p] == '#'))) {
      if (bytes_[p] == '#') {
        while (p < bytes_.size() && bytes_[p] != '\n') ++p;
      } else {
        ++p;
      }
    }
    return p;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

Bytes encode_pfm(const PfmImage& image) {
  if (image.width <= 0 || image.height <= 0) throw InvalidInput("encode_pfm: zero-sized map");
  if (image.channels != 1 && image.channels != 3) {
    throw InvalidInput("encode_pfm: channels must be 1 or 3");
  }
  const std::size_t row = static_cast<std::size_t>(image.width) * image.channels;
  if (image.data.size() != row * image.height) throw InvalidInput("encode_pfm: data size mismatch");

  Bytes out;
  append(out, image.channels == 1 ? "Pf\n" : "PF\n");
  append(out, std::to_string(image.width) + " " + std::to_string(image.height) + "\n");
  append(out, "-1.0\n");
  const std::size_t header = out.size();
  out.resize(header + image.data.size() * 4);
  std::uint8_t* dst = out.data() + header;
  for (int y = image.height - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(image.data[y * row + i]);
      for (int b = 0; b < 4; ++b) *dst++ = static_cast<std::uint8_t>(bits >> (8 * b));
    }
  }
  return out;
}

PfmImage decode_pfm(std::span<const std::uint8_t> bytes) {
  HeaderReader reader(bytes);
  const std::string magic = reader.token(false);
  PfmImage img;
  if (magic == "Pf") {
    img.channels = 1;
  } else if (magic == "PF") {
    img.channels = 3;
  } else {
    throw ParseError(0, "bad PFM magic '" + magic + "'");
  }
  img.width = reader.positive_int(false, "width");
  img.height = reader.positive_int(false, "height");
  const std::size_t scale_at = reader.skip_to_token(false);
  const std::string scale_tok = reader.token(false);
  double scale = 0.0;
  auto [p, ec] = std::from_chars(scale_tok.data(), scale_tok.data() + scale_tok.size(), scale);
  if (ec != std::errc() || p != scale_tok.data() + scale_tok.size() || scale == 0.0 ||
      !std::isfinite(scale)) {
    throw ParseError(scale_at, "bad PFM scale '" + scale_tok + "'");
  }
  const bool little = scale < 0.0;
  const std::size_t start = reader.end_header();

  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  const std::size_t count = row * img.height;
  if (bytes.size() - start != count * 4) {
    throw ParseError(start, "PFM payload has " + std::to_string(bytes.size() - start) +
                                " bytes, header implies " + std::to_string(count * 4));
  }
  img.data.resize(count);
  const std::uint8_t* src = bytes.data() + start;
  for (int y = img.height - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        const int shift = little ? 8 * b : 8 * (3 - b);
        bits |= static_cast<std::uint32_t>(src[b]) << shift;
      }
      src += 4;
      img.data[y * row + i] = std::bit_cast<float>(bits);
    }
  }
  return img;
}

Bytes encode_pfm(const DepthMap& depth) {
  PfmImage img{depth.width(), depth.height(), 1, {}};
  img.data.assign(depth.data.data(), depth.data.data() + depth.data.size());
  return encode_pfm(img);
}

Bytes encode_pfm(const ConfidenceMap& conf) {
  PfmImage img{conf.width(), conf.height(), 1, {}};
  img.data.reserve(conf.data.size());
  for (Eigen::Index i = 0; i < conf.data.size(); ++i) {
    img.data.push_back(static_cast<float>(conf.data.data()[i]));
  }
  return encode_pfm(img);
}

Bytes encode_pfm(const NormalField& normals) {
  PfmImage img{normals.width(), normals.height(), 3, {}};
  img.data.reserve(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) img.data.push_back(static_cast<float>(normals.ch[c](y, x)));
    }
  }
  return encode_pfm(img);
}

DepthMap depth_from_pfm(const PfmImage& image, const Intrinsics& intrinsics) {
  if (image.channels != 1) throw InvalidInput("depth PFM must have 1 channel");
  DepthMap d(image.width, image.height, intrinsics);
  std::copy(image.data.begin(), image.data.end(), d.data.data());
  return d;
}

ConfidenceMap confidence_from_pfm(const PfmImage& image) {
  if (image.channels != 1) throw InvalidInput("confidence PFM must have 1 channel");
  ConfidenceMap c{PlaneD(image.height, image.width)};
  std::copy(image.data.begin(), image.data.end(), c.data.data());
  return c;
}

NormalField normals_from_pfm(const PfmImage& image) {
  if (image.channels != 3) throw InvalidInput("normal PFM must have 3 channels");
  NormalField n(image.width, image.height);
  std::size_t i = 0;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) n.ch[c](y, x) = image.data[i++];
    }
  }
  return n;
}

Bytes encode_ppm(const RgbImage& rgb) {
  if (rgb.width() <= 0 || rgb.height() <= 0) throw InvalidInput("encode_ppm: zero-sized image");
  Bytes out;
  append(out, "P6\n" + std::to_string(rgb.width()) + " " + std::to_string(rgb.height()) + "\n255\n");
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.push_back(to_byte(rgb.ch[c](y, x)));
    }
  }
  return out;
}

RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
  HeaderReader reader(bytes);
  if (reader.token(true) != "P6") throw ParseError(0, "bad PPM magic");
  const int w = reader.positive_int(true, "width");
  const int h = reader.positive_int(true, "height");
  const std::size_t maxval_at = reader.skip_to_token(true);
  if (reader.positive_int(true, "maxval") != 255) throw ParseError(maxval_at, "PPM maxval must be 255");
  const std::size_t start = reader.end_header();
  const std::size_t count = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - start != count) {
    throw ParseError(start, "PPM payload has " + std::to_string(bytes.size() - start) +
                                " bytes, header implies " + std::to_string(count));
  }
  RgbImage rgb(w, h);
  const std::uint8_t* src = bytes.data() + start;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) rgb.ch[c](y, x) = static_cast<float>(*src++) / 255.0f;
    }
  }
  return rgb;
}

Bytes encode_pgm(const ObjectMask& mask) {
  if (mask.width() <= 0 || mask.height() <= 0) throw InvalidInput("encode_pgm: zero-sized mask");
  Bytes out;
  append(out, "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n");
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) out.push_back(mask.data(y, x) ? 255 : 0);
  }
  return out;
}

ObjectMask decode_pgm(std::span<const std::uint8_t> bytes) {
  HeaderReader reader(bytes);
  if (reader.token(true) != "P5") throw ParseError(0, "bad PGM magic");
  const int w = reader.positive_int(true, "width");
  const int h = reader.positive_int(true, "height");
  const std::size_t maxval_at = reader.skip_to_token(true);
  if (reader.positive_int(true, "maxval") != 255) throw ParseError(maxval_at, "PGM maxval must be 255");
  const std::size_t start = reader.end_header();
  const std::size_t count = static_cast<std::size_t>(w) * h;
  if (bytes.size() - start != count) {
    throw ParseError(start, "PGM payload has " + std::to_string(bytes.size() - start) +
                                " bytes, header implies " + std::to_string(count));
  }
  ObjectMask mask(w, h);
  const std::uint8_t* src = bytes.data() + start;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) mask.data(y, x) = *src++ < 128 ? 0 : 1;
  }
  return mask;
}

RgbImage quantize_rgb(const RgbImage& rgb) {
  RgbImage out = rgb;
  for (auto& c : out.ch) c = c.unaryExpr([](float v) { return static_cast<float>(to_byte(v)) / 255.0f; });
  return out;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidInput("write failed for " + path.string());
}

}  // namespace cfd
