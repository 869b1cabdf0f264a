/*
 * Copyright 2026 The mmuq Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mmuq/media.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mmuq/error.hpp"

namespace mmuq {
namespace fs = std::filesystem;

namespace {

[[noreturn]] void format_error(const std::string& what,
                               std::optional<std::size_t> offset = {}) {
  std::string msg = what;
  if (offset) msg += " (at byte " + std::to_string(*offset) + ")";
  throw Error(ErrorCode::kFormatError, msg);
}

[[noreturn]] void invariant(const std::string& what) {
  throw Error(ErrorCode::kInvariantViolation, what);
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong encodings, surrogates and out-of-range code points.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
        (extra == 3 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

std::string lower_ext(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// --- PPM ---

class PpmReader {
 public:
  explicit PpmReader(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    const auto* first = bytes_.data() + pos_;
    const auto* last = bytes_.data() + bytes_.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || value < 0) {
      format_error(std::string("expected ") + what, start);
    }
    pos_ += static_cast<std::size_t>(ptr - first);
    if (pos_ < bytes_.size() &&
        !std::isspace(static_cast<unsigned char>(bytes_[pos_])) &&
        bytes_[pos_] != '#') {
      format_error(std::string("malformed ") + what, pos_);
    }
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::string_view rest() const { return bytes_.substr(pos_); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

// --- PNG via libpng's simplified API ---

namespace {

void reject_animated_png(std::string_view bytes) {
  static constexpr unsigned char kSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSig, 8) != 0) {
    format_error("not a PNG file", 0);
  }
  std::size_t pos = 8;
  while (pos + 8 <= bytes.size()) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    const std::uint32_t len = (std::uint32_t{p[0]} << 24) |
                              (std::uint32_t{p[1]} << 16) |
                              (std::uint32_t{p[2]} << 8) | p[3];
    const std::string_view type(bytes.data() + pos + 4, 4);
    if (type == "acTL") invariant("animated PNG is not supported");
    if (type == "IDAT" || type == "IEND") return;
    pos += 12 + static_cast<std::size_t>(len);
  }
}

}  // namespace

ImageContent decode_png(std::string_view bytes) {
  reject_animated_png(bytes);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    format_error(std::string("PNG header: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  ImageContent out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    format_error("PNG body: " + msg);
  }
  return out;
}

std::string encode_png(const ImageContent& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(),
                                 0, nullptr)) {
    throw Error(ErrorCode::kEncodingError,
                std::string("PNG sizing: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0,
                                 img.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kEncodingError,
                std::string("PNG encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

namespace {

// --- little-endian helpers for WAV ---

std::uint32_t le32(std::string_view b, std::size_t at) {
  const auto* p = reinterpret_cast<const unsigned char*>(b.data() + at);
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
         (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

std::uint16_t le16(std::string_view b, std::size_t at) {
  const auto* p = reinterpret_cast<const unsigned char*>(b.data() + at);
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

double parse_double_token(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    format_error("XYZ line " + std::to_string(line_no) + ": bad number '" +
                 std::string(tok) + "'");
  }
  return v;
}

}  // namespace

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kText: return "text";
    case Modality::kImage: return "image";
    case Modality::kAudio: return "audio";
    case Modality::kVideo: return "video";
    case Modality::kPointCloud: return "pointcloud";
  }
  return "unknown";
}

Modality parse_modality(std::string_view name) {
  if (name == "text") return Modality::kText;
  if (name == "image") return Modality::kImage;
  if (name == "audio") return Modality::kAudio;
  if (name == "video") return Modality::kVideo;
  if (name == "pointcloud" || name == "point_cloud" || name == "point cloud") {
    return Modality::kPointCloud;
  }
  throw Error(ErrorCode::kFormatError,
              "unknown modality '" + std::string(name) + "'");
}

Modality modality_of(const Content& content) {
  return static_cast<Modality>(content.index());
}

void validate(const TextContent& text, bool as_prompt) {
  if (!valid_utf8(text.text)) invariant("text is not valid UTF-8");
  if (as_prompt && text.text.empty()) invariant("prompt text is empty");
}

void validate(const ImageContent& image) {
  if (image.width <= 0 || image.height <= 0) {
    invariant("image dimensions must be positive");
  }
  const auto expected = static_cast<std::size_t>(image.width) *
                        static_cast<std::size_t>(image.height) * 3;
  if (image.pixels.size() != expected) {
    invariant("pixel buffer length " + std::to_string(image.pixels.size()) +
              " != 3*w*h = " + std::to_string(expected));
  }
}

void validate(const AudioContent& audio) {
  if (audio.sample_rate <= 0) invariant("sample rate must be positive");
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    const float s = audio.samples[i];
    if (!(s >= -1.0f && s <= 1.0f)) {
      invariant("audio sample " + std::to_string(i) + " outside [-1, 1]");
    }
  }
}

void validate(const VideoContent& video) {
  if (!(video.fps > 0.0) || !std::isfinite(video.fps)) {
    invariant("video fps must be positive");
  }
  if (video.frames.empty()) invariant("video has no frames");
  for (const auto& f : video.frames) {
    validate(f);
    if (f.width != video.frames.front().width ||
        f.height != video.frames.front().height) {
      invariant("video frames differ in size");
    }
  }
}

void validate(const PointCloudContent& cloud) {
  if (cloud.points.empty()) invariant("point cloud has no points");
  if (cloud.colors && cloud.colors->size() != cloud.points.size()) {
    invariant("point cloud color count does not match point count");
  }
  for (const auto& p : cloud.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      invariant("point cloud coordinate is not finite");
    }
  }
}

void validate(const Content& content) {
  std::visit(
      [](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, TextContent>) {
          validate(c, false);
        } else {
          validate(c);
        }
      },
      content);
}

std::vector<Modality> PromptBundle::modalities() const {
  std::vector<Modality> out{Modality::kText};
  for (const auto& [m, _] : attachments) out.push_back(m);
  return out;
}

void validate(const PromptBundle& bundle) {
  validate(bundle.text, true);
  for (const auto& [m, content] : bundle.attachments) {
    if (m == Modality::kText) invariant("text cannot be an attachment");
    if (modality_of(content) != m) {
      invariant("attachment stored under the wrong modality");
    }
    validate(content);
  }
}

// --- hashing ---

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

void hash_image(Fnv1a& h, const ImageContent& img) {
  h.value(static_cast<std::int64_t>(img.width));
  h.value(static_cast<std::int64_t>(img.height));
  h.bytes(img.pixels.data(), img.pixels.size());
}

}  // namespace

std::uint64_t content_hash(const Content& content) {
  Fnv1a h;
  h.value(static_cast<std::uint8_t>(content.index()));
  std::visit(
      [&h](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, TextContent>) {
          h.bytes(c.text.data(), c.text.size());
        } else if constexpr (std::is_same_v<T, ImageContent>) {
          hash_image(h, c);
        } else if constexpr (std::is_same_v<T, AudioContent>) {
          h.value(static_cast<std::int64_t>(c.sample_rate));
          for (float s : c.samples) h.value(float_to_pcm(s));
        } else if constexpr (std::is_same_v<T, VideoContent>) {
          h.value(c.fps);
          for (const auto& f : c.frames) hash_image(h, f);
        } else {
          for (const auto& p : c.points) {
            h.value(p.x);
            h.value(p.y);
            h.value(p.z);
          }
          if (c.colors) {
            for (const auto& rgb : *c.colors) h.bytes(rgb.data(), 3);
          }
        }
      },
      content);
  return h.digest();
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
    value >>= 4;
  }
  return out;
}

// --- raw file access ---

std::string read_file(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kMissingFile, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path.string());
}

// --- PPM ---

ImageContent decode_ppm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '3' && bytes[1] != '6')) {
    format_error("PPM magic must be P3 or P6", 0);
  }
  const bool binary = bytes[1] == '6';
  PpmReader r(bytes);
  r.advance(2);
  const long width = r.read_uint("width");
  const long height = r.read_uint("height");
  const long maxval = r.read_uint("maxval");
  if (width <= 0 || height <= 0) format_error("PPM dimensions must be positive");
  if (maxval != 255) invariant("only 8-bit PPM (maxval 255) is supported");
  ImageContent img;
  img.width = static_cast<int>(width);
  img.height = static_cast<int>(height);
  const std::size_t n = static_cast<std::size_t>(width) * height * 3;
  img.pixels.resize(n);
  if (binary) {
    // Exactly one whitespace byte separates the header from the raster.
    if (r.remaining() < 1) format_error("PPM raster missing", r.pos());
    r.advance(1);
    if (r.remaining() < n) format_error("PPM raster truncated", r.pos());
    std::memcpy(img.pixels.data(), r.rest().data(), n);
    r.advance(n);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t at = r.pos();
      if (r.remaining() == 0) format_error("PPM raster truncated", at);
      const long v = r.read_uint("sample");
      if (v > 255) format_error("PPM sample exceeds maxval", at);
      img.pixels[i] = static_cast<std::uint8_t>(v);
    }
  }
  r.skip_space_and_comments();
  if (r.remaining() != 0) {
    // A second image in the same stream would be an animation.
    if (r.rest().starts_with("P6") || r.rest().starts_with("P3")) {
      invariant("multi-image PPM streams are not supported");
    }
    format_error("trailing bytes after PPM raster", r.pos());
  }
  return img;
}

std::string encode_ppm(const ImageContent& image, PpmEncoding encoding) {
  validate(image);
  std::string out = encoding == PpmEncoding::kBinary ? "P6\n" : "P3\n";
  out += std::to_string(image.width) + " " + std::to_string(image.height) +
         "\n255\n";
  if (encoding == PpmEncoding::kBinary) {
    out.append(reinterpret_cast<const char*>(image.pixels.data()),
               image.pixels.size());
  } else {
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
      out += std::to_string(image.pixels[i]);
      out += ((i + 1) % (3 * static_cast<std::size_t>(image.width)) == 0) ? '\n' : ' ';
    }
  }
  return out;
}

ImageContent load_image(const fs::path& path) {
  const std::string ext = lower_ext(path);
  const std::string bytes = read_file(path);
  ImageContent img;
  if (ext == ".png") {
    img = decode_png(bytes);
  } else if (ext == ".ppm" || ext == ".pnm") {
    img = decode_ppm(bytes);
  } else if (ext == ".gif" || ext == ".apng") {
    invariant("animated image formats are not supported: " + path.string());
  } else {
    format_error("unsupported image extension '" + ext + "'");
  }
  validate(img);
  return img;
}

void save_image(const ImageContent& image, const fs::path& path,
                PpmEncoding ppm_encoding) {
  validate(image);
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    write_file(path, encode_png(image));
  } else if (ext == ".ppm" || ext == ".pnm") {
    write_file(path, encode_ppm(image, ppm_encoding));
  } else {
    throw Error(ErrorCode::kEncodingError,
                "unsupported image extension '" + ext + "'");
  }
}

// --- WAV ---

float pcm_to_float(std::int16_t value) {
  return static_cast<float>(value) / 32768.0f;
}

std::int16_t float_to_pcm(float sample) {
  const double scaled = std::round(static_cast<double>(sample) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

AudioContent decode_wav(std::string_view b) {
  if (b.size() < 12 || b.substr(0, 4) != "RIFF" || b.substr(8, 4) != "WAVE") {
    format_error("not a RIFF/WAVE file", 0);
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::optional<std::string_view> data;
  while (pos + 8 <= b.size()) {
    const std::string_view id = b.substr(pos, 4);
    const std::uint32_t size = le32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size()) format_error("WAV chunk overruns file", pos);
    if (id == "fmt ") {
      if (size < 16) format_error("WAV fmt chunk too short", pos);
      std::uint16_t format = le16(b, body);
      channels = le16(b, body + 2);
      rate = le32(b, body + 4);
      bits = le16(b, body + 14);
      if (format == 0xFFFE && size >= 40) format = le16(b, body + 24);
      if (format == 3) invariant("float WAV is not supported");
      if (format != 1) invariant("only PCM WAV is supported");
      have_fmt = true;
    } else if (id == "data") {
      data = b.substr(body, size);
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) format_error("WAV has no fmt chunk");
  if (!data) format_error("WAV has no data chunk");
  if (channels != 1) {
    invariant("WAV has " + std::to_string(channels) +
              " channels; only mono is supported");
  }
  if (bits != 16) invariant("only 16-bit PCM WAV is supported");
  if (data->size() % 2 != 0) format_error("WAV data has odd byte count");
  AudioContent audio;
  audio.sample_rate = static_cast<int>(rate);
  audio.samples.reserve(data->size() / 2);
  for (std::size_t i = 0; i + 1 < data->size(); i += 2) {
    audio.samples.push_back(
        pcm_to_float(static_cast<std::int16_t>(le16(*data, i))));
  }
  validate(audio);
  return audio;
}

std::string encode_wav(const AudioContent& audio) {
  validate(audio);
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);  // PCM
  put16(out, 1);  // mono
  put32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (float s : audio.samples) {
    put16(out, static_cast<std::uint16_t>(float_to_pcm(s)));
  }
  return out;
}

// --- XYZ ---

PointCloudContent decode_xyz(std::string_view text) {
  PointCloudContent cloud;
  std::vector<Rgb> colors;
  int columns = 0;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) tokens.push_back(line.substr(i, j - i));
      i = j;
    }
    if (tokens.empty() || tokens.front().starts_with('#')) {
      if (end == text.size()) break;
      continue;
    }
    if (tokens.size() != 3 && tokens.size() != 6) {
      format_error("XYZ line " + std::to_string(line_no) + ": expected 3 or 6 values, got " +
                   std::to_string(tokens.size()));
    }
    if (columns == 0) columns = static_cast<int>(tokens.size());
    if (static_cast<int>(tokens.size()) != columns) {
      invariant("XYZ line " + std::to_string(line_no) +
                ": every point must carry a color once any does");
    }
    cloud.points.push_back({parse_double_token(tokens[0], line_no),
                            parse_double_token(tokens[1], line_no),
                            parse_double_token(tokens[2], line_no)});
    if (columns == 6) {
      Rgb rgb{};
      for (int c = 0; c < 3; ++c) {
        int v = -1;
        const auto tok = tokens[3 + c];
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0 || v > 255) {
          format_error("XYZ line " + std::to_string(line_no) +
                       ": color channel must be an integer in [0,255]");
        }
        rgb[c] = static_cast<std::uint8_t>(v);
      }
      colors.push_back(rgb);
    }
    if (end == text.size()) break;
  }
  if (columns == 6) cloud.colors = std::move(colors);
  validate(cloud);
  return cloud;
}

std::string encode_xyz(const PointCloudContent& cloud) {
  validate(cloud);
  std::string out;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    append_double(out, p.x);
    out += ' ';
    append_double(out, p.y);
    out += ' ';
    append_double(out, p.z);
    if (cloud.colors) {
      for (auto c : (*cloud.colors)[i]) {
        out += ' ';
        out += std::to_string(c);
      }
    }
    out += '\n';
  }
  return out;
}

// --- video ---

VideoContent load_video(const fs::path& manifest_path) {
  const std::string bytes = read_file(manifest_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    format_error(std::string("video manifest: ") + e.what(), e.byte);
  }
  if (!j.is_object() || !j.contains("fps") || !j.contains("frames") ||
      !j["fps"].is_number() || !j["frames"].is_array()) {
    format_error("video manifest needs numeric \"fps\" and array \"frames\"");
  }
  VideoContent video;
  video.fps = j["fps"].get<double>();
  const fs::path dir = manifest_path.parent_path();
  for (const auto& f : j["frames"]) {
    if (!f.is_string()) format_error("video manifest frame entries must be strings");
    video.frames.push_back(load_image(dir / f.get<std::string>()));
  }
  validate(video);
  return video;
}

void save_video(const VideoContent& video, const fs::path& manifest_path) {
  validate(video);
  const fs::path dir = manifest_path.parent_path();
  const std::string stem = manifest_path.stem().string();
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "_%04zu.png", i + 1);
    const std::string file = stem + name;
    save_image(video.frames[i], dir / file);
    frames.push_back(file);
  }
  nlohmann::json manifest = {{"fps", video.fps}, {"frames", frames}};
  write_file(manifest_path, manifest.dump(2) + "\n");
}

// --- dispatch ---

Content load_content(const fs::path& path, Modality modality) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kMissingFile, path.string());
  }
  switch (modality) {
    case Modality::kText: {
      TextContent t{read_file(path)};
      validate(t, false);
      return t;
    }
    case Modality::kImage: return load_image(path);
    case Modality::kAudio: {
      const std::string ext = lower_ext(path);
      if (ext != ".wav") format_error("audio must be .wav, got '" + ext + "'");
      return decode_wav(read_file(path));
    }
    case Modality::kVideo: return load_video(path);
    case Modality::kPointCloud: return decode_xyz(read_file(path));
  }
  throw Error(ErrorCode::kFormatError, "unknown modality");
}

void save_content(const Content& content, const fs::path& path) {
  validate(content);
  std::visit(
      [&path](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, TextContent>) {
          write_file(path, c.text);
        } else if constexpr (std::is_same_v<T, ImageContent>) {
          save_image(c, path);
        } else if constexpr (std::is_same_v<T, AudioContent>) {
          write_file(path, encode_wav(c));
        } else if constexpr (std::is_same_v<T, VideoContent>) {
          save_video(c, path);
        } else {
          write_file(path, encode_xyz(c));
        }
      },
      content);
}

std::string_view default_extension(Modality modality) {
  switch (modality) {
    case Modality::kText: return ".txt";
    case Modality::kImage: return ".png";
    case Modality::kAudio: return ".wav";
    case Modality::kVideo: return ".json";
    case Modality::kPointCloud: return ".xyz";
  }
  return ".bin";
}

}  // namespace mmuq
