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

// In-memory content for the five prompt/response modalities and their file
// formats: PNG / PPM images, 16-bit mono PCM WAV audio, JSON-manifest video
// and ASCII XYZ point clouds.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mmuq {

enum class Modality { kText, kImage, kAudio, kVideo, kPointCloud };

inline constexpr std::array<Modality, 5> kAllModalities = {
    Modality::kText, Modality::kImage, Modality::kAudio, Modality::kVideo,
    Modality::kPointCloud};

std::string_view modality_name(Modality m);
// Accepts "text", "image", "audio", "video", "pointcloud" / "point_cloud".
Modality parse_modality(std::string_view name);

struct TextContent {
  std::string text;
  friend bool operator==(const TextContent&, const TextContent&) = default;
};

struct ImageContent {
  int width = 0;
  int height = 0;
  // Row-major RGB triples, 3 * width * height bytes.
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  friend bool operator==(const ImageContent&, const ImageContent&) = default;
};

struct AudioContent {
  int sample_rate = 0;
  std::vector<float> samples;  // mono, each in [-1, 1]
  friend bool operator==(const AudioContent&, const AudioContent&) = default;
};

struct VideoContent {
  double fps = 0.0;
  std::vector<ImageContent> frames;
  friend bool operator==(const VideoContent&, const VideoContent&) = default;
};

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
  friend bool operator==(const Point3&, const Point3&) = default;
};

using Rgb = std::array<std::uint8_t, 3>;

struct PointCloudContent {
  std::vector<Point3> points;
  std::optional<std::vector<Rgb>> colors;  // one per point when present
  friend bool operator==(const PointCloudContent&,
                         const PointCloudContent&) = default;
};

using Content = std::variant<TextContent, ImageContent, AudioContent,
                             VideoContent, PointCloudContent>;

Modality modality_of(const Content& content);

// Throw Error{kInvariantViolation} when the type invariants do not hold.
void validate(const TextContent& text, bool as_prompt);
void validate(const ImageContent& image);
void validate(const AudioContent& audio);
void validate(const VideoContent& video);
void validate(const PointCloudContent& cloud);
void validate(const Content& content);

struct PromptBundle {
  TextContent text;
  // At most one attachment per modality; text is never an attachment.
  std::map<Modality, Content> attachments;

  // Text first, then attachments in enum order.
  std::vector<Modality> modalities() const;
  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

void validate(const PromptBundle& bundle);

// 64-bit FNV-1a over a canonical byte serialization of the content.
std::uint64_t content_hash(const Content& content);
std::string hex64(std::uint64_t value);

// --- file I/O -------------------------------------------------------------

enum class PpmEncoding { kAscii, kBinary };

// The modality selects the decoder: text is read verbatim, images by
// extension (.png, .ppm/.pnm), audio must be .wav, video is a JSON manifest,
// point clouds are XYZ. Error{kMissingFile} when the path is not a file.
Content load_content(const std::filesystem::path& path, Modality modality);
void save_content(const Content& content, const std::filesystem::path& path);

ImageContent decode_ppm(std::string_view bytes);
std::string encode_ppm(const ImageContent& image, PpmEncoding encoding);
ImageContent decode_png(std::string_view bytes);
std::string encode_png(const ImageContent& image);
ImageContent load_image(const std::filesystem::path& path);
void save_image(const ImageContent& image, const std::filesystem::path& path,
                PpmEncoding ppm_encoding = PpmEncoding::kBinary);

// i / 32768 on decode; round(s * 32768) clamped to int16 on encode.
AudioContent decode_wav(std::string_view bytes);
std::string encode_wav(const AudioContent& audio);
float pcm_to_float(std::int16_t value);
std::int16_t float_to_pcm(float sample);

PointCloudContent decode_xyz(std::string_view text);
std::string encode_xyz(const PointCloudContent& cloud);

// Manifest {"fps": f, "frames": [...]}; frame paths relative to the manifest.
VideoContent load_video(const std::filesystem::path& manifest_path);
void save_video(const VideoContent& video,
                const std::filesystem::path& manifest_path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// Canonical file extension used when content must be materialized on disk.
std::string_view default_extension(Modality modality);

}  // namespace mmuq
