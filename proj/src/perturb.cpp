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

#include "mmuq/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mmuq/error.hpp"
#include "mmuq/parallel.hpp"

namespace mmuq {
namespace {

// Counts derived from products like 0.3 * 10 must not lose a unit to
// representation error.
constexpr double kCountEps = 1e-9;

std::size_t floor_count(double x) {
  return x <= 0.0 ? 0 : static_cast<std::size_t>(std::floor(x + kCountEps));
}

std::size_t ceil_count(double x) {
  return x <= 0.0 ? 0 : static_cast<std::size_t>(std::ceil(x - kCountEps));
}

std::uint8_t to_channel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

float clamp_sample(double v) {
  return static_cast<float>(std::clamp(v, -1.0, 1.0));
}

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

void require_modality(PerturbKind kind, Modality modality) {
  if (kind_info(kind).modality != modality) {
    throw Error(ErrorCode::kInvalidPlan,
                "kind '" + std::string(kind_info(kind).name) +
                    "' does not apply to " + std::string(modality_name(modality)));
  }
}

ImageContent rotate_image(const ImageContent& img, double angle_deg) {
  const double t = radians(angle_deg);
  const double c = std::cos(t), s = std::sin(t);
  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
  ImageContent out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // Inverse mapping: where does this output pixel come from.
      const double dx = x - cx, dy = y - cy;
      const double sx = std::clamp(c * dx + s * dy + cx, 0.0, img.width - 1.0);
      const double sy = std::clamp(-s * dx + c * dy + cy, 0.0, img.height - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const int y1 = std::min(y0 + 1, img.height - 1);
      const double fx = sx - x0, fy = sy - y0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = img.at(x0, y0, ch) * (1 - fx) + img.at(x1, y0, ch) * fx;
        const double bot = img.at(x0, y1, ch) * (1 - fx) + img.at(x1, y1, ch) * fx;
        out.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3 + ch] =
            to_channel(top * (1 - fy) + bot * fy);
      }
    }
  }
  return out;
}

ImageContent blur_image(const ImageContent& img, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  if (radius <= 0) return img;
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    sum += kernel[k + radius];
  }
  for (double& k : kernel) k /= sum;

  const int w = img.width, h = img.height;
  auto idx = [w](int x, int y, int ch) {
    return (static_cast<std::size_t>(y) * w + x) * 3 + ch;
  };
  std::vector<double> tmp(img.pixels.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * img.pixels[idx(std::clamp(x + k, 0, w - 1), y, ch)];
        }
        tmp[idx(x, y, ch)] = acc;
      }
    }
  }
  ImageContent out = img;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * tmp[idx(x, std::clamp(y + k, 0, h - 1), ch)];
        }
        out.pixels[idx(x, y, ch)] = to_channel(acc);
      }
    }
  }
  return out;
}

Point3 centroid(const std::vector<Point3>& pts) {
  Point3 c;
  for (const auto& p : pts) {
    c.x += p.x;
    c.y += p.y;
    c.z += p.z;
  }
  const double n = static_cast<double>(pts.size());
  return {c.x / n, c.y / n, c.z / n};
}

PerturbKind spatial_to_image(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::kVideoSpatialRotate: return PerturbKind::kImageRotate;
    case PerturbKind::kVideoSpatialBlur: return PerturbKind::kImageBlur;
    default: return PerturbKind::kImageBrightness;
  }
}

}  // namespace

const std::vector<KindInfo>& all_kinds() {
  static const std::vector<KindInfo> kinds = {
      {PerturbKind::kWordSwap, Modality::kText, "word_swap", true, true},
      {PerturbKind::kLlmRephrase, Modality::kText, "llm_rephrase", true, false},
      {PerturbKind::kImageRotate, Modality::kImage, "rotate", true, true},
      {PerturbKind::kImageBlur, Modality::kImage, "blur", true, true},
      {PerturbKind::kImageBrightness, Modality::kImage, "brightness", true, true},
      {PerturbKind::kAudioVolume, Modality::kAudio, "volume", true, true},
      {PerturbKind::kAudioPitchShift, Modality::kAudio, "pitch_shift", true, true},
      {PerturbKind::kAudioTemporalShift, Modality::kAudio, "temporal_shift", true, true},
      {PerturbKind::kAudioTimbreTilt, Modality::kAudio, "timbre_tilt", true, true},
      {PerturbKind::kVideoFrameDrop, Modality::kVideo, "frame_drop", true, true},
      {PerturbKind::kVideoTemporalCrop, Modality::kVideo, "temporal_crop", true, true},
      {PerturbKind::kVideoSpeed, Modality::kVideo, "speed", true, true},
      {PerturbKind::kVideoSpatialRotate, Modality::kVideo, "spatial_rotate", true, true},
      {PerturbKind::kVideoSpatialBlur, Modality::kVideo, "spatial_blur", true, true},
      {PerturbKind::kVideoSpatialBrightness, Modality::kVideo, "spatial_brightness", true, true},
      {PerturbKind::kPointSubsample, Modality::kPointCloud, "subsample", true, true},
      {PerturbKind::kPointJitter, Modality::kPointCloud, "jitter", true, true},
      {PerturbKind::kPointRotate3d, Modality::kPointCloud, "rotate3d", true, true},
      {PerturbKind::kPointScale, Modality::kPointCloud, "scale", true, true},
  };
  return kinds;
}

const KindInfo& kind_info(PerturbKind kind) {
  return all_kinds()[static_cast<std::size_t>(kind)];
}

PerturbKind parse_kind(Modality modality, std::string_view name) {
  for (const auto& info : all_kinds()) {
    if (info.modality == modality && info.name == name) return info.kind;
  }
  throw Error(ErrorCode::kInvalidPlan, "unknown " +
                                           std::string(modality_name(modality)) +
                                           " perturbation '" + std::string(name) + "'");
}

Degree::Degree(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorCode::kInvalidPlan,
                "degree " + std::to_string(value) + " outside [0, 1]");
  }
}

double rephrase_temperature(Degree degree) { return 0.2 + 0.6 * degree.value(); }

std::size_t word_swap_count(std::size_t word_count, Degree degree) {
  return floor_count(degree.value() * static_cast<double>(word_count / 2));
}

TextContent perturb_text(const TextContent& text, PerturbKind kind,
                         Degree degree, Rng& rng, const Rephraser& rephraser) {
  require_modality(kind, Modality::kText);
  if (kind == PerturbKind::kLlmRephrase) {
    if (!rephraser) {
      throw Error(ErrorCode::kBackendError,
                  "llm_rephrase requires a rephrasing backend");
    }
    std::string out = rephraser(text.text, rephrase_temperature(degree));
    if (out.empty()) throw Error(ErrorCode::kBackendError, "empty rephrase");
    return {std::move(out)};
  }

  // Words are maximal non-space runs; separators are kept as they were.
  struct Span {
    std::size_t begin, end;
  };
  std::vector<Span> words;
  const std::string& s = text.text;
  for (std::size_t i = 0; i < s.size();) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t b = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > b) words.push_back({b, i});
  }
  const std::size_t swaps = word_swap_count(words.size(), degree);
  if (swaps == 0) return text;

  // Placing k disjoint adjacent pairs among W slots is a choice of k
  // positions out of W - k; the pair at rank r starts at position p_r + r.
  std::vector<std::size_t> order(words.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto picks = rng.sorted_sample(words.size() - swaps, swaps);
  for (std::size_t r = 0; r < picks.size(); ++r) {
    const std::size_t p = picks[r] + r;
    std::swap(order[p], order[p + 1]);
  }
  std::string out;
  out.reserve(s.size());
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    out.append(s, cursor, words[i].begin - cursor);
    const Span& src = words[order[i]];
    out.append(s, src.begin, src.end - src.begin);
    cursor = words[i].end;
  }
  out.append(s, cursor, std::string::npos);
  return {std::move(out)};
}

ImageContent perturb_image(const ImageContent& image, PerturbKind kind,
                           Degree degree, Rng& /*rng*/,
                           const PerturbParams& params) {
  require_modality(kind, Modality::kImage);
  if (degree.is_zero()) return image;
  const double d = degree.value();
  switch (kind) {
    case PerturbKind::kImageRotate:
      return rotate_image(image, d * params.max_rotation_deg);
    case PerturbKind::kImageBlur:
      return blur_image(image, d * params.max_blur_sigma_px);
    case PerturbKind::kImageBrightness: {
      const double gain = 1.0 + d * params.brightness_gain;
      ImageContent out = image;
      for (auto& p : out.pixels) p = to_channel(p * gain);
      return out;
    }
    default:
      break;
  }
  return image;
}

AudioContent perturb_audio(const AudioContent& audio, PerturbKind kind,
                           Degree degree, Rng& /*rng*/,
                           const PerturbParams& params) {
  require_modality(kind, Modality::kAudio);
  if (degree.is_zero() || audio.samples.empty()) return audio;
  const double d = degree.value();
  const std::size_t n = audio.samples.size();
  AudioContent out = audio;
  switch (kind) {
    case PerturbKind::kAudioVolume: {
      const double gain = 1.0 + d * params.volume_gain;
      for (auto& s : out.samples) s = clamp_sample(s * gain);
      break;
    }
    case PerturbKind::kAudioTemporalShift: {
      const std::size_t shift =
          floor_count(d * params.max_shift_fraction * static_cast<double>(n)) % n;
      for (std::size_t i = 0; i < n; ++i) {
        out.samples[(i + shift) % n] = audio.samples[i];
      }
      break;
    }
    case PerturbKind::kAudioPitchShift: {
      // Resample by the factor and play back at the original rate.
      const double factor = 1.0 + d * params.pitch_factor;
      const auto len = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(static_cast<double>(n) / factor)));
      out.samples.assign(len, 0.0f);
      for (std::size_t j = 0; j < len; ++j) {
        const double pos = std::min(j * factor, static_cast<double>(n - 1));
        const auto i0 = static_cast<std::size_t>(pos);
        const std::size_t i1 = std::min(i0 + 1, n - 1);
        const double f = pos - static_cast<double>(i0);
        out.samples[j] = clamp_sample(audio.samples[i0] * (1 - f) + audio.samples[i1] * f);
      }
      break;
    }
    case PerturbKind::kAudioTimbreTilt: {
      // First-order high-shelf tilt; x[-1] is taken as x[0].
      const double k = d * params.timbre_tilt;
      for (std::size_t i = 0; i < n; ++i) {
        const double prev = audio.samples[i == 0 ? 0 : i - 1];
        const double x = audio.samples[i];
        out.samples[i] = clamp_sample(x + k * (x - prev));
      }
      break;
    }
    default:
      break;
  }
  return out;
}

VideoContent perturb_video(const VideoContent& video, PerturbKind kind,
                           Degree degree, Rng& rng,
                           const PerturbParams& params) {
  require_modality(kind, Modality::kVideo);
  const std::size_t frames = video.frames.size();
  const bool temporal = kind == PerturbKind::kVideoFrameDrop ||
                        kind == PerturbKind::kVideoTemporalCrop;
  if (temporal && frames < 2) {
    throw Error(ErrorCode::kTooFewFrames,
                std::string(kind_info(kind).name) + " needs at least 2 frames");
  }
  if (degree.is_zero()) return video;
  const double d = degree.value();
  VideoContent out;
  out.fps = video.fps;
  switch (kind) {
    case PerturbKind::kVideoFrameDrop: {
      const std::size_t drop = std::min(
          floor_count(d * params.max_frame_drop_fraction * static_cast<double>(frames)),
          frames - 1);
      const auto dropped = rng.sorted_sample(frames, drop);
      std::size_t next = 0;
      for (std::size_t i = 0; i < frames; ++i) {
        if (next < dropped.size() && dropped[next] == i) {
          ++next;
          continue;
        }
        out.frames.push_back(video.frames[i]);
      }
      return out;
    }
    case PerturbKind::kVideoTemporalCrop: {
      const std::size_t keep = std::clamp<std::size_t>(
          ceil_count((1.0 - d * params.max_crop_fraction) * static_cast<double>(frames)),
          1, frames);
      const auto start = static_cast<std::size_t>(rng.below(frames - keep + 1));
      out.frames.assign(video.frames.begin() + static_cast<std::ptrdiff_t>(start),
                        video.frames.begin() + static_cast<std::ptrdiff_t>(start + keep));
      return out;
    }
    case PerturbKind::kVideoSpeed:
      out = video;
      out.fps = video.fps * (1.0 + d * params.speed_gain);
      return out;
    default: {
      const PerturbKind image_kind = spatial_to_image(kind);
      out.frames.reserve(frames);
      for (const auto& f : video.frames) {
        out.frames.push_back(perturb_image(f, image_kind, degree, rng, params));
      }
      return out;
    }
  }
}

PointCloudContent perturb_pointcloud(const PointCloudContent& cloud,
                                     PerturbKind kind, Degree degree, Rng& rng,
                                     const PerturbParams& params) {
  require_modality(kind, Modality::kPointCloud);
  if (degree.is_zero() || cloud.points.empty()) return cloud;
  const double d = degree.value();
  const std::size_t n = cloud.points.size();
  PointCloudContent out = cloud;
  switch (kind) {
    case PerturbKind::kPointSubsample: {
      const std::size_t keep = std::clamp<std::size_t>(
          ceil_count((1.0 - d * params.max_subsample_fraction) * static_cast<double>(n)),
          1, n);
      const auto idx = rng.sorted_sample(n, keep);
      out.points.clear();
      if (out.colors) out.colors->clear();
      for (std::size_t i : idx) {
        out.points.push_back(cloud.points[i]);
        if (out.colors) out.colors->push_back((*cloud.colors)[i]);
      }
      break;
    }
    case PerturbKind::kPointJitter: {
      Point3 lo = cloud.points.front(), hi = lo;
      for (const auto& p : cloud.points) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
      }
      const double diag = std::hypot(hi.x - lo.x, hi.y - lo.y, hi.z - lo.z);
      const double sigma = d * params.jitter_bbox_fraction * diag;
      if (sigma == 0.0) break;
      for (auto& p : out.points) {
        p.x += sigma * rng.normal();
        p.y += sigma * rng.normal();
        p.z += sigma * rng.normal();
      }
      break;
    }
    case PerturbKind::kPointRotate3d: {
      // Vertical axis is z, through the centroid.
      const Point3 c = centroid(cloud.points);
      const double t = radians(d * params.max_rotation3d_deg);
      const double cs = std::cos(t), sn = std::sin(t);
      for (auto& p : out.points) {
        const double dx = p.x - c.x, dy = p.y - c.y;
        p.x = c.x + cs * dx - sn * dy;
        p.y = c.y + sn * dx + cs * dy;
      }
      break;
    }
    case PerturbKind::kPointScale: {
      const Point3 c = centroid(cloud.points);
      const double f = 1.0 + d * params.scale_gain;
      for (auto& p : out.points) {
        p = {c.x + f * (p.x - c.x), c.y + f * (p.y - c.y), c.z + f * (p.z - c.z)};
      }
      break;
    }
    default:
      break;
  }
  return out;
}

Content perturb(const Content& content, PerturbKind kind, Degree degree,
                Rng& rng, const PerturbParams& params,
                const Rephraser& rephraser) {
  return std::visit(
      [&](const auto& c) -> Content {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, TextContent>) {
          return perturb_text(c, kind, degree, rng, rephraser);
        } else if constexpr (std::is_same_v<T, ImageContent>) {
          return perturb_image(c, kind, degree, rng, params);
        } else if constexpr (std::is_same_v<T, AudioContent>) {
          return perturb_audio(c, kind, degree, rng, params);
        } else if constexpr (std::is_same_v<T, VideoContent>) {
          return perturb_video(c, kind, degree, rng, params);
        } else {
          return perturb_pointcloud(c, kind, degree, rng, params);
        }
      },
      content);
}

std::string_view pairing_name(PairingOrder order) {
  switch (order) {
    case PairingOrder::kProgressive: return "progressive";
    case PairingOrder::kRandom: return "random";
    case PairingOrder::kShifted: return "shifted";
  }
  return "progressive";
}

PairingOrder parse_pairing(std::string_view name) {
  if (name == "progressive") return PairingOrder::kProgressive;
  if (name == "random") return PairingOrder::kRandom;
  if (name == "shifted") return PairingOrder::kShifted;
  throw Error(ErrorCode::kInvalidPlan, "unknown pairing order '" + std::string(name) + "'");
}

std::vector<PerturbKind> default_kinds(Modality modality) {
  switch (modality) {
    case Modality::kText: return {PerturbKind::kWordSwap};
    case Modality::kImage: return {PerturbKind::kImageRotate};
    case Modality::kAudio: return {PerturbKind::kAudioVolume};
    case Modality::kVideo: return {PerturbKind::kVideoFrameDrop};
    case Modality::kPointCloud: return {PerturbKind::kPointJitter};
  }
  return {};
}

std::vector<PerturbKind> PerturbationPlan::chain_for(Modality modality) const {
  const auto it = kinds.find(modality);
  return it == kinds.end() ? default_kinds(modality) : it->second;
}

double plan_degree(const PerturbationPlan& plan, int sample_index,
                   std::size_t modality_index, Modality modality) {
  const int c = plan.sample_count;
  if (c <= 1) return 0.0;
  const double top = static_cast<double>(c - 1);
  const auto i = static_cast<std::size_t>(sample_index);
  switch (plan.pairing) {
    case PairingOrder::kProgressive:
      return static_cast<double>(i) / top;
    case PairingOrder::kRandom: {
      Rng rng(derive_seed(plan.seed, {0x7065726dULL, static_cast<std::uint64_t>(modality)}));
      const auto perm = rng.permutation(static_cast<std::size_t>(c));
      return static_cast<double>(perm[i]) / top;
    }
    case PairingOrder::kShifted:
      return static_cast<double>((i + modality_index) % static_cast<std::size_t>(c)) / top;
  }
  return 0.0;
}

std::vector<PerturbedPrompt> build_plan(const PromptBundle& bundle,
                                        const PerturbationPlan& plan,
                                        const Rephraser& rephraser,
                                        int parallelism) {
  if (plan.sample_count < 1) {
    throw Error(ErrorCode::kInvalidPlan, "sample count must be at least 1");
  }
  validate(bundle);
  const auto modalities = bundle.modalities();
  for (Modality m : modalities) {
    for (PerturbKind k : plan.chain_for(m)) require_modality(k, m);
  }

  std::vector<PerturbedPrompt> out(static_cast<std::size_t>(plan.sample_count));
  parallel_for(out.size(), parallelism, [&](std::size_t i) {
    PerturbedPrompt p;
    p.sample_index = static_cast<int>(i);
    p.bundle = bundle;
    for (std::size_t mi = 0; mi < modalities.size(); ++mi) {
      const Modality m = modalities[mi];
      const Degree degree(plan_degree(plan, p.sample_index, mi, m));
      Rng rng(derive_seed(plan.seed, {i, static_cast<std::uint64_t>(m)}));
      for (PerturbKind k : plan.chain_for(m)) {
        if (m == Modality::kText) {
          p.bundle.text = perturb_text(p.bundle.text, k, degree, rng, rephraser);
        } else {
          Content& slot = p.bundle.attachments.at(m);
          slot = perturb(slot, k, degree, rng, plan.params, rephraser);
        }
        p.applied.push_back({m, k, degree.value()});
      }
    }
    out[i] = std::move(p);
  });
  return out;
}

}  // namespace mmuq
