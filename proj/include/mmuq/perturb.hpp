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

// Semantic-preserving prompt perturbations for every modality and the
// sampled prompt set built from them.
//
// Every operator takes a degree in [0, 1]; degree 0 is the identity. The
// magnitudes reached at degree 1 live in PerturbParams.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmuq/media.hpp"
#include "mmuq/random.hpp"

namespace mmuq {

// There are deliberately no cropping or other semantics-altering kinds.
enum class PerturbKind {
  kWordSwap,
  kLlmRephrase,
  kImageRotate,
  kImageBlur,
  kImageBrightness,
  kAudioVolume,
  kAudioPitchShift,
  kAudioTemporalShift,
  kAudioTimbreTilt,
  kVideoFrameDrop,
  kVideoTemporalCrop,
  kVideoSpeed,
  kVideoSpatialRotate,
  kVideoSpatialBlur,
  kVideoSpatialBrightness,
  kPointSubsample,
  kPointJitter,
  kPointRotate3d,
  kPointScale,
};

struct KindInfo {
  PerturbKind kind;
  Modality modality;
  std::string_view name;  // unique within its modality
  bool semantic_preserving;
  bool rule_based;  // false only for llm_rephrase
};

const std::vector<KindInfo>& all_kinds();
const KindInfo& kind_info(PerturbKind kind);
PerturbKind parse_kind(Modality modality, std::string_view name);

class Degree {
 public:
  // Throws Error{kInvalidPlan} outside [0, 1].
  explicit Degree(double value);
  double value() const { return value_; }
  bool is_zero() const { return value_ == 0.0; }

 private:
  double value_;
};

struct PerturbParams {
  double max_rotation_deg = 15.0;
  double brightness_gain = 0.4;  // channel scale 1 + d * gain
  double max_blur_sigma_px = 2.0;
  double volume_gain = 0.5;
  double max_shift_fraction = 0.2;
  double pitch_factor = 0.1;
  double timbre_tilt = 0.3;
  double max_frame_drop_fraction = 0.3;
  double max_crop_fraction = 0.3;
  double speed_gain = 0.5;
  double max_subsample_fraction = 0.5;
  double jitter_bbox_fraction = 0.01;
  double max_rotation3d_deg = 15.0;
  double scale_gain = 0.1;
};

// Rewrites text at the given sampling temperature (backed by an LLM).
using Rephraser =
    std::function<std::string(const std::string& text, double temperature)>;

// Temperature used for llm_rephrase at a given degree: 0.2 + 0.6 d.
double rephrase_temperature(Degree degree);

// Number of disjoint adjacent pairs word_swap exchanges for W words.
std::size_t word_swap_count(std::size_t word_count, Degree degree);

TextContent perturb_text(const TextContent& text, PerturbKind kind,
                         Degree degree, Rng& rng,
                         const Rephraser& rephraser = {});
ImageContent perturb_image(const ImageContent& image, PerturbKind kind,
                           Degree degree, Rng& rng,
                           const PerturbParams& params = {});
AudioContent perturb_audio(const AudioContent& audio, PerturbKind kind,
                           Degree degree, Rng& rng,
                           const PerturbParams& params = {});
VideoContent perturb_video(const VideoContent& video, PerturbKind kind,
                           Degree degree, Rng& rng,
                           const PerturbParams& params = {});
PointCloudContent perturb_pointcloud(const PointCloudContent& cloud,
                                     PerturbKind kind, Degree degree, Rng& rng,
                                     const PerturbParams& params = {});

// Dispatches on the content's modality; the kind must belong to it.
Content perturb(const Content& content, PerturbKind kind, Degree degree,
                Rng& rng, const PerturbParams& params = {},
                const Rephraser& rephraser = {});

enum class PairingOrder { kProgressive, kRandom, kShifted };

std::string_view pairing_name(PairingOrder order);
PairingOrder parse_pairing(std::string_view name);

struct PerturbationPlan {
  int sample_count = 5;
  PairingOrder pairing = PairingOrder::kProgressive;
  std::uint64_t seed = 0;
  // Operator chain per modality. A modality absent from the map uses
  // default_kinds(); an explicitly empty chain leaves it unperturbed.
  std::map<Modality, std::vector<PerturbKind>> kinds;
  PerturbParams params;

  std::vector<PerturbKind> chain_for(Modality modality) const;
};

std::vector<PerturbKind> default_kinds(Modality modality);

struct AppliedPerturbation {
  Modality modality;
  PerturbKind kind;
  double degree;
  friend bool operator==(const AppliedPerturbation&,
                         const AppliedPerturbation&) = default;
};

struct PerturbedPrompt {
  int sample_index = 0;
  PromptBundle bundle;
  std::vector<AppliedPerturbation> applied;
  friend bool operator==(const PerturbedPrompt&,
                         const PerturbedPrompt&) = default;
};

// Degree for (sample, modality position) under the plan's pairing order.
// modality_index is the modality's position in bundle.modalities().
double plan_degree(const PerturbationPlan& plan, int sample_index,
                   std::size_t modality_index, Modality modality);

// C perturbed prompts. Each (sample, modality) draws from its own substream
// of plan.seed, so the output does not depend on evaluation order or on the
// number of worker threads.
std::vector<PerturbedPrompt> build_plan(const PromptBundle& bundle,
                                        const PerturbationPlan& plan,
                                        const Rephraser& rephraser = {},
                                        int parallelism = 1);

}  // namespace mmuq
