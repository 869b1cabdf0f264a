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

// Multimodal semantic uncertainty: sampled responses are captioned into
// text, grouped into semantic clusters, and scored by the entropy of the
// cluster-size distribution normalized by its maximum ln(C).

#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mmuq/backends.hpp"
#include "mmuq/media.hpp"

namespace mmuq {

struct CaptionedSample {
  int sample_index = 0;
  Modality modality = Modality::kText;
  TextContent caption;
};

struct Cluster {
  TextContent representative;  // the first member's caption
  std::vector<int> members;    // sample indices
  std::size_t count() const { return members.size(); }
};

struct ClusterDistribution {
  std::vector<Cluster> clusters;
  std::size_t total = 0;

  std::size_t cluster_count() const { return clusters.size(); }
  std::vector<std::size_t> counts() const;
};

// Decides whether two captions carry the same meaning.
using EquivalenceFn = std::function<bool(const std::string&, const std::string&)>;

// Greedy first-fit: captions in sample order, each compared against the
// representative of every existing cluster in creation order, joining the
// first match or opening a new cluster. At most n*C judge calls.
ClusterDistribution cluster_captions(std::span<const CaptionedSample> captions,
                                     const EquivalenceFn& equivalent);

// Exact string match after trimming surrounding whitespace.
ClusterDistribution lexical_cluster(std::span<const CaptionedSample> captions);

// -sum p ln p over c_i / C, divided by ln C; 0 when C == 1.
double normalized_entropy(std::span<const std::size_t> counts);
double entropy(const ClusterDistribution& dist);

enum class ClusteringMode { kSemantic, kLexical };

std::string_view clustering_name(ClusteringMode mode);
ClusteringMode parse_clustering(std::string_view name);

struct UncertaintyEstimate {
  std::map<Modality, double> per_modality;
  double u = 0.0;
  std::map<Modality, ClusterDistribution> distributions;
};

struct EstimatorRoles {
  Backend* captioner = nullptr;  // needed only for non-text responses
  Backend* judge = nullptr;      // needed only for semantic clustering
  ClusteringMode clustering = ClusteringMode::kSemantic;
};

// Responses must all carry the same set of output modalities
// (else Error{kMixedModalitySets}). Captioning failures surface as
// Error{kCaptionError} and judge failures as Error{kJudgeError}, both naming
// the sample index involved.
UncertaintyEstimate estimate(std::span<const ModelResponse> samples,
                             const EstimatorRoles& roles,
                             const std::string& question);

}  // namespace mmuq
