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

#include "mmuq/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include "mmuq/error.hpp"

namespace mmuq {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

void check_single_modality(std::span<const CaptionedSample> captions) {
  if (captions.empty()) {
    throw Error(ErrorCode::kInvalidPlan, "clustering needs at least one caption");
  }
  for (const auto& c : captions) {
    if (c.modality != captions.front().modality) {
      throw Error(ErrorCode::kMixedModalitySets,
                  "captions to cluster come from different modalities");
    }
  }
}

}  // namespace

std::vector<std::size_t> ClusterDistribution::counts() const {
  std::vector<std::size_t> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) out.push_back(c.count());
  return out;
}

ClusterDistribution cluster_captions(std::span<const CaptionedSample> captions,
                                     const EquivalenceFn& equivalent) {
  check_single_modality(captions);
  std::vector<const CaptionedSample*> ordered;
  for (const auto& c : captions) ordered.push_back(&c);
  std::stable_sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) {
    return a->sample_index < b->sample_index;
  });

  ClusterDistribution dist;
  dist.total = captions.size();
  for (const CaptionedSample* s : ordered) {
    Cluster* home = nullptr;
    for (auto& cluster : dist.clusters) {
      bool same = false;
      try {
        same = equivalent(cluster.representative.text, s->caption.text);
      } catch (const Error& e) {
        throw Error(ErrorCode::kJudgeError,
                    "samples " + std::to_string(cluster.members.front()) + " and " +
                        std::to_string(s->sample_index) + ": " + e.what());
      }
      if (same) {
        home = &cluster;
        break;
      }
    }
    if (home) {
      home->members.push_back(s->sample_index);
    } else {
      dist.clusters.push_back({s->caption, {s->sample_index}});
    }
  }
  return dist;
}

ClusterDistribution lexical_cluster(std::span<const CaptionedSample> captions) {
  return cluster_captions(captions, [](const std::string& a, const std::string& b) {
    return trim(a) == trim(b);
  });
}

double normalized_entropy(std::span<const std::size_t> counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (total <= 1) return 0.0;
  const double n = static_cast<double>(total);
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return std::clamp(h / std::log(n), 0.0, 1.0);
}

double entropy(const ClusterDistribution& dist) {
  const auto c = dist.counts();
  return normalized_entropy(c);
}

std::string_view clustering_name(ClusteringMode mode) {
  return mode == ClusteringMode::kSemantic ? "semantic" : "lexical";
}

ClusteringMode parse_clustering(std::string_view name) {
  if (name == "semantic") return ClusteringMode::kSemantic;
  if (name == "lexical") return ClusteringMode::kLexical;
  throw Error(ErrorCode::kConfigError, "clustering: unknown mode '" + std::string(name) + "'");
}

UncertaintyEstimate estimate(std::span<const ModelResponse> samples,
                             const EstimatorRoles& roles,
                             const std::string& question) {
  if (samples.empty()) {
    throw Error(ErrorCode::kInvalidPlan, "estimate needs at least one response");
  }
  std::vector<Modality> modalities;
  for (const auto& [m, _] : samples.front().outputs) modalities.push_back(m);
  for (std::size_t i = 1; i < samples.size(); ++i) {
    std::vector<Modality> mine;
    for (const auto& [m, _] : samples[i].outputs) mine.push_back(m);
    if (mine != modalities) {
      throw Error(ErrorCode::kMixedModalitySets,
                  "response " + std::to_string(i) + " carries a different modality set");
    }
  }
  if (modalities.empty()) {
    throw Error(ErrorCode::kMixedModalitySets, "responses carry no outputs");
  }

  UncertaintyEstimate est;
  double sum = 0.0;
  for (Modality m : modalities) {
    std::vector<CaptionedSample> captions;
    captions.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Content& c = samples[i].outputs.at(m);
      CaptionedSample cs{static_cast<int>(i), m, {}};
      if (const auto* t = std::get_if<TextContent>(&c)) {
        cs.caption = *t;
      } else {
        if (!roles.captioner) {
          throw Error(ErrorCode::kCaptionError,
                      "sample " + std::to_string(i) + ": no captioner for " +
                          std::string(modality_name(m)) + " output");
        }
        try {
          cs.caption = roles.captioner->caption(c);
        } catch (const Error& e) {
          throw Error(ErrorCode::kCaptionError,
                      "sample " + std::to_string(i) + ": " + e.what());
        }
      }
      captions.push_back(std::move(cs));
    }

    ClusterDistribution dist;
    if (roles.clustering == ClusteringMode::kLexical) {
      dist = lexical_cluster(captions);
    } else {
      if (!roles.judge) {
        throw Error(ErrorCode::kJudgeError, "semantic clustering needs a judge backend");
      }
      Backend* judge = roles.judge;
      dist = cluster_captions(captions, [&](const std::string& a, const std::string& b) {
        return judge->judge_equivalence(question, a, b);
      });
    }
    const double um = entropy(dist);
    est.per_modality[m] = um;
    est.distributions[m] = std::move(dist);
    sum += um;
  }
  est.u = sum / static_cast<double>(modalities.size());
  return est;
}

}  // namespace mmuq
