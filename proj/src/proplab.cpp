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

#include "mmuq/proplab.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mmuq/error.hpp"
#include "mmuq/parallel.hpp"
#include "mmuq/random.hpp"

namespace mmuq {
namespace {

constexpr std::size_t kChunk = 4096;

double predict(const SyntheticModel& m, std::span<const double> theta) {
  double s = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) s += m.sensitivity[k] * theta[k];
  return s + m.cubic * s * s * s;
}

}  // namespace

DistanceEstimate simulate_distance(const SyntheticModel& model,
                                   std::size_t trials, std::uint64_t seed,
                                   int parallelism) {
  if (model.sensitivity.size() != model.mean.size()) {
    throw Error(ErrorCode::kInvariantViolation,
                "sensitivity and mean must have the same dimension");
  }
  if (!(model.variance >= 0.0)) {
    throw Error(ErrorCode::kInvariantViolation, "variance must be non-negative");
  }
  if (trials == 0) throw Error(ErrorCode::kInvalidPlan, "trials must be >= 1");

  const double sigma = std::sqrt(model.variance);
  const std::size_t dim = model.mean.size();
  const std::size_t chunks = (trials + kChunk - 1) / kChunk;
  std::vector<double> chunk_sums(chunks, 0.0);
  parallel_for(chunks, parallelism, [&](std::size_t c) {
    Rng rng(derive_seed(seed, {c}));
    std::vector<double> ti(dim), tj(dim);
    const std::size_t end = std::min(trials, (c + 1) * kChunk);
    double acc = 0.0;
    for (std::size_t t = c * kChunk; t < end; ++t) {
      for (std::size_t k = 0; k < dim; ++k) ti[k] = model.mean[k] + sigma * rng.normal();
      for (std::size_t k = 0; k < dim; ++k) tj[k] = model.mean[k] + sigma * rng.normal();
      const double d = predict(model, ti) - predict(model, tj);
      acc += d * d;
    }
    chunk_sums[c] = acc;
  });
  double total = 0.0;
  for (double s : chunk_sums) total += s;
  return {std::sqrt(total / static_cast<double>(trials)), trials, sigma};
}

double closed_form_distance(const SyntheticModel& model) {
  double norm2 = 0.0;
  for (double a : model.sensitivity) norm2 += a * a;
  return std::sqrt(2.0 * norm2 * model.variance);
}

LineFit least_squares(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::kDegenerateFit, "x and y lengths differ");
  }
  if (std::set<double>(xs.begin(), xs.end()).size() < 2) {
    throw Error(ErrorCode::kDegenerateFit, "need at least two distinct x values");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

ProportionalityFit fit_proportionality(const SyntheticModel& model_template,
                                       std::span<const double> sigmas,
                                       std::size_t trials, std::uint64_t seed,
                                       int parallelism) {
  for (double s : sigmas) {
    if (!(s > 0.0)) throw Error(ErrorCode::kDegenerateFit, "sigmas must be positive");
  }
  ProportionalityFit fit;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    SyntheticModel m = model_template;
    m.variance = sigmas[i] * sigmas[i];
    fit.per_sigma.push_back(simulate_distance(m, trials, derive_seed(seed, {i}), parallelism));
    xs.push_back(std::log(sigmas[i]));
    ys.push_back(std::log(fit.per_sigma.back().d_rms));
  }
  const LineFit line = least_squares(xs, ys);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  SyntheticModel unit = model_template;
  unit.variance = 1.0;
  fit.expected_intercept = std::log(closed_form_distance(unit));
  return fit;
}

}  // namespace mmuq
