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

// Monte Carlo check that the response distance between two perturbed
// predictions grows as the square root of parameter variance.
//
// Parameters theta ~ N(mu, sigma^2 I) are drawn i.i.d. per prediction and
// the prediction is y = a . theta (optionally plus a cubic term). For the
// linear model E[(y_i - y_j)^2] = 2 |a|^2 sigma^2, so
// D_rms = sqrt(2) |a| sigma and ln D_rms is linear in ln sigma with slope 1
// (slope 1/2 against ln Var).

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mmuq {

struct SyntheticModel {
  std::vector<double> sensitivity;  // a, the prediction gradient
  std::vector<double> mean;         // mu
  double variance = 1.0;            // sigma^2
  double cubic = 0.0;               // y = s + cubic * s^3 with s = a . theta
};

struct DistanceEstimate {
  double d_rms = 0.0;
  std::size_t trials = 0;
  double sigma = 0.0;
};

// Trials run in fixed chunks with per-chunk substreams; no dependence on
// worker count.
DistanceEstimate simulate_distance(const SyntheticModel& model,
                                   std::size_t trials, std::uint64_t seed,
                                   int parallelism = 1);

// sqrt(2) |a| sigma.
double closed_form_distance(const SyntheticModel& model);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Ordinary least squares of ys on xs; Error{kDegenerateFit} when fewer
// than two distinct xs.
LineFit least_squares(std::span<const double> xs, std::span<const double> ys);

struct ProportionalityFit {
  double slope = 0.0;
  double intercept = 0.0;
  double expected_intercept = 0.0;  // ln(sqrt(2) |a|)
  std::vector<DistanceEstimate> per_sigma;
};

// Fits ln D_rms against ln sigma. Sigmas must be positive.
ProportionalityFit fit_proportionality(const SyntheticModel& model_template,
                                       std::span<const double> sigmas,
                                       std::size_t trials, std::uint64_t seed,
                                       int parallelism = 1);

}  // namespace mmuq
