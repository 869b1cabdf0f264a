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

// Prompt templates used by the downstream tasks. {X}, {Y} and {U} are the
// original prompt, the initial answer and the uncertainty (two decimals).

#pragma once

#include <string_view>

namespace mmuq {

inline constexpr std::string_view kRevisionTemplate =
    "Prompt: {X}, Initial Answer: {Y}, Your answer has a high uncertainty "
    "score of {U}, which ranges from 0 to 1. Could you improve your answer "
    "and revise it to be more accurate?";

// Present in every revision prompt; the mock keys on it.
inline constexpr std::string_view kRevisionMarker =
    "Could you improve your answer";

inline constexpr std::string_view kCotFirstStep =
    "Let's think step-by-step. Now, provide your first step of the answer:";

inline constexpr std::string_view kCotFinishInstruction =
    "Respond with 'Finish.' when you think you have solved the question.";

inline constexpr std::string_view kCotFinishToken = "Finish.";

// Each prior step is rendered as "Step {k}: {y} (uncertainty: {u})".
inline constexpr std::string_view kCotUncertaintyTag = "(uncertainty: ";

}  // namespace mmuq
