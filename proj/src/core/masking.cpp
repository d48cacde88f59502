// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "masking.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace specflow {

int MaskSpec::MaskedCount() const {
  return static_cast<int>(std::count(frame_flags.begin(), frame_flags.end(), true));
}

double MaskSpec::MaskedFraction() const {
  return frame_flags.empty() ? 0.0
                             : static_cast<double>(MaskedCount()) / frame_flags.size();
}

ConditionInput ConditionInput::Null(int channels, int frames) {
  ConditionInput c;
  c.features = FeatureGrid(channels, frames);
  c.is_null = true;
  return c;
}

std::vector<int> MaskedRuns(const std::vector<bool>& flags) {
  std::vector<int> runs;
  int run = 0;
  for (bool f : flags) {
    if (f) {
      ++run;
    } else if (run > 0) {
      runs.push_back(run);
      run = 0;
    }
  }
  if (run > 0) runs.push_back(run);
  return runs;
}

MaskSpec SampleMask(int frames, double ratio, int min_span, Rng& rng) {
  Require(frames > 0, ErrorCode::kInvalidArgument, "mask length must be positive");
  Require(ratio >= 0.0 && ratio <= 1.0, ErrorCode::kInvalidArgument,
          "mask ratio must lie in [0, 1]");
  Require(min_span >= 1, ErrorCode::kInvalidArgument, "min_span must be >= 1");

  MaskSpec mask;
  mask.ratio = ratio;
  mask.min_span = min_span;
  mask.frame_flags.assign(frames, false);
  const int target = static_cast<int>(std::lround(ratio * frames));
  int masked = 0;
  std::vector<int> starts;
  starts.reserve(frames);

  while (masked < target) {
    const int span = std::min<int>(
        frames, static_cast<int>(rng.UniformInt(min_span, 2 * min_span)));
    // Prefer starts whose span lies entirely in unmasked frames.
    starts.clear();
    int free_run = 0;
    for (int i = 0; i < frames; ++i) {
      free_run = mask.frame_flags[i] ? 0 : free_run + 1;
      if (free_run >= span) starts.push_back(i - span + 1);
    }
    if (starts.empty()) {
      // No gap is wide enough: cover at least one unmasked frame.
      for (int s = 0; s + span <= frames; ++s) {
        const auto first = mask.frame_flags.begin() + s;
        if (std::find(first, first + span, false) != first + span) starts.push_back(s);
      }
    }
    const int start =
        starts[static_cast<std::size_t>(rng.UniformInt(0, static_cast<int>(starts.size()) - 1))];
    for (int i = start; i < start + span; ++i) {
      if (!mask.frame_flags[i]) {
        mask.frame_flags[i] = true;
        ++masked;
      }
    }
  }
  return mask;
}

ConditionInput ApplyMask(const FeatureGrid& clean, const MaskSpec& mask) {
  Require(mask.frames() == clean.frames, ErrorCode::kShapeMismatch,
          "mask length " + std::to_string(mask.frames()) + " does not match " +
              std::to_string(clean.frames) + " frames");
  ConditionInput cond;
  cond.features = clean;
  for (int l = 0; l < clean.frames; ++l) {
    if (!mask.frame_flags[l]) continue;
    auto f = cond.features.frame(l);
    std::fill(f.begin(), f.end(), 0.0);
  }
  return cond;
}

ConditionInput MaybeDropCondition(const ConditionInput& cond, double p, Rng& rng) {
  Require(p >= 0.0 && p <= 1.0, ErrorCode::kInvalidArgument,
          "dropout probability must lie in [0, 1]");
  if (rng.Bernoulli(p)) {
    return ConditionInput::Null(cond.features.channels, cond.features.frames);
  }
  return cond;
}

}  // namespace specflow
