// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "rng.hpp"
#include "spectral.hpp"

namespace specflow {

struct MaskSpec {
  std::vector<bool> frame_flags;  // true = masked
  double ratio = 0.0;
  int min_span = 1;

  int frames() const { return static_cast<int>(frame_flags.size()); }
  int MaskedCount() const;
  double MaskedFraction() const;
};

// Conditioning features for the vector field. The null (unconditional) case
// is all zeros with `is_null` set.
struct ConditionInput {
  FeatureGrid features;
  bool is_null = false;

  static ConditionInput Null(int channels, int frames);
};

// Places spans of length U[min_span, 2 min_span] at uniform random starts
// until round(ratio * frames) frames are masked. Spans go into unmasked gaps
// when one fits; otherwise a span is placed to cover at least one unmasked
// frame, merging with its neighbours. The final span may overshoot the target
// by less than its own length.
MaskSpec SampleMask(int frames, double ratio, int min_span, Rng& rng);

// Masked frames become zero in every channel; other frames are copied.
ConditionInput ApplyMask(const FeatureGrid& clean, const MaskSpec& mask);

// With probability p returns the null condition, otherwise `cond` unchanged.
ConditionInput MaybeDropCondition(const ConditionInput& cond, double p, Rng& rng);

// Lengths of the maximal masked runs, in order.
std::vector<int> MaskedRuns(const std::vector<bool>& flags);

}  // namespace specflow
