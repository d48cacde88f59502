// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "rng.hpp"

#include <sstream>

#include "error.hpp"

namespace specflow {

std::int64_t Rng::UniformInt(std::int64_t lo, std::int64_t hi) {
  Require(lo <= hi, ErrorCode::kInvalidArgument, "UniformInt: empty range");
  std::uniform_int_distribution<std::int64_t> dist(lo, hi);
  return dist(engine_);
}

void Rng::FillNormal(std::span<double> out) {
  for (double& v : out) v = normal_(engine_);
}

std::string Rng::Serialize() const {
  std::ostringstream os;
  os.precision(17);
  os << engine_ << ' ' << uniform_ << ' ' << normal_;
  return os.str();
}

Rng Rng::Deserialize(const std::string& state) {
  Rng rng;
  std::istringstream is(state);
  is >> rng.engine_ >> rng.uniform_ >> rng.normal_;
  Require(!is.fail(), ErrorCode::kFormat, "corrupt generator state");
  return rng;
}

bool Rng::operator==(const Rng& other) const {
  return engine_ == other.engine_ && normal_ == other.normal_;
}

}  // namespace specflow
