// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "vectorfield.hpp"

using namespace specflow;

namespace {

ModelConfig TinyConfig() {
  ModelConfig c;
  c.num_layers = 2;
  c.model_dim = 16;
  c.num_heads = 2;
  c.feedforward_dim = 32;
  c.feature_channels = 8;
  c.time_embed_dim = 16;
  return c;
}

// Independent count: sum of every weight and bias shape written out.
std::size_t CountByHand(const ModelConfig& c) {
  const std::size_t C = c.feature_channels, D = c.model_dim, E = c.time_embed_dim,
                    F = c.feedforward_dim;
  std::size_t n = 0;
  n += 2 * C * D + D;                        // input
  n += E * D + D + D * D + D;                // time MLP
  for (int l = 0; l < c.num_layers; ++l) {
    n += D * 6 * D + 6 * D;                  // adaLN
    n += D * 3 * D + 3 * D + D * D + D;      // attention
    n += D * F + F + F * D + D;              // feedforward
  }
  n += D * 2 * D + 2 * D + D * C + C;        // final
  if (c.null_condition_embedding) n += C;
  return n;
}

VectorFieldModel RandomModel(const ModelConfig& cfg, std::uint64_t seed, double scale = 0.3) {
  Rng rng(seed);
  VectorFieldModel m(cfg);
  for (double& p : m.parameters) p = scale * rng.Normal();
  return m;
}

FeatureGrid RandomGrid(int channels, int frames, Rng& rng) {
  FeatureGrid g(channels, frames);
  rng.FillNormal(g.values);
  return g;
}

double WeightedOutput(const VectorFieldModel& m, const FeatureGrid& x, const ConditionInput& c,
                      double t, const std::vector<double>& w) {
  const FeatureGrid out = Forward(m, x, c, t);
  return std::inner_product(out.values.begin(), out.values.end(), w.begin(), 0.0);
}

void CheckGradients(const ModelConfig& cfg, bool null_condition) {
  Rng rng(21);
  VectorFieldModel m = RandomModel(cfg, 5);
  const int frames = 7;
  const FeatureGrid x = RandomGrid(cfg.feature_channels, frames, rng);
  ConditionInput cond = null_condition ? ConditionInput::Null(cfg.feature_channels, frames)
                                       : ConditionInput{RandomGrid(cfg.feature_channels, frames, rng), false};
  const double t = 0.37;
  std::vector<double> w(x.size());
  rng.FillNormal(w);

  ForwardTape tape;
  Forward(m, x, cond, t, &tape);
  const std::vector<double> analytic = Backward(m, tape, w);

  const double h = 1e-5;
  for (const ParameterSegment& seg : m.layout().segments()) {
    double diff_sq = 0.0, ref_sq = 0.0, an_sq = 0.0;
    for (std::size_t i = seg.offset; i < seg.offset + seg.size(); ++i) {
      const double saved = m.parameters[i];
      m.parameters[i] = saved + h;
      const double up = WeightedOutput(m, x, cond, t, w);
      m.parameters[i] = saved - h;
      const double down = WeightedOutput(m, x, cond, t, w);
      m.parameters[i] = saved;
      const double fd = (up - down) / (2 * h);
      diff_sq += (fd - analytic[i]) * (fd - analytic[i]);
      ref_sq += fd * fd;
      an_sq += analytic[i] * analytic[i];
    }
    const double denom = std::max({std::sqrt(ref_sq), std::sqrt(an_sq), 1e-10});
    const double rel = std::sqrt(diff_sq) / denom;
    INFO("segment " << seg.name << " rel error " << rel << " |g| " << std::sqrt(an_sq));
    CHECK(rel < 1e-4);
    if (seg.name != "null_condition" || null_condition) CHECK(std::sqrt(an_sq) > 0.0);
  }
}

}  // namespace

TEST_CASE("parameter count matches the closed form") {
  const ModelConfig tiny = TinyConfig();
  CHECK(tiny.ParameterCount() == 9080);
  CHECK(CountByHand(tiny) == 9080);
  CHECK(VectorFieldModel(tiny).parameters.size() == 9080);
  ModelConfig with_null = tiny;
  with_null.null_condition_embedding = true;
  CHECK(with_null.ParameterCount() == 9088);
  const ModelConfig def;
  CHECK(def.ParameterCount() == CountByHand(def));
  CHECK(VectorFieldModel(def).layout().total() == def.ParameterCount());
}

TEST_CASE("parameter layout is contiguous and uniquely named") {
  const VectorFieldModel m(TinyConfig());
  std::size_t offset = 0;
  std::set<std::string> names;
  for (const auto& s : m.layout().segments()) {
    CHECK(s.offset == offset);
    offset += s.size();
    CHECK(names.insert(s.name).second);
  }
  CHECK(offset == m.parameters.size());
  CHECK(m.layout().Find("block1.attn.qkv.weight").cols == 48);
  CHECK_THROWS_AS(m.layout().Find("block9.attn.qkv.weight"), Error);
}

TEST_CASE("configuration validation") {
  ModelConfig c = TinyConfig();
  c.num_heads = 3;
  CHECK_THROWS_AS(c.Validate(), Error);
  c = TinyConfig();
  c.time_embed_dim = 15;
  CHECK_THROWS_AS(c.Validate(), Error);
  c = TinyConfig();
  c.num_layers = 0;
  CHECK_THROWS_AS(c.Validate(), Error);
}

TEST_CASE("freshly initialised model predicts a zero field") {
  Rng rng(1);
  const VectorFieldModel m = InitParameters(TinyConfig(), rng);
  const FeatureGrid x = RandomGrid(8, 5, rng);
  const FeatureGrid out = Forward(m, x, ConditionInput{RandomGrid(8, 5, rng), false}, 0.5);
  CHECK(out.SameShape(x));
  CHECK(std::all_of(out.values.begin(), out.values.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("time embedding") {
  const auto e0 = TimeEmbedding(0.0, 8);
  CHECK(e0 == std::vector<double>{0, 0, 0, 0, 1, 1, 1, 1});
  const auto e = TimeEmbedding(0.3, 8);
  CHECK(e[1] == doctest::Approx(std::sin(300.0 * std::pow(10000.0, -0.25))));
  CHECK(e[5] == doctest::Approx(std::cos(300.0 * std::pow(10000.0, -0.25))));
}

TEST_CASE("ALiBi slopes and bias") {
  const auto s = AlibiSlopes(4);
  CHECK(s == std::vector<double>{0.25, 1.0 / 16, 1.0 / 64, 1.0 / 256});
  const auto b = AlibiBias(3, 2);
  CHECK(b.size() == 18);
  CHECK(b[0 * 9 + 0 * 3 + 2] == doctest::Approx(-2 * 1.0 / 16));
  CHECK(b[1 * 9 + 2 * 3 + 1] == doctest::Approx(-1 * 1.0 / 256));
  CHECK(b[1 * 9 + 1 * 3 + 1] == 0.0);
}

TEST_CASE("adaptive norm") {
  Rng rng(4);
  RowMatrix h(3, 6);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = 2.0 + rng.Normal();
  const std::vector<double> zero(6, 0.0);
  const RowMatrix n = AdaptiveNorm(h, zero, zero);
  for (Eigen::Index r = 0; r < 3; ++r) {
    CHECK(std::abs(n.row(r).mean()) < 1e-12);
    CHECK(n.row(r).squaredNorm() / 6.0 == doctest::Approx(1.0).epsilon(1e-5));
  }
  const std::vector<double> shift(6, 1.5), scale(6, 1.0);
  const RowMatrix m = AdaptiveNorm(h, shift, scale);
  CHECK(m(1, 2) == doctest::Approx(2.0 * n(1, 2) + 1.5));
}

TEST_CASE("forward is equivariant to joint permutation of frames and positions") {
  Rng rng(8);
  const ModelConfig cfg = TinyConfig();
  const VectorFieldModel m = RandomModel(cfg, 3);
  const int frames = 9;
  const FeatureGrid x = RandomGrid(8, frames, rng);
  const FeatureGrid c = RandomGrid(8, frames, rng);
  std::vector<double> pos(frames);
  std::iota(pos.begin(), pos.end(), 0.0);
  const FeatureGrid out = Forward(m, x, ConditionInput{c, false}, 0.6, nullptr, pos);

  std::vector<int> perm(frames);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[1], perm[4]);
  FeatureGrid xp(8, frames), cp(8, frames);
  std::vector<double> pp(frames);
  for (int l = 0; l < frames; ++l) {
    std::copy_n(x.frame(perm[l]).begin(), 8, xp.frame(l).begin());
    std::copy_n(c.frame(perm[l]).begin(), 8, cp.frame(l).begin());
    pp[l] = pos[perm[l]];
  }
  const FeatureGrid outp = Forward(m, xp, ConditionInput{cp, false}, 0.6, nullptr, pp);
  double worst = 0.0;
  for (int l = 0; l < frames; ++l) {
    for (int ch = 0; ch < 8; ++ch) worst = std::max(worst, std::abs(outp.at(ch, l) - out.at(ch, perm[l])));
  }
  CHECK(worst < 1e-12);

  // Shifting every position leaves relative distances and the output unchanged.
  for (double& p : pos) p += 100.0;
  const FeatureGrid shifted = Forward(m, x, ConditionInput{c, false}, 0.6, nullptr, pos);
  for (std::size_t i = 0; i < out.values.size(); ++i) CHECK(shifted.values[i] == doctest::Approx(out.values[i]).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences") {
  CheckGradients(TinyConfig(), false);
}

TEST_CASE("gradients with the learned null condition") {
  ModelConfig cfg = TinyConfig();
  cfg.null_condition_embedding = true;
  CheckGradients(cfg, true);
}

TEST_CASE("gradients do not depend on buffer alignment") {
  const ModelConfig cfg = TinyConfig();
  const VectorFieldModel m = RandomModel(cfg, 8);
  Rng rng(9);
  const int frames = 11;
  const FeatureGrid x = RandomGrid(cfg.feature_channels, frames, rng);
  const ConditionInput cond{RandomGrid(cfg.feature_channels, frames, rng), false};
  std::vector<double> w(x.size());
  rng.FillNormal(w);
  ForwardTape tape;
  Forward(m, x, cond, 0.6, &tape);
  const std::vector<double> base = Backward(m, tape, w);
  for (std::size_t offset = 1; offset < 8; ++offset) {
    std::vector<double> out_grad(w.size() + offset), grad(base.size() + offset, 0.0);
    std::copy(w.begin(), w.end(), out_grad.begin() + offset);
    Backward(m, tape, std::span<const double>(out_grad.data() + offset, w.size()),
             std::span<double>(grad.data() + offset, base.size()));
    CHECK(std::equal(base.begin(), base.end(), grad.begin() + offset));
  }
}

TEST_CASE("backward accumulates and requires a recorded tape") {
  Rng rng(2);
  const VectorFieldModel m = RandomModel(TinyConfig(), 4);
  const FeatureGrid x = RandomGrid(8, 4, rng);
  const ConditionInput c{RandomGrid(8, 4, rng), false};
  ForwardTape tape;
  CHECK_FALSE(tape.recorded());
  std::vector<double> w(x.size(), 1.0);
  CHECK_THROWS_AS(Backward(m, tape, w), Error);
  Forward(m, x, c, 0.2, &tape);
  CHECK(tape.recorded());
  const auto once = Backward(m, tape, w);
  std::vector<double> twice(once.size(), 0.0);
  Backward(m, tape, w, twice);
  Backward(m, tape, w, twice);
  for (std::size_t i = 0; i < once.size(); i += 97) CHECK(twice[i] == doctest::Approx(2 * once[i]));
}

TEST_CASE("forward rejects malformed inputs") {
  Rng rng(3);
  const VectorFieldModel m = RandomModel(TinyConfig(), 4);
  const FeatureGrid x = RandomGrid(8, 4, rng);
  CHECK_THROWS_AS(Forward(m, x, ConditionInput{RandomGrid(8, 5, rng), false}, 0.2), Error);
  CHECK_THROWS_AS(Forward(m, RandomGrid(6, 4, rng), ConditionInput{RandomGrid(6, 4, rng), false}, 0.2), Error);
  CHECK_THROWS_AS(Forward(m, x, ConditionInput{x, false}, 1.5), Error);
  FeatureGrid bad = x;
  bad.values[0] = std::nan("");
  CHECK_THROWS_AS(Forward(m, bad, ConditionInput{x, false}, 0.2), Error);
}
