// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Transformer vector-field estimator v(x_t | cond, t; theta).
//
// Each frame is a token. The state and condition channels are concatenated and
// projected to model_dim; a stack of pre-norm encoder blocks follows, each
// conditioned on the flow time through adaptive layer norm (shift, scale and a
// residual gate per sub-layer, all produced from the time embedding).
// Self-attention carries no positional embedding; the only position signal is
// the ALiBi distance penalty. A final adaptive norm and a linear projection
// map back to feature channels.
//
// Parameter count (C feature channels, D model_dim, E time_embed_dim,
// F feedforward_dim, N layers):
//   2CD + D                         input projection
//   ED + D + D^2 + D                time MLP
//   N (10D^2 + 2DF + 11D + F)       blocks (adaLN 6D^2+6D, qkv 3D^2+3D,
//                                   attention out D^2+D, feedforward 2DF+F+D)
//   2D^2 + 2D + DC + C              final adaLN and output projection
//   + C                             when the learned null condition is enabled

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "masking.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace specflow {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct ModelConfig {
  int num_layers = 4;
  int model_dim = 128;
  int num_heads = 4;
  int feature_channels = 512;
  int time_embed_dim = 128;
  int feedforward_dim = 512;
  // Replace the condition of a null ConditionInput with a learned vector.
  bool null_condition_embedding = false;

  void Validate() const;
  std::size_t ParameterCount() const;
  bool operator==(const ModelConfig&) const = default;
};

struct ParameterSegment {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

class ParameterLayout {
 public:
  explicit ParameterLayout(const ModelConfig& config);
  const std::vector<ParameterSegment>& segments() const { return segments_; }
  const ParameterSegment& Find(const std::string& name) const;
  std::size_t total() const { return total_; }

 private:
  void Add(const std::string& name, int rows, int cols);
  std::vector<ParameterSegment> segments_;
  std::size_t total_ = 0;
};

// Flat parameter storage. SIMD alignment is fixed so that Eigen kernels sum in
// the same order for every allocation, which keeps resumed training bit-exact.
using ParameterVector = std::vector<double, Eigen::aligned_allocator<double>>;

struct VectorFieldModel {
  ModelConfig config;
  ParameterVector parameters;

  explicit VectorFieldModel(const ModelConfig& cfg);
  const ParameterLayout& layout() const { return layout_; }

  Eigen::Map<const RowMatrix> Matrix(const std::string& name) const;
  Eigen::Map<RowMatrix> Matrix(const std::string& name);

 private:
  ParameterLayout layout_;
};

// Xavier-uniform weights, zero biases; adaLN projections and the output
// projection start at zero so the initial field is identically zero.
VectorFieldModel InitParameters(const ModelConfig& config, Rng& rng);

// [sin(1000 t w_i), cos(1000 t w_i)] with w_i = 10000^(-i / (dim/2)).
std::vector<double> TimeEmbedding(double t, int dim);

// Geometric head slopes m_h = 2^(-8h/H), h = 1..H.
std::vector<double> AlibiSlopes(int num_heads);

// bias[h][i][j] = -m_h |i - j|, laid out [heads][L][L].
std::vector<double> AlibiBias(int frames, int num_heads);

// Row-wise layer norm (no affine) scaled by (1 + scale) and shifted by shift.
RowMatrix AdaptiveNorm(const RowMatrix& hidden, std::span<const double> shift,
                       std::span<const double> scale);

// Time conditioning vector (model_dim) produced by the time MLP.
Vector TimeConditioning(const VectorFieldModel& model, double t);

// Modulation vector from the adaLN projection of `layer` (num_layers selects
// the final norm): 6 model_dim values for blocks, 2 for the final layer.
Vector LayerModulation(const VectorFieldModel& model, int layer,
                       const Vector& time_conditioning);

struct BlockTape;

// Activations kept by a forward pass for the backward pass.
class ForwardTape {
 public:
  ForwardTape();
  ~ForwardTape();
  ForwardTape(ForwardTape&&) noexcept;
  ForwardTape& operator=(ForwardTape&&) noexcept;

  bool recorded() const { return recorded_; }
  void Clear();

 private:
  friend FeatureGrid Forward(const VectorFieldModel&, const FeatureGrid&,
                             const ConditionInput&, double, ForwardTape*,
                             std::span<const double>);
  friend void Backward(const VectorFieldModel&, const ForwardTape&,
                       std::span<const double>, std::span<double>);

  bool recorded_ = false;
  bool used_null_embedding_ = false;
  int frames_ = 0;
  RowMatrix input_;      // L x 2C
  Vector time_embed_;    // E
  Vector time_hidden_;   // D, pre-activation of the first time layer
  Vector time_cond_;     // D
  std::vector<BlockTape> blocks_;
  RowMatrix final_in_;   // L x D
  RowMatrix final_xhat_;
  Vector final_rstd_;
  RowMatrix final_mod_;  // L x D, input to the output projection
  std::vector<double> distances_;
};

// Predicted vector field with the shape of x_t. `positions` (one per frame)
// defines the ALiBi distances; empty means 0, 1, ..., L-1. When `tape` is
// non-null the activations needed by Backward are recorded into it.
FeatureGrid Forward(const VectorFieldModel& model, const FeatureGrid& x_t,
                    const ConditionInput& cond, double t,
                    ForwardTape* tape = nullptr,
                    std::span<const double> positions = {});

// Accumulates d(loss)/d(theta) into `gradient` (aligned with
// model.parameters) given d(loss)/d(output) for the recorded forward pass.
void Backward(const VectorFieldModel& model, const ForwardTape& tape,
              std::span<const double> output_gradient, std::span<double> gradient);

std::vector<double> Backward(const VectorFieldModel& model, const ForwardTape& tape,
                             std::span<const double> output_gradient);

}  // namespace specflow
