// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "vectorfield.hpp"

#include <cmath>
#include <numbers>

#include "error.hpp"

namespace specflow {

using RowVector = Eigen::RowVectorXd;

struct BlockTape {
  RowMatrix h_in;
  RowMatrix xhat1;
  Vector rstd1;
  RowMatrix a;
  RowMatrix qkv;
  std::vector<RowMatrix> probs;
  RowMatrix attn;
  RowMatrix y1;
  RowMatrix xhat2;
  Vector rstd2;
  RowMatrix b;
  RowMatrix u;
  RowMatrix g;
  RowMatrix y2;
  Vector mod;
};

namespace {

constexpr double kLayerNormEps = 1e-6;
constexpr double kTimeScale = 1000.0;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

std::string BlockName(int layer, const char* suffix) {
  return "block" + std::to_string(layer) + "." + suffix;
}

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double Silu(double x) { return x * Sigmoid(x); }
double SiluGrad(double x) {
  const double s = Sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

double Gelu(double u) {
  return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + kGeluA * u * u * u)));
}
double GeluGrad(double u) {
  const double th = std::tanh(kGeluC * (u + kGeluA * u * u * u));
  return 0.5 * (1.0 + th) +
         0.5 * u * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * u * u);
}

Vector SiluVec(const Vector& x) { return x.unaryExpr(&Silu); }

void LayerNormRows(const RowMatrix& x, RowMatrix& xhat, Vector& rstd) {
  const Eigen::Index cols = x.cols();
  xhat.resize(x.rows(), cols);
  rstd.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().sum() / cols;
    rstd(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mean) * rstd(r);
  }
}

RowMatrix LayerNormBackward(const RowMatrix& dxhat, const RowMatrix& xhat,
                            const Vector& rstd) {
  RowMatrix dx(dxhat.rows(), dxhat.cols());
  for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
    const double mean_d = dxhat.row(r).mean();
    const double mean_dx = dxhat.row(r).dot(xhat.row(r)) / dxhat.cols();
    dx.row(r) = rstd(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
  }
  return dx;
}

// xhat * (1 + scale) + shift, broadcast over rows.
RowMatrix Modulate(const RowMatrix& xhat, const RowVector& shift,
                   const RowVector& scale) {
  RowMatrix out = xhat;
  out.array().rowwise() *= (1.0 + scale.array());
  out.rowwise() += shift;
  return out;
}

void AddBias(RowMatrix& m, Eigen::Map<const RowMatrix> bias) {
  m.rowwise() += bias.row(0);
}

void SoftmaxRows(RowMatrix& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

class GradientView {
 public:
  GradientView(const ParameterLayout& layout, std::span<double> grad)
      : layout_(layout), grad_(grad) {}
  Eigen::Map<RowMatrix> operator()(const std::string& name) const {
    const ParameterSegment& s = layout_.Find(name);
    return Eigen::Map<RowMatrix>(grad_.data() + s.offset, s.rows, s.cols);
  }

 private:
  const ParameterLayout& layout_;
  std::span<double> grad_;
};

}  // namespace

void ModelConfig::Validate() const {
  Require(num_layers > 0 && model_dim > 0 && num_heads > 0 && feature_channels > 0 &&
              time_embed_dim > 0 && feedforward_dim > 0,
          ErrorCode::kInvalidArgument, "model dimensions must be positive");
  Require(model_dim % num_heads == 0, ErrorCode::kInvalidArgument,
          "model_dim must be divisible by num_heads");
  Require(time_embed_dim % 2 == 0, ErrorCode::kInvalidArgument,
          "time_embed_dim must be even");
  Require(feature_channels % 2 == 0, ErrorCode::kInvalidArgument,
          "feature_channels must be even");
}

std::size_t ModelConfig::ParameterCount() const { return ParameterLayout(*this).total(); }

ParameterLayout::ParameterLayout(const ModelConfig& config) {
  config.Validate();
  const int c = config.feature_channels;
  const int d = config.model_dim;
  const int e = config.time_embed_dim;
  const int f = config.feedforward_dim;
  Add("input.weight", 2 * c, d);
  Add("input.bias", 1, d);
  Add("time.fc1.weight", e, d);
  Add("time.fc1.bias", 1, d);
  Add("time.fc2.weight", d, d);
  Add("time.fc2.bias", 1, d);
  if (config.null_condition_embedding) Add("null_condition", 1, c);
  for (int l = 0; l < config.num_layers; ++l) {
    Add(BlockName(l, "adaln.weight"), d, 6 * d);
    Add(BlockName(l, "adaln.bias"), 1, 6 * d);
    Add(BlockName(l, "attn.qkv.weight"), d, 3 * d);
    Add(BlockName(l, "attn.qkv.bias"), 1, 3 * d);
    Add(BlockName(l, "attn.out.weight"), d, d);
    Add(BlockName(l, "attn.out.bias"), 1, d);
    Add(BlockName(l, "ff.fc1.weight"), d, f);
    Add(BlockName(l, "ff.fc1.bias"), 1, f);
    Add(BlockName(l, "ff.fc2.weight"), f, d);
    Add(BlockName(l, "ff.fc2.bias"), 1, d);
  }
  Add("final.adaln.weight", d, 2 * d);
  Add("final.adaln.bias", 1, 2 * d);
  Add("output.weight", d, c);
  Add("output.bias", 1, c);
}

void ParameterLayout::Add(const std::string& name, int rows, int cols) {
  segments_.push_back({name, total_, rows, cols});
  total_ += static_cast<std::size_t>(rows) * cols;
}

const ParameterSegment& ParameterLayout::Find(const std::string& name) const {
  for (const ParameterSegment& s : segments_) {
    if (s.name == name) return s;
  }
  Fail(ErrorCode::kInvalidArgument, "unknown parameter segment: " + name);
}

VectorFieldModel::VectorFieldModel(const ModelConfig& cfg)
    : config(cfg), layout_(cfg) {
  parameters.assign(layout_.total(), 0.0);
}

Eigen::Map<const RowMatrix> VectorFieldModel::Matrix(const std::string& name) const {
  const ParameterSegment& s = layout_.Find(name);
  return Eigen::Map<const RowMatrix>(parameters.data() + s.offset, s.rows, s.cols);
}

Eigen::Map<RowMatrix> VectorFieldModel::Matrix(const std::string& name) {
  const ParameterSegment& s = layout_.Find(name);
  return Eigen::Map<RowMatrix>(parameters.data() + s.offset, s.rows, s.cols);
}

VectorFieldModel InitParameters(const ModelConfig& config, Rng& rng) {
  VectorFieldModel model(config);
  for (const ParameterSegment& s : model.layout().segments()) {
    const bool is_weight = s.name.ends_with(".weight");
    const bool zero_init = s.name.find("adaln") != std::string::npos ||
                           s.name.starts_with("output.");
    if (!is_weight || zero_init) continue;
    const double limit = std::sqrt(6.0 / (s.rows + s.cols));
    for (std::size_t i = 0; i < s.size(); ++i) {
      model.parameters[s.offset + i] = rng.Uniform(-limit, limit);
    }
  }
  return model;
}

std::vector<double> TimeEmbedding(double t, int dim) {
  Require(dim > 0 && dim % 2 == 0, ErrorCode::kInvalidArgument,
          "time embedding dimension must be positive and even");
  const int half = dim / 2;
  std::vector<double> out(dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    const double arg = kTimeScale * t * freq;
    out[i] = std::sin(arg);
    out[half + i] = std::cos(arg);
  }
  return out;
}

std::vector<double> AlibiSlopes(int num_heads) {
  Require(num_heads > 0, ErrorCode::kInvalidArgument, "num_heads must be positive");
  std::vector<double> slopes(num_heads);
  for (int h = 1; h <= num_heads; ++h) {
    slopes[h - 1] = std::exp2(-8.0 * h / num_heads);
  }
  return slopes;
}

std::vector<double> AlibiBias(int frames, int num_heads) {
  Require(frames > 0, ErrorCode::kInvalidArgument, "frame count must be positive");
  const std::vector<double> slopes = AlibiSlopes(num_heads);
  const auto l = static_cast<std::size_t>(frames);
  std::vector<double> bias(slopes.size() * l * l);
  for (std::size_t h = 0; h < slopes.size(); ++h) {
    for (std::size_t i = 0; i < l; ++i) {
      for (std::size_t j = 0; j < l; ++j) {
        const double dist = i > j ? static_cast<double>(i - j) : static_cast<double>(j - i);
        bias[(h * l + i) * l + j] = -slopes[h] * dist;
      }
    }
  }
  return bias;
}

RowMatrix AdaptiveNorm(const RowMatrix& hidden, std::span<const double> shift,
                       std::span<const double> scale) {
  Require(shift.size() == static_cast<std::size_t>(hidden.cols()) &&
              scale.size() == static_cast<std::size_t>(hidden.cols()),
          ErrorCode::kShapeMismatch, "adaptive norm modulation size mismatch");
  RowMatrix xhat;
  Vector rstd;
  LayerNormRows(hidden, xhat, rstd);
  const RowVector sh = Eigen::Map<const RowVector>(shift.data(), hidden.cols());
  const RowVector sc = Eigen::Map<const RowVector>(scale.data(), hidden.cols());
  return Modulate(xhat, sh, sc);
}

namespace {

struct TimePath {
  Vector embed;
  Vector hidden;
  Vector cond;
};

TimePath RunTimeMlp(const VectorFieldModel& model, double t) {
  const std::vector<double> emb = TimeEmbedding(t, model.config.time_embed_dim);
  TimePath p;
  p.embed = Eigen::Map<const Vector>(emb.data(), static_cast<Eigen::Index>(emb.size()));
  p.hidden = model.Matrix("time.fc1.weight").transpose() * p.embed +
             model.Matrix("time.fc1.bias").row(0).transpose();
  p.cond = model.Matrix("time.fc2.weight").transpose() * SiluVec(p.hidden) +
           model.Matrix("time.fc2.bias").row(0).transpose();
  return p;
}

}  // namespace

Vector TimeConditioning(const VectorFieldModel& model, double t) {
  return RunTimeMlp(model, t).cond;
}

Vector LayerModulation(const VectorFieldModel& model, int layer,
                       const Vector& time_conditioning) {
  const int n = model.config.num_layers;
  Require(layer >= 0 && layer <= n, ErrorCode::kInvalidArgument, "layer out of range");
  const std::string w = layer == n ? "final.adaln.weight" : BlockName(layer, "adaln.weight");
  const std::string b = layer == n ? "final.adaln.bias" : BlockName(layer, "adaln.bias");
  return model.Matrix(w).transpose() * SiluVec(time_conditioning) +
         model.Matrix(b).row(0).transpose();
}

ForwardTape::ForwardTape() = default;
ForwardTape::~ForwardTape() = default;
ForwardTape::ForwardTape(ForwardTape&&) noexcept = default;
ForwardTape& ForwardTape::operator=(ForwardTape&&) noexcept = default;

void ForwardTape::Clear() { *this = ForwardTape(); }

FeatureGrid Forward(const VectorFieldModel& model, const FeatureGrid& x_t,
                    const ConditionInput& cond, double t, ForwardTape* tape,
                    std::span<const double> positions) {
  const ModelConfig& cfg = model.config;
  Require(x_t.SameShape(cond.features), ErrorCode::kShapeMismatch,
          "state and condition shapes differ");
  Require(x_t.channels == cfg.feature_channels, ErrorCode::kShapeMismatch,
          "state has " + std::to_string(x_t.channels) + " channels, model expects " +
              std::to_string(cfg.feature_channels));
  Require(x_t.frames > 0, ErrorCode::kShapeMismatch, "empty feature grid");
  Require(t >= 0.0 && t <= 1.0, ErrorCode::kInvalidArgument, "time must lie in [0, 1]");
  Require(positions.empty() || positions.size() == static_cast<std::size_t>(x_t.frames),
          ErrorCode::kShapeMismatch, "positions must have one entry per frame");
  for (double v : x_t.values) {
    Require(std::isfinite(v), ErrorCode::kNumerical, "state contains non-finite values");
  }
  for (double v : cond.features.values) {
    Require(std::isfinite(v), ErrorCode::kNumerical,
            "condition contains non-finite values");
  }

  const int frames = x_t.frames;
  const int c = cfg.feature_channels;
  const int d = cfg.model_dim;
  const int heads = cfg.num_heads;
  const int dh = d / heads;
  const double qk_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  RowMatrix input(frames, 2 * c);
  input.leftCols(c) = Eigen::Map<const RowMatrix>(x_t.values.data(), frames, c);
  const bool use_null = cfg.null_condition_embedding && cond.is_null;
  if (use_null) {
    input.rightCols(c).rowwise() = model.Matrix("null_condition").row(0);
  } else {
    input.rightCols(c) = Eigen::Map<const RowMatrix>(cond.features.values.data(), frames, c);
  }

  RowMatrix dist(frames, frames);
  for (int i = 0; i < frames; ++i) {
    for (int j = 0; j < frames; ++j) {
      dist(i, j) = positions.empty() ? std::abs(static_cast<double>(i - j))
                                     : std::abs(positions[i] - positions[j]);
    }
  }
  const std::vector<double> slopes = AlibiSlopes(heads);

  TimePath time = RunTimeMlp(model, t);
  const Vector time_act = SiluVec(time.cond);

  RowMatrix h = input * model.Matrix("input.weight");
  AddBias(h, model.Matrix("input.bias"));

  if (tape) {
    tape->Clear();
    tape->blocks_.resize(cfg.num_layers);
  }

  for (int layer = 0; layer < cfg.num_layers; ++layer) {
    const Vector mod = model.Matrix(BlockName(layer, "adaln.weight")).transpose() * time_act +
                       model.Matrix(BlockName(layer, "adaln.bias")).row(0).transpose();
    const RowVector shift1 = mod.segment(0, d).transpose();
    const RowVector scale1 = mod.segment(d, d).transpose();
    const RowVector gate1 = mod.segment(2 * d, d).transpose();
    const RowVector shift2 = mod.segment(3 * d, d).transpose();
    const RowVector scale2 = mod.segment(4 * d, d).transpose();
    const RowVector gate2 = mod.segment(5 * d, d).transpose();

    RowMatrix xhat1;
    Vector rstd1;
    LayerNormRows(h, xhat1, rstd1);
    RowMatrix a = Modulate(xhat1, shift1, scale1);
    RowMatrix qkv = a * model.Matrix(BlockName(layer, "attn.qkv.weight"));
    AddBias(qkv, model.Matrix(BlockName(layer, "attn.qkv.bias")));

    RowMatrix attn(frames, d);
    std::vector<RowMatrix> probs;
    if (tape) probs.resize(heads);
    RowMatrix scores(frames, frames);
    for (int hd = 0; hd < heads; ++hd) {
      const auto q = qkv.middleCols(hd * dh, dh);
      const auto k = qkv.middleCols(d + hd * dh, dh);
      const auto v = qkv.middleCols(2 * d + hd * dh, dh);
      scores.noalias() = q * k.transpose();
      scores *= qk_scale;
      scores.noalias() -= slopes[hd] * dist;
      SoftmaxRows(scores);
      attn.middleCols(hd * dh, dh).noalias() = scores * v;
      if (tape) probs[hd] = scores;
    }
    RowMatrix y1 = attn * model.Matrix(BlockName(layer, "attn.out.weight"));
    AddBias(y1, model.Matrix(BlockName(layer, "attn.out.bias")));

    RowMatrix h_mid = h;
    h_mid.array() += y1.array().rowwise() * gate1.array();

    RowMatrix xhat2;
    Vector rstd2;
    LayerNormRows(h_mid, xhat2, rstd2);
    RowMatrix b = Modulate(xhat2, shift2, scale2);
    RowMatrix u = b * model.Matrix(BlockName(layer, "ff.fc1.weight"));
    AddBias(u, model.Matrix(BlockName(layer, "ff.fc1.bias")));
    RowMatrix g = u.unaryExpr(&Gelu);
    RowMatrix y2 = g * model.Matrix(BlockName(layer, "ff.fc2.weight"));
    AddBias(y2, model.Matrix(BlockName(layer, "ff.fc2.bias")));

    RowMatrix h_out = h_mid;
    h_out.array() += y2.array().rowwise() * gate2.array();

    if (tape) {
      BlockTape& bt = tape->blocks_[layer];
      bt.h_in = std::move(h);
      bt.xhat1 = std::move(xhat1);
      bt.rstd1 = std::move(rstd1);
      bt.a = std::move(a);
      bt.qkv = std::move(qkv);
      bt.probs = std::move(probs);
      bt.attn = std::move(attn);
      bt.y1 = std::move(y1);
      bt.xhat2 = std::move(xhat2);
      bt.rstd2 = std::move(rstd2);
      bt.b = std::move(b);
      bt.u = std::move(u);
      bt.g = std::move(g);
      bt.y2 = std::move(y2);
      bt.mod = mod;
    }
    h = std::move(h_out);
  }

  const Vector fmod = model.Matrix("final.adaln.weight").transpose() * time_act +
                      model.Matrix("final.adaln.bias").row(0).transpose();
  RowMatrix xhat_f;
  Vector rstd_f;
  LayerNormRows(h, xhat_f, rstd_f);
  RowMatrix m = Modulate(xhat_f, fmod.segment(0, d).transpose(), fmod.segment(d, d).transpose());
  RowMatrix out = m * model.Matrix("output.weight");
  AddBias(out, model.Matrix("output.bias"));

  FeatureGrid result(c, frames);
  result.layout = x_t.layout;
  Eigen::Map<RowMatrix>(result.values.data(), frames, c) = out;
  for (double v : result.values) {
    Require(std::isfinite(v), ErrorCode::kNumerical, "vector field produced non-finite output");
  }

  if (tape) {
    tape->input_ = std::move(input);
    tape->time_embed_ = time.embed;
    tape->time_hidden_ = time.hidden;
    tape->time_cond_ = time.cond;
    tape->final_in_ = std::move(h);
    tape->final_xhat_ = std::move(xhat_f);
    tape->final_rstd_ = std::move(rstd_f);
    tape->final_mod_ = std::move(m);
    tape->frames_ = frames;
    tape->used_null_embedding_ = use_null;
    tape->recorded_ = true;
  }
  return result;
}

void Backward(const VectorFieldModel& model, const ForwardTape& tape,
              std::span<const double> output_gradient, std::span<double> gradient) {
  Require(tape.recorded(), ErrorCode::kState, "backward called without a recorded forward pass");
  const ModelConfig& cfg = model.config;
  const int frames = tape.frames_;
  const int c = cfg.feature_channels;
  const int d = cfg.model_dim;
  const int heads = cfg.num_heads;
  const int dh = d / heads;
  const double qk_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Require(output_gradient.size() == static_cast<std::size_t>(frames) * c,
          ErrorCode::kShapeMismatch, "output gradient does not match the recorded output");
  Require(gradient.size() == model.parameters.size(), ErrorCode::kShapeMismatch,
          "gradient buffer does not match the parameter count");

  // Accumulate into aligned storage so that Eigen reductions do not depend on
  // where the caller's buffers happen to sit in memory.
  ParameterVector local(gradient.size(), 0.0);
  GradientView grad(model.layout(), local);
  const Vector time_act = SiluVec(tape.time_cond_);
  Vector d_time_act = Vector::Zero(d);

  const RowMatrix d_out = Eigen::Map<const RowMatrix>(output_gradient.data(), frames, c);
  grad("output.weight").noalias() += tape.final_mod_.transpose() * d_out;
  grad("output.bias").row(0) += d_out.colwise().sum();
  RowMatrix dm = d_out * model.Matrix("output.weight").transpose();

  {
    const Vector fmod = model.Matrix("final.adaln.weight").transpose() * time_act +
                        model.Matrix("final.adaln.bias").row(0).transpose();
    const RowVector scale = fmod.segment(d, d).transpose();
    Vector d_fmod(2 * d);
    d_fmod.segment(0, d) = dm.colwise().sum().transpose();
    d_fmod.segment(d, d) = (dm.array() * tape.final_xhat_.array()).colwise().sum().transpose();
    dm.array().rowwise() *= (1.0 + scale.array());
    grad("final.adaln.weight").noalias() += time_act * d_fmod.transpose();
    grad("final.adaln.bias").row(0) += d_fmod.transpose();
    d_time_act.noalias() += model.Matrix("final.adaln.weight") * d_fmod;
  }
  RowMatrix dh_cur = LayerNormBackward(dm, tape.final_xhat_, tape.final_rstd_);

  for (int layer = cfg.num_layers - 1; layer >= 0; --layer) {
    const BlockTape& bt = tape.blocks_[layer];
    const RowVector scale1 = bt.mod.segment(d, d).transpose();
    const RowVector gate1 = bt.mod.segment(2 * d, d).transpose();
    const RowVector scale2 = bt.mod.segment(4 * d, d).transpose();
    const RowVector gate2 = bt.mod.segment(5 * d, d).transpose();
    Vector d_mod(6 * d);

    // Feedforward branch.
    d_mod.segment(5 * d, d) = (dh_cur.array() * bt.y2.array()).colwise().sum().transpose();
    RowMatrix dy2 = dh_cur;
    dy2.array().rowwise() *= gate2.array();
    grad(BlockName(layer, "ff.fc2.weight")).noalias() += bt.g.transpose() * dy2;
    grad(BlockName(layer, "ff.fc2.bias")).row(0) += dy2.colwise().sum();
    RowMatrix du = dy2 * model.Matrix(BlockName(layer, "ff.fc2.weight")).transpose();
    du.array() *= bt.u.unaryExpr(&GeluGrad).array();
    grad(BlockName(layer, "ff.fc1.weight")).noalias() += bt.b.transpose() * du;
    grad(BlockName(layer, "ff.fc1.bias")).row(0) += du.colwise().sum();
    RowMatrix db = du * model.Matrix(BlockName(layer, "ff.fc1.weight")).transpose();
    d_mod.segment(3 * d, d) = db.colwise().sum().transpose();
    d_mod.segment(4 * d, d) = (db.array() * bt.xhat2.array()).colwise().sum().transpose();
    db.array().rowwise() *= (1.0 + scale2.array());
    RowMatrix dh_mid = dh_cur + LayerNormBackward(db, bt.xhat2, bt.rstd2);

    // Attention branch.
    d_mod.segment(2 * d, d) = (dh_mid.array() * bt.y1.array()).colwise().sum().transpose();
    RowMatrix dy1 = dh_mid;
    dy1.array().rowwise() *= gate1.array();
    grad(BlockName(layer, "attn.out.weight")).noalias() += bt.attn.transpose() * dy1;
    grad(BlockName(layer, "attn.out.bias")).row(0) += dy1.colwise().sum();
    const RowMatrix d_attn = dy1 * model.Matrix(BlockName(layer, "attn.out.weight")).transpose();

    RowMatrix d_qkv(frames, 3 * d);
    RowMatrix dp(frames, frames);
    for (int hd = 0; hd < heads; ++hd) {
      const RowMatrix& p = bt.probs[hd];
      const auto q = bt.qkv.middleCols(hd * dh, dh);
      const auto k = bt.qkv.middleCols(d + hd * dh, dh);
      const auto v = bt.qkv.middleCols(2 * d + hd * dh, dh);
      const auto d_o = d_attn.middleCols(hd * dh, dh);
      dp.noalias() = d_o * v.transpose();
      d_qkv.middleCols(2 * d + hd * dh, dh).noalias() = p.transpose() * d_o;
      const Vector row_dot = (dp.array() * p.array()).rowwise().sum();
      dp = p.array() * (dp.colwise() - row_dot).array();
      dp *= qk_scale;
      d_qkv.middleCols(hd * dh, dh).noalias() = dp * k;
      d_qkv.middleCols(d + hd * dh, dh).noalias() = dp.transpose() * q;
    }
    grad(BlockName(layer, "attn.qkv.weight")).noalias() += bt.a.transpose() * d_qkv;
    grad(BlockName(layer, "attn.qkv.bias")).row(0) += d_qkv.colwise().sum();
    RowMatrix da = d_qkv * model.Matrix(BlockName(layer, "attn.qkv.weight")).transpose();
    d_mod.segment(0, d) = da.colwise().sum().transpose();
    d_mod.segment(d, d) = (da.array() * bt.xhat1.array()).colwise().sum().transpose();
    da.array().rowwise() *= (1.0 + scale1.array());
    dh_cur = dh_mid + LayerNormBackward(da, bt.xhat1, bt.rstd1);

    grad(BlockName(layer, "adaln.weight")).noalias() += time_act * d_mod.transpose();
    grad(BlockName(layer, "adaln.bias")).row(0) += d_mod.transpose();
    d_time_act.noalias() += model.Matrix(BlockName(layer, "adaln.weight")) * d_mod;
  }

  // Time MLP.
  const Vector d_cond = d_time_act.array() * tape.time_cond_.unaryExpr(&SiluGrad).array();
  grad("time.fc2.weight").noalias() += SiluVec(tape.time_hidden_) * d_cond.transpose();
  grad("time.fc2.bias").row(0) += d_cond.transpose();
  const Vector d_hidden = (model.Matrix("time.fc2.weight") * d_cond).array() *
                          tape.time_hidden_.unaryExpr(&SiluGrad).array();
  grad("time.fc1.weight").noalias() += tape.time_embed_ * d_hidden.transpose();
  grad("time.fc1.bias").row(0) += d_hidden.transpose();

  // Input projection.
  grad("input.weight").noalias() += tape.input_.transpose() * dh_cur;
  grad("input.bias").row(0) += dh_cur.colwise().sum();
  if (tape.used_null_embedding_) {
    const RowMatrix d_input =
        dh_cur * model.Matrix("input.weight").bottomRows(c).transpose();
    grad("null_condition").row(0) += d_input.colwise().sum();
  }
  for (std::size_t i = 0; i < local.size(); ++i) gradient[i] += local[i];
}

std::vector<double> Backward(const VectorFieldModel& model, const ForwardTape& tape,
                             std::span<const double> output_gradient) {
  std::vector<double> gradient(model.parameters.size(), 0.0);
  Backward(model, tape, output_gradient, gradient);
  return gradient;
}

}  // namespace specflow
