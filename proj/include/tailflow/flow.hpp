#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tailflow/autograd.hpp"
#include "tailflow/dists.hpp"
#include "tailflow/matrix.hpp"

namespace tailflow::flow {

enum class LayerKind : std::uint8_t {
  additive_coupling,       // z_j + mu_j on the transformed half
  affine_coupling,         // exp(lambda_j) * z_j + mu_j on the transformed half
  masked_autoregressive,   // per-coordinate affine with autoregressive conditioner
  permutation,
};

enum class ScaleHead : std::uint8_t { tanh_exp, sigmoid, exp };
enum class ShiftHead : std::uint8_t { linear, relu };
// scale_shift is the usual sigma*z + mu; convex is the sigma*z + (1-sigma)*mu
// variant of masked autoregressive layers.
enum class AffineForm : std::uint8_t { scale_shift, convex };

constexpr double kSigmoidScaleEps = 1e-6;

struct FlowLayer {
  LayerKind kind = LayerKind::affine_coupling;
  int dim = 0;
  // Coupling layers: per-coordinate flag, 1 = transformed, 0 = conditioned.
  std::vector<std::uint8_t> transformed;
  // Permutation layers: x[i] = z[perm[i]].
  std::vector<int> perm;
  autograd::MlpParams conditioner;
  autograd::MlpMasks made_masks;  // masked_autoregressive connectivity
  ScaleHead scale_head = ScaleHead::tanh_exp;
  ShiftHead shift_head = ShiftHead::linear;
  AffineForm affine_form = AffineForm::scale_shift;

  std::size_t param_count() const {
    return kind == LayerKind::permutation ? 0 : conditioner.param_count();
  }
};

struct FlowStack {
  int dim = 0;
  std::vector<FlowLayer> layers;

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.param_count();
    return n;
  }
};

// Student-t source with learnable tail weight; nu = 1 + softplus(theta) stays
// in (1, inf) for every real theta.
struct TafSource {
  int dim = 1;
  double theta = 0.0;

  double nu() const { return 1.0 + autograd::softplus(theta); }
  static TafSource with_nu(int dim, double nu0) {
    if (!(nu0 >= 1.0)) throw std::invalid_argument("TafSource: nu must be >= 1");
    return {dim, autograd::softplus_inverse(nu0 - 1.0)};
  }
};

using Source = std::variant<dists::IidSource, TafSource>;

int source_dim(const Source& s);

struct ForwardResult {
  std::vector<double> x;
  double log_det;
};

// ---------------------------------------------------------------------------
// Generic layer math, shared between plain evaluation (S = double) and graph
// recording (S = autograd::Var).

namespace detail {

template <class S>
struct ScalePair {
  S scale;
  S log_scale;
};

template <class S>
ScalePair<S> apply_scale_head(ScaleHead head, S raw) {
  using std::exp;
  using std::log;
  using std::tanh;
  using tailflow::autograd::exp;
  using tailflow::autograd::log;
  using tailflow::autograd::tanh;
  switch (head) {
    case ScaleHead::tanh_exp: {
      S ls = tanh(raw);
      return {exp(ls), ls};
    }
    case ScaleHead::sigmoid: {
      using tailflow::autograd::sigmoid;
      S sc = sigmoid(raw) + kSigmoidScaleEps;
      return {sc, log(sc)};
    }
    case ScaleHead::exp:
      return {exp(raw), raw};
  }
  throw std::logic_error("unknown scale head");
}

template <class S>
S apply_shift_head(ShiftHead head, S raw) {
  using tailflow::autograd::relu;
  return head == ShiftHead::relu ? relu(raw) : raw;
}

template <class S>
struct Step {
  std::vector<S> point;
  S log_det;
};

template <class S>
S zero_like(const std::vector<S>& point);
template <>
inline double zero_like<double>(const std::vector<double>&) { return 0.0; }
template <>
inline autograd::Var zero_like<autograd::Var>(const std::vector<autograd::Var>& point) {
  return autograd::make_leaf(*point.front().tape, 0.0);
}

template <class S>
Step<S> coupling_transform(const FlowLayer& layer, std::span<const S> params,
                           std::span<const S> point, bool inverse) {
  std::vector<S> cond_in;
  cond_in.reserve(point.size());
  for (std::size_t j = 0; j < point.size(); ++j)
    if (!layer.transformed[j]) cond_in.push_back(point[j]);

  const std::vector<S> head_raw =
      autograd::mlp_forward<S>(layer.conditioner, params, cond_in);
  const bool affine = layer.kind == LayerKind::affine_coupling;
  const std::size_t n_trans = head_raw.size() / (affine ? 2 : 1);

  std::vector<S> out(point.begin(), point.end());
  S log_det = zero_like<S>(out);
  std::size_t t = 0;
  for (std::size_t j = 0; j < point.size(); ++j) {
    if (!layer.transformed[j]) continue;
    S shift = apply_shift_head<S>(layer.shift_head, head_raw[affine ? n_trans + t : t]);
    if (affine) {
      ScalePair<S> sp = apply_scale_head<S>(layer.scale_head, head_raw[t]);
      out[j] = inverse ? (point[j] - shift) / sp.scale : point[j] * sp.scale + shift;
      log_det = inverse ? log_det - sp.log_scale : log_det + sp.log_scale;
    } else {
      out[j] = inverse ? point[j] - shift : point[j] + shift;
    }
    ++t;
  }
  return {std::move(out), log_det};
}

// Masked autoregressive layer in the generative orientation: the conditioner
// reads source-side coordinates, so z -> x is one parallel pass and x -> z
// recovers coordinates sequentially (one masked evaluation per coordinate).
template <class S>
Step<S> masked_autoregressive_transform(const FlowLayer& layer, std::span<const S> params,
                                        std::span<const S> point, bool inverse) {
  const std::size_t d = point.size();
  std::vector<S> out(point.begin(), point.end());
  S log_det = zero_like<S>(out);

  auto affine_at = [&](const std::vector<S>& heads, std::size_t j, S in_j, S& det_acc) -> S {
    S shift = apply_shift_head<S>(layer.shift_head, heads[d + j]);
    if (layer.affine_form == AffineForm::convex) {
      ScalePair<S> sp = apply_scale_head<S>(layer.scale_head, heads[j]);
      det_acc = inverse ? det_acc - sp.log_scale : det_acc + sp.log_scale;
      // sigma*z + (1-sigma)*mu and its inverse
      return inverse ? (in_j - shift) / sp.scale + shift : sp.scale * (in_j - shift) + shift;
    }
    ScalePair<S> sp = apply_scale_head<S>(layer.scale_head, heads[j]);
    det_acc = inverse ? det_acc - sp.log_scale : det_acc + sp.log_scale;
    return inverse ? (in_j - shift) / sp.scale : in_j * sp.scale + shift;
  };

  if (!inverse) {
    const std::vector<S> heads =
        autograd::mlp_forward<S>(layer.conditioner, params, point, &layer.made_masks);
    for (std::size_t j = 0; j < d; ++j) out[j] = affine_at(heads, j, point[j], log_det);
    return {std::move(out), log_det};
  }
  // Inverse: out holds the partially recovered z; masked connectivity
  // guarantees heads for coordinate j only read out[0..j-1].
  for (std::size_t j = 0; j < d; ++j) {
    const std::vector<S> heads = autograd::mlp_forward<S>(
        layer.conditioner, params, std::span<const S>(out), &layer.made_masks);
    out[j] = affine_at(heads, j, point[j], log_det);
  }
  return {std::move(out), log_det};
}

template <class S>
Step<S> permutation_transform(const FlowLayer& layer, std::span<const S> point, bool inverse) {
  std::vector<S> out(point.begin(), point.end());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const std::size_t p = static_cast<std::size_t>(layer.perm[i]);
    if (inverse)
      out[p] = point[i];
    else
      out[i] = point[p];
  }
  S log_det = zero_like<S>(out);
  return {std::move(out), log_det};
}

template <class S>
Step<S> layer_transform(const FlowLayer& layer, std::span<const S> params,
                        std::span<const S> point, bool inverse) {
  if (point.size() != static_cast<std::size_t>(layer.dim))
    throw std::invalid_argument("flow layer: dimension mismatch");
  switch (layer.kind) {
    case LayerKind::additive_coupling:
    case LayerKind::affine_coupling:
      return coupling_transform<S>(layer, params, point, inverse);
    case LayerKind::masked_autoregressive:
      return masked_autoregressive_transform<S>(layer, params, point, inverse);
    case LayerKind::permutation:
      return permutation_transform<S>(layer, point, inverse);
  }
  throw std::logic_error("unknown layer kind");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Plain evaluation API.

// Maps z through the layer; log_det is of the map actually applied, so the
// inverse call reports the negated forward value at the matched point.
ForwardResult layer_forward(const FlowLayer& layer, std::span<const double> z);
ForwardResult layer_inverse(const FlowLayer& layer, std::span<const double> x);

// log q(x) = log p_source(z) + sum of inverse log-dets, z the full preimage.
double flow_log_prob(const FlowStack& stack, const Source& source, std::span<const double> x);

// Source samples pushed through every layer in order; deterministic per seed.
Matrix flow_sample(const FlowStack& stack, const Source& source, std::uint64_t seed,
                   std::size_t n);

// Architectural upper bound on the scale coefficient: e for tanh-exp heads,
// 1 + eps for sigmoid heads, +infinity for raw exp heads, 1 for permutations
// and additive couplings.
double lipschitz_scale_bound(const FlowLayer& layer);

// Flat parameter vector in layer order (permutations contribute nothing).
std::vector<double> get_params(const FlowStack& stack);
void set_params(FlowStack& stack, std::span<const double> params);

// ---------------------------------------------------------------------------
// Graph recording for training. `params` is the concatenated per-layer
// parameter leaves (get_params order); theta is the TAF source parameter.

autograd::Var flow_log_prob_tape(autograd::Tape& tape, const FlowStack& stack,
                                 std::span<const autograd::Var> params, const Source& source,
                                 std::optional<autograd::Var> taf_theta,
                                 std::span<const double> x);

// ---------------------------------------------------------------------------
// Stack construction and serialization.

struct StackConfig {
  int dim = 2;
  int blocks = 5;
  LayerKind kind = LayerKind::affine_coupling;
  ScaleHead scale_head = ScaleHead::tanh_exp;
  ShiftHead shift_head = ShiftHead::linear;
  AffineForm affine_form = AffineForm::scale_shift;
  std::vector<int> hidden = {32, 32};
  autograd::Activation activation = autograd::Activation::tanh;
};

// Alternate-halves mask, one transform layer plus a half-rotation permutation
// per block (the trailing permutation is dropped). Hidden weights get a
// seeded Xavier init; final conditioner layers start at zero so the stack is
// the identity map.
FlowStack make_stack(const StackConfig& cfg, std::uint64_t seed);

FlowLayer make_coupling_layer(int dim, LayerKind kind, std::span<const std::uint8_t> transformed,
                              ScaleHead scale_head, ShiftHead shift_head,
                              std::span<const int> hidden, autograd::Activation activation);
FlowLayer make_masked_autoregressive_layer(int dim, ScaleHead scale_head, ShiftHead shift_head,
                                           AffineForm affine_form, std::span<const int> hidden,
                                           autograd::Activation activation);
FlowLayer make_permutation_layer(int dim, std::span<const int> perm);

autograd::MlpMasks made_connectivity(int dim, std::span<const int> layer_sizes);

// JSON checkpoint with hex-float parameters; round-trips bit-exactly.
std::string to_json_string(const FlowStack& stack, const Source& source);
std::pair<FlowStack, Source> from_json_string(const std::string& text);

}  // namespace tailflow::flow
