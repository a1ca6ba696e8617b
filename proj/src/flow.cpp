#include "tailflow/flow.hpp"

#include <cmath>
#include <limits>

#include "tailflow/rng.hpp"

namespace tailflow::flow {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112353;

dists::IidSource taf_as_iid(const TafSource& s) {
  return {s.dim, dists::Distribution1D::student_t(s.nu())};
}

}  // namespace

int source_dim(const Source& s) {
  return std::visit([](const auto& v) { return v.dim; }, s);
}

ForwardResult layer_forward(const FlowLayer& layer, std::span<const double> z) {
  auto step = detail::layer_transform<double>(layer, layer.conditioner.values, z, false);
  return {std::move(step.point), step.log_det};
}

ForwardResult layer_inverse(const FlowLayer& layer, std::span<const double> x) {
  auto step = detail::layer_transform<double>(layer, layer.conditioner.values, x, true);
  return {std::move(step.point), step.log_det};
}

double flow_log_prob(const FlowStack& stack, const Source& source, std::span<const double> x) {
  std::vector<double> z(x.begin(), x.end());
  double log_det = 0.0;
  for (auto it = stack.layers.rbegin(); it != stack.layers.rend(); ++it) {
    auto step = detail::layer_transform<double>(*it, it->conditioner.values, z, true);
    z = std::move(step.point);
    log_det += step.log_det;
  }
  const double base = std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TafSource>)
          return dists::student_t_iid_log_density(s.nu(), z);
        else
          return dists::log_density(s, z);
      },
      source);
  return base + log_det;
}

Matrix flow_sample(const FlowStack& stack, const Source& source, std::uint64_t seed,
                   std::size_t n) {
  Matrix base = std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TafSource>)
          return dists::sample(taf_as_iid(s), seed, n);
        else
          return dists::sample(s, seed, n);
      },
      source);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> p(base.row(i).begin(), base.row(i).end());
    for (const auto& layer : stack.layers) {
      auto step = detail::layer_transform<double>(layer, layer.conditioner.values, p, false);
      p = std::move(step.point);
    }
    for (std::size_t j = 0; j < p.size(); ++j) base(i, j) = p[j];
  }
  return base;
}

double lipschitz_scale_bound(const FlowLayer& layer) {
  if (layer.kind == LayerKind::permutation || layer.kind == LayerKind::additive_coupling)
    return 1.0;
  switch (layer.scale_head) {
    case ScaleHead::tanh_exp:
      return std::exp(1.0);
    case ScaleHead::sigmoid:
      return 1.0 + kSigmoidScaleEps;
    case ScaleHead::exp:
      return std::numeric_limits<double>::infinity();
  }
  throw std::logic_error("unknown scale head");
}

std::vector<double> get_params(const FlowStack& stack) {
  std::vector<double> out;
  out.reserve(stack.param_count());
  for (const auto& l : stack.layers)
    out.insert(out.end(), l.conditioner.values.begin(), l.conditioner.values.end());
  return out;
}

void set_params(FlowStack& stack, std::span<const double> params) {
  if (params.size() != stack.param_count())
    throw std::invalid_argument("set_params: size mismatch");
  std::size_t off = 0;
  for (auto& l : stack.layers) {
    std::copy(params.begin() + static_cast<std::ptrdiff_t>(off),
              params.begin() + static_cast<std::ptrdiff_t>(off + l.conditioner.values.size()),
              l.conditioner.values.begin());
    off += l.conditioner.values.size();
  }
}

autograd::Var flow_log_prob_tape(autograd::Tape& tape, const FlowStack& stack,
                                 std::span<const autograd::Var> params, const Source& source,
                                 std::optional<autograd::Var> taf_theta,
                                 std::span<const double> x) {
  using autograd::Var;
  if (params.size() != stack.param_count())
    throw std::invalid_argument("flow_log_prob_tape: parameter count mismatch");

  std::vector<Var> z;
  z.reserve(x.size());
  for (double v : x) z.push_back(autograd::make_leaf(tape, v));

  Var log_det = autograd::make_leaf(tape, 0.0);
  std::size_t off = params.size();
  for (auto it = stack.layers.rbegin(); it != stack.layers.rend(); ++it) {
    off -= it->param_count();
    auto step = detail::layer_transform<Var>(
        *it, params.subspan(off, it->param_count()), z, true);
    z = std::move(step.point);
    log_det = log_det + step.log_det;
  }

  Var base = std::visit(
      [&](const auto& s) -> Var {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TafSource>) {
          if (!taf_theta) throw std::invalid_argument("flow_log_prob_tape: missing theta");
          Var nu = 1.0 + autograd::softplus(*taf_theta);
          return dists::student_t_iid_log_density_generic<Var>(nu, z);
        } else {
          if (s.base.kind != dists::Kind::gaussian)
            throw std::invalid_argument("flow_log_prob_tape: iid source must be gaussian");
          const double mu = s.base.p1, sigma = s.base.p2;
          Var acc = autograd::make_leaf(tape, -0.5 * kLogTwoPi * static_cast<double>(s.dim) -
                                                  static_cast<double>(s.dim) * std::log(sigma));
          for (const Var& zj : z) {
            Var t = (zj - mu) / sigma;
            acc = acc - 0.5 * autograd::square(t);
          }
          return acc;
        }
      },
      source);
  return base + log_det;
}

autograd::MlpMasks made_connectivity(int dim, std::span<const int> layer_sizes) {
  // Input degree of coordinate i is i+1; hidden degrees cycle 1..dim-1;
  // output units for coordinate j carry degree j+1 and use a strict
  // comparison, so the j-th heads read only coordinates before j.
  const int d = dim;
  std::vector<std::vector<int>> degrees(layer_sizes.size());
  for (std::size_t l = 0; l < layer_sizes.size(); ++l) {
    degrees[l].resize(static_cast<std::size_t>(layer_sizes[l]));
    const bool last = (l + 1 == layer_sizes.size());
    for (int u = 0; u < layer_sizes[l]; ++u) {
      if (l == 0)
        degrees[l][static_cast<std::size_t>(u)] = u + 1;
      else if (last)
        degrees[l][static_cast<std::size_t>(u)] = (u % d) + 1;
      else
        degrees[l][static_cast<std::size_t>(u)] = d > 1 ? 1 + (u % (d - 1)) : 1;
    }
  }
  autograd::MlpMasks masks(layer_sizes.size() - 1);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const bool to_output = (l + 2 == layer_sizes.size());
    const std::size_t n_in = static_cast<std::size_t>(layer_sizes[l]);
    const std::size_t n_out = static_cast<std::size_t>(layer_sizes[l + 1]);
    masks[l].resize(n_in * n_out);
    for (std::size_t j = 0; j < n_out; ++j)
      for (std::size_t i = 0; i < n_in; ++i)
        masks[l][j * n_in + i] =
            to_output ? (degrees[l + 1][j] > degrees[l][i]) : (degrees[l + 1][j] >= degrees[l][i]);
  }
  return masks;
}

FlowLayer make_coupling_layer(int dim, LayerKind kind, std::span<const std::uint8_t> transformed,
                              ScaleHead scale_head, ShiftHead shift_head,
                              std::span<const int> hidden, autograd::Activation activation) {
  if (kind != LayerKind::additive_coupling && kind != LayerKind::affine_coupling)
    throw std::invalid_argument("make_coupling_layer: not a coupling kind");
  FlowLayer layer;
  layer.kind = kind;
  layer.dim = dim;
  layer.transformed.assign(transformed.begin(), transformed.end());
  int n_cond = 0, n_trans = 0;
  for (auto f : layer.transformed) (f ? n_trans : n_cond)++;
  if (n_trans == 0) throw std::invalid_argument("make_coupling_layer: nothing to transform");
  layer.scale_head = scale_head;
  layer.shift_head = shift_head;
  layer.conditioner.activation = activation;
  layer.conditioner.layer_sizes.push_back(n_cond);
  for (int h : hidden) layer.conditioner.layer_sizes.push_back(h);
  layer.conditioner.layer_sizes.push_back(kind == LayerKind::affine_coupling ? 2 * n_trans
                                                                             : n_trans);
  layer.conditioner.values.assign(layer.conditioner.param_count(), 0.0);
  return layer;
}

FlowLayer make_masked_autoregressive_layer(int dim, ScaleHead scale_head, ShiftHead shift_head,
                                           AffineForm affine_form, std::span<const int> hidden,
                                           autograd::Activation activation) {
  FlowLayer layer;
  layer.kind = LayerKind::masked_autoregressive;
  layer.dim = dim;
  layer.scale_head = scale_head;
  layer.shift_head = shift_head;
  layer.affine_form = affine_form;
  layer.conditioner.activation = activation;
  layer.conditioner.layer_sizes.push_back(dim);
  for (int h : hidden) layer.conditioner.layer_sizes.push_back(h);
  layer.conditioner.layer_sizes.push_back(2 * dim);
  layer.conditioner.values.assign(layer.conditioner.param_count(), 0.0);
  layer.made_masks = made_connectivity(dim, layer.conditioner.layer_sizes);
  return layer;
}

FlowLayer make_permutation_layer(int dim, std::span<const int> perm) {
  FlowLayer layer;
  layer.kind = LayerKind::permutation;
  layer.dim = dim;
  layer.perm.assign(perm.begin(), perm.end());
  return layer;
}

namespace {

// Xavier-uniform hidden layers, zeroed final layer: the freshly built stack
// is exactly the identity map under tanh-exp or exp heads. Exception: rows
// feeding a relu shift head get a small random init, since zero is a dead
// point of the relu subgradient.
void init_conditioner(autograd::MlpParams& net, Rng& rng, ShiftHead shift_head,
                      std::size_t shift_rows_from) {
  const auto& sizes = net.layer_sizes;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t n_in = static_cast<std::size_t>(sizes[l]);
    const std::size_t n_out = static_cast<std::size_t>(sizes[l + 1]);
    const bool last = (l + 2 == sizes.size());
    const double bound = std::sqrt(6.0 / static_cast<double>(n_in + n_out));
    for (std::size_t j = 0; j < n_out; ++j)
      for (std::size_t i = 0; i < n_in; ++i) {
        double v = bound * (2.0 * rng.uniform01() - 1.0);
        if (last) v = (shift_head == ShiftHead::relu && j >= shift_rows_from) ? 0.01 * v : 0.0;
        net.values[off + j * n_in + i] = v;
      }
    off += n_in * n_out + n_out;  // biases stay zero
  }
}

}  // namespace

FlowStack make_stack(const StackConfig& cfg, std::uint64_t seed) {
  if (cfg.dim < 1) throw std::invalid_argument("make_stack: dim must be >= 1");
  if (cfg.blocks < 0) throw std::invalid_argument("make_stack: blocks must be >= 0");
  Rng rng(derive_seed(seed, 0xf10u));
  FlowStack stack;
  stack.dim = cfg.dim;
  const int d = cfg.dim;
  const int half = d / 2;

  std::vector<std::uint8_t> transformed(static_cast<std::size_t>(d), 0);
  for (int j = half; j < d; ++j) transformed[static_cast<std::size_t>(j)] = 1;
  std::vector<int> rotate(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) rotate[static_cast<std::size_t>(i)] = (i + half) % d;

  for (int b = 0; b < cfg.blocks; ++b) {
    FlowLayer layer;
    std::size_t shift_rows_from;
    if (cfg.kind == LayerKind::masked_autoregressive) {
      layer = make_masked_autoregressive_layer(d, cfg.scale_head, cfg.shift_head, cfg.affine_form,
                                               cfg.hidden, cfg.activation);
      shift_rows_from = static_cast<std::size_t>(d);
    } else {
      layer = make_coupling_layer(d, cfg.kind, transformed, cfg.scale_head, cfg.shift_head,
                                  cfg.hidden, cfg.activation);
      const std::size_t out = static_cast<std::size_t>(layer.conditioner.layer_sizes.back());
      shift_rows_from = cfg.kind == LayerKind::affine_coupling ? out / 2 : 0;
    }
    init_conditioner(layer.conditioner, rng, cfg.shift_head, shift_rows_from);
    stack.layers.push_back(std::move(layer));
    if (b + 1 < cfg.blocks) {
      if (cfg.kind == LayerKind::masked_autoregressive) {
        std::vector<int> reverse(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) reverse[static_cast<std::size_t>(i)] = d - 1 - i;
        stack.layers.push_back(make_permutation_layer(d, reverse));
      } else {
        stack.layers.push_back(make_permutation_layer(d, rotate));
      }
    }
  }
  return stack;
}

}  // namespace tailflow::flow
