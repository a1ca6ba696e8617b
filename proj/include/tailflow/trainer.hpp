#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailflow/flow.hpp"
#include "tailflow/matrix.hpp"
#include "tailflow/tailquant.hpp"

namespace tailflow::trainer {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

enum class SourceMode : std::uint8_t { gaussian, taf };

struct TrainConfig {
  int epochs = 40;
  int batch_size = 128;
  double learning_rate = 1e-3;
  AdamConfig adam;
  int blocks = 5;
  std::uint64_t seed = 0;
  SourceMode source_mode = SourceMode::gaussian;
  flow::LayerKind layer_kind = flow::LayerKind::affine_coupling;
  flow::ScaleHead scale_head = flow::ScaleHead::tanh_exp;
  flow::ShiftHead shift_head = flow::ShiftHead::linear;
  std::array<int, 3> split_ratio{2, 1, 1};
  std::vector<int> hidden{32, 32};
  autograd::Activation activation = autograd::Activation::tanh;
  double taf_nu_init = 30.0;
  // Step-size multiplier for the source-tail parameter theta. Adam moves any
  // coordinate by at most ~lr per step, which cannot carry nu from 30 into
  // the single digits within 40 epochs; theta gets a larger effective step.
  double taf_theta_lr_scale = 25.0;
  double gamma_u_lo = 0.95;
  double gamma_u_hi = 0.999;
  bool standardize = false;  // on for ingested CSV data, off for synthetic
};

struct TrainReport {
  std::vector<double> train_nll;  // one entry per epoch
  std::vector<double> val_nll;
  double test_nll = 0.0;
  std::optional<double> learned_nu;
  tailquant::TailProfile gamma_source;
  tailquant::TailProfile gamma_target;
  tailquant::TailProfile gamma_model;
  double wall_seconds = 0.0;
  int epochs_completed = 0;
  bool diverged = false;
  std::string diagnostic;
};

struct SplitResult {
  Matrix train;
  Matrix val;
  Matrix test;
};

// Disjoint shuffled partition with sizes floor(n*a/(a+b+c)) etc.; the
// remainder goes to train. Deterministic per seed.
SplitResult split_dataset(const Matrix& data, std::array<int, 3> ratio, std::uint64_t seed);

struct NllResult {
  double loss;
  std::vector<double> grads;  // layer params in get_params order, then theta (taf)
};

// Mean negative log-likelihood of the batch and its gradient via one reverse
// sweep per sample. Throws NumericError (with the offending row) when a
// sample evaluates non-finite.
NllResult nll_batch(const flow::FlowStack& stack, const flow::Source& source,
                    const Matrix& batch);

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what, std::size_t row = 0)
      : std::runtime_error(what), sample_index(row) {}
  std::size_t sample_index;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

// Bias-corrected update: param -= lr * scale * m_hat / (sqrt(v_hat) + eps).
// lr_scale may be empty (all ones) or give a per-parameter multiplier.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, const AdamConfig& cfg, std::span<const double> lr_scale = {});

struct TrainedModel {
  flow::FlowStack stack;
  flow::Source source;
};

// Full protocol: split, epochs of shuffled minibatches, per-epoch NLL
// bookkeeping, and the gamma triple on 10^4 samples each from source, data,
// and the trained model. Divergence (non-finite or NLL > 1e6) aborts with a
// partial report.
std::pair<TrainedModel, TrainReport> train(const TrainConfig& cfg, const Matrix& data);

std::string report_to_json_string(const TrainReport& report, const TrainConfig& cfg);

}  // namespace tailflow::trainer
