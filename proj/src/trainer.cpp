#include "tailflow/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "tailflow/rng.hpp"

namespace tailflow::trainer {

namespace {

using autograd::Tape;
using autograd::Var;

// Shared batch-gradient core: parameter leaves are laid down once, each
// sample's subgraph is recorded on top and rolled back after its reverse
// sweep.
NllResult nll_over_rows(const flow::FlowStack& stack, const flow::Source& source,
                        const Matrix& rows, Tape& tape, std::vector<double>& adjoint) {
  const std::size_t n = rows.rows();
  if (n == 0) throw std::invalid_argument("nll_batch: empty batch");
  const bool taf = std::holds_alternative<flow::TafSource>(source);
  const std::vector<double> layer_params = flow::get_params(stack);
  const std::size_t n_params = layer_params.size() + (taf ? 1 : 0);

  tape.clear();
  std::vector<Var> leaves;
  leaves.reserve(layer_params.size());
  for (double v : layer_params) leaves.push_back(autograd::make_leaf(tape, v));
  std::optional<Var> theta;
  if (taf) theta = autograd::make_leaf(tape, std::get<flow::TafSource>(source).theta);
  const std::size_t prefix = tape.size();

  NllResult out;
  out.loss = 0.0;
  out.grads.assign(n_params, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    tape.truncate(prefix);
    Var lp = flow::flow_log_prob_tape(tape, stack, leaves, source, theta, rows.row(i));
    const double v = lp.value();
    if (!std::isfinite(v))
      throw NumericError("nll_batch: non-finite log-likelihood at sample " + std::to_string(i), i);
    out.loss -= v;
    tape.backward_into(lp.id, adjoint);
    for (std::size_t k = 0; k < layer_params.size(); ++k)
      out.grads[k] -= adjoint[static_cast<std::size_t>(leaves[k].id)];
    if (taf) out.grads[n_params - 1] -= adjoint[static_cast<std::size_t>(theta->id)];
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.loss *= inv;
  for (double& g : out.grads) g *= inv;
  return out;
}

double mean_nll(const flow::FlowStack& stack, const flow::Source& source, const Matrix& rows) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rows.rows(); ++i)
    acc -= flow::flow_log_prob(stack, source, rows.row(i));
  return acc / static_cast<double>(rows.rows());
}

tailquant::TailProfile gamma_of(const Matrix& points, const TrainConfig& cfg) {
  const std::vector<double> norms = tailquant::norm_reduce(points);
  return tailquant::estimate_gamma(norms, cfg.gamma_u_lo, cfg.gamma_u_hi);
}

}  // namespace

SplitResult split_dataset(const Matrix& data, std::array<int, 3> ratio, std::uint64_t seed) {
  const long s = static_cast<long>(ratio[0]) + ratio[1] + ratio[2];
  if (ratio[0] <= 0 || ratio[1] <= 0 || ratio[2] <= 0)
    throw std::invalid_argument("split_dataset: ratio parts must be positive");
  const std::size_t n = data.rows();
  if (n < static_cast<std::size_t>(s)) throw std::invalid_argument("split_dataset: too few rows");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, 0x5b717u));
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index_below(i)]);

  const std::size_t n_val = n * static_cast<std::size_t>(ratio[1]) / static_cast<std::size_t>(s);
  const std::size_t n_test = n * static_cast<std::size_t>(ratio[2]) / static_cast<std::size_t>(s);
  const std::size_t n_train = n - n_val - n_test;  // floor remainder goes to train

  SplitResult out;
  out.train = data.take_rows({idx.data(), n_train});
  out.val = data.take_rows({idx.data() + n_train, n_val});
  out.test = data.take_rows({idx.data() + n_train + n_val, n_test});
  return out;
}

NllResult nll_batch(const flow::FlowStack& stack, const flow::Source& source,
                    const Matrix& batch) {
  Tape tape;
  std::vector<double> adjoint;
  return nll_over_rows(stack, source, batch, tape, adjoint);
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, const AdamConfig& cfg, std::span<const double> lr_scale) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * grads[k];
    state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * grads[k] * grads[k];
    const double m_hat = state.m[k] / bc1;
    const double v_hat = state.v[k] / bc2;
    const double scale = lr_scale.empty() ? 1.0 : lr_scale[k];
    params[k] -= lr * scale * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

std::pair<TrainedModel, TrainReport> train(const TrainConfig& cfg, const Matrix& data) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.blocks < 0 || cfg.learning_rate <= 0.0)
    throw std::invalid_argument("train: bad config");
  for (double v : data.flat())
    if (!std::isfinite(v)) throw std::invalid_argument("train: data must be finite");

  const int d = static_cast<int>(data.cols());
  flow::StackConfig sc;
  sc.dim = d;
  sc.blocks = cfg.blocks;
  sc.kind = cfg.layer_kind;
  sc.scale_head = cfg.scale_head;
  sc.shift_head = cfg.shift_head;
  sc.hidden = cfg.hidden;
  sc.activation = cfg.activation;
  TrainedModel model{flow::make_stack(sc, derive_seed(cfg.seed, 1)), flow::Source{}};
  if (cfg.source_mode == SourceMode::taf)
    model.source = flow::TafSource::with_nu(d, cfg.taf_nu_init);
  else
    model.source = dists::IidSource{d, dists::Distribution1D::gaussian(0.0, 1.0)};

  SplitResult split = split_dataset(data, cfg.split_ratio, derive_seed(cfg.seed, 2));

  const bool taf = cfg.source_mode == SourceMode::taf;
  std::vector<double> params = flow::get_params(model.stack);
  if (taf) params.push_back(std::get<flow::TafSource>(model.source).theta);
  std::vector<double> lr_scale(params.size(), 1.0);
  if (taf) lr_scale.back() = cfg.taf_theta_lr_scale;

  AdamState adam;
  TrainReport report;
  Tape tape;
  std::vector<double> adjoint;

  auto write_back = [&](void) {
    flow::set_params(model.stack,
                     std::span<const double>(params.data(), params.size() - (taf ? 1 : 0)));
    if (taf) std::get<flow::TafSource>(model.source).theta = params.back();
  };

  const std::size_t n_train = split.train.rows();
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  bool aborted = false;
  for (int epoch = 0; epoch < cfg.epochs && !aborted; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, 0x100u + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n_train; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.index_below(i)]);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(cfg.batch_size));
      Matrix batch = split.train.take_rows({order.data() + start, stop - start});
      NllResult res;
      try {
        res = nll_over_rows(model.stack, model.source, batch, tape, adjoint);
      } catch (const NumericError& e) {
        report.diverged = true;
        report.diagnostic = e.what();
        aborted = true;
        break;
      }
      if (!std::isfinite(res.loss) || res.loss > 1e6) {
        report.diverged = true;
        report.diagnostic = "train: NLL diverged at epoch " + std::to_string(epoch);
        aborted = true;
        break;
      }
      epoch_loss += res.loss * static_cast<double>(stop - start);
      seen += stop - start;
      adam_step(adam, params, res.grads, cfg.learning_rate, cfg.adam, lr_scale);
      write_back();
    }
    if (aborted) break;
    report.train_nll.push_back(epoch_loss / static_cast<double>(seen));
    report.val_nll.push_back(mean_nll(model.stack, model.source, split.val));
    report.epochs_completed = epoch + 1;
  }

  write_back();
  report.test_nll = mean_nll(model.stack, model.source, split.test);
  if (taf) report.learned_nu = std::get<flow::TafSource>(model.source).nu();

  // Gamma triple on 10^4 points each.
  const std::size_t n_gamma = 10000;
  Matrix source_samples = std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, flow::TafSource>)
          return dists::sample(dists::IidSource{s.dim, dists::Distribution1D::student_t(s.nu())},
                               derive_seed(cfg.seed, 3), n_gamma);
        else
          return dists::sample(s, derive_seed(cfg.seed, 3), n_gamma);
      },
      model.source);
  report.gamma_source = gamma_of(source_samples, cfg);

  if (data.rows() <= n_gamma) {
    report.gamma_target = gamma_of(data, cfg);
  } else {
    std::vector<std::size_t> idx(data.rows());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(cfg.seed, 4));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.index_below(i)]);
    report.gamma_target = gamma_of(data.take_rows({idx.data(), n_gamma}), cfg);
  }
  report.gamma_model =
      gamma_of(flow::flow_sample(model.stack, model.source, derive_seed(cfg.seed, 5), n_gamma), cfg);

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(report)};
}

std::string report_to_json_string(const TrainReport& report, const TrainConfig& cfg) {
  using nlohmann::json;
  auto profile = [](const tailquant::TailProfile& p) {
    json j{{"gamma", p.gamma},         {"alpha", p.alpha},
           {"u_lo", p.u_lo},           {"u_hi", p.u_hi},
           {"r_squared", p.r_squared}, {"n_points", p.n_points},
           {"shifted_fit", p.shifted_fit}};
    j["beta"] = p.beta ? json(*p.beta) : json(nullptr);
    return j;
  };
  json doc;
  doc["config"] = {
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"learning_rate", cfg.learning_rate},
      {"blocks", cfg.blocks},
      {"seed", cfg.seed},
      {"source_mode", cfg.source_mode == SourceMode::taf ? "taf" : "gaussian"},
      {"split_ratio", {cfg.split_ratio[0], cfg.split_ratio[1], cfg.split_ratio[2]}},
      {"gamma_window", {cfg.gamma_u_lo, cfg.gamma_u_hi}},
  };
  doc["train_nll"] = report.train_nll;
  doc["val_nll"] = report.val_nll;
  doc["test_nll"] = report.test_nll;
  doc["learned_nu"] = report.learned_nu ? json(*report.learned_nu) : json(nullptr);
  doc["gamma"] = {{"source", profile(report.gamma_source)},
                  {"target", profile(report.gamma_target)},
                  {"model", profile(report.gamma_model)}};
  doc["wall_seconds"] = report.wall_seconds;
  doc["epochs_completed"] = report.epochs_completed;
  doc["diverged"] = report.diverged;
  doc["diagnostic"] = report.diagnostic;
  return doc.dump(2);
}

}  // namespace tailflow::trainer
