#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace tailflow;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Flat `key = value` lines with '#' comments. Keys are the long flag names
// without the leading dashes; explicitly passed flags win over the file.
bool apply_config_file(const std::string& path, CLI::App* cmd,
                       const std::map<std::string, std::function<bool(const std::string&)>>& keys) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "config: cannot open " << path << "\n";
    return false;
  }
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::cerr << "config: expected key = value at line " << line_no << "\n";
      return false;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) {
      std::cerr << "config: unknown key '" << key << "' at line " << line_no << "\n";
      return false;
    }
    if (cmd->count("--" + key) > 0) continue;  // explicit flag wins
    if (!it->second(value)) {
      std::cerr << "config: bad value for '" << key << "' at line " << line_no << "\n";
      return false;
    }
  }
  return true;
}

template <class T>
std::function<bool(const std::string&)> parse_into(T& out) {
  return [&out](const std::string& v) {
    std::istringstream ss(v);
    ss >> out;
    return !ss.fail() && ss.eof();
  };
}

std::function<bool(const std::string&)> parse_flag(bool& out) {
  return [&out](const std::string& v) {
    if (v == "true" || v == "1") {
      out = true;
      return true;
    }
    if (v == "false" || v == "0") {
      out = false;
      return true;
    }
    return false;
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tailflow: tail-aware normalizing-flow density estimation"};
  app.require_subcommand(1);

  cli::FitSpec fit;
  std::string source_mode = "gaussian";
  std::string scale_head = "tanh_exp";
  std::string shift_head = "linear";
  std::string layer_kind = "affine_coupling";
  auto* cfit = app.add_subcommand("fit", "train a flow on a target and emit reports");
  std::string fit_config;
  cfit->add_option("--config", fit_config, "flat key = value config file; flags override it");
  cfit->add_option("--target", fit.target, "t2 | funnel | csv:<path>");
  cfit->add_option("--source", source_mode, "gaussian | taf");
  cfit->add_option("--blocks", fit.config.blocks, "number of flow blocks");
  cfit->add_option("--epochs", fit.config.epochs, "training epochs");
  cfit->add_option("--batch-size", fit.config.batch_size, "minibatch size");
  cfit->add_option("--lr", fit.config.learning_rate, "Adam learning rate");
  cfit->add_option("--seed", fit.config.seed, "experiment seed");
  cfit->add_option("--scale-head", scale_head, "tanh_exp | sigmoid | exp");
  cfit->add_option("--shift-head", shift_head, "linear | relu");
  cfit->add_option("--layers", layer_kind, "affine_coupling | additive_coupling | masked_autoregressive");
  cfit->add_option("--n-samples", fit.n_samples, "synthetic target sample count");
  cfit->add_option("--nu-init", fit.config.taf_nu_init, "initial nu for the taf source");
  cfit->add_option("--gamma-lo", fit.config.gamma_u_lo, "gamma fit window lower u");
  cfit->add_option("--gamma-hi", fit.config.gamma_u_hi, "gamma fit window upper u");
  cfit->add_flag("--funnel-std", fit.funnel_std_reading,
                 "read the funnel's exp(0.5 x1) as a standard deviation");
  cfit->add_option("--out", fit.out_dir, "output directory (TAILFLOW_OUT overrides)");

  cli::GammaSpec gamma;
  auto* cgamma = app.add_subcommand("gamma", "tail-coefficient profile of a CSV column set");
  cgamma->add_option("input", gamma.input_csv, "input CSV")->required();
  cgamma->add_flag("--header", gamma.has_header, "skip a header line");
  cgamma->add_option("--lo", gamma.u_lo, "fit window lower u");
  cgamma->add_option("--hi", gamma.u_hi, "fit window upper u");
  cgamma->add_option("--method", gamma.method, "quantile-regression | hill");

  cli::RearrangeSpec rearr;
  auto* crearr = app.add_subcommand("rearrange", "tabulate the increasing rearrangement T, T'");
  crearr->add_option("source", rearr.source, "source law")->required();
  crearr->add_option("target", rearr.target, "target law")->required();
  crearr->add_option("--z-lo", rearr.z_lo, "grid start");
  crearr->add_option("--z-hi", rearr.z_hi, "grid end");
  crearr->add_option("--points", rearr.points, "grid size");
  crearr->add_option("--out", rearr.out_csv, "output CSV path");

  cli::SynthSpec synth;
  auto* csynth = app.add_subcommand("synth", "generate a synthetic dataset CSV");
  csynth->add_option("kind", synth.kind, "t2 | t | funnel | gaussian")->required();
  csynth->add_option("n", synth.n, "sample count")->required();
  csynth->add_option("--nu", synth.nu, "degrees of freedom for kind t");
  csynth->add_option("--dim", synth.dim, "dimension for kind gaussian");
  csynth->add_option("--seed", synth.seed, "generator seed");
  csynth->add_flag("--funnel-std", synth.funnel_std_reading,
                   "read the funnel's exp(0.5 x1) as a standard deviation");
  csynth->add_option("--out", synth.out_csv, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kExitUsage;
  }

  if (cfit->parsed()) {
    if (!fit_config.empty()) {
      const std::map<std::string, std::function<bool(const std::string&)>> keys{
          {"target", parse_into(fit.target)},
          {"source", parse_into(source_mode)},
          {"blocks", parse_into(fit.config.blocks)},
          {"epochs", parse_into(fit.config.epochs)},
          {"batch-size", parse_into(fit.config.batch_size)},
          {"lr", parse_into(fit.config.learning_rate)},
          {"seed", parse_into(fit.config.seed)},
          {"scale-head", parse_into(scale_head)},
          {"shift-head", parse_into(shift_head)},
          {"layers", parse_into(layer_kind)},
          {"n-samples", parse_into(fit.n_samples)},
          {"nu-init", parse_into(fit.config.taf_nu_init)},
          {"gamma-lo", parse_into(fit.config.gamma_u_lo)},
          {"gamma-hi", parse_into(fit.config.gamma_u_hi)},
          {"funnel-std", parse_flag(fit.funnel_std_reading)},
          {"out", parse_into(fit.out_dir)},
      };
      if (!apply_config_file(fit_config, cfit, keys)) return cli::kExitUsage;
    }
    fit.config.source_mode =
        source_mode == "taf" ? trainer::SourceMode::taf : trainer::SourceMode::gaussian;
    if (source_mode != "taf" && source_mode != "gaussian") {
      std::cerr << "fit: unknown source mode '" << source_mode << "'\n";
      return cli::kExitUsage;
    }
    if (scale_head == "tanh_exp") fit.config.scale_head = flow::ScaleHead::tanh_exp;
    else if (scale_head == "sigmoid") fit.config.scale_head = flow::ScaleHead::sigmoid;
    else if (scale_head == "exp") fit.config.scale_head = flow::ScaleHead::exp;
    else { std::cerr << "fit: unknown scale head\n"; return cli::kExitUsage; }
    if (shift_head == "linear") fit.config.shift_head = flow::ShiftHead::linear;
    else if (shift_head == "relu") fit.config.shift_head = flow::ShiftHead::relu;
    else { std::cerr << "fit: unknown shift head\n"; return cli::kExitUsage; }
    if (layer_kind == "affine_coupling") fit.config.layer_kind = flow::LayerKind::affine_coupling;
    else if (layer_kind == "additive_coupling") fit.config.layer_kind = flow::LayerKind::additive_coupling;
    else if (layer_kind == "masked_autoregressive") fit.config.layer_kind = flow::LayerKind::masked_autoregressive;
    else { std::cerr << "fit: unknown layer kind\n"; return cli::kExitUsage; }
    return cli::cmd_fit(fit);
  }
  if (cgamma->parsed()) return cli::cmd_gamma(gamma);
  if (crearr->parsed()) return cli::cmd_rearrange(rearr);
  if (csynth->parsed()) return cli::cmd_synth(synth);
  return cli::kExitUsage;
}
