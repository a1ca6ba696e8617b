#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "tailflow/rng.hpp"
#include "tailflow/synthdata.hpp"

namespace tailflow::cli {

namespace {

namespace fs = std::filesystem;

std::string resolved_out_dir(const std::string& from_spec) {
  const char* env = std::getenv("TAILFLOW_OUT");
  return env && *env ? std::string(env) : from_spec;
}

bool parse_law(const std::string& name, dists::Distribution1D& out) {
  if (name == "gaussian") {
    out = dists::Distribution1D::gaussian(0.0, 1.0);
  } else if (name == "cauchy") {
    out = dists::Distribution1D::cauchy(0.0, 1.0);
  } else if (name == "uniform") {
    out = dists::Distribution1D::uniform(0.0, 1.0);
  } else if (name == "exponential") {
    out = dists::Distribution1D::exponential(1.0);
  } else if (name.rfind("t:", 0) == 0) {
    const double nu = std::atof(name.c_str() + 2);
    if (!(nu > 0.0)) return false;
    out = dists::Distribution1D::student_t(nu);
  } else {
    return false;
  }
  return true;
}

// Plot-ready quantile curves of the row norms: u, the three quantile columns,
// and their logs (the data behind the quantile / log-quantile panels).
void write_quantile_curves(const std::string& path, const Matrix& source_pts,
                           const Matrix& target_pts, const Matrix& model_pts) {
  std::vector<double> qs = tailquant::norm_reduce(source_pts);
  std::vector<double> qt = tailquant::norm_reduce(target_pts);
  std::vector<double> qm = tailquant::norm_reduce(model_pts);
  std::sort(qs.begin(), qs.end());
  std::sort(qt.begin(), qt.end());
  std::sort(qm.begin(), qm.end());

  std::vector<double> grid;
  for (int i = 1; i <= 99; ++i) grid.push_back(0.01 * i);
  for (int i = 1; i <= 9; ++i) grid.push_back(0.99 + 0.001 * i);

  std::ofstream out(path);
  out << "u,q_source,q_target,q_model,log_q_source,log_q_target,log_q_model\n";
  char buf[220];
  for (double u : grid) {
    const double a = tailquant::empirical_quantile_sorted(qs, u);
    const double b = tailquant::empirical_quantile_sorted(qt, u);
    const double c = tailquant::empirical_quantile_sorted(qm, u);
    std::snprintf(buf, sizeof(buf), "%.6f,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", u, a, b, c,
                  std::log(a), std::log(b), std::log(c));
    out << buf;
  }
}

nlohmann::json profile_json(const tailquant::TailProfile& p) {
  nlohmann::json j{{"gamma", p.gamma},         {"alpha", p.alpha},
                   {"u_lo", p.u_lo},           {"u_hi", p.u_hi},
                   {"r_squared", p.r_squared}, {"n_points", p.n_points},
                   {"shifted_fit", p.shifted_fit}};
  j["beta"] = p.beta ? nlohmann::json(*p.beta) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

int cmd_fit(const FitSpec& spec) {
  Matrix data;
  trainer::TrainConfig cfg = spec.config;
  try {
    if (spec.target == "t2") {
      data = synthdata::gen_bivariate_iid_t(2.0, spec.n_samples, derive_seed(cfg.seed, 77)).values;
    } else if (spec.target == "funnel") {
      data = synthdata::gen_neals_funnel(spec.n_samples, derive_seed(cfg.seed, 78),
                                         spec.funnel_std_reading)
                 .values;
    } else if (spec.target.rfind("csv:", 0) == 0) {
      synthdata::Dataset ds = synthdata::load_csv(spec.target.substr(4), true);
      cfg.standardize = true;
      data = std::move(ds.values);
    } else {
      std::cerr << "fit: unknown target '" << spec.target << "'\n";
      return kExitUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << "fit: " << e.what() << "\n";
    return kExitData;
  }

  if (cfg.standardize) {
    // Standardize with train-split statistics only; an affine, tail-preserving map.
    trainer::SplitResult probe = trainer::split_dataset(data, cfg.split_ratio, derive_seed(cfg.seed, 2));
    synthdata::ColumnStats stats = synthdata::column_stats(probe.train);
    synthdata::Dataset tmp;
    tmp.values = std::move(data);
    data = synthdata::standardize(stats, tmp).values;
  }

  const std::string out_dir = resolved_out_dir(spec.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  trainer::TrainedModel model;
  trainer::TrainReport report;
  try {
    std::tie(model, report) = trainer::train(cfg, data);
  } catch (const std::exception& e) {
    std::cerr << "fit: " << e.what() << "\n";
    return kExitUsage;
  }

  {
    std::ofstream out(fs::path(out_dir) / "report.json");
    out << trainer::report_to_json_string(report, cfg) << "\n";
  }
  {
    std::ofstream out(fs::path(out_dir) / "model.json");
    out << flow::to_json_string(model.stack, model.source) << "\n";
  }
  {
    const std::size_t n = 10000;
    Matrix source_pts = std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, flow::TafSource>)
            return dists::sample(
                dists::IidSource{s.dim, dists::Distribution1D::student_t(s.nu())},
                derive_seed(cfg.seed, 3), n);
          else
            return dists::sample(s, derive_seed(cfg.seed, 3), n);
        },
        model.source);
    Matrix model_pts = flow::flow_sample(model.stack, model.source, derive_seed(cfg.seed, 5), n);
    write_quantile_curves((fs::path(out_dir) / "quantiles.csv").string(), source_pts, data,
                          model_pts);
  }

  if (report.diverged) {
    std::cerr << "fit: diverged: " << report.diagnostic << "\n";
    return kExitNumeric;
  }
  std::cout << "fit: test NLL " << report.test_nll << ", gamma source/target/model "
            << report.gamma_source.gamma << "/" << report.gamma_target.gamma << "/"
            << report.gamma_model.gamma;
  if (report.learned_nu) std::cout << ", nu " << *report.learned_nu;
  std::cout << "\n";
  return kExitOk;
}

int cmd_gamma(const GammaSpec& spec) {
  synthdata::Dataset ds;
  try {
    ds = synthdata::load_csv(spec.input_csv, spec.has_header);
  } catch (const std::exception& e) {
    std::cerr << "gamma: " << e.what() << "\n";
    return kExitData;
  }
  std::vector<double> values;
  if (ds.values.cols() == 1) {
    values.assign(ds.values.flat().begin(), ds.values.flat().end());
  } else {
    values = tailquant::norm_reduce(ds.values);
  }
  if (values.size() < 100) {
    std::cerr << "gamma: need at least 100 rows\n";
    return kExitData;
  }
  tailquant::TailProfile p;
  try {
    p = tailquant::estimate_gamma(values, spec.u_lo, spec.u_hi,
                                  spec.method == "hill"
                                      ? tailquant::GammaMethod::hill
                                      : tailquant::GammaMethod::quantile_regression);
  } catch (const std::exception& e) {
    std::cerr << "gamma: " << e.what() << "\n";
    return kExitUsage;
  }
  std::cout << profile_json(p).dump(2) << "\n";
  return kExitOk;
}

int cmd_rearrange(const RearrangeSpec& spec) {
  dists::Distribution1D source, target;
  if (!parse_law(spec.source, source) || !parse_law(spec.target, target)) {
    std::cerr << "rearrange: unknown law\n";
    return kExitUsage;
  }
  if (spec.points < 2 || !(spec.z_hi > spec.z_lo)) {
    std::cerr << "rearrange: bad grid\n";
    return kExitUsage;
  }
  tailquant::Rearrangement1D r{source, target};
  std::ofstream out(spec.out_csv);
  if (!out) {
    std::cerr << "rearrange: cannot open " << spec.out_csv << "\n";
    return kExitData;
  }
  out << "z,t,t_prime,u\n";
  char buf[160];
  for (int i = 0; i < spec.points; ++i) {
    const double z = spec.z_lo + (spec.z_hi - spec.z_lo) * static_cast<double>(i) /
                                     static_cast<double>(spec.points - 1);
    const double t = tailquant::rearrangement_evaluate(r, z);
    const double tp = tailquant::rearrangement_slope(r, z);
    const double u = dists::cdf(source, z);
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g\n", z, t, tp, u);
    out << buf;
  }
  return kExitOk;
}

int cmd_synth(const SynthSpec& spec) {
  if (spec.n < 1) {
    std::cerr << "synth: n must be >= 1\n";
    return kExitUsage;
  }
  const std::size_t n = static_cast<std::size_t>(spec.n);
  synthdata::Dataset ds;
  try {
    if (spec.kind == "t2") {
      ds = synthdata::gen_bivariate_iid_t(2.0, n, spec.seed);
    } else if (spec.kind == "t") {
      ds = synthdata::gen_bivariate_iid_t(spec.nu, n, spec.seed);
    } else if (spec.kind == "funnel") {
      ds = synthdata::gen_neals_funnel(n, spec.seed, spec.funnel_std_reading);
    } else if (spec.kind == "gaussian") {
      ds = synthdata::gen_iid_gaussian(n, spec.dim, spec.seed);
    } else {
      std::cerr << "synth: unknown kind '" << spec.kind << "'\n";
      return kExitUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << "synth: " << e.what() << "\n";
    return kExitUsage;
  }
  const char* env = std::getenv("TAILFLOW_OUT");
  std::string path = spec.out_csv;
  if (env && *env) path = (fs::path(env) / fs::path(spec.out_csv).filename()).string();
  try {
    synthdata::write_csv(path, ds.values, ds.column_names);
  } catch (const std::exception& e) {
    std::cerr << "synth: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace tailflow::cli
