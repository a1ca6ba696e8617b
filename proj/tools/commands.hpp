#pragma once

#include <cstdint>
#include <string>

#include "tailflow/trainer.hpp"

namespace tailflow::cli {

// Exit codes: 0 ok, 2 numeric failure, 64 usage, 65 data error.
constexpr int kExitOk = 0;
constexpr int kExitNumeric = 2;
constexpr int kExitUsage = 64;
constexpr int kExitData = 65;

struct FitSpec {
  std::string target = "t2";  // t2 | funnel | csv:<path>
  trainer::TrainConfig config;
  bool funnel_std_reading = false;
  std::size_t n_samples = 10000;  // synthetic target size
  std::string out_dir = ".";
};

struct GammaSpec {
  std::string input_csv;
  bool has_header = false;
  double u_lo = 0.95;
  double u_hi = 0.999;
  std::string method = "quantile-regression";  // or "hill"
};

struct RearrangeSpec {
  std::string source = "gaussian";  // gaussian|cauchy|uniform|exponential|t:<nu>
  std::string target = "cauchy";
  double z_lo = -3.0;
  double z_hi = 3.0;
  int points = 121;
  std::string out_csv = "rearrangement.csv";
};

struct SynthSpec {
  std::string kind;  // t2 | t | funnel | gaussian
  long long n = 0;
  double nu = 2.0;
  int dim = 2;
  std::uint64_t seed = 0;
  bool funnel_std_reading = false;
  std::string out_csv = "synth.csv";
};

// Honors TAILFLOW_OUT over the spec's output directory. Writes report.json,
// model.json and quantiles.csv.
int cmd_fit(const FitSpec& spec);
int cmd_gamma(const GammaSpec& spec);
int cmd_rearrange(const RearrangeSpec& spec);
int cmd_synth(const SynthSpec& spec);

}  // namespace tailflow::cli
