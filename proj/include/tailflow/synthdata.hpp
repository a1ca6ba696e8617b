#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tailflow/matrix.hpp"

namespace tailflow::synthdata {

struct Provenance {
  enum class Kind { synthetic, file } kind = Kind::synthetic;
  std::string detail;  // generator name or file path
  std::uint64_t seed = 0;
  std::string file_hash;  // FNV-1a of the bytes for file provenance
};

struct Dataset {
  Matrix values;
  std::vector<std::string> column_names;
  Provenance provenance;
  std::size_t rejected_rows = 0;  // non-finite rows dropped during ingestion
};

// Bivariate target with iid student-t coordinates. Student-t draws come from
// a Gaussian over a scaled chi: chi^2 is a sum of squared Gaussians for
// integer nu and a Marsaglia-Tsang gamma draw otherwise.
Dataset gen_bivariate_iid_t(double nu, std::size_t n, std::uint64_t seed);

// Neal's funnel: x1 ~ N(0,1), x2 ~ N(0, exp(0.5*x1)) with the second
// parameter read as the variance; std_reading switches to the
// std = exp(0.5*x1) interpretation.
Dataset gen_neals_funnel(std::size_t n, std::uint64_t seed, bool std_reading = false);

Dataset gen_iid_gaussian(std::size_t n, int dim, std::uint64_t seed);

// Comma-separated numerics, optional single header line, LF newlines.
// Malformed rows raise with their line number; rows containing NaN/Inf are
// dropped and counted in rejected_rows.
Dataset load_csv(const std::string& path, bool has_header);
void write_csv(const std::string& path, const Matrix& values,
               const std::vector<std::string>& column_names = {});

struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-8
  bool floored = false;
};

// Per-column mean and std of a training split.
ColumnStats column_stats(const Matrix& train);
// (x - mean) / std columnwise, using train-split statistics only.
Dataset standardize(const ColumnStats& stats, const Dataset& data);

}  // namespace tailflow::synthdata
