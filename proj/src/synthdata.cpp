#include "tailflow/synthdata.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tailflow/dists.hpp"
#include "tailflow/rng.hpp"

namespace tailflow::synthdata {

namespace {

double standard_normal(Rng& rng) {
  return dists::detail::gaussian_quantile_std(rng.uniform01());
}

// Marsaglia-Tsang gamma(shape, 1) sampler.
double gamma_sample(Rng& rng, double shape) {
  if (shape < 1.0) {
    const double u = rng.uniform01();
    return gamma_sample(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / (3.0 * std::sqrt(d));
  for (;;) {
    double x, v;
    do {
      x = standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform01();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

double chi_squared(Rng& rng, double nu) {
  const double k = std::round(nu);
  if (std::fabs(nu - k) < 1e-12 && k >= 1.0 && k <= 64.0) {
    double acc = 0.0;
    for (int i = 0; i < static_cast<int>(k); ++i) {
      const double g = standard_normal(rng);
      acc += g * g;
    }
    return acc;
  }
  return 2.0 * gamma_sample(rng, 0.5 * nu);
}

double student_t_draw(Rng& rng, double nu) {
  const double z = standard_normal(rng);
  const double v = chi_squared(rng, nu);
  return z / std::sqrt(v / nu);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

Dataset gen_bivariate_iid_t(double nu, std::size_t n, std::uint64_t seed) {
  if (nu <= 0.0) throw std::invalid_argument("gen_bivariate_iid_t: nu must be > 0");
  if (n < 1) throw std::invalid_argument("gen_bivariate_iid_t: n must be >= 1");
  Rng rng(seed);
  Dataset ds;
  ds.values = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < 2; ++j) ds.values(i, j) = student_t_draw(rng, nu);
  ds.column_names = {"x1", "x2"};
  ds.provenance = {Provenance::Kind::synthetic, "bivariate_iid_t(nu=" + std::to_string(nu) + ")",
                   seed, ""};
  return ds;
}

Dataset gen_neals_funnel(std::size_t n, std::uint64_t seed, bool std_reading) {
  if (n < 1) throw std::invalid_argument("gen_neals_funnel: n must be >= 1");
  Rng rng(seed);
  Dataset ds;
  ds.values = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = standard_normal(rng);
    const double sd = std_reading ? std::exp(0.5 * x1) : std::exp(0.25 * x1);
    ds.values(i, 0) = x1;
    ds.values(i, 1) = sd * standard_normal(rng);
  }
  ds.column_names = {"x1", "x2"};
  ds.provenance = {Provenance::Kind::synthetic,
                   std_reading ? "neals_funnel(std)" : "neals_funnel(variance)", seed, ""};
  return ds;
}

Dataset gen_iid_gaussian(std::size_t n, int dim, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_iid_gaussian: n must be >= 1");
  if (dim < 1) throw std::invalid_argument("gen_iid_gaussian: dim must be >= 1");
  Rng rng(seed);
  Dataset ds;
  ds.values = Matrix(n, static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < static_cast<std::size_t>(dim); ++j)
      ds.values(i, j) = standard_normal(rng);
  for (int j = 0; j < dim; ++j) ds.column_names.push_back("x" + std::to_string(j + 1));
  ds.provenance = {Provenance::Kind::synthetic, "iid_gaussian", seed, ""};
  return ds;
}

Dataset load_csv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::stringstream whole;
  whole << in.rdbuf();
  const std::string text = whole.str();

  Dataset ds;
  ds.provenance.kind = Provenance::Kind::file;
  ds.provenance.detail = path;
  {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(text)));
    ds.provenance.file_hash = buf;
  }

  std::vector<std::vector<double>> rows;
  std::size_t cols = 0;
  std::size_t line_no = 0;
  std::istringstream lines(text);
  std::string line;
  bool header_pending = has_header;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header_pending) {
      header_pending = false;
      std::istringstream hs(line);
      std::string name;
      while (std::getline(hs, name, ',')) ds.column_names.push_back(name);
      continue;
    }
    std::vector<double> row;
    std::istringstream fs(line);
    std::string field;
    while (std::getline(fs, field, ',')) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv: malformed value at line " + std::to_string(line_no));
      }
      while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used]))) ++used;
      if (used != field.size())
        throw std::runtime_error("load_csv: malformed value at line " + std::to_string(line_no));
      row.push_back(v);
    }
    if (row.empty()) throw std::runtime_error("load_csv: empty row at line " + std::to_string(line_no));
    if (cols == 0) cols = row.size();
    if (row.size() != cols)
      throw std::runtime_error("load_csv: ragged row at line " + std::to_string(line_no));
    bool finite = true;
    for (double v : row) finite = finite && std::isfinite(v);
    if (!finite) {
      ++ds.rejected_rows;
      continue;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

  ds.values = Matrix(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) ds.values(i, j) = rows[i][j];
  return ds;
}

void write_csv(const std::string& path, const Matrix& values,
               const std::vector<std::string>& column_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  if (!column_names.empty()) {
    for (std::size_t j = 0; j < column_names.size(); ++j)
      out << (j ? "," : "") << column_names[j];
    out << "\n";
  }
  char buf[40];
  for (std::size_t i = 0; i < values.rows(); ++i) {
    for (std::size_t j = 0; j < values.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", values(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
}

ColumnStats column_stats(const Matrix& train) {
  if (train.rows() == 0) throw std::invalid_argument("column_stats: empty split");
  ColumnStats st;
  st.mean.assign(train.cols(), 0.0);
  st.stddev.assign(train.cols(), 0.0);
  for (std::size_t i = 0; i < train.rows(); ++i)
    for (std::size_t j = 0; j < train.cols(); ++j) st.mean[j] += train(i, j);
  for (double& m : st.mean) m /= static_cast<double>(train.rows());
  for (std::size_t i = 0; i < train.rows(); ++i)
    for (std::size_t j = 0; j < train.cols(); ++j) {
      const double dvi = train(i, j) - st.mean[j];
      st.stddev[j] += dvi * dvi;
    }
  for (double& s : st.stddev) {
    s = std::sqrt(s / static_cast<double>(train.rows()));
    if (s < 1e-8) {
      s = 1e-8;
      st.floored = true;
    }
  }
  return st;
}

Dataset standardize(const ColumnStats& stats, const Dataset& data) {
  if (stats.mean.size() != data.values.cols())
    throw std::invalid_argument("standardize: column mismatch");
  Dataset out = data;
  for (std::size_t i = 0; i < out.values.rows(); ++i)
    for (std::size_t j = 0; j < out.values.cols(); ++j)
      out.values(i, j) = (data.values(i, j) - stats.mean[j]) / stats.stddev[j];
  return out;
}

}  // namespace tailflow::synthdata
