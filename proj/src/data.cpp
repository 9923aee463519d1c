#include "basiscluster/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "basiscluster/errors.hpp"
#include "basiscluster/rng.hpp"
#include "basiscluster/specialfn.hpp"

namespace basiscluster {

void DataMatrix::validate() const {
  if (values.ndim() != 2) throw ShapeError("DataMatrix: values must be N x P");
  const std::size_t pp = p();
  if (feature_names.size() != pp) throw ShapeError("DataMatrix: feature name count mismatch");
  if (!true_labels.empty() && true_labels.size() != pp)
    throw ShapeError("DataMatrix: true_labels length mismatch");
  if (!true_z.empty() && true_z.size() != n())
    throw ShapeError("DataMatrix: true_z length mismatch");
  if (!true_delta.empty() && true_delta.size() != pp)
    throw ShapeError("DataMatrix: true_delta length mismatch");
  if (hint == LikelihoodHint::counts)
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] < 0.0 || std::abs(values[i] - std::nearbyint(values[i])) > 1e-9)
        throw ShapeError("DataMatrix: counts hint but non-integer values");
}

namespace {

std::vector<std::string> default_names(std::size_t p) {
  std::vector<std::string> names(p);
  for (std::size_t j = 0; j < p; ++j) names[j] = "f" + std::to_string(j);
  return names;
}

double bump(double t, double width) { return std::exp(-t * t / (2.0 * width * width)); }

}  // namespace

DataMatrix generate_five_cluster_toy(std::size_t n, std::size_t per_group, double noise_sd,
                                     std::uint64_t seed) {
  if (n < 1 || per_group < 1)
    throw ShapeError("generate_five_cluster_toy: n and per_group must be >= 1");
  const std::size_t p = 5 * per_group;
  SeededRng rng(seed);

  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();
  std::vector<double> scale(p);
  for (std::size_t j = 0; j < p; ++j) scale[j] = rng.uniform(0.5, 2.0);

  DataMatrix out;
  out.values = NdArray({n, p});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t g = j / per_group;
      double curve = 0.0;
      switch (g) {
        case 0: curve = bump(z[i] + 1.0, 0.35); break;
        case 1: curve = bump(z[i], 0.35); break;
        case 2: curve = bump(z[i] - 1.0, 0.35); break;
        case 3: curve = sigmoid(3.0 * z[i]); break;
        case 4: curve = sigmoid(-3.0 * z[i]); break;
      }
      out.values.at2(i, j) = scale[j] * curve + noise_sd * rng.normal();
    }
  }
  out.feature_names = default_names(p);
  out.true_labels.resize(p);
  for (std::size_t j = 0; j < p; ++j) out.true_labels[j] = static_cast<int>(j / per_group);
  out.true_z = std::move(z);
  return out;
}

DataMatrix generate_shifted_basis_toy(std::size_t n, std::size_t p, double shift_min,
                                      double shift_max, double noise_sd, std::uint64_t seed) {
  if (n < 1 || p < 2) throw ShapeError("generate_shifted_basis_toy: need n >= 1, p >= 2");
  SeededRng rng(seed);

  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();
  std::vector<double> shifts(p);
  for (std::size_t j = 0; j < p; ++j)
    shifts[j] = shift_min + (shift_max - shift_min) * static_cast<double>(j) /
                                static_cast<double>(p - 1);

  DataMatrix out;
  out.values = NdArray({n, p});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      out.values.at2(i, j) = bump(z[i] + shifts[j], 0.7) + noise_sd * rng.normal();
  out.feature_names = default_names(p);
  out.true_labels.assign(p, 0);
  out.true_z = std::move(z);
  out.true_delta = std::move(shifts);
  return out;
}

DataMatrix simulate_zinb_counts(const NdArray& mean_matrix,
                                const std::vector<double>& inv_dispersion, double dropout,
                                std::uint64_t seed) {
  if (mean_matrix.ndim() != 2) throw ShapeError("simulate_zinb_counts: mean matrix must be N x P");
  const std::size_t n = mean_matrix.dim(0), p = mean_matrix.dim(1);
  if (inv_dispersion.size() != p)
    throw ShapeError("simulate_zinb_counts: inv_dispersion length mismatch");
  for (double d : inv_dispersion)
    if (!(d > 0.0)) throw std::domain_error("simulate_zinb_counts: inv_dispersion must be > 0");
  if (!(dropout >= 0.0 && dropout <= 1.0))
    throw std::domain_error("simulate_zinb_counts: dropout must be in [0, 1]");

  SeededRng rng(seed);
  DataMatrix out;
  out.values = NdArray({n, p});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double mu = mean_matrix.at2(i, j);
      if (!(mu > 0.0)) throw std::domain_error("simulate_zinb_counts: means must be > 0");
      const double phi = inv_dispersion[j];
      const double rate = rng.gamma(phi, mu / phi);
      double count = static_cast<double>(rng.poisson(rate));
      if (dropout > 0.0 && rng.uniform01() < dropout) count = 0.0;
      out.values.at2(i, j) = count;
    }
  }
  out.feature_names = default_names(p);
  out.hint = LikelihoodHint::counts;
  return out;
}

DataMatrix simulate_zinb_counts(const NdArray& mean_matrix, double inv_dispersion, double dropout,
                                std::uint64_t seed) {
  if (mean_matrix.ndim() != 2) throw ShapeError("simulate_zinb_counts: mean matrix must be N x P");
  return simulate_zinb_counts(mean_matrix,
                              std::vector<double>(mean_matrix.dim(1), inv_dispersion), dropout,
                              seed);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string tok = line.substr(start, comma == std::string::npos ? std::string::npos
                                                                    : comma - start);
    // trim surrounding spaces and a trailing CR
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r'))
      tok.pop_back();
    std::size_t lead = 0;
    while (lead < tok.size() && (tok[lead] == ' ' || tok[lead] == '\t')) ++lead;
    out.push_back(tok.substr(lead));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_cell(const std::string& tok, std::size_t row, std::size_t col) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw DataError("CSV parse error at row " + std::to_string(row) + ", column " +
                    std::to_string(col) + ": '" + tok + "' is not a number");
  return v;
}

}  // namespace

DataMatrix load_csv(const std::string& path, bool has_header,
                    const std::optional<std::string>& label_column) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open CSV file: " + path);

  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::size_t drop_col = static_cast<std::size_t>(-1);

  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto toks = split_csv_line(line);
    if (names.empty() && rows.empty()) {
      width = toks.size();
      if (has_header) {
        names = toks;
        if (label_column) {
          for (std::size_t c = 0; c < names.size(); ++c)
            if (names[c] == *label_column) drop_col = c;
          if (drop_col == static_cast<std::size_t>(-1))
            throw DataError("label column '" + *label_column + "' not found in header");
        }
        continue;
      }
      if (label_column) {
        try {
          drop_col = static_cast<std::size_t>(std::stoul(*label_column));
        } catch (...) {
          throw DataError("label column must be an index when the file has no header");
        }
        if (drop_col >= width) throw DataError("label column index out of range");
      }
    }
    if (toks.size() != width)
      throw DataError("ragged CSV row at line " + std::to_string(line_no) + ": expected " +
                      std::to_string(width) + " fields, found " + std::to_string(toks.size()));
    std::vector<double> row;
    row.reserve(width);
    for (std::size_t c = 0; c < toks.size(); ++c) {
      if (c == drop_col) continue;
      row.push_back(parse_cell(toks[c], line_no, c + 1));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("CSV file has no data rows: " + path);

  const std::size_t n = rows.size();
  const std::size_t p = rows[0].size();
  DataMatrix out;
  out.values = NdArray({n, p});
  bool counts = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      const double v = rows[i][j];
      out.values.at2(i, j) = v;
      if (v < 0.0 || std::abs(v - std::nearbyint(v)) > 1e-9) counts = false;
    }
  if (has_header) {
    for (std::size_t c = 0; c < names.size(); ++c)
      if (c != drop_col) out.feature_names.push_back(names[c]);
  } else {
    out.feature_names = default_names(p);
  }
  out.hint = counts ? LikelihoodHint::counts : LikelihoodHint::continuous;
  return out;
}

std::pair<DataMatrix, Standardization> standardize(const DataMatrix& data) {
  if (data.hint != LikelihoodHint::continuous)
    throw DataError("standardize: only continuous data can be standardized");
  const std::size_t n = data.n(), p = data.p();
  if (n == 0) throw ShapeError("standardize: empty data");

  Standardization st;
  st.mean.resize(p);
  st.sd.resize(p);
  DataMatrix out = data;
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += data.values.at2(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = data.values.at2(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    st.mean[j] = mean;
    st.sd[j] = sd;
    for (std::size_t i = 0; i < n; ++i) {
      const double centered = data.values.at2(i, j) - mean;
      out.values.at2(i, j) = sd > 0.0 ? centered / sd : centered;
    }
  }
  return {std::move(out), std::move(st)};
}

void write_csv(const std::string& path, const DataMatrix& data) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open file for writing: " + path);
  for (std::size_t j = 0; j < data.p(); ++j) {
    if (j) os << ',';
    os << data.feature_names[j];
  }
  os << '\n';
  char buf[40];
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.p(); ++j) {
      if (j) os << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", data.values.at2(i, j));
      os << buf;
    }
    os << '\n';
  }
  if (!os) throw DataError("failed writing CSV: " + path);
}

void write_truth_sidecar(const std::string& path, const DataMatrix& data) {
  nlohmann::json j;
  if (!data.true_labels.empty()) j["true_labels"] = data.true_labels;
  if (!data.true_z.empty()) j["true_z"] = data.true_z;
  if (!data.true_delta.empty()) j["true_delta"] = data.true_delta;
  std::ofstream os(path);
  if (!os) throw DataError("cannot open file for writing: " + path);
  os << j.dump(2) << '\n';
  if (!os) throw DataError("failed writing sidecar: " + path);
}

void read_truth_sidecar(const std::string& path, DataMatrix& data) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open sidecar: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid sidecar JSON: ") + e.what());
  }
  if (j.contains("true_labels")) data.true_labels = j["true_labels"].get<std::vector<int>>();
  if (j.contains("true_z")) data.true_z = j["true_z"].get<std::vector<double>>();
  if (j.contains("true_delta")) data.true_delta = j["true_delta"].get<std::vector<double>>();
  data.validate();
}

}  // namespace basiscluster
