#pragma once

#include <optional>
#include <string>
#include <vector>

#include "basiscluster/ndarray.hpp"

namespace basiscluster {

enum class LikelihoodHint { continuous, counts };

// N x P observation table plus optional ground truth from the generators.
struct DataMatrix {
  NdArray values;  // N x P
  std::vector<std::string> feature_names;
  std::vector<int> true_labels;    // per feature; empty when unknown
  std::vector<double> true_z;      // per observation; empty when unknown
  std::vector<double> true_delta;  // per feature; empty when unknown
  LikelihoodHint hint = LikelihoodHint::continuous;

  std::size_t n() const { return values.ndim() == 2 ? values.dim(0) : 0; }
  std::size_t p() const { return values.ndim() == 2 ? values.dim(1) : 0; }
  void validate() const;
};

// Five feature groups over a 1-D latent: three transient bumps
// exp(-(z-c)^2 / (2 * 0.35^2)) at c in {-1, 0, 1}, an increasing and a
// decreasing sigmoid logistic(+-3z). Features get random positive scales
// uniform(0.5, 2) and iid Gaussian noise. P = 5 * per_group, group-major.
DataMatrix generate_five_cluster_toy(std::size_t n, std::size_t per_group, double noise_sd,
                                     std::uint64_t seed);

// One bump-shaped base curve exp(-t^2 / (2 * 0.7^2)) evaluated at z + delta_j
// with delta_j equally spaced over [shift_min, shift_max].
DataMatrix generate_shifted_basis_toy(std::size_t n, std::size_t p, double shift_min,
                                      double shift_max, double noise_sd, std::uint64_t seed);

// ZINB sampling via gamma-Poisson plus Bernoulli dropout. inv_dispersion is
// per feature (length P); mean_matrix entries must be positive.
DataMatrix simulate_zinb_counts(const NdArray& mean_matrix,
                                const std::vector<double>& inv_dispersion, double dropout,
                                std::uint64_t seed);
DataMatrix simulate_zinb_counts(const NdArray& mean_matrix, double inv_dispersion, double dropout,
                                std::uint64_t seed);

// Comma-delimited, '.' decimal separator, optional header row, rows are
// observations. label_column (a header name, or a 0-based index when there is
// no header) designates a non-feature annotation column to drop. Parse errors
// carry the row/column location. The hint is set to counts when every cell is
// a nonnegative integer.
DataMatrix load_csv(const std::string& path, bool has_header,
                    const std::optional<std::string>& label_column = std::nullopt);

struct Standardization {
  std::vector<double> mean;
  std::vector<double> sd;  // 0 marks a constant feature (left centered only)
};

// Per-feature zero-mean unit-sd (population sd); refuses count data.
std::pair<DataMatrix, Standardization> standardize(const DataMatrix& data);

// Writers used by the CLI: data as CSV, ground truth as a JSON sidecar.
void write_csv(const std::string& path, const DataMatrix& data);
void write_truth_sidecar(const std::string& path, const DataMatrix& data);
// Populates true_labels / true_z / true_delta from a sidecar file.
void read_truth_sidecar(const std::string& path, DataMatrix& data);

}  // namespace basiscluster
