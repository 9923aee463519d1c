#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "basiscluster/data.hpp"
#include "basiscluster/ndarray.hpp"

namespace basiscluster {

enum class AssignmentSource { argmax_phi, kmeans, ground_truth };

struct ClusterAssignment {
  std::vector<int> labels;
  AssignmentSource source = AssignmentSource::argmax_phi;
};

// label_j = argmax_k phi_jk, ties broken by the lowest index.
ClusterAssignment extract_clusters(const NdArray& phi);

// Number of components whose total responsibility mass exceeds the threshold.
std::size_t count_nonempty(const NdArray& phi, double threshold = 0.5);

// V = 2hc/(h+c) with h = 1 - H(C|K)/H(C), c = 1 - H(K|C)/H(K) (natural logs).
// Conventions: H(C)=0 -> h := 1; H(K)=0 -> c := 1; h=c=0 -> V := 0.
double v_measure(const ClusterAssignment& pred, const ClusterAssignment& truth);
double v_measure(const std::vector<int>& pred, const std::vector<int>& truth);

// S_jj' = sum_k phi_jk phi_j'k: mean-field probability that features j and j'
// share a component.
NdArray cooccurrence_matrix(const NdArray& phi);

struct SimilarityMatrices {
  NdArray euclidean;  // P x P pairwise feature-column distances
  NdArray pearson;    // P x P correlations; pairs touching a zero-variance feature are 0
  std::vector<std::string> warnings;
};

SimilarityMatrices similarity_matrices(const DataMatrix& data);

struct KmeansResult {
  ClusterAssignment assignment;
  double wcss = 0.0;
  std::vector<double> wcss_trace;  // per Lloyd iteration, best restart
  std::size_t iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding, best of `restarts` by WCSS.
// points is P x D (rows are the items to cluster). Empty clusters are
// re-seeded from the point farthest from its assigned centroid.
KmeansResult kmeans(const NdArray& points, std::size_t k, std::size_t restarts,
                    std::uint64_t seed);

}  // namespace basiscluster
