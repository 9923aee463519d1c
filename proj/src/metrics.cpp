#include "basiscluster/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "basiscluster/errors.hpp"
#include "basiscluster/rng.hpp"

namespace basiscluster {

ClusterAssignment extract_clusters(const NdArray& phi) {
  if (phi.ndim() != 2) throw ShapeError("extract_clusters: phi must be P x K");
  const std::size_t p = phi.dim(0), k = phi.dim(1);
  ClusterAssignment out;
  out.source = AssignmentSource::argmax_phi;
  out.labels.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    const double* row = phi.data() + j * k;
    std::size_t arg = 0;
    for (std::size_t kk = 1; kk < k; ++kk)
      if (row[kk] > row[arg]) arg = kk;
    out.labels[j] = static_cast<int>(arg);
  }
  return out;
}

std::size_t count_nonempty(const NdArray& phi, double threshold) {
  if (phi.ndim() != 2) throw ShapeError("count_nonempty: phi must be P x K");
  const std::size_t p = phi.dim(0), k = phi.dim(1);
  std::size_t count = 0;
  for (std::size_t kk = 0; kk < k; ++kk) {
    double mass = 0.0;
    for (std::size_t j = 0; j < p; ++j) mass += phi.at2(j, kk);
    if (mass > threshold) ++count;
  }
  return count;
}

double v_measure(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw ShapeError("v_measure: label length mismatch");
  const std::size_t n = pred.size();
  if (n == 0) throw ShapeError("v_measure: empty labelings");

  std::map<int, std::size_t> cidx, kidx;
  for (int c : truth)
    if (!cidx.count(c)) cidx[c] = cidx.size();
  for (int k : pred)
    if (!kidx.count(k)) kidx[k] = kidx.size();
  const std::size_t nc = cidx.size(), nk = kidx.size();

  std::vector<double> table(nc * nk, 0.0), row(nc, 0.0), col(nk, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = cidx[truth[i]], k = kidx[pred[i]];
    table[c * nk + k] += 1.0;
    row[c] += 1.0;
    col[k] += 1.0;
  }
  const double nd = static_cast<double>(n);
  auto entropy_of = [&](const std::vector<double>& counts) {
    double h = 0.0;
    for (double c : counts)
      if (c > 0.0) h -= (c / nd) * std::log(c / nd);
    return h;
  };
  const double h_c = entropy_of(row);
  const double h_k = entropy_of(col);

  double h_c_given_k = 0.0, h_k_given_c = 0.0;
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t k = 0; k < nk; ++k) {
      const double nck = table[c * nk + k];
      if (nck > 0.0) {
        h_c_given_k -= (nck / nd) * std::log(nck / col[k]);
        h_k_given_c -= (nck / nd) * std::log(nck / row[c]);
      }
    }

  const double h = h_c > 0.0 ? 1.0 - h_c_given_k / h_c : 1.0;
  const double c = h_k > 0.0 ? 1.0 - h_k_given_c / h_k : 1.0;
  if (h + c == 0.0) return 0.0;
  return 2.0 * h * c / (h + c);
}

double v_measure(const ClusterAssignment& pred, const ClusterAssignment& truth) {
  return v_measure(pred.labels, truth.labels);
}

NdArray cooccurrence_matrix(const NdArray& phi) {
  if (phi.ndim() != 2) throw ShapeError("cooccurrence_matrix: phi must be P x K");
  const std::size_t p = phi.dim(0), k = phi.dim(1);
  NdArray s({p, p});
  for (std::size_t a = 0; a < p; ++a) {
    const double* ra = phi.data() + a * k;
    for (std::size_t b = a; b < p; ++b) {
      const double* rb = phi.data() + b * k;
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += ra[kk] * rb[kk];
      s.at2(a, b) = acc;
      s.at2(b, a) = acc;
    }
  }
  return s;
}

SimilarityMatrices similarity_matrices(const DataMatrix& data) {
  const std::size_t n = data.n(), p = data.p();
  if (n < 2) throw ShapeError("similarity_matrices: need at least two observations");

  SimilarityMatrices out;
  out.euclidean = NdArray({p, p});
  out.pearson = NdArray({p, p});

  std::vector<double> mean(p, 0.0), sd(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) mean[j] += data.values.at2(i, j);
    mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = data.values.at2(i, j) - mean[j];
      sd[j] += d * d;
    }
    sd[j] = std::sqrt(sd[j] / static_cast<double>(n));
    if (sd[j] == 0.0)
      out.warnings.push_back("feature " + data.feature_names[j] +
                             " has zero variance; correlations set to 0");
  }

  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) {
      double dist2 = 0.0, cov = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double va = data.values.at2(i, a), vb = data.values.at2(i, b);
        dist2 += (va - vb) * (va - vb);
        cov += (va - mean[a]) * (vb - mean[b]);
      }
      cov /= static_cast<double>(n);
      const double dist = std::sqrt(dist2);
      double corr = 0.0;
      if (sd[a] > 0.0 && sd[b] > 0.0) corr = cov / (sd[a] * sd[b]);
      out.euclidean.at2(a, b) = out.euclidean.at2(b, a) = dist;
      out.pearson.at2(a, b) = out.pearson.at2(b, a) = corr;
    }
  }
  return out;
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

struct LloydRun {
  std::vector<int> labels;
  double wcss = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  std::size_t iterations = 0;
};

LloydRun lloyd(const NdArray& points, std::size_t k, SeededRng& rng) {
  const std::size_t p = points.dim(0), d = points.dim(1);
  std::vector<double> centers(k * d);

  // k-means++ seeding
  std::vector<double> dist2(p, std::numeric_limits<double>::infinity());
  std::size_t first = rng.below(p);
  std::copy(points.data() + first * d, points.data() + (first + 1) * d, centers.begin());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      const double d2 = sq_dist(points.data() + i * d, centers.data() + (c - 1) * d, d);
      dist2[i] = std::min(dist2[i], d2);
      total += dist2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform01() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < p; ++i) {
        acc += dist2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = c % p;  // all remaining points coincide with chosen centers
    }
    std::copy(points.data() + pick * d, points.data() + (pick + 1) * d,
              centers.data() + c * d);
  }

  LloydRun run;
  run.labels.assign(p, -1);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < 200; ++iter) {
    bool changed = false;
    double wcss = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d2 = sq_dist(points.data() + i * d, centers.data() + c * d, d);
        if (d2 < best_d) {
          best_d = d2;
          best = c;
        }
      }
      wcss += best_d;
      if (run.labels[i] != static_cast<int>(best)) {
        run.labels[i] = static_cast<int>(best);
        changed = true;
      }
    }
    run.trace.push_back(wcss);
    run.wcss = wcss;
    run.iterations = iter + 1;
    if (!changed && iter > 0) break;

    std::fill(centers.begin(), centers.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < p; ++i) {
      const std::size_t c = run.labels[i];
      ++counts[c];
      for (std::size_t q = 0; q < d; ++q) centers[c * d + q] += points.at2(i, q);
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (std::size_t q = 0; q < d; ++q) centers[c * d + q] /= static_cast<double>(counts[c]);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      // re-seed an empty cluster from the point farthest from its centroid
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < p; ++i) {
        const double d2 =
            sq_dist(points.data() + i * d, centers.data() + run.labels[i] * d, d);
        if (d2 > far_d) {
          far_d = d2;
          far = i;
        }
      }
      std::copy(points.data() + far * d, points.data() + (far + 1) * d, centers.data() + c * d);
    }
  }
  return run;
}

}  // namespace

KmeansResult kmeans(const NdArray& points, std::size_t k, std::size_t restarts,
                    std::uint64_t seed) {
  if (points.ndim() != 2) throw ShapeError("kmeans: points must be P x D");
  const std::size_t p = points.dim(0);
  if (k == 0 || k > p)
    throw ShapeError("kmeans: k must be in [1, number of points], got " + std::to_string(k));
  if (restarts == 0) restarts = 1;

  LloydRun best;
  for (std::size_t r = 0; r < restarts; ++r) {
    SeededRng rng = SeededRng::stream(seed, r);
    LloydRun run = lloyd(points, k, rng);
    if (run.wcss < best.wcss) best = std::move(run);
  }

  KmeansResult out;
  out.assignment.labels = std::move(best.labels);
  out.assignment.source = AssignmentSource::kmeans;
  out.wcss = best.wcss;
  out.wcss_trace = std::move(best.trace);
  out.iterations = best.iterations;
  return out;
}

}  // namespace basiscluster
