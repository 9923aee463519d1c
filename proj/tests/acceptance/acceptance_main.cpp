// Acceptance suite. Each criterion prints one pass/fail line; the process
// exits nonzero if any requested criterion fails. Run a single criterion with
// `acceptance <n>` or everything with `acceptance all`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "basiscluster/data.hpp"
#include "basiscluster/elbo.hpp"
#include "basiscluster/metrics.hpp"
#include "basiscluster/model.hpp"
#include "basiscluster/specialfn.hpp"
#include "basiscluster/trainer.hpp"
#include "quadrature.hpp"

using namespace basiscluster;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double elapsed_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Shared toy data for criteria 3-5 (the Fig. 1 configuration).
DataMatrix fig1_data() { return generate_five_cluster_toy(500, 10, 0.05, 20240101); }

TrainConfig toy_fit_config(InferenceScheme scheme, bool translation_invariant) {
  TrainConfig cfg;
  cfg.scheme = scheme;
  cfg.epochs = 1600;
  cfg.batch_size = translation_invariant ? 128 : 64;
  cfg.learning_rate = 1e-2;
  cfg.seed = 11;
  cfg.restarts = 10;
  cfg.model.q = 1;
  cfg.model.k = 20;
  cfg.model.translation_invariant = translation_invariant;
  cfg.model.scale_invariant = true;
  cfg.model.encoder_hidden = {64};
  cfg.model.decoder_hidden = translation_invariant ? std::vector<std::size_t>{16}
                                                   : std::vector<std::size_t>{32};
  if (translation_invariant) cfg.model.phi_threshold = 1e-4;
  cfg.prior = PriorConfig::symmetric(0.1, 20, 1.0);
  return cfg;
}

// ---- criterion 1: gradients of the full collapsed objective ----

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream detail;
  bool pass = true;
  for (Likelihood lik : {Likelihood::gaussian, Likelihood::zinb}) {
    for (bool ti : {false, true}) {
      ModelConfig mc;
      mc.p = 5;
      mc.q = 1;
      mc.k = 3;
      mc.likelihood = lik;
      mc.translation_invariant = ti;
      mc.encoder_hidden = {6};
      mc.decoder_hidden = {5};
      mc.dropout_hidden = {4};
      SeededRng init(101);
      Model model(mc, init);
      SeededRng dr(102);
      NdArray& delta = model.params().value("delta");
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = 0.3 * dr.normal();

      NdArray y({6, 5});
      SeededRng yr(103);
      if (lik == Likelihood::gaussian) {
        yr.fill_normal(y);
      } else {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(yr.below(8));
      }
      PriorConfig prior = PriorConfig::symmetric(0.3, 3, 1.2);
      SeededRng noise(104);
      auto objective_fn = [&](bool with_grad) {
        SeededRng frozen = noise;
        return collapsed_objective(y, 6, model, prior, frozen, with_grad).total;
      };
      GradCheckReport rep = grad_check(objective_fn, model.params(), 1e-4);
      if (!rep.pass) pass = false;
      detail << (lik == Likelihood::gaussian ? "gauss" : "zinb") << (ti ? "+ti" : "") << " rel "
             << fmt(rep.max_rel_err, 2) << (rep.pass ? " ok; " : " FAIL; ");
    }
  }
  const double secs = elapsed_since(t0);
  if (secs >= 10.0) pass = false;
  detail << "runtime " << fmt(secs, 3) << "s (< 10s)";
  return {pass, detail.str()};
}

// ---- criterion 2: collapsed term vs adaptive quadrature, K = 2 ----

Outcome criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  SeededRng rng(202);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t p = 1 + rng.below(8);
    NdArray phi({p, 2});
    for (std::size_t j = 0; j < p; ++j) {
      const double u = 0.02 + 0.96 * rng.uniform01();
      phi.at2(j, 0) = u;
      phi.at2(j, 1) = 1.0 - u;
    }
    std::vector<double> alpha = {0.05 + 5.0 * rng.uniform01(), 0.05 + 5.0 * rng.uniform01()};
    double n0 = 0.0, n1 = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      n0 += phi.at2(j, 0);
      n1 += phi.at2(j, 1);
    }
    const double oracle = testsupport::log_beta_integral(n0 + alpha[0], n1 + alpha[1]) -
                          testsupport::log_beta_integral(alpha[0], alpha[1]);
    worst = std::max(worst, std::abs(collapsed_dirichlet_term(phi, alpha) - oracle));
  }
  const double secs = elapsed_since(t0);
  const bool pass = worst < 1e-6 && secs < 5.0;
  return {pass, "worst |err| " + fmt(worst, 3) + " (< 1e-6), runtime " + fmt(secs, 3) +
                    "s (< 5s)"};
}

// ---- criterion 3: five clusters recovered, scale-invariant fit ----

Outcome criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  DataMatrix data = fig1_data();
  TrainConfig cfg = toy_fit_config(InferenceScheme::collapsed, false);
  TrainReport best = train(data, cfg);
  Model model(best.model_config, best.params);
  const NdArray phi = model.phi();
  const std::size_t nonempty = count_nonempty(phi);
  const double v = v_measure(extract_clusters(phi),
                             ClusterAssignment{data.true_labels, AssignmentSource::ground_truth});
  const double secs = elapsed_since(t0);
  const bool pass = nonempty == 5 && v >= 0.95;
  return {pass, "nonempty " + std::to_string(nonempty) + " (= 5), V " + fmt(v) +
                    " (>= 0.95), restart " + std::to_string(best.restart_index) + ", runtime " +
                    fmt(secs, 3) + "s (target < 300s)"};
}

// ---- criterion 4: translation-invariant variant merges the transient groups ----

Outcome criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  DataMatrix data = fig1_data();
  std::vector<int> merged = data.true_labels;
  for (int& l : merged) l = l <= 2 ? 0 : l - 2;  // {0,1,2} -> 0, 3 -> 1, 4 -> 2

  TrainConfig cfg = toy_fit_config(InferenceScheme::collapsed, true);
  TrainReport best = train(data, cfg);
  Model model(best.model_config, best.params);
  const NdArray phi = model.phi();
  const std::size_t nonempty = count_nonempty(phi);
  const double v = v_measure(extract_clusters(phi),
                             ClusterAssignment{merged, AssignmentSource::ground_truth});
  const double secs = elapsed_since(t0);
  const bool pass = nonempty == 3 && v >= 0.95 && secs < 600.0;
  return {pass, "nonempty " + std::to_string(nonempty) + " (= 3), V " + fmt(v) +
                    " (>= 0.95), runtime " + fmt(secs, 3) + "s (< 600s)"};
}

// ---- criterion 5: scheme ordering by median V over 10 restarts ----

Outcome criterion5() {
  DataMatrix data = fig1_data();
  ClusterAssignment truth{data.true_labels, AssignmentSource::ground_truth};
  std::map<std::string, double> medians;
  for (InferenceScheme scheme : {InferenceScheme::collapsed, InferenceScheme::noncollapsed,
                                 InferenceScheme::fixed_pi}) {
    TrainConfig cfg = toy_fit_config(scheme, false);
    auto reports = train_all_restarts(data, cfg);
    std::vector<double> vs;
    for (const auto& rep : reports) {
      if (rep.failed) {
        vs.push_back(0.0);
        continue;
      }
      Model model(rep.model_config, rep.params);
      vs.push_back(v_measure(extract_clusters(model.phi()), truth));
    }
    medians[std::string(to_string(scheme))] = median(vs);
  }
  const double c = medians["collapsed"], nc = medians["noncollapsed"], fp = medians["fixed_pi"];
  const bool pass = c >= nc && c >= fp;
  return {pass, "median V: collapsed " + fmt(c) + " >= noncollapsed " + fmt(nc) +
                    " and >= fixed_pi " + fmt(fp)};
}

// ---- criterion 6: one basis function spans the shifted family ----

Outcome criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  DataMatrix data = generate_shifted_basis_toy(500, 30, -2.0, 2.0, 0.05, 20240406);
  TrainConfig cfg = toy_fit_config(InferenceScheme::collapsed, true);
  cfg.seed = 13;
  TrainReport best = train(data, cfg);
  Model model(best.model_config, best.params);
  const NdArray phi = model.phi();
  const std::size_t nonempty = count_nonempty(phi);

  const ClusterAssignment clusters = extract_clusters(phi);
  const NdArray& delta = model.params().value("delta");
  std::vector<double> inferred(data.p());
  for (std::size_t j = 0; j < data.p(); ++j)
    inferred[j] = delta.at3(j, clusters.labels[j], 0);
  const double corr = pearson(inferred, data.true_delta);
  const double secs = elapsed_since(t0);
  const bool pass = nonempty == 1 && std::abs(corr) >= 0.95;
  return {pass, "nonempty " + std::to_string(nonempty) + " (= 1), |corr(delta)| " +
                    fmt(std::abs(corr)) + " (>= 0.95), runtime " + fmt(secs, 3) + "s"};
}

// ---- criterion 7: desk-scale ZINB pipeline ----

Outcome criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = 500, p = 40;
  SeededRng gen(20240707);
  std::vector<double> z(n);
  for (auto& v : z) v = gen.normal();
  std::vector<double> scales(p);
  for (auto& s : scales) s = gen.uniform(0.5, 2.0);
  NdArray means({n, p});
  std::vector<int> labels(p);
  for (std::size_t j = 0; j < p; ++j) labels[j] = j < p / 2 ? 0 : 1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      const double curve = sigmoid((labels[j] == 0 ? 3.0 : -3.0) * z[i]);
      means.at2(i, j) = 15.0 * scales[j] * curve + 0.5;
    }
  DataMatrix data = simulate_zinb_counts(means, 5.0, 0.15, 424242);
  data.true_labels = labels;

  TrainConfig cfg;
  cfg.scheme = InferenceScheme::collapsed;
  cfg.epochs = 300;
  cfg.batch_size = 128;
  cfg.learning_rate = 5e-3;
  cfg.seed = 17;
  cfg.restarts = 5;
  cfg.model.q = 1;
  cfg.model.k = 10;
  cfg.model.likelihood = Likelihood::zinb;
  cfg.model.encoder_hidden = {64};
  cfg.model.decoder_hidden = {32};
  cfg.model.dropout_hidden = {16};
  cfg.prior = PriorConfig::symmetric(0.1, 10, 1.0);

  TrainReport best = train(data, cfg);
  Model model(best.model_config, best.params);
  const NdArray phi = model.phi();
  const std::size_t nonempty = count_nonempty(phi);
  const double v = v_measure(extract_clusters(phi),
                             ClusterAssignment{labels, AssignmentSource::ground_truth});
  const double secs = elapsed_since(t0);
  const bool pass = nonempty == 2 && v >= 0.9;
  return {pass, "nonempty " + std::to_string(nonempty) + " (= 2), V " + fmt(v) +
                    " (>= 0.9), runtime " + fmt(secs, 3) + "s"};
}

// ---- criterion 8: V-measure unit suite ----

Outcome criterion8() {
  bool pass = true;
  std::ostringstream detail;

  std::vector<int> truth1 = {0, 0, 1, 1, 2, 2};
  std::vector<int> relabeled = {5, 5, 9, 9, 1, 1};
  if (std::abs(v_measure(relabeled, truth1) - 1.0) > 1e-12) pass = false;

  std::vector<int> truth2 = {0, 0, 1, 1};
  std::vector<int> onecluster = {3, 3, 3, 3};
  if (std::abs(v_measure(onecluster, truth2)) > 1e-12) pass = false;

  std::vector<int> pred3 = {0, 1, 1, 1};
  {
    const double n = 4.0;
    const double h_c = -2.0 * (0.5 * std::log(0.5));
    const double h_k = -(0.25 * std::log(0.25) + 0.75 * std::log(0.75));
    const double h_c_given_k = -(1.0 / n * std::log(1.0 / 3.0) + 2.0 / n * std::log(2.0 / 3.0));
    const double h_k_given_c = -(2.0 / n * std::log(0.5));
    const double h = 1.0 - h_c_given_k / h_c;
    const double c = 1.0 - h_k_given_c / h_k;
    const double expect = 2.0 * h * c / (h + c);
    if (std::abs(v_measure(pred3, truth2) - expect) > 1e-12) pass = false;
    detail << "examples ok; ";
  }

  SeededRng rng(808);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 5 + rng.below(20);
    std::vector<int> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.below(4));
      b[i] = static_cast<int>(rng.below(3));
    }
    const double v = v_measure(a, b);
    worst = std::max(worst, std::abs(v_measure(b, a) - v));
    const int perm[4] = {2, 3, 1, 0};
    std::vector<int> ap(n);
    for (std::size_t i = 0; i < n; ++i) ap[i] = perm[a[i]];
    worst = std::max(worst, std::abs(v_measure(ap, b) - v));
  }
  if (worst > 1e-12) pass = false;
  detail << "symmetry/permutation worst dev " << fmt(worst, 2) << " (<= 1e-12)";
  return {pass, detail.str()};
}

// ---- criterion 9: bitwise determinism of checkpoints and reports ----

Outcome criterion9() {
  DataMatrix data = generate_five_cluster_toy(80, 4, 0.05, 31);
  TrainConfig cfg;
  cfg.scheme = InferenceScheme::collapsed;
  cfg.epochs = 8;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-2;
  cfg.seed = 99;
  cfg.restarts = 3;
  cfg.model.q = 1;
  cfg.model.k = 6;
  cfg.model.encoder_hidden = {16};
  cfg.model.decoder_hidden = {8};
  cfg.prior = PriorConfig::symmetric(0.1, 6, 1.0);

  const fs::path dir = fs::temp_directory_path();
  auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)),
                       std::istreambuf_iterator<char>());
  };

  std::string blobs[2], traces[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path ckpt = dir / ("bc_acc9_" + std::to_string(run) + ".bcl");
    const fs::path trace = dir / ("bc_acc9_" + std::to_string(run) + ".tsv");
    TrainConfig c = cfg;
    c.checkpoint_path = ckpt.string();
    TrainReport rep = train(data, c);
    write_trace(trace.string(), rep, 1);
    blobs[run] = slurp(ckpt);
    traces[run] = slurp(trace);
    fs::remove(ckpt);
    fs::remove(trace);
  }
  const bool pass = !blobs[0].empty() && blobs[0] == blobs[1] && traces[0] == traces[1];
  return {pass, std::string("checkpoints ") + (blobs[0] == blobs[1] ? "identical" : "DIFFER") +
                    ", traces " + (traces[0] == traces[1] ? "identical" : "DIFFER")};
}

// ---- criterion 10: beta upweighting sparsifies at inflated P ----

Outcome criterion10() {
  DataMatrix base = fig1_data();
  const std::size_t reps = 20;
  DataMatrix wide;
  wide.values = NdArray({base.n(), base.p() * reps});
  for (std::size_t i = 0; i < base.n(); ++i)
    for (std::size_t r = 0; r < reps; ++r)
      for (std::size_t j = 0; j < base.p(); ++j)
        wide.values.at2(i, r * base.p() + j) = base.values.at2(i, j);
  wide.feature_names.resize(base.p() * reps);
  for (std::size_t j = 0; j < wide.p(); ++j) wide.feature_names[j] = "f" + std::to_string(j);

  auto run_with_beta = [&](double beta) {
    TrainConfig cfg;
    cfg.scheme = InferenceScheme::collapsed;
    cfg.epochs = 60;
    cfg.batch_size = 128;
    cfg.learning_rate = 5e-3;
    cfg.seed = 7;
    cfg.restarts = 1;
    cfg.model.q = 1;
    cfg.model.k = 20;
    cfg.model.encoder_hidden = {64};
    cfg.model.decoder_hidden = {32};
    cfg.prior = PriorConfig::symmetric(0.1, 20, beta);
    TrainReport rep = train(wide, cfg);
    Model model(rep.model_config, rep.params);
    return count_nonempty(model.phi());
  };
  const std::size_t at1 = run_with_beta(1.0);
  const std::size_t at20 = run_with_beta(20.0);
  const bool pass = at1 > at20;
  return {pass, "nonempty at beta=1: " + std::to_string(at1) + " > at beta=20: " +
                    std::to_string(at20)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> fn;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "gradient suite (collapsed objective, all heads)", criterion1},
      {2, "collapsed term vs quadrature oracle", criterion2},
      {3, "five-cluster recovery, scale-invariant", criterion3},
      {4, "three-cluster recovery, translation-invariant", criterion4},
      {5, "scheme ordering by median V-measure", criterion5},
      {6, "shifted family collapses to one basis function", criterion6},
      {7, "ZINB pipeline recovers two clusters", criterion7},
      {8, "V-measure unit suite", criterion8},
      {9, "bitwise determinism", criterion9},
      {10, "beta upweighting sparsifies at inflated P", criterion10},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  if (argc <= 1 || std::string(argv[1]) == "all") {
    for (const auto& c : criteria()) wanted.push_back(c.id);
  } else {
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  }

  bool all_pass = true;
  for (int id : wanted) {
    const auto it = std::find_if(criteria().begin(), criteria().end(),
                                 [&](const Criterion& c) { return c.id == id; });
    if (it == criteria().end()) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    Outcome outcome;
    try {
      outcome = it->fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (outcome.pass ? "[PASS]" : "[FAIL]") << " criterion " << it->id << ": "
              << it->name << " — " << outcome.detail << std::endl;
    if (!outcome.pass) all_pass = false;
  }
  return all_pass ? 0 : 1;
}
