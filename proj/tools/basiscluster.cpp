// basiscluster: generate synthetic data, fit BasisVAE-style models with any of
// the three inference schemes, export cluster/report tables, and compare
// schemes against ground truth. All outputs are plain delimited text so
// plotting stays in external tools.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "basiscluster/checkpoint.hpp"
#include "basiscluster/data.hpp"
#include "basiscluster/elbo.hpp"
#include "basiscluster/errors.hpp"
#include "basiscluster/metrics.hpp"
#include "basiscluster/model.hpp"
#include "basiscluster/trainer.hpp"
#include "basiscluster/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace basiscluster;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot hash missing file: " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (is.read(buf.data(), static_cast<std::streamsize>(buf.size())) || is.gcount() > 0)
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(is.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

void write_manifest(const std::string& path, const std::string& command, std::uint64_t seed,
                    const json& config, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "basiscluster";
  m["version"] = kVersion;
  m["command"] = command;
  m["seed"] = seed;
  m["config"] = config;
  json in = json::object();
  for (const auto& f : inputs) in[fs::path(f).filename().string()] = sha256_file(f);
  m["inputs"] = in;
  json out = json::array();
  for (const auto& f : outputs) out.push_back(fs::path(f).filename().string());
  m["outputs"] = out;
  std::ofstream os(path);
  if (!os) throw DataError("cannot write manifest: " + path);
  os << m.dump(2) << '\n';
}

void write_matrix_tsv(const std::string& path, const NdArray& m,
                      const std::vector<std::string>& row_names,
                      const std::vector<std::string>& col_names) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write file: " + path);
  const bool named_rows = !row_names.empty();
  if (!col_names.empty()) {
    if (named_rows) os << "name";
    for (std::size_t c = 0; c < col_names.size(); ++c)
      os << (c || named_rows ? "\t" : "") << col_names[c];
    os << '\n';
  }
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    if (named_rows) os << row_names[r];
    for (std::size_t c = 0; c < m.dim(1); ++c)
      os << (c || named_rows ? "\t" : "") << fmt(m.at2(r, c));
    os << '\n';
  }
}

std::vector<std::string> indexed_names(const std::string& stem, std::size_t n) {
  std::vector<std::string> names(n);
  for (std::size_t i = 0; i < n; ++i) names[i] = stem + std::to_string(i);
  return names;
}

std::string sidecar_path_for(const std::string& csv_path) {
  fs::path p(csv_path);
  if (p.extension() == ".csv") p.replace_extension();
  return p.string() + ".labels.json";
}

// Options shared by train and compare.
struct FitOptions {
  std::string scheme = "collapsed";
  std::size_t k = 20;
  double alpha = 0.1;
  double beta = 1.0;
  std::size_t latent_dim = 1;
  bool translation_invariant = false;
  bool scale_invariant = true;
  std::string likelihood = "gaussian";
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t restarts = 1;
  std::vector<std::size_t> encoder_hidden{64};
  std::vector<std::size_t> decoder_hidden{32};
  std::vector<std::size_t> dropout_hidden{16};
  double phi_threshold = 0.0;
  std::size_t log_every = 10;
  bool standardize_data = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--scheme", scheme, "Inference scheme")
        ->check(CLI::IsMember({"collapsed", "noncollapsed", "fixed_pi"}));
    cmd->add_option("--k", k, "Number of basis components");
    cmd->add_option("--alpha", alpha, "Symmetric Dirichlet concentration")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--beta", beta, "Objective weight on KL and clustering prior")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--latent-dim", latent_dim, "Latent dimension Q");
    cmd->add_flag("--translation-invariant", translation_invariant,
                  "Enable per-feature latent shifts (implies scale invariance)");
    cmd->add_flag("--scale-invariant,!--no-scale-invariant", scale_invariant,
                  "Per-feature positive scales (default on)");
    cmd->add_option("--likelihood", likelihood, "Observation model")
        ->check(CLI::IsMember({"gaussian", "zinb"}));
    cmd->add_option("--epochs", epochs, "Training epochs");
    cmd->add_option("--batch-size", batch_size, "Minibatch size");
    cmd->add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--restarts", restarts, "Random restarts (best kept)");
    cmd->add_option("--encoder-hidden", encoder_hidden, "Encoder hidden widths");
    cmd->add_option("--decoder-hidden", decoder_hidden, "Basis decoder hidden widths");
    cmd->add_option("--dropout-hidden", dropout_hidden, "Dropout-net hidden widths (zinb)");
    cmd->add_option("--phi-threshold", phi_threshold,
                    "Skip components below this responsibility in the likelihood");
    cmd->add_option("--log-every", log_every, "Trace thinning for the log file");
    cmd->add_flag("--standardize", standardize_data, "Standardize features before fitting");
  }

  TrainConfig to_train_config(const DataMatrix& data) const {
    TrainConfig cfg;
    cfg.scheme = scheme_from_string(scheme);
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    cfg.restarts = restarts;
    cfg.log_every = log_every;
    cfg.model.p = data.p();
    cfg.model.q = latent_dim;
    cfg.model.k = k;
    cfg.model.likelihood = likelihood_from_string(likelihood);
    cfg.model.translation_invariant = translation_invariant;
    cfg.model.scale_invariant = scale_invariant;
    cfg.model.encoder_hidden = encoder_hidden;
    cfg.model.decoder_hidden = decoder_hidden;
    cfg.model.dropout_hidden = dropout_hidden;
    cfg.model.phi_threshold = phi_threshold;
    cfg.prior = PriorConfig::symmetric(alpha, k, beta);
    return cfg;
  }

  json to_json() const {
    return json{{"scheme", scheme},
                {"k", k},
                {"alpha", alpha},
                {"beta", beta},
                {"latent_dim", latent_dim},
                {"translation_invariant", translation_invariant},
                {"scale_invariant", scale_invariant},
                {"likelihood", likelihood},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"lr", lr},
                {"seed", seed},
                {"restarts", restarts},
                {"encoder_hidden", encoder_hidden},
                {"decoder_hidden", decoder_hidden},
                {"dropout_hidden", dropout_hidden},
                {"phi_threshold", phi_threshold},
                {"standardize", standardize_data}};
  }
};

DataMatrix load_data(const std::string& path, bool no_header,
                     const std::optional<std::string>& label_column) {
  return load_csv(path, !no_header, label_column);
}

// ---- generate ----

struct GenerateOptions {
  std::string kind;
  std::string out;
  std::size_t n = 500;
  std::size_t per_group = 10;
  std::size_t p = 30;
  double noise_sd = 0.05;
  double shift_min = -2.0;
  double shift_max = 2.0;
  double dropout = 0.15;
  double dispersion = 5.0;
  double mean_scale = 15.0;
  std::uint64_t seed = 0;
};

// ZINB toy: two sigmoid groups over a 1-D latent, random positive feature
// scales, plus a small floor so means stay positive.
DataMatrix generate_zinb_toy(const GenerateOptions& opt) {
  SeededRng rng(opt.seed);
  const std::size_t n = opt.n, p = opt.p;
  std::vector<double> z(n);
  for (auto& v : z) v = rng.normal();
  std::vector<double> scales(p);
  for (auto& s : scales) s = rng.uniform(0.5, 2.0);
  NdArray means({n, p});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      const double curve = sigmoid((j < p / 2 ? 3.0 : -3.0) * z[i]);
      means.at2(i, j) = opt.mean_scale * scales[j] * curve + 0.5;
    }
  DataMatrix data =
      simulate_zinb_counts(means, opt.dispersion, opt.dropout, SeededRng::splitmix64(opt.seed));
  data.true_labels.resize(p);
  for (std::size_t j = 0; j < p; ++j) data.true_labels[j] = j < p / 2 ? 0 : 1;
  data.true_z = std::move(z);
  return data;
}

int cmd_generate(const GenerateOptions& opt) {
  DataMatrix data;
  if (opt.kind == "five_cluster")
    data = generate_five_cluster_toy(opt.n, opt.per_group, opt.noise_sd, opt.seed);
  else if (opt.kind == "shifted")
    data = generate_shifted_basis_toy(opt.n, opt.p, opt.shift_min, opt.shift_max, opt.noise_sd,
                                      opt.seed);
  else
    data = generate_zinb_toy(opt);

  const std::string sidecar = sidecar_path_for(opt.out);
  write_csv(opt.out, data);
  write_truth_sidecar(sidecar, data);

  fs::path manifest = fs::path(opt.out);
  manifest.replace_extension();
  const std::string manifest_path = manifest.string() + ".manifest.json";
  json cfg{{"kind", opt.kind},         {"n", opt.n},
           {"per_group", opt.per_group}, {"p", opt.p},
           {"noise_sd", opt.noise_sd},   {"shift_min", opt.shift_min},
           {"shift_max", opt.shift_max}, {"dropout", opt.dropout},
           {"dispersion", opt.dispersion}, {"mean_scale", opt.mean_scale}};
  write_manifest(manifest_path, "generate", opt.seed, cfg, {}, {opt.out, sidecar, manifest_path});
  std::cout << "wrote " << opt.out << " (" << data.n() << " x " << data.p() << "), " << sidecar
            << "\n";
  return 0;
}

// ---- train ----

struct TrainOptions {
  std::string data_path;
  std::string out_dir;
  bool no_header = false;
  std::optional<std::string> label_column;
  FitOptions fit;
};

int cmd_train(const TrainOptions& opt) {
  DataMatrix data = load_data(opt.data_path, opt.no_header, opt.label_column);
  if (opt.fit.standardize_data) data = standardize(data).first;

  fs::create_directories(opt.out_dir);
  TrainConfig cfg = opt.fit.to_train_config(data);
  const std::string ckpt_path = (fs::path(opt.out_dir) / "checkpoint.bcl").string();
  cfg.checkpoint_path = ckpt_path;

  TrainReport report = train(data, cfg);

  const std::string trace_path = (fs::path(opt.out_dir) / "trace.tsv").string();
  write_trace(trace_path, report, cfg.log_every);

  const std::string manifest_path = (fs::path(opt.out_dir) / "manifest.json").string();
  json jcfg = opt.fit.to_json();
  jcfg["restart_chosen"] = report.restart_index;
  write_manifest(manifest_path, "train", opt.fit.seed, jcfg, {opt.data_path},
                 {ckpt_path, trace_path, manifest_path});

  std::cout << "best restart " << report.restart_index << ", final smoothed ELBO "
            << fmt(report.final_smoothed_total) << "\n";
  return 0;
}

// ---- report ----

struct ReportOptions {
  std::string checkpoint;
  std::string data_path;
  std::string truth_path;
  std::string out_dir;
  std::size_t grid = 200;
  bool no_header = false;
  std::optional<std::string> label_column;
  bool standardize_data = false;
};

int cmd_report(const ReportOptions& opt) {
  Checkpoint ckpt = load_checkpoint(opt.checkpoint);
  DataMatrix data = load_data(opt.data_path, opt.no_header, opt.label_column);
  if (opt.standardize_data) data = standardize(data).first;
  if (data.p() != ckpt.model.p)
    throw DataError("checkpoint expects P=" + std::to_string(ckpt.model.p) + " features, data has " +
                    std::to_string(data.p()));
  if (!opt.truth_path.empty()) read_truth_sidecar(opt.truth_path, data);

  Model model(ckpt.model, std::move(ckpt.params));
  const auto& cfg = model.config();
  fs::create_directories(opt.out_dir);
  auto outp = [&](const char* name) { return (fs::path(opt.out_dir) / name).string(); };
  std::vector<std::string> outputs;

  const NdArray phi = model.phi();
  const ClusterAssignment clusters = extract_clusters(phi);

  {
    std::ofstream os(outp("clusters.tsv"));
    os << "feature\tcluster" << (data.true_labels.empty() ? "" : "\ttrue_label") << '\n';
    for (std::size_t j = 0; j < data.p(); ++j) {
      os << data.feature_names[j] << '\t' << clusters.labels[j];
      if (!data.true_labels.empty()) os << '\t' << data.true_labels[j];
      os << '\n';
    }
    outputs.push_back(outp("clusters.tsv"));
  }

  write_matrix_tsv(outp("phi.tsv"), phi, data.feature_names, indexed_names("k", cfg.k));
  outputs.push_back(outp("phi.tsv"));
  write_matrix_tsv(outp("lambda.tsv"), model.lambda(), data.feature_names,
                   indexed_names("k", cfg.k));
  outputs.push_back(outp("lambda.tsv"));

  {
    // delta flattened to K*Q columns named k{k}_q{q}
    const NdArray& delta = model.params().value("delta");
    NdArray flat({cfg.p, cfg.k * cfg.q});
    std::copy(delta.data(), delta.data() + delta.size(), flat.data());
    std::vector<std::string> cols;
    for (std::size_t k = 0; k < cfg.k; ++k)
      for (std::size_t q = 0; q < cfg.q; ++q)
        cols.push_back("k" + std::to_string(k) + "_q" + std::to_string(q));
    write_matrix_tsv(outp("delta.tsv"), flat, data.feature_names, cols);
    outputs.push_back(outp("delta.tsv"));
  }

  write_matrix_tsv(outp("cooccurrence.tsv"), cooccurrence_matrix(phi), data.feature_names,
                   data.feature_names);
  outputs.push_back(outp("cooccurrence.tsv"));

  {
    // fitted curves on a z-grid spanning the 1st-99th percentile of the
    // inferred latent means (other latent dims held at their medians)
    NdArray mu, lv;
    model.encode(data.values, mu, lv);
    std::vector<double> first(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) first[i] = mu.at2(i, 0);
    std::sort(first.begin(), first.end());
    auto pct = [&](double q) {
      const double pos = q * static_cast<double>(first.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, first.size() - 1);
      return first[lo] + (pos - lo) * (first[hi] - first[lo]);
    };
    const double lo = pct(0.01), hi = pct(0.99);
    std::vector<double> medians(cfg.q, 0.0);
    for (std::size_t q = 1; q < cfg.q; ++q) {
      std::vector<double> col(data.n());
      for (std::size_t i = 0; i < data.n(); ++i) col[i] = mu.at2(i, q);
      std::nth_element(col.begin(), col.begin() + col.size() / 2, col.end());
      medians[q] = col[col.size() / 2];
    }
    const std::size_t g = std::max<std::size_t>(2, opt.grid);
    NdArray zgrid({g, cfg.q});
    for (std::size_t r = 0; r < g; ++r) {
      zgrid.at2(r, 0) = lo + (hi - lo) * static_cast<double>(r) / static_cast<double>(g - 1);
      for (std::size_t q = 1; q < cfg.q; ++q) zgrid.at2(r, q) = medians[q];
    }

    NdArray basis = model.decoder_forward(zgrid);  // G x K
    NdArray basis_out({g, cfg.k + 1});
    for (std::size_t r = 0; r < g; ++r) {
      basis_out.at2(r, 0) = zgrid.at2(r, 0);
      for (std::size_t k = 0; k < cfg.k; ++k) basis_out.at2(r, k + 1) = basis.at2(r, k);
    }
    std::vector<std::string> bcols{"z"};
    for (std::size_t k = 0; k < cfg.k; ++k) bcols.push_back("k" + std::to_string(k));
    write_matrix_tsv(outp("basis_curves.tsv"), basis_out, {}, bcols);
    outputs.push_back(outp("basis_curves.tsv"));

    NdArray curves = reconstruct(model, zgrid);  // G x P
    NdArray curves_out({g, cfg.p + 1});
    for (std::size_t r = 0; r < g; ++r) {
      curves_out.at2(r, 0) = zgrid.at2(r, 0);
      for (std::size_t j = 0; j < cfg.p; ++j) {
        double v = curves.at2(r, j);
        if (cfg.likelihood == Likelihood::zinb) v = softplus(v);  // count-scale mean
        curves_out.at2(r, j + 1) = v;
      }
    }
    std::vector<std::string> fcols{"z"};
    for (const auto& name : data.feature_names) fcols.push_back(name);
    write_matrix_tsv(outp("feature_curves.tsv"), curves_out, {}, fcols);
    outputs.push_back(outp("feature_curves.tsv"));
  }

  if (!data.true_labels.empty()) {
    ClusterAssignment truth{data.true_labels, AssignmentSource::ground_truth};
    std::ofstream os(outp("vmeasure.txt"));
    os << "v_measure\t" << fmt(v_measure(clusters, truth)) << '\n';
    os << "nonempty_clusters\t" << count_nonempty(phi) << '\n';
    outputs.push_back(outp("vmeasure.txt"));
  }

  const std::string manifest_path = outp("manifest.json");
  std::vector<std::string> inputs{opt.checkpoint, opt.data_path};
  if (!opt.truth_path.empty()) inputs.push_back(opt.truth_path);
  outputs.push_back(manifest_path);
  write_manifest(manifest_path, "report", 0, json{{"grid", opt.grid}}, inputs, outputs);
  std::cout << "report written to " << opt.out_dir << "\n";
  return 0;
}

// ---- compare ----

struct CompareOptions {
  std::string data_path;
  std::string truth_path;
  std::string out_dir;
  std::vector<std::string> schemes{"collapsed", "noncollapsed", "fixed_pi"};
  bool include_kmeans = false;
  bool no_header = false;
  std::optional<std::string> label_column;
  FitOptions fit;
};

int cmd_compare(const CompareOptions& opt) {
  DataMatrix data = load_data(opt.data_path, opt.no_header, opt.label_column);
  if (opt.fit.standardize_data) data = standardize(data).first;
  read_truth_sidecar(opt.truth_path, data);
  if (data.true_labels.empty()) throw DataError("compare: truth sidecar carries no labels");
  ClusterAssignment truth{data.true_labels, AssignmentSource::ground_truth};

  fs::create_directories(opt.out_dir);
  const std::string results_path = (fs::path(opt.out_dir) / "results.tsv").string();
  std::ofstream os(results_path);
  os << "scheme\trestart\tv_measure\tnonempty\tfinal_elbo\tstatus\n";

  for (const auto& scheme_name : opt.schemes) {
    FitOptions fit = opt.fit;
    fit.scheme = scheme_name;
    TrainConfig cfg = fit.to_train_config(data);
    auto reports = train_all_restarts(data, cfg);
    for (const auto& rep : reports) {
      if (rep.failed) {
        os << scheme_name << '\t' << rep.restart_index << "\tnan\t0\tnan\tfailed\n";
        continue;
      }
      Model model(rep.model_config, rep.params);
      const NdArray phi = model.phi();
      const double v = v_measure(extract_clusters(phi), truth);
      const std::size_t nonempty = count_nonempty(phi);
      const double elbo = evaluate(data, model, cfg.prior, cfg.scheme).total;
      os << scheme_name << '\t' << rep.restart_index << '\t' << fmt(v) << '\t' << nonempty
         << '\t' << fmt(elbo) << "\tok\n";
    }
  }

  if (opt.include_kmeans) {
    // features as points in R^N, true number of clusters from the sidecar
    std::vector<int> distinct = data.true_labels;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    NdArray points({data.p(), data.n()});
    for (std::size_t j = 0; j < data.p(); ++j)
      for (std::size_t i = 0; i < data.n(); ++i) points.at2(j, i) = data.values.at2(i, j);
    KmeansResult km = kmeans(points, distinct.size(), opt.fit.restarts, opt.fit.seed);
    os << "kmeans\t0\t" << fmt(v_measure(km.assignment, truth)) << '\t' << distinct.size()
       << "\tnan\tok\n";
  }
  os.close();

  const std::string manifest_path = (fs::path(opt.out_dir) / "manifest.json").string();
  json jcfg = opt.fit.to_json();
  jcfg["schemes"] = opt.schemes;
  jcfg["kmeans"] = opt.include_kmeans;
  write_manifest(manifest_path, "compare", opt.fit.seed, jcfg,
                 {opt.data_path, opt.truth_path}, {results_path, manifest_path});
  std::cout << "comparison written to " << results_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint nonlinear dimensionality reduction and feature-level clustering"};
  app.require_subcommand(1);

  GenerateOptions gen;
  CLI::App* generate = app.add_subcommand("generate", "Generate synthetic data + truth sidecar");
  generate->add_option("kind", gen.kind, "Data family")
      ->required()
      ->check(CLI::IsMember({"five_cluster", "shifted", "zinb"}));
  generate->add_option("--out", gen.out, "Output CSV path")->required();
  generate->add_option("--n", gen.n, "Observations");
  generate->add_option("--per-group", gen.per_group, "Features per group (five_cluster)");
  generate->add_option("--p", gen.p, "Features (shifted / zinb)");
  generate->add_option("--noise-sd", gen.noise_sd, "Observation noise sd");
  generate->add_option("--shift-min", gen.shift_min, "Smallest shift (shifted)");
  generate->add_option("--shift-max", gen.shift_max, "Largest shift (shifted)");
  generate->add_option("--dropout", gen.dropout, "Dropout probability (zinb)");
  generate->add_option("--dispersion", gen.dispersion, "Inverse dispersion (zinb)");
  generate->add_option("--mean-scale", gen.mean_scale, "Mean magnitude (zinb)");
  generate->add_option("--seed", gen.seed, "RNG seed");

  TrainOptions tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Fit a model and write a checkpoint");
  train_cmd->add_option("data", tr.data_path, "Input CSV")->required();
  train_cmd->add_option("--out", tr.out_dir, "Output directory")->required();
  train_cmd->add_flag("--no-header", tr.no_header, "CSV has no header row");
  train_cmd->add_option("--label-column", [&tr](const std::vector<std::string>& v) {
    tr.label_column = v.front();
    return true;
  }, "Annotation column to drop");
  tr.fit.add_to(train_cmd);

  ReportOptions rp;
  CLI::App* report = app.add_subcommand("report", "Export cluster tables from a checkpoint");
  report->add_option("--checkpoint", rp.checkpoint, "Checkpoint file")->required();
  report->add_option("--data", rp.data_path, "Input CSV")->required();
  report->add_option("--truth", rp.truth_path, "Truth sidecar JSON");
  report->add_option("--out", rp.out_dir, "Output directory")->required();
  report->add_option("--grid", rp.grid, "Curve grid resolution");
  report->add_flag("--no-header", rp.no_header, "CSV has no header row");
  report->add_option("--label-column", [&rp](const std::vector<std::string>& v) {
    rp.label_column = v.front();
    return true;
  }, "Annotation column to drop");
  report->add_flag("--standardize", rp.standardize_data,
                   "Standardize features (match a --standardize training run)");

  CompareOptions cp;
  CLI::App* compare = app.add_subcommand("compare", "Score schemes against ground truth");
  compare->add_option("data", cp.data_path, "Input CSV")->required();
  compare->add_option("--truth", cp.truth_path, "Truth sidecar JSON")->required();
  compare->add_option("--out", cp.out_dir, "Output directory")->required();
  compare->add_option("--schemes", cp.schemes, "Schemes to fit")->delimiter(',');
  compare->add_flag("--kmeans", cp.include_kmeans, "Include the k-means baseline row");
  compare->add_flag("--no-header", cp.no_header, "CSV has no header row");
  compare->add_option("--label-column", [&cp](const std::vector<std::string>& v) {
    cp.label_column = v.front();
    return true;
  }, "Annotation column to drop");
  cp.fit.add_to(compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*generate) return cmd_generate(gen);
    if (*train_cmd) return cmd_train(tr);
    if (*report) return cmd_report(rp);
    if (*compare) return cmd_compare(cp);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::domain_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
