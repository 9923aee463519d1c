// Python bindings for the basiscluster core: data generators, the three
// training objectives, metrics, and the scalar special functions.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>

#include "basiscluster/checkpoint.hpp"
#include "basiscluster/data.hpp"
#include "basiscluster/elbo.hpp"
#include "basiscluster/metrics.hpp"
#include "basiscluster/model.hpp"
#include "basiscluster/specialfn.hpp"
#include "basiscluster/trainer.hpp"
#include "basiscluster/version.hpp"

namespace py = pybind11;
using namespace basiscluster;

namespace {

py::array_t<double> to_numpy(const NdArray& a) {
  std::vector<py::ssize_t> shape(a.shape().begin(), a.shape().end());
  py::array_t<double> out(shape);
  std::copy(a.data(), a.data() + a.size(), out.mutable_data());
  return out;
}

NdArray from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<std::size_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<std::size_t>(a.shape(i));
  std::vector<double> data(a.data(), a.data() + a.size());
  return NdArray(std::move(shape), std::move(data));
}

std::vector<double> vec_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

// Trained model handle: wraps the final parameters plus the config needed to
// re-evaluate, report and serialize.
class FitResult {
 public:
  FitResult(ModelConfig model_cfg, ParamStore params, InferenceScheme scheme, PriorConfig prior,
            std::string rng_state, std::vector<double> totals, std::size_t restart_index,
            double final_smoothed_total)
      : model_(std::move(model_cfg), std::move(params)),
        scheme_(scheme),
        prior_(std::move(prior)),
        rng_state_(std::move(rng_state)),
        totals_(std::move(totals)),
        restart_index_(restart_index),
        final_smoothed_total_(final_smoothed_total) {}

  static FitResult from_report(const TrainReport& rep, InferenceScheme scheme,
                               const PriorConfig& prior) {
    std::vector<double> totals;
    totals.reserve(rep.trace.size());
    for (const auto& e : rep.trace) totals.push_back(e.breakdown.total);
    return FitResult(rep.model_config, rep.params, scheme, prior, rep.rng_state,
                     std::move(totals), rep.restart_index, rep.final_smoothed_total);
  }

  py::array_t<double> phi() { return to_numpy(model_.phi()); }
  py::array_t<double> lam() { return to_numpy(model_.lambda()); }
  py::array_t<double> delta() { return to_numpy(model_.params().value("delta")); }
  std::vector<int> clusters() { return extract_clusters(model_.phi()).labels; }
  std::size_t nonempty(double threshold) { return count_nonempty(model_.phi(), threshold); }
  std::vector<double> totals() const { return totals_; }
  std::size_t restart_index() const { return restart_index_; }
  double final_smoothed_total() const { return final_smoothed_total_; }

  py::tuple encode(const DataMatrix& data) {
    NdArray mu, lv;
    model_.encode(data.values, mu, lv);
    return py::make_tuple(to_numpy(mu), to_numpy(lv));
  }

  py::array_t<double> basis_curves(
      const py::array_t<double, py::array::c_style | py::array::forcecast>& zgrid) {
    return to_numpy(model_.decoder_forward(from_numpy(zgrid)));
  }

  py::array_t<double> feature_curves(
      const py::array_t<double, py::array::c_style | py::array::forcecast>& zgrid) {
    return to_numpy(reconstruct(model_, from_numpy(zgrid)));
  }

  py::dict evaluate_on(const DataMatrix& data) {
    const ElboBreakdown bd = evaluate(data, model_, prior_, scheme_);
    py::dict out;
    out["expected_loglik"] = bd.expected_loglik;
    out["mixture_prior"] = bd.mixture_prior;
    out["assign_entropy"] = bd.assign_entropy;
    out["latent_kl"] = bd.latent_kl;
    out["map_penalty"] = bd.map_penalty;
    out["beta"] = bd.beta;
    out["total"] = bd.total;
    return out;
  }

  void save(const std::string& path) {
    Checkpoint ckpt;
    ckpt.model = model_.config();
    ckpt.scheme = scheme_;
    ckpt.prior = prior_;
    ckpt.rng_state = rng_state_;
    ckpt.params = model_.params();
    save_checkpoint(path, ckpt);
  }

  static FitResult load(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    return FitResult(ckpt.model, std::move(ckpt.params), ckpt.scheme, ckpt.prior, ckpt.rng_state,
                     {}, 0, 0.0);
  }

 private:
  Model model_;
  InferenceScheme scheme_;
  PriorConfig prior_;
  std::string rng_state_;
  std::vector<double> totals_;
  std::size_t restart_index_ = 0;
  double final_smoothed_total_ = 0.0;
};

TrainConfig make_train_config(const DataMatrix& data, const py::kwargs& kw) {
  TrainConfig cfg;
  cfg.model.p = data.p();
  auto get = [&](const char* name, auto fallback) {
    using T = decltype(fallback);
    return kw.contains(name) ? kw[name].cast<T>() : fallback;
  };
  cfg.scheme = scheme_from_string(get("scheme", std::string("collapsed")));
  cfg.epochs = get("epochs", static_cast<std::size_t>(200));
  cfg.batch_size = get("batch_size", static_cast<std::size_t>(128));
  cfg.learning_rate = get("lr", 1e-3);
  cfg.seed = get("seed", static_cast<std::uint64_t>(0));
  cfg.restarts = get("restarts", static_cast<std::size_t>(1));
  cfg.max_threads = get("max_threads", static_cast<std::size_t>(0));
  cfg.model.q = get("latent_dim", static_cast<std::size_t>(1));
  cfg.model.k = get("k", static_cast<std::size_t>(20));
  cfg.model.likelihood = likelihood_from_string(get("likelihood", std::string("gaussian")));
  cfg.model.translation_invariant = get("translation_invariant", false);
  cfg.model.scale_invariant = get("scale_invariant", true);
  cfg.model.encoder_hidden = get("encoder_hidden", std::vector<std::size_t>{64});
  cfg.model.decoder_hidden = get("decoder_hidden", std::vector<std::size_t>{32});
  cfg.model.dropout_hidden = get("dropout_hidden", std::vector<std::size_t>{16});
  cfg.model.phi_threshold = get("phi_threshold", 0.0);
  cfg.prior = PriorConfig::symmetric(get("alpha", 0.1), cfg.model.k, get("beta", 1.0));
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint nonlinear dimensionality reduction and feature-level clustering";
  m.attr("__version__") = kVersion;

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<DataMatrix>(m, "DataMatrix")
      .def_property_readonly("values", [](const DataMatrix& d) { return to_numpy(d.values); })
      .def_readonly("feature_names", &DataMatrix::feature_names)
      .def_readonly("true_labels", &DataMatrix::true_labels)
      .def_readonly("true_z", &DataMatrix::true_z)
      .def_readonly("true_delta", &DataMatrix::true_delta)
      .def_property_readonly("n", &DataMatrix::n)
      .def_property_readonly("p", &DataMatrix::p)
      .def_property_readonly("hint", [](const DataMatrix& d) {
        return d.hint == LikelihoodHint::counts ? "counts" : "continuous";
      });

  m.def("generate_five_cluster_toy", &generate_five_cluster_toy, py::arg("n"),
        py::arg("per_group"), py::arg("noise_sd"), py::arg("seed"));
  m.def("generate_shifted_basis_toy", &generate_shifted_basis_toy, py::arg("n"), py::arg("p"),
        py::arg("shift_min"), py::arg("shift_max"), py::arg("noise_sd"), py::arg("seed"));
  m.def(
      "simulate_zinb_counts",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& means,
         double inv_dispersion, double dropout, std::uint64_t seed) {
        return simulate_zinb_counts(from_numpy(means), inv_dispersion, dropout, seed);
      },
      py::arg("mean_matrix"), py::arg("inv_dispersion"), py::arg("dropout"), py::arg("seed"));
  m.def(
      "load_csv",
      [](const std::string& path, bool has_header, const std::optional<std::string>& label_col) {
        return load_csv(path, has_header, label_col);
      },
      py::arg("path"), py::arg("has_header") = true, py::arg("label_column") = py::none());
  m.def("standardize", [](const DataMatrix& d) {
    auto [out, st] = standardize(d);
    return py::make_tuple(out, st.mean, st.sd);
  });

  py::class_<FitResult>(m, "FitResult")
      .def_property_readonly("phi", &FitResult::phi)
      .def_property_readonly("lambda_", &FitResult::lam)
      .def_property_readonly("delta", &FitResult::delta)
      .def_property_readonly("clusters", &FitResult::clusters)
      .def_property_readonly("elbo_trace", &FitResult::totals)
      .def_property_readonly("restart_index", &FitResult::restart_index)
      .def_property_readonly("final_smoothed_total", &FitResult::final_smoothed_total)
      .def("nonempty_clusters", &FitResult::nonempty, py::arg("threshold") = 0.5)
      .def("encode", &FitResult::encode, py::arg("data"))
      .def("basis_curves", &FitResult::basis_curves, py::arg("z_grid"))
      .def("feature_curves", &FitResult::feature_curves, py::arg("z_grid"))
      .def("evaluate", &FitResult::evaluate_on, py::arg("data"))
      .def("save", &FitResult::save, py::arg("path"));

  m.def(
      "train",
      [](const DataMatrix& data, const py::kwargs& kw) {
        TrainConfig cfg = make_train_config(data, kw);
        cfg.validate_against(data);
        TrainReport rep = train(data, cfg);
        return FitResult::from_report(rep, cfg.scheme, cfg.prior);
      },
      py::arg("data"), "Fit with keyword options (k, alpha, beta, scheme, epochs, ...)");
  m.def(
      "train_restarts",
      [](const DataMatrix& data, const py::kwargs& kw) {
        TrainConfig cfg = make_train_config(data, kw);
        cfg.validate_against(data);
        auto reports = train_all_restarts(data, cfg);
        std::vector<FitResult> out;
        out.reserve(reports.size());
        for (const auto& rep : reports) {
          if (rep.failed) continue;
          out.push_back(FitResult::from_report(rep, cfg.scheme, cfg.prior));
        }
        return out;
      },
      py::arg("data"));
  m.def("load_checkpoint", &FitResult::load, py::arg("path"));

  // metrics
  m.def("v_measure",
        [](const std::vector<int>& pred, const std::vector<int>& truth) {
          return v_measure(pred, truth);
        },
        py::arg("pred"), py::arg("truth"));
  m.def("extract_clusters",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& phi) {
          return extract_clusters(from_numpy(phi)).labels;
        },
        py::arg("phi"));
  m.def("count_nonempty",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& phi,
           double threshold) { return count_nonempty(from_numpy(phi), threshold); },
        py::arg("phi"), py::arg("threshold") = 0.5);
  m.def("cooccurrence_matrix",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& phi) {
          return to_numpy(cooccurrence_matrix(from_numpy(phi)));
        },
        py::arg("phi"));
  m.def("similarity_matrices", [](const DataMatrix& data) {
    SimilarityMatrices sm = similarity_matrices(data);
    return py::make_tuple(to_numpy(sm.euclidean), to_numpy(sm.pearson), sm.warnings);
  });
  m.def("kmeans",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& points,
           std::size_t k, std::size_t restarts, std::uint64_t seed) {
          KmeansResult r = kmeans(from_numpy(points), k, restarts, seed);
          return py::make_tuple(r.assignment.labels, r.wcss);
        },
        py::arg("points"), py::arg("k"), py::arg("restarts") = 10, py::arg("seed") = 0);

  // special functions
  m.def("log_gamma", &log_gamma, py::arg("x"));
  m.def("digamma", &digamma, py::arg("x"));
  m.def("log_multivariate_beta",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& alpha) {
          auto v = vec_from(alpha);
          return log_multivariate_beta(v);
        },
        py::arg("alpha"));
  m.def("gaussian_logpdf", &gaussian_logpdf, py::arg("y"), py::arg("mean"), py::arg("variance"));
  m.def("gamma_logpdf", &gamma_logpdf, py::arg("x"), py::arg("shape") = 1.0,
        py::arg("rate") = 1.0);
  m.def("gaussian_kl_std",
        py::overload_cast<double, double>(&gaussian_kl_std), py::arg("mu"), py::arg("log_var"));
  m.def("dirichlet_kl",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& psi,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& alpha) {
          auto p = vec_from(psi);
          auto a = vec_from(alpha);
          return dirichlet_kl(p, a);
        },
        py::arg("psi"), py::arg("alpha"));
  m.def("categorical_entropy",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& row) {
          auto v = vec_from(row);
          return categorical_entropy(v);
        },
        py::arg("phi_row"));
  m.def("nb_logpmf", &nb_logpmf, py::arg("y"), py::arg("mu"), py::arg("inv_dispersion"));
  m.def("zinb_logpmf",
        [](double y, double mu, double inv_dispersion, double dropout_prob) {
          return zinb_logpmf(y, ZinbParams{mu, inv_dispersion, dropout_prob});
        },
        py::arg("y"), py::arg("mu"), py::arg("inv_dispersion"), py::arg("dropout_prob"));
}
