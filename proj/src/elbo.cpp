#include "basiscluster/elbo.hpp"

#include <algorithm>
#include <cmath>

#include "basiscluster/errors.hpp"
#include "basiscluster/specialfn.hpp"

namespace basiscluster {

const char* to_string(InferenceScheme s) {
  switch (s) {
    case InferenceScheme::collapsed: return "collapsed";
    case InferenceScheme::noncollapsed: return "noncollapsed";
    case InferenceScheme::fixed_pi: return "fixed_pi";
  }
  return "?";
}

InferenceScheme scheme_from_string(const std::string& s) {
  if (s == "collapsed") return InferenceScheme::collapsed;
  if (s == "noncollapsed") return InferenceScheme::noncollapsed;
  if (s == "fixed_pi") return InferenceScheme::fixed_pi;
  throw ShapeError("unknown inference scheme: " + s);
}

PriorConfig PriorConfig::symmetric(double alpha, std::size_t k, double beta) {
  PriorConfig cfg;
  cfg.alpha.assign(k, alpha);
  cfg.beta = beta;
  return cfg;
}

void PriorConfig::validate(std::size_t k) const {
  if (alpha.size() != k)
    throw ShapeError("PriorConfig: alpha length " + std::to_string(alpha.size()) +
                     " does not match K=" + std::to_string(k));
  for (double a : alpha)
    if (!(a > 0.0)) throw std::domain_error("PriorConfig: alpha entries must be > 0");
  if (!(beta > 0.0)) throw std::domain_error("PriorConfig: beta must be > 0");
}

double PriorConfig::alpha_sum() const {
  double s = 0.0;
  for (double a : alpha) s += a;
  return s;
}

// ---------------------------------------------------------------------------
// standalone term functions
// ---------------------------------------------------------------------------

double expected_loglik(const NdArray& y, const NdArray& comp_logdens, const NdArray& phi) {
  if (y.ndim() != 2 || comp_logdens.ndim() != 3 || phi.ndim() != 2)
    throw ShapeError("expected_loglik: y must be BxP, log-densities BxPxK, phi PxK");
  const std::size_t b = y.dim(0), p = y.dim(1), k = phi.dim(1);
  if (comp_logdens.dim(0) != b || comp_logdens.dim(1) != p || comp_logdens.dim(2) != k ||
      phi.dim(0) != p)
    throw ShapeError("expected_loglik: inconsistent shapes");
  double acc = 0.0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      const double* ld = comp_logdens.data() + (i * p + j) * k;
      const double* ph = phi.data() + j * k;
      for (std::size_t kk = 0; kk < k; ++kk)
        if (ph[kk] != 0.0) acc += ph[kk] * ld[kk];
    }
  return acc;
}

double collapsed_dirichlet_term(const NdArray& phi, std::span<const double> alpha) {
  if (phi.ndim() != 2 || phi.dim(1) != alpha.size())
    throw ShapeError("collapsed_dirichlet_term: phi must be PxK matching alpha");
  const std::size_t p = phi.dim(0), k = alpha.size();
  double log_b_alpha = log_multivariate_beta(alpha);
  std::vector<double> n_plus_alpha(alpha.begin(), alpha.end());
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t kk = 0; kk < k; ++kk) n_plus_alpha[kk] += phi.at2(j, kk);
  return log_multivariate_beta(n_plus_alpha) - log_b_alpha;
}

double assignment_entropy(const NdArray& phi) {
  if (phi.ndim() != 2) throw ShapeError("assignment_entropy: phi must be PxK");
  double acc = 0.0;
  for (std::size_t j = 0; j < phi.dim(0); ++j)
    acc += categorical_entropy(std::span(phi.data() + j * phi.dim(1), phi.dim(1)));
  return acc;
}

double latent_kl(const NdArray& mu, const NdArray& log_var) {
  if (!mu.same_shape(log_var)) throw ShapeError("latent_kl: mu/log_var shape mismatch");
  return gaussian_kl_std(std::span(mu.data(), mu.size()),
                         std::span(log_var.data(), log_var.size()));
}

double map_penalty(const NdArray& lambda, const NdArray& delta, bool scale_invariant,
                   bool translation_invariant) {
  double acc = 0.0;
  if (translation_invariant)
    for (std::size_t i = 0; i < delta.size(); ++i) acc += gaussian_logpdf(delta[i], 0.0, 1.0);
  if (scale_invariant)
    for (std::size_t i = 0; i < lambda.size(); ++i) acc += gamma_logpdf(lambda[i], 1.0, 1.0);
  return acc;
}

// ---------------------------------------------------------------------------
// fused objective machinery
// ---------------------------------------------------------------------------

namespace {

// Active (feature, component) pairs after optional responsibility pruning.
// tilde holds the weights used in the likelihood sum: equal to phi when the
// threshold is 0, otherwise phi renormalized over the kept components (which
// is exactly the softmax of the logits restricted to the kept set).
struct ActiveSet {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // row-major (j, k)
  std::vector<std::uint32_t> offsets;                          // size P+1, into pairs
  NdArray tilde;                                               // P x K, 0 on pruned entries
};

ActiveSet build_active(const NdArray& phi, double threshold) {
  const std::size_t p = phi.dim(0), k = phi.dim(1);
  ActiveSet out;
  out.tilde = NdArray({p, k});
  out.offsets.assign(p + 1, 0);
  out.pairs.reserve(threshold == 0.0 ? p * k : p * 4);
  for (std::size_t j = 0; j < p; ++j) {
    const double* row = phi.data() + j * k;
    double kept = 0.0;
    std::size_t arg = 0;
    for (std::size_t kk = 0; kk < k; ++kk) {
      if (row[kk] > row[arg]) arg = kk;
      if (row[kk] >= threshold) kept += row[kk];
    }
    if (kept == 0.0) {  // pathological row; keep the argmax
      out.pairs.emplace_back(j, arg);
      out.tilde.at2(j, arg) = 1.0;
    } else {
      for (std::size_t kk = 0; kk < k; ++kk) {
        if (row[kk] >= threshold) {
          out.pairs.emplace_back(static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(kk));
          out.tilde.at2(j, kk) = threshold == 0.0 ? row[kk] : row[kk] / kept;
        }
      }
    }
    out.offsets[j + 1] = static_cast<std::uint32_t>(out.pairs.size());
  }
  return out;
}

struct LikelihoodResult {
  double batch_loglik = 0.0;  // sum over batch of sum_active tilde * logdens
  NdArray sum_ld;             // P x K: sum_i logdens(i,j,k) on active pairs
  NdArray dz;                 // B x Q, d(total)/dz, already scaled
};

// Gaussian observation head: y ~ N(m, sigma2_j).
struct GaussianHead {
  const NdArray* y = nullptr;
  std::vector<double> log_const;  // -0.5 ln(2 pi sigma2_j)
  std::vector<double> inv2s2;     // 1 / (2 sigma2_j)
  NdArray* dnoise = nullptr;      // P, accumulated d/d ln sigma2_j

  GaussianHead(const NdArray& y_, const std::vector<double>& sigma2, NdArray* dnoise_)
      : y(&y_), dnoise(dnoise_) {
    log_const.resize(sigma2.size());
    inv2s2.resize(sigma2.size());
    for (std::size_t j = 0; j < sigma2.size(); ++j) {
      log_const[j] = -0.91893853320467274178 - 0.5 * std::log(sigma2[j]);
      inv2s2[j] = 0.5 / sigma2[j];
    }
  }

  inline double eval(std::size_t i, std::size_t j, double m, bool grad, double w, double& dm) {
    const double r = y->at2(i, j) - m;
    const double ld = log_const[j] - r * r * inv2s2[j];
    if (grad) {
      dm = 2.0 * inv2s2[j] * r;
      (*dnoise)[j] += w * (-0.5 + r * r * inv2s2[j]);
    }
    return ld;
  }
};

// ZINB observation head on softplus(m): handles dropout and dispersion grads.
struct ZinbHead {
  const NdArray* y = nullptr;
  const NdArray* dropout = nullptr;  // B x P probabilities
  std::vector<double> disp, log_disp, lgamma_disp, digamma_disp;
  NdArray* dnoise = nullptr;   // P, d/d ln inv_dispersion_j
  NdArray* ddropout = nullptr;  // B x P, d/d pi (accumulated, weighted)

  ZinbHead(const NdArray& y_, const NdArray& dropout_, const std::vector<double>& inv_disp,
           NdArray* dnoise_, NdArray* ddropout_)
      : y(&y_), dropout(&dropout_), disp(inv_disp), dnoise(dnoise_), ddropout(ddropout_) {
    log_disp.resize(disp.size());
    lgamma_disp.resize(disp.size());
    digamma_disp.resize(disp.size());
    for (std::size_t j = 0; j < disp.size(); ++j) {
      log_disp[j] = std::log(disp[j]);
      lgamma_disp[j] = log_gamma(disp[j]);
      digamma_disp[j] = digamma(disp[j]);
    }
  }

  inline double eval(std::size_t i, std::size_t j, double m, bool grad, double w, double& dm) {
    const double mu = std::max(softplus(m), 1e-10);
    const double yv = y->at2(i, j);
    const double pi = std::clamp(dropout->at2(i, j), 1e-10, 1.0 - 1e-10);
    const double phi_j = disp[j];
    const double log_phi_mu = std::log(phi_j + mu);
    double ld, dmu = 0.0, dpi = 0.0, dphi = 0.0;
    if (yv == 0.0) {
      const double nb0 = phi_j * (log_disp[j] - log_phi_mu);
      const double q = std::exp(nb0);
      const double d = pi + (1.0 - pi) * q;
      ld = std::log(d);
      if (grad) {
        const double dnb0 = (1.0 - pi) * q / d;
        dpi = (1.0 - q) / d;
        dmu = dnb0 * (-phi_j / (phi_j + mu));
        dphi = dnb0 * (log_disp[j] - log_phi_mu + 1.0 - phi_j / (phi_j + mu));
      }
    } else {
      ld = std::log1p(-pi) + log_gamma(yv + phi_j) - log_gamma(yv + 1.0) - lgamma_disp[j] +
           phi_j * (log_disp[j] - log_phi_mu) + yv * (std::log(mu) - log_phi_mu);
      if (grad) {
        dpi = -1.0 / (1.0 - pi);
        dmu = yv / mu - (yv + phi_j) / (phi_j + mu);
        dphi = digamma(yv + phi_j) - digamma_disp[j] + log_disp[j] - log_phi_mu + 1.0 -
               (yv + phi_j) / (phi_j + mu);
      }
    }
    if (grad) {
      dm = dmu * sigmoid(m);  // softplus chain
      (*dnoise)[j] += w * dphi * phi_j;
      ddropout->at2(i, j) += w * dpi;
    }
    return ld;
  }
};

// Shared-basis path (translation invariance off): one dense decoder pass over
// the batch, component values broadcast over features.
template <class Head>
void likelihood_pass_shared(Model& model, const NdArray& z, const ActiveSet& act, double scale,
                            bool with_grad, Head& head, NdArray* dlambda, LikelihoodResult& res) {
  const auto& cfg = model.config();
  const std::size_t b = z.dim(0), p = cfg.p, k = cfg.k;
  const NdArray lambda = model.lambda();
  MlpCache cache;
  NdArray f = model.decoder_forward(z, with_grad ? &cache : nullptr);  // B x K
  NdArray df;
  if (with_grad) df = NdArray({b, k});

  for (std::size_t i = 0; i < b; ++i) {
    const double* fi = f.data() + i * k;
    double* dfi = with_grad ? df.data() + i * k : nullptr;
    for (std::size_t j = 0; j < p; ++j) {
      for (std::uint32_t a = act.offsets[j]; a < act.offsets[j + 1]; ++a) {
        const std::uint32_t kk = act.pairs[a].second;
        const double lam = lambda.at2(j, kk);
        const double m = lam * fi[kk];
        const double w = scale * act.tilde.at2(j, kk);
        double dm = 0.0;
        const double ld = head.eval(i, j, m, with_grad, w, dm);
        res.batch_loglik += act.tilde.at2(j, kk) * ld;
        res.sum_ld.at2(j, kk) += ld;
        if (with_grad) {
          const double dms = w * dm;
          if (dlambda) dlambda->at2(j, kk) += dms * fi[kk];
          dfi[kk] += dms * lam;
        }
      }
    }
  }
  if (with_grad) res.dz = model.decoder_backward(cache, df);
}

// Shifted path (translation invariance on): per-(i,j,k) rows through the
// decoder, single-output evaluations, processed in chunks. Row order is
// (i, active pair) with running counters; per-pair data is gathered once.
template <class Head>
void likelihood_pass_shifted(Model& model, const NdArray& z, const ActiveSet& act, double scale,
                             bool with_grad, Head& head, NdArray* dlambda, LikelihoodResult& res) {
  const auto& cfg = model.config();
  const std::size_t b = z.dim(0), q = cfg.q;
  const NdArray lambda = model.lambda();
  const NdArray& delta = model.params().value("delta");
  NdArray* ddelta = with_grad ? &model.params().grad("delta") : nullptr;
  if (with_grad) res.dz = NdArray({b, q});

  struct PairView {
    std::uint32_t j, k;
    const double* delta_row;
    double lambda, weight;  // weight = scale * tilde
    std::size_t flat;       // j * K + k
  };
  const std::size_t n_pairs = act.pairs.size();
  std::vector<PairView> pairs(n_pairs);
  for (std::size_t a = 0; a < n_pairs; ++a) {
    const auto [j, kk] = act.pairs[a];
    pairs[a] = {j,
                kk,
                delta.data() + (j * cfg.k + kk) * q,
                lambda.at2(j, kk),
                scale * act.tilde.at2(j, kk),
                j * cfg.k + kk};
  }

  const std::size_t total_rows = b * n_pairs;
  const std::size_t chunk = 2048;
  std::vector<std::uint32_t> select(std::min(chunk, total_rows));
  std::vector<double> upstream(with_grad ? select.size() : 0);

  std::size_t i0 = 0, a0 = 0;  // running (batch row, pair) cursor
  for (std::size_t start = 0; start < total_rows; start += chunk) {
    const std::size_t rows = std::min(chunk, total_rows - start);
    NdArray x({rows, q});
    {
      std::size_t i = i0, a = a0;
      for (std::size_t c = 0; c < rows; ++c) {
        const PairView& pv = pairs[a];
        const double* zi = z.data() + i * q;
        double* xr = x.data() + c * q;
        for (std::size_t qq = 0; qq < q; ++qq) xr[qq] = zi[qq] + pv.delta_row[qq];
        select[c] = pv.k;
        if (++a == n_pairs) {
          a = 0;
          ++i;
        }
      }
    }
    MlpCache cache;
    NdArray f = model.decoder_forward_select(
        x, std::span(select.data(), rows), with_grad ? &cache : nullptr);
    {
      std::size_t i = i0, a = a0;
      double acc = 0.0;
      for (std::size_t c = 0; c < rows; ++c) {
        const PairView& pv = pairs[a];
        const double m = pv.lambda * f[c];
        double dm = 0.0;
        const double ld = head.eval(i, pv.j, m, with_grad, pv.weight, dm);
        acc += act.tilde[pv.flat] * ld;
        res.sum_ld[pv.flat] += ld;
        if (with_grad) {
          const double dms = pv.weight * dm;
          if (dlambda) (*dlambda)[pv.flat] += dms * f[c];
          upstream[c] = dms * pv.lambda;
        }
        if (++a == n_pairs) {
          a = 0;
          ++i;
        }
      }
      res.batch_loglik += acc;
    }
    if (with_grad) {
      NdArray dx = model.decoder_backward_select(cache, std::span(upstream.data(), rows));
      std::size_t i = i0, a = a0;
      for (std::size_t c = 0; c < rows; ++c) {
        const PairView& pv = pairs[a];
        const double* dxr = dx.data() + c * q;
        double* dzi = res.dz.data() + i * q;
        double* ddj = ddelta->data() + pv.flat * q;
        for (std::size_t qq = 0; qq < q; ++qq) {
          dzi[qq] += dxr[qq];
          ddj[qq] += dxr[qq];
        }
        if (++a == n_pairs) {
          a = 0;
          ++i;
        }
      }
    }
    i0 += (a0 + rows) / n_pairs;
    a0 = (a0 + rows) % n_pairs;
  }
}

void check_counts(const NdArray& y) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = y[i];
    if (v < 0.0 || std::abs(v - std::nearbyint(v)) > 1e-9)
      throw DataError("zinb likelihood requires nonnegative integer counts");
  }
}

void check_finite(double v, const char* term) {
  if (!std::isfinite(v))
    throw NumericError(std::string("objective: non-finite value in term '") + term + "'");
}

// Softmax backward over the full rows: dlogits += phi .* (g - <g, phi>).
void softmax_backward_full(const NdArray& phi, const NdArray& g, NdArray& dlogits) {
  const std::size_t p = phi.dim(0), k = phi.dim(1);
  for (std::size_t j = 0; j < p; ++j) {
    const double* ph = phi.data() + j * k;
    const double* gj = g.data() + j * k;
    double dot = 0.0;
    for (std::size_t kk = 0; kk < k; ++kk) dot += gj[kk] * ph[kk];
    double* dl = dlogits.data() + j * k;
    for (std::size_t kk = 0; kk < k; ++kk) dl[kk] += ph[kk] * (gj[kk] - dot);
  }
}

// Softmax backward restricted to the active components of each row (the
// likelihood weights are the softmax of the logits over the kept set).
void softmax_backward_active(const ActiveSet& act, const NdArray& g, std::size_t p,
                             NdArray& dlogits) {
  for (std::size_t j = 0; j < p; ++j) {
    double dot = 0.0;
    for (std::uint32_t a = act.offsets[j]; a < act.offsets[j + 1]; ++a) {
      const std::uint32_t kk = act.pairs[a].second;
      dot += g.at2(j, kk) * act.tilde.at2(j, kk);
    }
    for (std::uint32_t a = act.offsets[j]; a < act.offsets[j + 1]; ++a) {
      const std::uint32_t kk = act.pairs[a].second;
      dlogits.at2(j, kk) += act.tilde.at2(j, kk) * (g.at2(j, kk) - dot);
    }
  }
}

ElboBreakdown objective_impl(InferenceScheme scheme, const NdArray& y, std::size_t n_total,
                             Model& model, const PriorConfig& prior, SeededRng& rng,
                             bool with_grad) {
  const auto& cfg = model.config();
  if (y.ndim() != 2 || y.dim(1) != cfg.p)
    throw ShapeError("objective: batch shape " + y.shape_str() + " does not match P");
  const std::size_t b = y.dim(0);
  if (b == 0) throw ShapeError("objective: empty batch");
  if (n_total < b) throw ShapeError("objective: n_total smaller than the batch");
  prior.validate(cfg.k);
  if (cfg.likelihood == Likelihood::zinb) check_counts(y);

  const double scale = static_cast<double>(n_total) / static_cast<double>(b);
  const double beta = prior.beta;
  ParamStore& params = model.params();

  // encoder + reparameterized z (one sample per data point)
  Model::EncodeCache enc_cache;
  NdArray mu, log_var;
  model.encode(y, mu, log_var, with_grad ? &enc_cache : nullptr);
  NdArray eps;
  NdArray z = reparam_sample(mu, log_var, rng, &eps);

  const double kl_batch = latent_kl(mu, log_var);

  // responsibilities and the (possibly pruned) likelihood weights
  const NdArray phi = model.phi();
  const ActiveSet act = build_active(phi, cfg.phi_threshold);

  // likelihood pass
  LikelihoodResult lik;
  lik.sum_ld = NdArray({cfg.p, cfg.k});
  NdArray dlambda;
  NdArray* dlambda_ptr = nullptr;
  if (with_grad && cfg.scale_invariant) {
    dlambda = NdArray({cfg.p, cfg.k});
    dlambda_ptr = &dlambda;
  }
  NdArray dnoise({cfg.p});

  NdArray dropout_probs;  // zinb only
  MlpCache dropout_cache;
  NdArray ddropout;
  if (cfg.likelihood == Likelihood::gaussian) {
    GaussianHead head(y, model.sigma2(), &dnoise);
    if (cfg.translation_invariant)
      likelihood_pass_shifted(model, z, act, scale, with_grad, head, dlambda_ptr, lik);
    else
      likelihood_pass_shared(model, z, act, scale, with_grad, head, dlambda_ptr, lik);
  } else {
    NdArray logits = model.dropout_forward(z, with_grad ? &dropout_cache : nullptr);
    dropout_probs = logits;
    for (std::size_t i = 0; i < dropout_probs.size(); ++i)
      dropout_probs[i] = sigmoid(dropout_probs[i]);
    ddropout = NdArray({b, cfg.p});
    ZinbHead head(y, dropout_probs, model.inv_dispersion(), &dnoise, &ddropout);
    if (cfg.translation_invariant)
      likelihood_pass_shifted(model, z, act, scale, with_grad, head, dlambda_ptr, lik);
    else
      likelihood_pass_shared(model, z, act, scale, with_grad, head, dlambda_ptr, lik);
  }

  // scheme-specific mixture prior (value + d/dphi contribution)
  double mixture_prior = 0.0;
  NdArray g_phi({cfg.p, cfg.k});  // d total / d phi from prior + entropy terms
  const double alpha_sum = prior.alpha_sum();

  std::vector<double> n_k(cfg.k, 0.0);
  for (std::size_t j = 0; j < cfg.p; ++j)
    for (std::size_t kk = 0; kk < cfg.k; ++kk) n_k[kk] += phi.at2(j, kk);

  switch (scheme) {
    case InferenceScheme::collapsed: {
      mixture_prior = collapsed_dirichlet_term(phi, prior.alpha);
      if (with_grad) {
        const double dg_total = digamma(static_cast<double>(cfg.p) + alpha_sum);
        for (std::size_t kk = 0; kk < cfg.k; ++kk) {
          const double g = beta * (digamma(n_k[kk] + prior.alpha[kk]) - dg_total);
          for (std::size_t j = 0; j < cfg.p; ++j) g_phi.at2(j, kk) += g;
        }
      }
      break;
    }
    case InferenceScheme::noncollapsed: {
      if (!params.contains("psi_log"))
        throw ShapeError("noncollapsed objective requires the psi_log parameter (ensure_psi)");
      const NdArray& psi_log = params.value("psi_log");
      std::vector<double> psi(cfg.k);
      double psi_sum = 0.0;
      for (std::size_t kk = 0; kk < cfg.k; ++kk) {
        psi[kk] = std::exp(psi_log[kk]);
        psi_sum += psi[kk];
      }
      const double dg_sum = digamma(psi_sum);
      double e_term = 0.0;
      for (std::size_t kk = 0; kk < cfg.k; ++kk)
        e_term += n_k[kk] * (digamma(psi[kk]) - dg_sum);
      const double kl_pi = dirichlet_kl(psi, prior.alpha);
      mixture_prior = e_term - kl_pi;
      if (with_grad) {
        for (std::size_t kk = 0; kk < cfg.k; ++kk) {
          const double g = beta * (digamma(psi[kk]) - dg_sum);
          for (std::size_t j = 0; j < cfg.p; ++j) g_phi.at2(j, kk) += g;
        }
        NdArray& dpsi_log = params.grad("psi_log");
        const double tri_sum = trigamma(psi_sum);
        const double pd = static_cast<double>(cfg.p);
        for (std::size_t kk = 0; kk < cfg.k; ++kk) {
          const double dpsi = beta * ((n_k[kk] - psi[kk] + prior.alpha[kk]) * trigamma(psi[kk]) -
                                      (pd - psi_sum + alpha_sum) * tri_sum);
          dpsi_log[kk] += dpsi * psi[kk];
        }
      }
      break;
    }
    case InferenceScheme::fixed_pi: {
      // constant in phi: the uniform log-weight sums to -P ln K on normalized rows
      mixture_prior = -static_cast<double>(cfg.p) * std::log(static_cast<double>(cfg.k));
      break;
    }
  }

  // assignment entropy (full phi, with 0 ln 0 := 0)
  double entropy = 0.0;
  for (std::size_t idx = 0; idx < phi.size(); ++idx) {
    const double p = phi[idx];
    if (p >= 1e-12) {
      entropy -= p * std::log(p);
      if (with_grad) g_phi[idx] += beta * (-std::log(p) - 1.0);
    }
  }

  // MAP penalties
  const NdArray lambda = model.lambda();
  const NdArray& delta = params.value("delta");
  const double map = map_penalty(lambda, delta, cfg.scale_invariant, cfg.translation_invariant);

  ElboBreakdown bd;
  bd.expected_loglik = scale * lik.batch_loglik;
  bd.mixture_prior = mixture_prior;
  bd.assign_entropy = entropy;
  bd.latent_kl = scale * kl_batch;
  bd.map_penalty = map;
  bd.beta = beta;
  bd.total = bd.expected_loglik - beta * bd.latent_kl +
             beta * (bd.mixture_prior + bd.assign_entropy) + bd.map_penalty;
  check_finite(bd.expected_loglik, "expected_loglik");
  check_finite(bd.mixture_prior, "mixture_prior");
  check_finite(bd.assign_entropy, "assign_entropy");
  check_finite(bd.latent_kl, "latent_kl");
  check_finite(bd.map_penalty, "map_penalty");
  check_finite(bd.total, "total");

  if (!with_grad) return bd;

  // assignment logits: likelihood part through the restricted softmax,
  // prior + entropy through the full softmax
  NdArray& dlogits = params.grad("assign_logits");
  NdArray g_lik({cfg.p, cfg.k});
  for (const auto& [j, kk] : act.pairs) g_lik.at2(j, kk) = scale * lik.sum_ld.at2(j, kk);
  softmax_backward_active(act, g_lik, cfg.p, dlogits);
  softmax_backward_full(phi, g_phi, dlogits);

  // lambda: likelihood part plus the Gamma(1,1) MAP gradient, through softplus
  if (cfg.scale_invariant) {
    const NdArray& raw = params.value("lambda_raw");
    NdArray& draw = params.grad("lambda_raw");
    for (std::size_t idx = 0; idx < raw.size(); ++idx)
      draw[idx] += (dlambda[idx] - 1.0) * sigmoid(raw[idx]);
  }

  // delta MAP gradient (likelihood part accumulated in the shifted pass)
  if (cfg.translation_invariant) {
    NdArray& ddelta = params.grad("delta");
    for (std::size_t idx = 0; idx < delta.size(); ++idx) ddelta[idx] -= delta[idx];
  }

  // noise parameters
  NdArray& dnoise_param = params.grad("noise");
  for (std::size_t j = 0; j < cfg.p; ++j) dnoise_param[j] += dnoise[j];

  // dropout network (zinb)
  if (cfg.likelihood == Likelihood::zinb) {
    NdArray dlogits_drop({b, cfg.p});
    for (std::size_t idx = 0; idx < ddropout.size(); ++idx) {
      const double pi = dropout_probs[idx];
      dlogits_drop[idx] = ddropout[idx] * pi * (1.0 - pi);
    }
    NdArray dz_drop = model.dropout_backward(dropout_cache, dlogits_drop);
    for (std::size_t idx = 0; idx < lik.dz.size(); ++idx) lik.dz[idx] += dz_drop[idx];
  }

  // latent KL and the reparameterization chain, then the encoder
  NdArray dmu = lik.dz;
  NdArray dlv({b, cfg.q});
  for (std::size_t idx = 0; idx < dmu.size(); ++idx) {
    dmu[idx] += -beta * scale * mu[idx];
    dlv[idx] = lik.dz[idx] * 0.5 * std::exp(0.5 * log_var[idx]) * eps[idx] -
               beta * scale * 0.5 * (std::exp(log_var[idx]) - 1.0);
  }
  model.encode_backward(enc_cache, dmu, dlv);
  return bd;
}

}  // namespace

ElboBreakdown collapsed_objective(const NdArray& y_batch, std::size_t n_total, Model& model,
                                  const PriorConfig& prior, SeededRng& rng, bool with_grad) {
  return objective_impl(InferenceScheme::collapsed, y_batch, n_total, model, prior, rng,
                        with_grad);
}

ElboBreakdown noncollapsed_objective(const NdArray& y_batch, std::size_t n_total, Model& model,
                                     const PriorConfig& prior, SeededRng& rng, bool with_grad) {
  return objective_impl(InferenceScheme::noncollapsed, y_batch, n_total, model, prior, rng,
                        with_grad);
}

ElboBreakdown fixedpi_objective(const NdArray& y_batch, std::size_t n_total, Model& model,
                                const PriorConfig& prior, SeededRng& rng, bool with_grad) {
  return objective_impl(InferenceScheme::fixed_pi, y_batch, n_total, model, prior, rng,
                        with_grad);
}

ElboBreakdown objective(InferenceScheme scheme, const NdArray& y_batch, std::size_t n_total,
                        Model& model, const PriorConfig& prior, SeededRng& rng, bool with_grad) {
  return objective_impl(scheme, y_batch, n_total, model, prior, rng, with_grad);
}

void ensure_psi(Model& model) {
  if (!model.params().contains("psi_log"))
    model.params().add("psi_log", {model.config().k});
}

}  // namespace basiscluster
