#pragma once

#include <span>
#include <string>
#include <vector>

#include "basiscluster/model.hpp"
#include "basiscluster/ndarray.hpp"
#include "basiscluster/rng.hpp"

namespace basiscluster {

enum class InferenceScheme { collapsed, noncollapsed, fixed_pi };

const char* to_string(InferenceScheme s);
InferenceScheme scheme_from_string(const std::string& s);

struct PriorConfig {
  std::vector<double> alpha;  // length K
  double beta = 1.0;

  static PriorConfig symmetric(double alpha, std::size_t k, double beta = 1.0);
  void validate(std::size_t k) const;
  double alpha_sum() const;
};

// Per-term values of one objective evaluation. The identity
//   total = expected_loglik - beta * latent_kl
//         + beta * (mixture_prior + assign_entropy) + map_penalty
// holds for every scheme (beta plays the role of both likelihood-KL and
// clustering-prior weights, i.e. the beta = gamma choice).
struct ElboBreakdown {
  double expected_loglik = 0.0;  // responsibility-weighted log-likelihood (scaled to full data)
  double mixture_prior = 0.0;    // collapsed: ln B(n+alpha) - ln B(alpha);
                                 // non-collapsed: E_q[ln p(w|pi)] - KL(q(pi)||p(pi));
                                 // fixed-pi: -P ln K
  double assign_entropy = 0.0;   // -E_q(w) ln q(w)
  double latent_kl = 0.0;        // sum_i KL(q(z_i|y_i) || N(0,I)) (scaled to full data)
  double map_penalty = 0.0;      // ln N(delta|0,1) + ln Gamma(lambda|1,1) sums
  double beta = 1.0;
  double total = 0.0;
};

// ---- standalone term functions (values only; the assembled objectives carry
// ---- their own fused gradients and are tested against these) ----

// sum_{i,j,k} phi_jk * comp_logdens(i,j,k); entries with phi_jk = 0 are skipped.
double expected_loglik(const NdArray& y, const NdArray& comp_logdens, const NdArray& phi);

// ln B(n + alpha) - ln B(alpha) with n_k = sum_j phi_jk. Exact closed form of
// the marginalized Dirichlet-Categorical term; 0 for an empty phi and for K=1.
double collapsed_dirichlet_term(const NdArray& phi, std::span<const double> alpha);

// sum_j categorical_entropy(phi_j).
double assignment_entropy(const NdArray& phi);

// sum over the batch of gaussian_kl_std rows.
double latent_kl(const NdArray& mu, const NdArray& log_var);

// sum ln N(delta|0,1) over coordinates (when translation-invariant) plus
// sum ln Gamma(lambda|1,1) (when scale-invariant); each part omitted entirely
// when its invariance is disabled.
double map_penalty(const NdArray& lambda, const NdArray& delta, bool scale_invariant,
                   bool translation_invariant);

// ---- assembled objectives ----
// One reparameterized z sample per data point, drawn from rng in row-major
// order. Likelihood and latent-KL terms are scaled by n_total / batch_size;
// the phi-global terms (mixture prior, entropy, MAP penalties) enter once,
// unscaled. with_grad accumulates ascent gradients (d total / d theta) into
// model.params(). Throws NumericError naming the first non-finite term.

ElboBreakdown collapsed_objective(const NdArray& y_batch, std::size_t n_total, Model& model,
                                  const PriorConfig& prior, SeededRng& rng, bool with_grad);

// Mean-field q(pi) = Dirichlet(psi) with psi = exp(psi_log); call ensure_psi
// first. E_q[ln pi_k] is computed analytically as digamma(psi_k) - digamma(sum).
ElboBreakdown noncollapsed_objective(const NdArray& y_batch, std::size_t n_total, Model& model,
                                     const PriorConfig& prior, SeededRng& rng, bool with_grad);

// Mixture weights frozen at 1/K: prior term is the constant -P ln K.
ElboBreakdown fixedpi_objective(const NdArray& y_batch, std::size_t n_total, Model& model,
                                const PriorConfig& prior, SeededRng& rng, bool with_grad);

ElboBreakdown objective(InferenceScheme scheme, const NdArray& y_batch, std::size_t n_total,
                        Model& model, const PriorConfig& prior, SeededRng& rng, bool with_grad);

// Registers the "psi_log" parameter (K zeros, i.e. psi = 1) if absent.
void ensure_psi(Model& model);

}  // namespace basiscluster
