#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "basiscluster/ndarray.hpp"
#include "basiscluster/nn.hpp"
#include "basiscluster/rng.hpp"
#include "basiscluster/specialfn.hpp"

namespace basiscluster {

enum class Likelihood { gaussian, zinb };

const char* to_string(Likelihood l);
Likelihood likelihood_from_string(const std::string& s);

struct ModelConfig {
  std::size_t p = 0;  // observed features
  std::size_t q = 1;  // latent dimension
  std::size_t k = 1;  // basis components
  Likelihood likelihood = Likelihood::gaussian;
  bool translation_invariant = false;
  bool scale_invariant = true;  // implied true whenever translation_invariant is set
  std::vector<std::size_t> encoder_hidden{64};
  std::vector<std::size_t> decoder_hidden{32};
  std::vector<std::size_t> dropout_hidden{16};
  Activation activation = Activation::tanh;
  // Skip components with responsibility below this in the likelihood sum
  // (renormalizing the kept ones). 0 disables; used to speed up large
  // translation-invariant fits once assignments sparsify.
  double phi_threshold = 0.0;

  void validate();

  MlpSpec encoder_trunk_spec() const;  // absent when encoder_hidden is empty
  MlpSpec head_spec() const;           // shared by the mu / log-var heads
  MlpSpec decoder_spec() const;        // latent -> K basis values
  MlpSpec dropout_spec() const;        // latent -> P dropout logits (zinb only)
};

// BasisVAE: amortized Gaussian encoder, a K-output basis decoder shared across
// features, per-feature scale (lambda = softplus(lambda_raw) > 0), translation
// (delta in R^Q per feature x component) and assignment logits whose row-wise
// softmax gives the responsibilities phi, plus a per-feature noise parameter
// (ln sigma^2_j for the Gaussian head, ln of the inverse dispersion for ZINB).
class Model {
 public:
  Model(ModelConfig config, SeededRng& rng);               // fresh initialization
  Model(ModelConfig config, ParamStore params);            // e.g. from a checkpoint

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct EncodeCache {
    MlpCache trunk;
    NdArray trunk_pre;  // trunk output pre-activation (empty when no trunk)
    NdArray trunk_act;  // activated trunk output
    MlpCache mu_head;
    MlpCache logvar_head;
    NdArray logvar_raw;  // pre-clamp values, for masking the clamp in backward
  };

  // Deterministic heads; log-variance clamped to [-10, 10] before use.
  void encode(const NdArray& y, NdArray& mu, NdArray& log_var, EncodeCache* cache = nullptr);
  // Accumulates encoder parameter gradients from head gradients.
  void encode_backward(EncodeCache& cache, const NdArray& dmu, const NdArray& dlogvar);

  // Responsibilities: row-wise softmax of assign_logits (P x K).
  NdArray phi() const;
  // softplus(lambda_raw) when scale-invariant, all-ones otherwise (P x K).
  NdArray lambda() const;
  // Gaussian head: per-feature variances exp(noise).
  std::vector<double> sigma2() const;
  // ZINB head: per-feature inverse dispersions exp(noise).
  std::vector<double> inv_dispersion() const;

  // Basis-net forward helpers. Every call adds the number of input rows to the
  // evaluation counter, which tests use to pin the cost model.
  NdArray decoder_forward(const NdArray& z, MlpCache* cache = nullptr);
  NdArray decoder_forward_select(const NdArray& x, std::span<const std::uint32_t> select,
                                 MlpCache* cache = nullptr);
  NdArray decoder_backward(MlpCache& cache, const NdArray& upstream);
  NdArray decoder_backward_select(MlpCache& cache, std::span<const double> upstream);

  NdArray dropout_forward(const NdArray& z, MlpCache* cache = nullptr);
  NdArray dropout_backward(MlpCache& cache, const NdArray& upstream);

  std::size_t basis_rows_evaluated() const { return basis_rows_evaluated_; }
  void reset_basis_counter() { basis_rows_evaluated_ = 0; }

  static constexpr double kLogVarClamp = 10.0;

 private:
  void validate_params() const;

  ModelConfig config_;
  ParamStore params_;
  std::size_t basis_rows_evaluated_ = 0;
};

// f_basis^(k)(z_i + delta_jk) as a B x P x K tensor. With translation
// invariance off, delta is ignored and the result is constant in j, computed
// from one decoder pass over the batch.
NdArray basis_values(Model& model, const NdArray& z);

// Entry (i,j,k) = lambda_jk * basis_vals(i,j,k); lambda treated as 1 when
// scale invariance is off.
NdArray component_means(const NdArray& basis_vals, const NdArray& lambda, bool scale_invariant);

// Posterior-mode reconstruction: entry (i,j) uses k* = argmax_k phi_jk
// (ties -> lowest k). Plotting/export convenience, not a training path.
NdArray reconstruct(Model& model, const NdArray& z);

struct ZinbHeadValues {
  NdArray mu;              // B x P x K, softplus of the component means
  NdArray dropout;         // B x P, logistic of the dropout-net output
  std::vector<double> inv_dispersion;  // P, exp(noise)
};

ZinbHeadValues zinb_heads(Model& model, const NdArray& z, const NdArray& component_means);

}  // namespace basiscluster
