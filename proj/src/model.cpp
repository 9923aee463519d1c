#include "basiscluster/model.hpp"

#include <algorithm>
#include <cmath>

#include "basiscluster/errors.hpp"

namespace basiscluster {

const char* to_string(Likelihood l) {
  return l == Likelihood::gaussian ? "gaussian" : "zinb";
}

Likelihood likelihood_from_string(const std::string& s) {
  if (s == "gaussian") return Likelihood::gaussian;
  if (s == "zinb") return Likelihood::zinb;
  throw ShapeError("unknown likelihood: " + s);
}

void ModelConfig::validate() {
  if (p == 0 || q == 0 || k == 0) throw ShapeError("ModelConfig: p, q, k must be positive");
  if (translation_invariant) scale_invariant = true;
  if (phi_threshold < 0.0 || phi_threshold >= 1.0)
    throw ShapeError("ModelConfig: phi_threshold must be in [0, 1)");
}

MlpSpec ModelConfig::encoder_trunk_spec() const {
  MlpSpec spec;
  spec.in_dim = p;
  if (!encoder_hidden.empty()) {
    spec.hidden_dims.assign(encoder_hidden.begin(), encoder_hidden.end() - 1);
    spec.out_dim = encoder_hidden.back();
  }
  spec.activation = activation;
  return spec;
}

MlpSpec ModelConfig::head_spec() const {
  MlpSpec spec;
  spec.in_dim = encoder_hidden.empty() ? p : encoder_hidden.back();
  spec.out_dim = q;
  spec.activation = activation;
  return spec;
}

MlpSpec ModelConfig::decoder_spec() const {
  return MlpSpec{q, decoder_hidden, k, activation};
}

MlpSpec ModelConfig::dropout_spec() const {
  return MlpSpec{q, dropout_hidden, p, activation};
}

namespace {
constexpr double kLambdaRawInit = 0.54132485461292354;  // softplus(x) = 1
}

Model::Model(ModelConfig config, SeededRng& rng) : config_(std::move(config)) {
  config_.validate();
  if (!config_.encoder_hidden.empty())
    mlp_init(params_, config_.encoder_trunk_spec(), "enc.trunk", rng);
  mlp_init(params_, config_.head_spec(), "enc.mu", rng);
  mlp_init(params_, config_.head_spec(), "enc.logvar", rng);
  mlp_init(params_, config_.decoder_spec(), "dec", rng);
  if (config_.likelihood == Likelihood::zinb)
    mlp_init(params_, config_.dropout_spec(), "drop", rng);

  NdArray& lraw = params_.add("lambda_raw", {config_.p, config_.k});
  lraw.fill(kLambdaRawInit);
  params_.add("delta", {config_.p, config_.k, config_.q});
  NdArray& logits = params_.add("assign_logits", {config_.p, config_.k});
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = 0.01 * rng.normal();
  params_.add("noise", {config_.p});
}

Model::Model(ModelConfig config, ParamStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  validate_params();
}

void Model::validate_params() const {
  require_shape(params_.value("lambda_raw"), {config_.p, config_.k}, "lambda_raw");
  require_shape(params_.value("delta"), {config_.p, config_.k, config_.q}, "delta");
  require_shape(params_.value("assign_logits"), {config_.p, config_.k}, "assign_logits");
  require_shape(params_.value("noise"), {config_.p}, "noise");
  if (config_.likelihood == Likelihood::zinb && !params_.contains("drop.w0"))
    throw ShapeError("Model: zinb likelihood requires dropout-network parameters");
}

void Model::encode(const NdArray& y, NdArray& mu, NdArray& log_var, EncodeCache* cache) {
  if (y.ndim() != 2 || y.dim(1) != config_.p)
    throw ShapeError("encode: input shape " + y.shape_str() + " does not match P=" +
                     std::to_string(config_.p));
  if (!y.all_finite()) throw NumericError("encode: non-finite input");

  const NdArray* head_in = &y;
  NdArray local_act;
  if (!config_.encoder_hidden.empty()) {
    const MlpSpec trunk = config_.encoder_trunk_spec();
    NdArray pre = mlp_forward(params_, trunk, "enc.trunk", y, cache ? &cache->trunk : nullptr);
    NdArray act({pre.dim(0), pre.dim(1)});
    for (std::size_t i = 0; i < pre.size(); ++i)
      act[i] = config_.activation == Activation::tanh       ? tanh_fast(pre[i])
               : config_.activation == Activation::softplus ? log1pexp(pre[i])
                                                            : std::max(pre[i], 0.0);
    if (cache) {
      cache->trunk_pre = std::move(pre);
      cache->trunk_act = std::move(act);
      head_in = &cache->trunk_act;
    } else {
      local_act = std::move(act);
      head_in = &local_act;
    }
  }

  const MlpSpec head = config_.head_spec();
  mu = mlp_forward(params_, head, "enc.mu", *head_in, cache ? &cache->mu_head : nullptr);
  NdArray lv_raw =
      mlp_forward(params_, head, "enc.logvar", *head_in, cache ? &cache->logvar_head : nullptr);
  log_var = lv_raw;
  for (std::size_t i = 0; i < log_var.size(); ++i)
    log_var[i] = std::clamp(log_var[i], -kLogVarClamp, kLogVarClamp);
  if (cache) cache->logvar_raw = std::move(lv_raw);
}

void Model::encode_backward(EncodeCache& cache, const NdArray& dmu, const NdArray& dlogvar) {
  const MlpSpec head = config_.head_spec();
  NdArray dlv = dlogvar;
  for (std::size_t i = 0; i < dlv.size(); ++i)
    if (std::abs(cache.logvar_raw[i]) >= kLogVarClamp) dlv[i] = 0.0;

  NdArray d_in = mlp_backward(params_, head, "enc.mu", cache.mu_head, dmu);
  NdArray d_in2 = mlp_backward(params_, head, "enc.logvar", cache.logvar_head, dlv);
  for (std::size_t i = 0; i < d_in.size(); ++i) d_in[i] += d_in2[i];

  if (config_.encoder_hidden.empty()) return;  // gradient w.r.t. the data is not needed

  const NdArray& pre = cache.trunk_pre;
  const NdArray& act = cache.trunk_act;
  for (std::size_t i = 0; i < d_in.size(); ++i) {
    double g = 1.0;
    switch (config_.activation) {
      case Activation::tanh: g = 1.0 - act[i] * act[i]; break;
      case Activation::softplus: g = sigmoid(pre[i]); break;
      case Activation::relu: g = pre[i] > 0.0 ? 1.0 : 0.0; break;
    }
    d_in[i] *= g;
  }
  mlp_backward(params_, config_.encoder_trunk_spec(), "enc.trunk", cache.trunk, d_in);
}

NdArray Model::phi() const {
  const NdArray& logits = params_.value("assign_logits");
  NdArray out({config_.p, config_.k});
  for (std::size_t j = 0; j < config_.p; ++j) {
    const double* row = logits.data() + j * config_.k;
    double* dst = out.data() + j * config_.k;
    double mx = row[0];
    for (std::size_t k = 1; k < config_.k; ++k) mx = std::max(mx, row[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < config_.k; ++k) {
      dst[k] = std::exp(row[k] - mx);
      sum += dst[k];
    }
    for (std::size_t k = 0; k < config_.k; ++k) dst[k] /= sum;
  }
  return out;
}

NdArray Model::lambda() const {
  NdArray out({config_.p, config_.k}, 1.0);
  if (!config_.scale_invariant) return out;
  const NdArray& raw = params_.value("lambda_raw");
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = softplus(raw[i]);
  return out;
}

std::vector<double> Model::sigma2() const {
  const NdArray& noise = params_.value("noise");
  std::vector<double> out(config_.p);
  for (std::size_t j = 0; j < config_.p; ++j) out[j] = std::exp(noise[j]);
  return out;
}

std::vector<double> Model::inv_dispersion() const { return sigma2(); }

NdArray Model::decoder_forward(const NdArray& z, MlpCache* cache) {
  basis_rows_evaluated_ += z.dim(0);
  return mlp_forward(params_, config_.decoder_spec(), "dec", z, cache);
}

NdArray Model::decoder_forward_select(const NdArray& x, std::span<const std::uint32_t> select,
                                      MlpCache* cache) {
  basis_rows_evaluated_ += x.dim(0);
  return mlp_forward_select(params_, config_.decoder_spec(), "dec", x, select, cache);
}

NdArray Model::decoder_backward(MlpCache& cache, const NdArray& upstream) {
  return mlp_backward(params_, config_.decoder_spec(), "dec", cache, upstream);
}

NdArray Model::decoder_backward_select(MlpCache& cache, std::span<const double> upstream) {
  return mlp_backward_select(params_, config_.decoder_spec(), "dec", cache, upstream);
}

NdArray Model::dropout_forward(const NdArray& z, MlpCache* cache) {
  return mlp_forward(params_, config_.dropout_spec(), "drop", z, cache);
}

NdArray Model::dropout_backward(MlpCache& cache, const NdArray& upstream) {
  return mlp_backward(params_, config_.dropout_spec(), "drop", cache, upstream);
}

NdArray basis_values(Model& model, const NdArray& z) {
  const auto& cfg = model.config();
  const std::size_t b = z.dim(0);
  if (z.ndim() != 2 || z.dim(1) != cfg.q) throw ShapeError("basis_values: z shape mismatch");
  NdArray out({b, cfg.p, cfg.k});

  if (!cfg.translation_invariant) {
    NdArray f = model.decoder_forward(z);  // B x K
    for (std::size_t i = 0; i < b; ++i) {
      const double* fi = f.data() + i * cfg.k;
      for (std::size_t j = 0; j < cfg.p; ++j)
        std::copy(fi, fi + cfg.k, out.data() + (i * cfg.p + j) * cfg.k);
    }
    return out;
  }

  const NdArray& delta = model.params().value("delta");
  const std::size_t rows = b * cfg.p * cfg.k;
  NdArray x({rows, cfg.q});
  std::vector<std::uint32_t> select(rows);
  std::size_t r = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const double* zi = z.data() + i * cfg.q;
    for (std::size_t j = 0; j < cfg.p; ++j) {
      for (std::size_t k = 0; k < cfg.k; ++k, ++r) {
        const double* d = delta.data() + (j * cfg.k + k) * cfg.q;
        double* xr = x.data() + r * cfg.q;
        for (std::size_t qq = 0; qq < cfg.q; ++qq) xr[qq] = zi[qq] + d[qq];
        select[r] = static_cast<std::uint32_t>(k);
      }
    }
  }
  NdArray vals = model.decoder_forward_select(x, select);
  std::copy(vals.data(), vals.data() + rows, out.data());
  return out;
}

NdArray component_means(const NdArray& basis_vals, const NdArray& lambda, bool scale_invariant) {
  if (basis_vals.ndim() != 3) throw ShapeError("component_means: basis values must be B x P x K");
  NdArray out = basis_vals;
  if (!scale_invariant) return out;
  const std::size_t b = basis_vals.dim(0), p = basis_vals.dim(1), k = basis_vals.dim(2);
  if (lambda.ndim() != 2 || lambda.dim(0) != p || lambda.dim(1) != k)
    throw ShapeError("component_means: lambda shape mismatch");
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      const double* lj = lambda.data() + j * k;
      double* oj = out.data() + (i * p + j) * k;
      for (std::size_t kk = 0; kk < k; ++kk) oj[kk] *= lj[kk];
    }
  return out;
}

NdArray reconstruct(Model& model, const NdArray& z) {
  const auto& cfg = model.config();
  const std::size_t b = z.dim(0);
  const NdArray phi = model.phi();
  const NdArray lambda = model.lambda();

  std::vector<std::uint32_t> best(cfg.p);
  for (std::size_t j = 0; j < cfg.p; ++j) {
    const double* row = phi.data() + j * cfg.k;
    std::size_t arg = 0;
    for (std::size_t k = 1; k < cfg.k; ++k)
      if (row[k] > row[arg]) arg = k;
    best[j] = static_cast<std::uint32_t>(arg);
  }

  NdArray out({b, cfg.p});
  if (!cfg.translation_invariant) {
    NdArray f = model.decoder_forward(z);  // B x K
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < cfg.p; ++j)
        out.at2(i, j) = lambda.at2(j, best[j]) * f.at2(i, best[j]);
    return out;
  }

  const NdArray& delta = model.params().value("delta");
  NdArray x({b * cfg.p, cfg.q});
  std::vector<std::uint32_t> select(b * cfg.p);
  std::size_t r = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const double* zi = z.data() + i * cfg.q;
    for (std::size_t j = 0; j < cfg.p; ++j, ++r) {
      const double* d = delta.data() + (j * cfg.k + best[j]) * cfg.q;
      double* xr = x.data() + r * cfg.q;
      for (std::size_t qq = 0; qq < cfg.q; ++qq) xr[qq] = zi[qq] + d[qq];
      select[r] = best[j];
    }
  }
  NdArray vals = model.decoder_forward_select(x, select);
  r = 0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < cfg.p; ++j, ++r) out.at2(i, j) = lambda.at2(j, best[j]) * vals[r];
  return out;
}

ZinbHeadValues zinb_heads(Model& model, const NdArray& z, const NdArray& means) {
  const auto& cfg = model.config();
  if (cfg.likelihood != Likelihood::zinb)
    throw ShapeError("zinb_heads: model likelihood is not zinb");
  ZinbHeadValues out;
  out.mu = means;
  for (std::size_t i = 0; i < out.mu.size(); ++i)
    out.mu[i] = std::max(softplus(out.mu[i]), 1e-10);
  NdArray logits = model.dropout_forward(z);
  out.dropout = logits;
  for (std::size_t i = 0; i < out.dropout.size(); ++i) out.dropout[i] = sigmoid(out.dropout[i]);
  out.inv_dispersion = model.inv_dispersion();
  return out;
}

}  // namespace basiscluster
