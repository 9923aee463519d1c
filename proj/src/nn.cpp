#include "basiscluster/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "basiscluster/errors.hpp"
#include "basiscluster/specialfn.hpp"

namespace basiscluster {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
    case Activation::relu: return "relu";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "softplus") return Activation::softplus;
  if (s == "relu") return Activation::relu;
  throw ShapeError("unknown activation: " + s);
}

std::vector<std::size_t> MlpSpec::layer_dims() const {
  std::vector<std::size_t> dims;
  dims.reserve(hidden_dims.size() + 2);
  dims.push_back(in_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(out_dim);
  return dims;
}

void MlpSpec::validate() const {
  if (in_dim == 0 || out_dim == 0) throw ShapeError("MlpSpec: in_dim/out_dim must be positive");
  for (std::size_t h : hidden_dims)
    if (h == 0) throw ShapeError("MlpSpec: hidden dims must be positive");
}

NdArray& ParamStore::add(const std::string& name, const std::vector<std::size_t>& shape) {
  if (contains(name)) throw ShapeError("ParamStore: duplicate parameter '" + name + "'");
  index_[name] = params_.size();
  Param p;
  p.name = name;
  p.value = NdArray(shape);
  p.grad = NdArray(shape);
  p.adam_m = NdArray(shape);
  p.adam_v = NdArray(shape);
  params_.push_back(std::move(p));
  return params_.back().value;
}

Param& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeError("ParamStore: unknown parameter '" + name + "'");
  return params_[it->second];
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeError("ParamStore: unknown parameter '" + name + "'");
  return params_[it->second];
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void adam_step(ParamStore& params, const AdamConfig& cfg, std::size_t t) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const double sign = cfg.maximize ? -1.0 : 1.0;
  for (auto& p : params.entries()) {
    double* w = p.value.data();
    double* g = p.grad.data();
    double* m = p.adam_m.data();
    double* v = p.adam_v.data();
    const std::size_t n = p.value.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(g[i]))
        throw NumericError("adam_step: non-finite gradient in parameter '" + p.name + "'");
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= sign * cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      g[i] = 0.0;
    }
  }
}

NdArray reparam_sample(const NdArray& mu, const NdArray& log_var, SeededRng& rng,
                       NdArray* eps_out) {
  if (!mu.same_shape(log_var)) throw ShapeError("reparam_sample: mu/log_var shape mismatch");
  NdArray eps(mu.shape());
  rng.fill_normal(eps);
  NdArray z(mu.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double lv = std::clamp(log_var[i], -10.0, 10.0);
    z[i] = mu[i] + std::exp(0.5 * lv) * eps[i];
  }
  if (eps_out) *eps_out = std::move(eps);
  return z;
}

namespace {

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::tanh: return tanh_fast(x);
    case Activation::softplus: return log1pexp(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

inline double activate_grad(Activation a, double pre, double act) {
  switch (a) {
    case Activation::tanh: return 1.0 - act * act;
    case Activation::softplus: return sigmoid(pre);
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

// C(rows x n) += A(rows x m) * W(m x n)
void matmul_acc(const double* a, const double* w, double* c, std::size_t rows, std::size_t m,
                std::size_t n) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ar = a + r * m;
    double* cr = c + r * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ar[i];
      const double* wi = w + i * n;
      for (std::size_t j = 0; j < n; ++j) cr[j] += av * wi[j];
    }
  }
}

// dW(m x n) += A^T(rows x m) * G(rows x n); db(n) += column sums of G
void weight_grads(const double* a, const double* g, double* dw, double* db, std::size_t rows,
                  std::size_t m, std::size_t n) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ar = a + r * m;
    const double* gr = g + r * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ar[i];
      double* dwi = dw + i * n;
      for (std::size_t j = 0; j < n; ++j) dwi[j] += av * gr[j];
    }
    for (std::size_t j = 0; j < n; ++j) db[j] += gr[j];
  }
}

// dA(rows x m) = G(rows x n) * W^T
void input_grads(const double* g, const double* w, double* da, std::size_t rows, std::size_t n,
                 std::size_t m) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gr = g + r * n;
    double* dr = da + r * m;
    for (std::size_t i = 0; i < m; ++i) {
      const double* wi = w + i * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gr[j] * wi[j];
      dr[i] = acc;
    }
  }
}

std::string wname(const std::string& prefix, std::size_t l) {
  return prefix + ".w" + std::to_string(l);
}
std::string bname(const std::string& prefix, std::size_t l) {
  return prefix + ".b" + std::to_string(l);
}

// One hidden layer: act = activation(h W + b). Pre-activations are stored
// only when a later backward pass needs them (tanh recovers its derivative
// from the activation alone). The m == 1 case is fused into a single pass;
// it is the decoder hot path for one-dimensional latents.
NdArray hidden_layer(const double* h, std::size_t rows, std::size_t m, const NdArray& w,
                     const NdArray& b, Activation kind, NdArray* keep_pre) {
  const std::size_t n = b.size();
  NdArray act({rows, n});
  if (m == 1) {
    if (keep_pre) *keep_pre = NdArray({rows, n});
    const double* wp = w.data();
    const double* bp = b.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double a = h[r];
      double* ar = act.data() + r * n;
      double* pr = keep_pre ? keep_pre->data() + r * n : nullptr;
      for (std::size_t j = 0; j < n; ++j) {
        const double p = bp[j] + a * wp[j];
        if (pr) pr[j] = p;
        ar[j] = activate(kind, p);
      }
    }
    return act;
  }
  NdArray pre({rows, n});
  for (std::size_t r = 0; r < rows; ++r)
    std::memcpy(pre.data() + r * n, b.data(), n * sizeof(double));
  matmul_acc(h, w.data(), pre.data(), rows, m, n);
  for (std::size_t i = 0; i < act.size(); ++i) act[i] = activate(kind, pre[i]);
  if (keep_pre) *keep_pre = std::move(pre);
  return act;
}

// g *= activation'(pre, act), where pre may be absent for tanh.
void apply_activation_grad(Activation kind, const NdArray& pre, const NdArray& act, NdArray& g) {
  if (kind == Activation::tanh) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - act[i] * act[i];
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= activate_grad(kind, pre[i], act[i]);
  }
}

void check_input(const MlpSpec& spec, const NdArray& x, const std::string& prefix) {
  if (x.ndim() != 2 || x.dim(1) != spec.in_dim)
    throw ShapeError("mlp_forward(" + prefix + "): input shape " + x.shape_str() +
                     " does not match in_dim " + std::to_string(spec.in_dim));
}

}  // namespace

void mlp_init(ParamStore& params, const MlpSpec& spec, const std::string& prefix, SeededRng& rng) {
  spec.validate();
  const auto dims = spec.layer_dims();
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    NdArray& w = params.add(wname(prefix, l), {dims[l], dims[l + 1]});
    const double s = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-s, s);
    params.add(bname(prefix, l), {dims[l + 1]});
  }
}

NdArray mlp_forward(const ParamStore& params, const MlpSpec& spec, const std::string& prefix,
                    const NdArray& x, MlpCache* cache) {
  check_input(spec, x, prefix);
  const auto dims = spec.layer_dims();
  const std::size_t layers = dims.size() - 1;
  const std::size_t rows = x.dim(0);

  if (cache) {
    cache->forward_done = true;
    cache->input = x;
    cache->pre.assign(layers - 1, NdArray());
    cache->act.assign(layers - 1, NdArray());
    cache->select.clear();
  }

  const NdArray* h = &x;
  NdArray scratch;
  const bool keep_pre = cache && spec.activation != Activation::tanh;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    const NdArray& w = params.value(wname(prefix, l));
    const NdArray& b = params.value(bname(prefix, l));
    if (w.dim(0) != dims[l] || w.dim(1) != dims[l + 1])
      throw ShapeError("mlp_forward(" + prefix + "): layer " + std::to_string(l) +
                       " weight shape " + w.shape_str() + " does not match spec");
    NdArray act = hidden_layer(h->data(), rows, dims[l], w, b, spec.activation,
                               keep_pre ? &cache->pre[l] : nullptr);
    if (cache) {
      cache->act[l] = std::move(act);
      h = &cache->act[l];
    } else {
      scratch = std::move(act);
      h = &scratch;
    }
  }

  const std::size_t last = layers - 1;
  const NdArray& w = params.value(wname(prefix, last));
  const NdArray& b = params.value(bname(prefix, last));
  if (w.dim(0) != dims[last] || w.dim(1) != dims[last + 1])
    throw ShapeError("mlp_forward(" + prefix + "): output layer weight shape " + w.shape_str() +
                     " does not match spec");
  NdArray out({rows, dims[last + 1]});
  for (std::size_t r = 0; r < rows; ++r)
    std::memcpy(out.data() + r * dims[last + 1], b.data(), dims[last + 1] * sizeof(double));
  matmul_acc(h->data(), w.data(), out.data(), rows, dims[last], dims[last + 1]);
  return out;
}

NdArray mlp_backward(ParamStore& params, const MlpSpec& spec, const std::string& prefix,
                     MlpCache& cache, const NdArray& upstream) {
  if (!cache.forward_done)
    throw ShapeError("mlp_backward(" + prefix + "): backward called without forward");
  if (!cache.select.empty())
    throw ShapeError("mlp_backward(" + prefix + "): cache comes from the select path");
  const auto dims = spec.layer_dims();
  const std::size_t layers = dims.size() - 1;
  const std::size_t rows = cache.input.dim(0);
  if (upstream.ndim() != 2 || upstream.dim(0) != rows || upstream.dim(1) != spec.out_dim)
    throw ShapeError("mlp_backward(" + prefix + "): upstream shape " + upstream.shape_str());

  NdArray g = upstream;
  for (std::size_t l = layers; l-- > 0;) {
    const NdArray& in = (l == 0) ? cache.input : cache.act[l - 1];
    Param& w = params.at(wname(prefix, l));
    Param& b = params.at(bname(prefix, l));
    weight_grads(in.data(), g.data(), w.grad.data(), b.grad.data(), rows, dims[l], dims[l + 1]);
    NdArray dh({rows, dims[l]});
    input_grads(g.data(), w.value.data(), dh.data(), rows, dims[l + 1], dims[l]);
    if (l == 0) return dh;
    apply_activation_grad(spec.activation, cache.pre[l - 1], cache.act[l - 1], dh);
    g = std::move(dh);
  }
  return NdArray();  // unreachable
}

NdArray mlp_forward_select(const ParamStore& params, const MlpSpec& spec,
                           const std::string& prefix, const NdArray& x,
                           std::span<const std::uint32_t> select, MlpCache* cache) {
  check_input(spec, x, prefix);
  const std::size_t rows = x.dim(0);
  if (select.size() != rows)
    throw ShapeError("mlp_forward_select(" + prefix + "): selection length mismatch");
  const auto dims = spec.layer_dims();
  const std::size_t layers = dims.size() - 1;

  if (cache) {
    cache->forward_done = true;
    cache->input = x;
    cache->pre.assign(layers - 1, NdArray());
    cache->act.assign(layers - 1, NdArray());
    cache->select.assign(select.begin(), select.end());
  }

  // Hidden layers are dense; the final layer computes one output per row.
  const NdArray* h = &x;
  NdArray owned;
  const bool keep_pre = cache && spec.activation != Activation::tanh;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    const NdArray& w = params.value(wname(prefix, l));
    const NdArray& b = params.value(bname(prefix, l));
    NdArray act = hidden_layer(h->data(), rows, dims[l], w, b, spec.activation,
                               keep_pre ? &cache->pre[l] : nullptr);
    if (cache) {
      cache->act[l] = std::move(act);
      h = &cache->act[l];
    } else {
      owned = std::move(act);
      h = &owned;
    }
  }

  const std::size_t last = layers - 1;
  const NdArray& w = params.value(wname(prefix, last));
  const NdArray& b = params.value(bname(prefix, last));
  const std::size_t m = dims[last];
  const std::size_t n = dims[last + 1];
  // transpose the output weights once so each row reads a contiguous column
  std::vector<double> wt(n * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) wt[k * m + i] = w[i * n + k];
  NdArray out({rows});
  const double* hp = h->data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint32_t k = select[r];
    if (k >= n) throw ShapeError("mlp_forward_select(" + prefix + "): selection out of range");
    const double* hr = hp + r * m;
    const double* wk = wt.data() + k * m;
    double acc = b[k];
    for (std::size_t i = 0; i < m; ++i) acc += hr[i] * wk[i];
    out[r] = acc;
  }
  return out;
}

NdArray mlp_backward_select(ParamStore& params, const MlpSpec& spec, const std::string& prefix,
                            MlpCache& cache, std::span<const double> upstream) {
  if (!cache.forward_done)
    throw ShapeError("mlp_backward_select(" + prefix + "): backward called without forward");
  const std::size_t rows = cache.input.dim(0);
  if (cache.select.size() != rows || upstream.size() != rows)
    throw ShapeError("mlp_backward_select(" + prefix + "): row count mismatch");
  const auto dims = spec.layer_dims();
  const std::size_t layers = dims.size() - 1;
  const std::size_t last = layers - 1;
  const std::size_t m = dims[last];
  const std::size_t n = dims[last + 1];

  Param& w = params.at(wname(prefix, last));
  Param& b = params.at(bname(prefix, last));
  const NdArray& h = (last == 0) ? cache.input : cache.act[last - 1];

  // transposed copies: contiguous column reads and a local grad accumulator
  // that is scattered back once at the end
  std::vector<double> wt(n * m), dwt(n * m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) wt[k * m + i] = w.value[i * n + k];

  NdArray g({rows, m});
  const double* hp = h.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint32_t k = cache.select[r];
    const double gr = upstream[r];
    const double* hr = hp + r * m;
    const double* wk = wt.data() + k * m;
    double* dwk = dwt.data() + k * m;
    double* dr = g.data() + r * m;
    b.grad[k] += gr;
    for (std::size_t i = 0; i < m; ++i) {
      dwk[i] += gr * hr[i];
      dr[i] = gr * wk[i];
    }
  }
  double* dwp = w.grad.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) dwp[i * n + k] += dwt[k * m + i];
  if (last == 0) return g;

  for (std::size_t l = last; l-- > 0;) {
    apply_activation_grad(spec.activation, cache.pre[l], cache.act[l], g);
    const NdArray& in = (l == 0) ? cache.input : cache.act[l - 1];
    Param& wl = params.at(wname(prefix, l));
    Param& bl = params.at(bname(prefix, l));
    weight_grads(in.data(), g.data(), wl.grad.data(), bl.grad.data(), rows, dims[l], dims[l + 1]);
    NdArray dh({rows, dims[l]});
    input_grads(g.data(), wl.value.data(), dh.data(), rows, dims[l + 1], dims[l]);
    if (l == 0) return dh;
    g = std::move(dh);
  }
  return NdArray();  // unreachable
}

GradCheckReport grad_check(const std::function<double(bool)>& objective, ParamStore& params,
                           double tolerance, double step, std::size_t max_per_param) {
  params.zero_grads();
  objective(true);

  // Snapshot analytic gradients; FD evaluations must not see stale grads.
  std::vector<NdArray> analytic;
  analytic.reserve(params.entries().size());
  for (auto& p : params.entries()) analytic.push_back(p.grad);
  params.zero_grads();

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.entries().size(); ++pi) {
    Param& p = params.entries()[pi];
    const std::size_t n = p.value.size();
    const std::size_t m = (max_per_param == 0 || max_per_param >= n) ? n : max_per_param;
    for (std::size_t s = 0; s < m; ++s) {
      const std::size_t i = (m == n) ? s : (s * n) / m;
      const double old = p.value[i];
      p.value[i] = old + step;
      const double fp = objective(false);
      p.value[i] = old - step;
      const double fm = objective(false);
      p.value[i] = old;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p.name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  report.pass = report.max_rel_err <= tolerance;
  return report;
}

}  // namespace basiscluster
