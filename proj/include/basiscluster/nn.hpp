#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "basiscluster/ndarray.hpp"
#include "basiscluster/rng.hpp"

namespace basiscluster {

enum class Activation { tanh, softplus, relu };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Feed-forward net description: hidden layers carry the activation, the output
// layer is linear. hidden_dims may be empty (plain affine map).
struct MlpSpec {
  std::size_t in_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t out_dim = 0;
  Activation activation = Activation::tanh;

  std::vector<std::size_t> layer_dims() const;
  void validate() const;
};

struct Param {
  std::string name;
  NdArray value;
  NdArray grad;    // accumulated (+=); zeroed by adam_step / zero_grads
  NdArray adam_m;  // first-moment buffer
  NdArray adam_v;  // second-moment buffer
};

// Named parameter arrays with matching gradient and Adam moment buffers.
// Insertion order is stable, which the checkpoint format and Adam rely on.
class ParamStore {
 public:
  NdArray& add(const std::string& name, const std::vector<std::size_t>& shape);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  NdArray& value(const std::string& name) { return at(name).value; }
  const NdArray& value(const std::string& name) const { return at(name).value; }
  NdArray& grad(const std::string& name) { return at(name).grad; }

  std::vector<Param>& entries() { return params_; }
  const std::vector<Param>& entries() const { return params_; }
  std::size_t total_size() const;
  void zero_grads();

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool maximize = false;  // ascent on the stored gradients instead of descent
};

// One Adam update over every parameter with bias correction at 1-based step t.
// Throws NumericError naming the parameter on any non-finite gradient.
// Gradients are zeroed afterwards.
void adam_step(ParamStore& params, const AdamConfig& cfg, std::size_t t);

// mu + exp(0.5 * log_var) .* eps with eps ~ N(0, I) drawn row-major from rng.
// log_var is clamped to [-10, 10] before exponentiation. When eps_out is
// given the raw draws are stored there (needed for the backward chain).
NdArray reparam_sample(const NdArray& mu, const NdArray& log_var, SeededRng& rng,
                       NdArray* eps_out = nullptr);

// Forward bookkeeping needed by the backward pass.
struct MlpCache {
  bool forward_done = false;
  NdArray input;                      // rows x in_dim
  std::vector<NdArray> pre;           // hidden pre-activations
  std::vector<NdArray> act;           // hidden activations
  std::vector<std::uint32_t> select;  // per-row output index (select path only)
};

// Registers (and initializes) the weight/bias arrays "<prefix>.w<l>", "<prefix>.b<l>".
// Weights uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)), biases zero.
void mlp_init(ParamStore& params, const MlpSpec& spec, const std::string& prefix, SeededRng& rng);

// Dense forward: x is rows x in_dim, result rows x out_dim. Pass a cache to
// enable mlp_backward.
NdArray mlp_forward(const ParamStore& params, const MlpSpec& spec, const std::string& prefix,
                    const NdArray& x, MlpCache* cache = nullptr);

// Dense backward: accumulates parameter gradients and returns dL/dx.
NdArray mlp_backward(ParamStore& params, const MlpSpec& spec, const std::string& prefix,
                     MlpCache& cache, const NdArray& upstream);

// Select path: per row r only output component select[r] is computed.
// Used on the translation-invariant decoder path where each (i,j,k) row
// needs a single basis component.
NdArray mlp_forward_select(const ParamStore& params, const MlpSpec& spec,
                           const std::string& prefix, const NdArray& x,
                           std::span<const std::uint32_t> select, MlpCache* cache = nullptr);

NdArray mlp_backward_select(ParamStore& params, const MlpSpec& spec, const std::string& prefix,
                            MlpCache& cache, std::span<const double> upstream);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  bool pass = false;
};

// Central finite-difference check. `objective(true)` must evaluate the scalar
// loss AND accumulate analytic gradients into `params`; `objective(false)`
// evaluates the loss only. The objective must be deterministic across calls
// (freeze any sampling noise before entering).
// max_per_param = 0 checks every element; otherwise an evenly spread subset.
GradCheckReport grad_check(const std::function<double(bool)>& objective, ParamStore& params,
                           double tolerance, double step = 1e-5, std::size_t max_per_param = 0);

}  // namespace basiscluster
