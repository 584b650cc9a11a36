#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "unigen/param_set.hpp"
#include "unigen/rng.hpp"
#include "unigen/tape.hpp"

namespace unigen {

enum class Activation { Tanh, Relu };
enum class HeadKind { Linear, Sigmoid, GaussianParams };

struct MlpSpec {
  std::vector<std::size_t> widths;  // input width first, raw output width last
  Activation activation = Activation::Tanh;
  HeadKind head = HeadKind::Linear;
};

/// Fully connected network. Parameters live in a ParamSet under
/// "<prefix>.W<i>" / "<prefix>.b<i>"; the Mlp itself is an immutable
/// architecture description.
class Mlp {
 public:
  Mlp(MlpSpec spec, std::string prefix);

  const MlpSpec& spec() const { return spec_; }
  const std::string& prefix() const { return prefix_; }
  std::size_t in_dim() const { return spec_.widths.front(); }
  std::size_t out_dim() const { return spec_.widths.back(); }
  /// Latent width of a gaussian-params head (raw width halved).
  std::size_t gaussian_dim() const;
  std::size_t n_layers() const { return spec_.widths.size() - 1; }

  std::vector<std::string> param_names() const;
  /// Scaled-uniform fan-in init (weights U(±sqrt(3/fan_in)), zero biases),
  /// drawn deterministically from the given stream.
  void init_params(ParamSet& params, RngStream& rng) const;

  nlohmann::json card() const;

 private:
  MlpSpec spec_;
  std::string prefix_;
};

/// Per-tape binding of an Mlp's parameters. Bind once per tape and reuse for
/// every forward pass on that tape so gradients accumulate into one leaf per
/// parameter; tracked=false binds constants (frozen parameters).
struct MlpVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
};
MlpVars bind_mlp(Tape& tape, const Mlp& net, const ParamSet& params, bool tracked);

/// Forward pass through hidden activations to the raw (pre-head) output.
Var mlp_raw(Tape& tape, const Mlp& net, const MlpVars& vars, const Var& x);

/// Gradients of the last backward() on this tape for every bound parameter.
GradMap collect_grads(Tape& tape, const Mlp& net, const MlpVars& vars);

/// Logit magnitude bound keeping probabilities inside [1e-7, 1-1e-7].
double logit_clamp_bound();

/// Generator forward: x = G(z), linear head.
Var generate(Tape& tape, const Mlp& gen, const MlpVars& vars, const Var& z);

/// Discriminator logits, clamped so downstream probabilities stay inside
/// [1e-7, 1-1e-7]; shape [B].
Var disc_logits(Tape& tape, const Mlp& disc, const MlpVars& vars, const Var& x);

/// q(y=1|x) = sigmoid of the clamped logits; shape [B], values in (0,1).
Var discriminate(Tape& tape, const Mlp& disc, const MlpVars& vars, const Var& x);

struct GaussianParamsOut {
  Var mean;
  Var logvar;  // clamped to [-20, 4]
};
/// Splits a gaussian-params head into mean and clamped log-variance.
GaussianParamsOut encode_gaussian(Tape& tape, const Mlp& enc, const MlpVars& vars, const Var& x);

struct ReparamSample {
  Var z;
  Var mean;
  Var logvar;
  Tensor eps;  // the injected standard-normal draws
};
/// z = mean + exp(logvar/2)·eps with eps ~ N(0,I) from the stream;
/// differentiable through mean and logvar only.
ReparamSample encode_reparam(Tape& tape, const Mlp& enc, const MlpVars& vars, const Var& x,
                             RngStream& rng);
/// Test hook: same computation with caller-supplied eps.
ReparamSample encode_reparam_with_eps(Tape& tape, const Mlp& enc, const MlpVars& vars,
                                      const Var& x, Tensor eps);

/// Per-example Bernoulli log-likelihood Σ_d x·log σ(l) + (1−x)·log(1−σ(l)),
/// stabilized via fused log-sigmoid on clamped logits; x must lie in [0,1].
Var bernoulli_loglik(Tape& tape, const Tensor& x, const Var& logits);

/// Per-example diagonal-Gaussian log-likelihood of target under (mean, logvar).
Var gaussian_loglik(Tape& tape, const Tensor& target, const Var& mean, const Var& logvar);

/// Per-example KL(N(mean, diag exp(logvar)) ‖ N(0, I)).
Var gaussian_kl_to_prior(Tape& tape, const Var& mean, const Var& logvar);

struct PriorSpec {
  enum class Kind { StandardNormal, UniformHypercube } kind = Kind::StandardNormal;
  std::size_t dim = 2;
};
/// n draws from the prior; uniform-hypercube means U(-1,1) per coordinate.
Tensor sample_prior(const PriorSpec& spec, std::size_t n, RngStream& rng);

}  // namespace unigen
