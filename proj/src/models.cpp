#include "unigen/models.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace unigen {
namespace {

constexpr double kLogvarLo = -20.0;
constexpr double kLogvarHi = 4.0;
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

const char* activation_name(Activation a) {
  return a == Activation::Tanh ? "tanh" : "relu";
}

const char* head_name(HeadKind h) {
  switch (h) {
    case HeadKind::Linear: return "linear";
    case HeadKind::Sigmoid: return "sigmoid";
    case HeadKind::GaussianParams: return "gaussian-params";
  }
  return "?";
}

}  // namespace

double logit_clamp_bound() {
  static const double bound = std::log((1.0 - 1e-7) / 1e-7);
  return bound;
}

Mlp::Mlp(MlpSpec spec, std::string prefix) : spec_(std::move(spec)), prefix_(std::move(prefix)) {
  if (spec_.widths.size() < 2) {
    throw std::invalid_argument("Mlp '" + prefix_ + "': need at least input and output widths");
  }
  for (std::size_t w : spec_.widths) {
    if (w == 0) throw std::invalid_argument("Mlp '" + prefix_ + "': zero layer width");
  }
  if (spec_.head == HeadKind::GaussianParams && spec_.widths.back() % 2 != 0) {
    throw std::invalid_argument("Mlp '" + prefix_ +
                                "': gaussian-params head needs an even output width");
  }
}

std::size_t Mlp::gaussian_dim() const {
  if (spec_.head != HeadKind::GaussianParams) {
    throw std::logic_error("Mlp '" + prefix_ + "': not a gaussian-params head");
  }
  return spec_.widths.back() / 2;
}

std::vector<std::string> Mlp::param_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_layers(); ++i) {
    names.push_back(prefix_ + ".W" + std::to_string(i));
    names.push_back(prefix_ + ".b" + std::to_string(i));
  }
  return names;
}

void Mlp::init_params(ParamSet& params, RngStream& rng) const {
  for (std::size_t i = 0; i < n_layers(); ++i) {
    const std::size_t fan_in = spec_.widths[i];
    const std::size_t fan_out = spec_.widths[i + 1];
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    Tensor w({fan_in, fan_out});
    for (double& x : w.data()) x = rng.uniform(-bound, bound);
    params.add(prefix_ + ".W" + std::to_string(i), std::move(w));
    params.add(prefix_ + ".b" + std::to_string(i), Tensor::zeros({fan_out}));
  }
}

nlohmann::json Mlp::card() const {
  return nlohmann::json{{"prefix", prefix_},
                        {"widths", spec_.widths},
                        {"activation", activation_name(spec_.activation)},
                        {"head", head_name(spec_.head)}};
}

MlpVars bind_mlp(Tape& tape, const Mlp& net, const ParamSet& params, bool tracked) {
  MlpVars vars;
  for (std::size_t i = 0; i < net.n_layers(); ++i) {
    const Tensor& w = params.value(net.prefix() + ".W" + std::to_string(i));
    const Tensor& b = params.value(net.prefix() + ".b" + std::to_string(i));
    vars.weights.push_back(tracked ? tape.leaf(w) : Tape::constant(w));
    vars.biases.push_back(tracked ? tape.leaf(b) : Tape::constant(b));
  }
  return vars;
}

Var mlp_raw(Tape& tape, const Mlp& net, const MlpVars& vars, const Var& x) {
  if (x.value.rank() != 2 || x.value.cols() != net.in_dim()) {
    throw std::invalid_argument("mlp_raw: '" + net.prefix() + "' expects [B," +
                                std::to_string(net.in_dim()) + "] input, got " +
                                shape_str(x.value.shape()));
  }
  Var h = x;
  for (std::size_t i = 0; i < net.n_layers(); ++i) {
    h = tape.add(tape.matmul(h, vars.weights[i]), vars.biases[i]);
    if (i + 1 < net.n_layers()) {
      h = net.spec().activation == Activation::Tanh ? tape.tanh(h) : tape.relu(h);
    }
  }
  return h;
}

GradMap collect_grads(Tape& tape, const Mlp& net, const MlpVars& vars) {
  GradMap grads;
  for (std::size_t i = 0; i < net.n_layers(); ++i) {
    grads[net.prefix() + ".W" + std::to_string(i)] = tape.grad(vars.weights[i]);
    grads[net.prefix() + ".b" + std::to_string(i)] = tape.grad(vars.biases[i]);
  }
  return grads;
}

Var generate(Tape& tape, const Mlp& gen, const MlpVars& vars, const Var& z) {
  return mlp_raw(tape, gen, vars, z);
}

Var disc_logits(Tape& tape, const Mlp& disc, const MlpVars& vars, const Var& x) {
  if (disc.out_dim() != 1) {
    throw std::invalid_argument("disc_logits: '" + disc.prefix() + "' must have output width 1");
  }
  Var raw = mlp_raw(tape, disc, vars, x);
  const double bound = logit_clamp_bound();
  return tape.reshape(tape.clamp(raw, -bound, bound), {raw.value.rows()});
}

Var discriminate(Tape& tape, const Mlp& disc, const MlpVars& vars, const Var& x) {
  return tape.sigmoid(disc_logits(tape, disc, vars, x));
}

GaussianParamsOut encode_gaussian(Tape& tape, const Mlp& enc, const MlpVars& vars, const Var& x) {
  const std::size_t dim = enc.gaussian_dim();
  Var raw = mlp_raw(tape, enc, vars, x);
  GaussianParamsOut out;
  out.mean = tape.slice(raw, 1, 0, dim);
  out.logvar = tape.clamp(tape.slice(raw, 1, dim, dim), kLogvarLo, kLogvarHi);
  return out;
}

ReparamSample encode_reparam_with_eps(Tape& tape, const Mlp& enc, const MlpVars& vars,
                                      const Var& x, Tensor eps) {
  GaussianParamsOut p = encode_gaussian(tape, enc, vars, x);
  if (!eps.same_shape(p.mean.value)) {
    throw std::invalid_argument("encode_reparam: eps shape " + shape_str(eps.shape()) +
                                " does not match mean shape " + shape_str(p.mean.value.shape()));
  }
  ReparamSample s;
  s.eps = eps;
  Var std_dev = tape.exp(tape.scale(p.logvar, 0.5));
  s.z = tape.add(p.mean, tape.mul(std_dev, Tape::constant(std::move(eps))));
  s.mean = p.mean;
  s.logvar = p.logvar;
  return s;
}

ReparamSample encode_reparam(Tape& tape, const Mlp& enc, const MlpVars& vars, const Var& x,
                             RngStream& rng) {
  Tensor eps({x.value.rows(), enc.gaussian_dim()});
  for (double& e : eps.data()) e = rng.normal();
  return encode_reparam_with_eps(tape, enc, vars, x, std::move(eps));
}

Var bernoulli_loglik(Tape& tape, const Tensor& x, const Var& logits) {
  if (!x.same_shape(logits.value)) {
    throw std::invalid_argument("bernoulli_loglik: shapes " + shape_str(x.shape()) + " and " +
                                shape_str(logits.value.shape()) + " differ");
  }
  for (double v : x.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("bernoulli_loglik: target value " + std::to_string(v) +
                                  " outside [0,1]");
    }
  }
  const double bound = logit_clamp_bound();
  Var l = tape.clamp(logits, -bound, bound);
  Tensor one_minus = x;
  for (double& v : one_minus.data()) v = 1.0 - v;
  Var pos = tape.mul(Tape::constant(x), tape.logsigmoid(l));
  Var neg = tape.mul(Tape::constant(std::move(one_minus)), tape.logsigmoid(tape.neg(l)));
  return tape.sum_rows(tape.add(pos, neg));
}

Var gaussian_loglik(Tape& tape, const Tensor& target, const Var& mean, const Var& logvar) {
  if (!target.same_shape(mean.value) || !target.same_shape(logvar.value)) {
    throw std::invalid_argument("gaussian_loglik: shapes " + shape_str(target.shape()) + ", " +
                                shape_str(mean.value.shape()) + ", " +
                                shape_str(logvar.value.shape()) + " differ");
  }
  Var diff = tape.sub(Tape::constant(target), mean);
  Var sq = tape.mul(diff, diff);
  Var scaled = tape.mul(sq, tape.exp(tape.neg(logvar)));
  Var per_dim = tape.add(tape.add_scalar(logvar, kLog2Pi), scaled);
  return tape.scale(tape.sum_rows(per_dim), -0.5);
}

Var gaussian_kl_to_prior(Tape& tape, const Var& mean, const Var& logvar) {
  if (!mean.value.same_shape(logvar.value)) {
    throw std::invalid_argument("gaussian_kl_to_prior: mean " + shape_str(mean.value.shape()) +
                                " vs logvar " + shape_str(logvar.value.shape()));
  }
  Var per_dim = tape.sub(tape.add(tape.exp(logvar), tape.mul(mean, mean)),
                         tape.add_scalar(logvar, 1.0));
  return tape.scale(tape.sum_rows(per_dim), 0.5);
}

Tensor sample_prior(const PriorSpec& spec, std::size_t n, RngStream& rng) {
  if (spec.dim == 0) throw std::invalid_argument("sample_prior: dim must be positive");
  Tensor out({n, spec.dim});
  for (double& v : out.data()) {
    v = spec.kind == PriorSpec::Kind::StandardNormal ? rng.normal() : rng.uniform(-1.0, 1.0);
  }
  return out;
}

}  // namespace unigen
