#include "sobolev_td/critics/critic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "sobolev_td/diff/dense_ops.hpp"
#include "sobolev_td/kernels/mlp_forward.hpp"

namespace sobolev_td {

namespace {

using dense::ConstMatMap;
using dense::ConstVecMap;
using dense::MatMap;
using dense::VecMap;

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

void quadratic_features(double s, double a, double* f) {
  f[0] = s;
  f[1] = a;
  f[2] = s * s;
  f[3] = s * a;
  f[4] = a * a;
}

}  // namespace

// ---- QuadraticCritic -------------------------------------------------------

FlatParams QuadraticCritic::init_params(std::uint64_t /*seed*/) const {
  FlatParams p;
  p.add_segment("theta", kNumParams);
  return p;
}

ParamTape::NodeId QuadraticCritic::record(ParamTape& tape, ParamTape::NodeId input) const {
  const auto s = tape.slice(input, 0, 1);
  const auto a = tape.slice(input, 1, 1);
  const ParamTape::NodeId parts[] = {s, a, tape.mul(s, s), tape.mul(s, a), tape.mul(a, a)};
  // theta_0 is the bias, theta_1..theta_5 the 1x5 weight row.
  return tape.affine(tape.concat(parts), 1, 0, 1);
}

CriticEval QuadraticCritic::eval(std::span<const double> params, std::span<const double> s,
                                 std::span<const double> a) const {
  check_dims(s, a);
  const double* t = params.data();
  const double x = s[0];
  const double u = a[0];
  CriticEval e;
  e.q = t[0] + t[1] * x + t[2] * u + t[3] * x * x + t[4] * x * u + t[5] * u * u;
  e.gs = Eigen::VectorXd::Constant(1, t[1] + 2.0 * t[3] * x + t[4] * u);
  e.ga = Eigen::VectorXd::Constant(1, t[2] + t[4] * x + 2.0 * t[5] * u);
  return e;
}

void QuadraticCritic::forward_plain(std::span<const double> params, std::span<const double> x,
                                    PlainCache& cache) const {
  cache.acts.resize(5);
  quadratic_features(x[0], x[1], cache.acts.data());
  double q = 0.0;
  dense::affine_value(ConstMatMap(params.data() + 1, 1, 5), ConstVecMap(params.data(), 1),
                      ConstVecMap(cache.acts.data(), 5), VecMap(&q, 1));
  cache.q = q;
}

void QuadraticCritic::backprop_plain(std::span<const double> params, std::span<const double> /*x*/,
                                     const PlainCache& cache, double seed, std::span<double> grad) const {
  double dx[5] = {0, 0, 0, 0, 0};
  dense::affine_backward_value(ConstMatMap(params.data() + 1, 1, 5), ConstVecMap(&seed, 1),
                               ConstVecMap(cache.acts.data(), 5), MatMap(grad.data() + 1, 1, 5),
                               VecMap(grad.data(), 1), VecMap(dx, 5));
}

void QuadraticCritic::values(std::span<const double> params, std::span<const double> inputs,
                             std::span<double> out) const {
  if (inputs.size() != 2 * out.size()) throw std::invalid_argument("QuadraticCritic::values: size mismatch");
  const double* t = params.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = inputs[2 * i];
    const double u = inputs[2 * i + 1];
    out[i] = t[0] + t[1] * x + t[2] * u + t[3] * x * x + t[4] * x * u + t[5] * u * u;
  }
}

// ---- MlpCritic -------------------------------------------------------------

MlpCritic::MlpCritic(std::size_t state_dim, std::size_t action_dim, std::size_t hidden_layers, std::size_t width,
                     double slope)
    : state_dim_(state_dim), action_dim_(action_dim), hidden_layers_(hidden_layers), width_(width), slope_(slope) {
  if (!(slope >= 0.0 && slope < 1.0)) throw std::invalid_argument("MlpCritic: slope must lie in [0, 1)");
  if (hidden_layers == 0 || width == 0) throw std::invalid_argument("MlpCritic: need at least one hidden unit");
  std::size_t in = state_dim + action_dim;
  std::size_t off = 0;
  for (std::size_t l = 0; l <= hidden_layers; ++l) {
    const std::size_t out = l == hidden_layers ? 1 : width;
    Layer layer{in, out, off, off + in * out};
    off = layer.b_off + out;
    layers_.push_back(layer);
    in = out;
  }
}

std::size_t MlpCritic::num_params() const {
  const Layer& last = layers_.back();
  return last.b_off + last.out;
}

FlatParams MlpCritic::init_params(std::uint64_t seed) const {
  FlatParams p;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    p.add_segment("w" + std::to_string(l), layers_[l].in * layers_[l].out);
    p.add_segment("b" + std::to_string(l), layers_[l].out);
  }
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layers_[l].in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : p.segment("w" + std::to_string(l))) w = dist(rng);
  }
  return p;
}

ParamTape::NodeId MlpCritic::record(ParamTape& tape, ParamTape::NodeId input) const {
  ParamTape::NodeId h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = tape.affine(h, layers_[l].w_off, layers_[l].b_off, layers_[l].out);
    if (l + 1 < layers_.size()) h = tape.leaky_relu(h, slope_);
  }
  return h;
}

// cache.acts holds, per hidden layer, the pre-activation followed by the
// activation, each of length width.
void MlpCritic::forward_plain(std::span<const double> params, std::span<const double> x, PlainCache& cache) const {
  cache.acts.resize(2 * hidden_layers_ * width_);
  const double* in = x.data();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    const ConstMatMap w(params.data() + L.w_off, idx(L.out), idx(L.in));
    const ConstVecMap b(params.data() + L.b_off, idx(L.out));
    if (l + 1 == layers_.size()) {
      double q = 0.0;
      dense::affine_value(w, b, ConstVecMap(in, idx(L.in)), VecMap(&q, 1));
      cache.q = q;
      break;
    }
    double* pre = cache.acts.data() + 2 * l * width_;
    double* post = pre + width_;
    dense::affine_value(w, b, ConstVecMap(in, idx(L.in)), VecMap(pre, idx(L.out)));
    for (std::size_t i = 0; i < width_; ++i) post[i] = pre[i] >= 0.0 ? pre[i] : slope_ * pre[i];
    in = post;
  }
}

void MlpCritic::backprop_plain(std::span<const double> params, std::span<const double> x, const PlainCache& cache,
                               double seed, std::span<double> grad) const {
  std::vector<double> dy{seed};
  std::vector<double> dx;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& L = layers_[l];
    const double* in = l == 0 ? x.data() : cache.acts.data() + (2 * (l - 1) + 1) * width_;
    dx.assign(L.in, 0.0);
    dense::affine_backward_value(ConstMatMap(params.data() + L.w_off, idx(L.out), idx(L.in)),
                                 ConstVecMap(dy.data(), idx(L.out)), ConstVecMap(in, idx(L.in)),
                                 MatMap(grad.data() + L.w_off, idx(L.out), idx(L.in)),
                                 VecMap(grad.data() + L.b_off, idx(L.out)), VecMap(dx.data(), idx(L.in)));
    if (l == 0) break;
    const double* pre = cache.acts.data() + 2 * (l - 1) * width_;
    dy.assign(L.in, 0.0);
    for (std::size_t i = 0; i < L.in; ++i) dy[i] += (pre[i] >= 0.0 ? 1.0 : slope_) * dx[i];
  }
}

void MlpCritic::values(std::span<const double> params, std::span<const double> inputs, std::span<double> out) const {
  kernels::mlp_values_omp(*this, params, inputs, out);
}

bool MlpCritic::batched_loss(std::span<const double> params, std::span<const double> inputs,
                             std::span<const double> y, std::span<const double> dy, double lambda_s, double lambda_a,
                             bool tangents, std::span<double> terms, std::span<double> grad) const {
  kernels::mlp_loss_batched(*this, params, inputs, y, dy, lambda_s, lambda_a, tangents, terms, grad);
  return true;
}

// ---- factory / dispatch ----------------------------------------------------

std::unique_ptr<CriticModel> make_critic(CriticKind kind, std::size_t state_dim, std::size_t action_dim,
                                         std::size_t hidden_layers) {
  switch (kind) {
    case CriticKind::Quadratic:
      if (state_dim != 1 || action_dim != 1) throw std::invalid_argument("quadratic critic needs scalar s and a");
      return std::make_unique<QuadraticCritic>();
    case CriticKind::Mlp:
      return std::make_unique<MlpCritic>(state_dim, action_dim, hidden_layers);
  }
  throw std::invalid_argument("make_critic: unknown kind");
}

CriticEval critic_eval(const CriticModel& model, const FlatParams& params, std::span<const double> s,
                       std::span<const double> a) {
  return model.eval(params.values(), s, a);
}

// ---- LinearActor -----------------------------------------------------------

LinearActor::LinearActor(std::size_t state_dim, std::size_t action_dim)
    : gain_(Eigen::MatrixXd::Zero(idx(action_dim), idx(state_dim))) {}

LinearActor::LinearActor(Eigen::MatrixXd gain) : gain_(std::move(gain)) {}

FlatParams LinearActor::params() const {
  FlatParams p;
  p.add_segment("K", static_cast<std::size_t>(gain_.size()));
  std::copy(gain_.data(), gain_.data() + gain_.size(), p.values().begin());
  return p;
}

void LinearActor::set_params(const FlatParams& p) {
  if (p.size() != static_cast<std::size_t>(gain_.size())) throw std::invalid_argument("LinearActor: size mismatch");
  std::copy(p.values().begin(), p.values().end(), gain_.data());
}

LinearActor::Output LinearActor::eval(const Eigen::VectorXd& s) const {
  if (s.size() != gain_.cols()) throw std::invalid_argument("LinearActor: state dimension mismatch");
  return {gain_ * s, gain_};
}

LinearActor::Output actor_eval(const LinearActor& actor, const Eigen::VectorXd& s) { return actor.eval(s); }

}  // namespace sobolev_td
