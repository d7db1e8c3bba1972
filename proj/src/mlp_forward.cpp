#include "sobolev_td/kernels/mlp_forward.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace sobolev_td::kernels {

namespace {

constexpr std::size_t kBlock = 64;

void check_sizes(const MlpCritic& model, std::span<const double> params, std::span<const double> inputs,
                 std::span<double> out) {
  if (params.size() != model.num_params()) throw std::invalid_argument("mlp_values: parameter size mismatch");
  if (inputs.size() != out.size() * model.input_dim()) throw std::invalid_argument("mlp_values: input size mismatch");
}

void forward_block(const MlpCritic& model, std::span<const double> params, const double* inputs, std::size_t n,
                   double* out) {
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
  const auto cols = static_cast<Eigen::Index>(n);
  thread_local Mat h;
  thread_local Mat z;
  h = Eigen::Map<const Mat>(inputs, static_cast<Eigen::Index>(model.input_dim()), cols);
  const auto& layers = model.layers();
  const double slope = model.slope();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const Eigen::Map<const Mat> w(params.data() + L.w_off, static_cast<Eigen::Index>(L.out),
                                  static_cast<Eigen::Index>(L.in));
    const Eigen::Map<const Eigen::VectorXd> b(params.data() + L.b_off, static_cast<Eigen::Index>(L.out));
    z.noalias() = w * h;
    z.colwise() += b;
    if (l + 1 < layers.size()) {
      // max(v, slope * v) is leaky relu for 0 < slope < 1.
      h = z.cwiseMax(slope * z);
    }
  }
  std::copy_n(z.data(), n, out);
}

}  // namespace

void mlp_values_serial(const MlpCritic& model, std::span<const double> params, std::span<const double> inputs,
                       std::span<double> out) {
  check_sizes(model, params, inputs, out);
  const std::size_t d = model.input_dim();
  const auto& layers = model.layers();
  std::vector<double> h;
  std::vector<double> z;
  for (std::size_t c = 0; c < out.size(); ++c) {
    h.assign(inputs.begin() + static_cast<std::ptrdiff_t>(c * d), inputs.begin() + static_cast<std::ptrdiff_t>((c + 1) * d));
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      z.assign(L.out, 0.0);
      for (std::size_t i = 0; i < L.out; ++i) {
        double acc = params[L.b_off + i];
        for (std::size_t j = 0; j < L.in; ++j) acc += params[L.w_off + j * L.out + i] * h[j];
        z[i] = acc;
      }
      if (l + 1 < layers.size()) {
        for (double& v : z) v = v >= 0.0 ? v : model.slope() * v;
      }
      h.swap(z);
    }
    out[c] = h[0];
  }
}

void mlp_values_omp(const MlpCritic& model, std::span<const double> params, std::span<const double> inputs,
                    std::span<double> out) {
  check_sizes(model, params, inputs, out);
  const std::size_t d = model.input_dim();
  const std::size_t n = out.size();
  const auto blocks = static_cast<std::ptrdiff_t>((n + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t start = static_cast<std::size_t>(blk) * kBlock;
    const std::size_t len = std::min(kBlock, n - start);
    forward_block(model, params, inputs.data() + start * d, len, out.data() + start);
  }
}

void mlp_loss_batched(const MlpCritic& model, std::span<const double> params, std::span<const double> inputs,
                      std::span<const double> y, std::span<const double> dy, double lambda_s, double lambda_a,
                      bool tangents, std::span<double> terms, std::span<double> grad) {
  using Mat = Eigen::MatrixXd;
  using Idx = Eigen::Index;
  const std::size_t n = y.size();
  const std::size_t d = model.input_dim();
  const std::size_t ds = model.state_dim();
  if (n == 0) throw std::invalid_argument("mlp_loss_batched: empty batch");
  if (params.size() != model.num_params() || grad.size() != params.size()) {
    throw std::invalid_argument("mlp_loss_batched: parameter size mismatch");
  }
  if (inputs.size() != d * n || terms.size() != n || (tangents && dy.size() != d * n)) {
    throw std::invalid_argument("mlp_loss_batched: batch size mismatch");
  }
  const auto& layers = model.layers();
  const std::size_t nl = layers.size();
  const double slope = model.slope();
  const Idx cols = static_cast<Idx>(n);
  const Idx tcols = tangents ? static_cast<Idx>(d * n) : 0;

  // h[l], ht[l]: input of layer l and its tangents (block j holds d/dx_j).
  std::vector<Mat> h(nl);
  std::vector<Mat> ht(nl);
  std::vector<Mat> mask(nl);
  h[0] = Eigen::Map<const Mat>(inputs.data(), static_cast<Idx>(d), cols);
  ht[0] = Mat::Zero(static_cast<Idx>(d), tcols);
  if (tangents) {
    for (std::size_t j = 0; j < d; ++j) ht[0].block(static_cast<Idx>(j), static_cast<Idx>(j * n), 1, cols).setOnes();
  }
  Mat z;
  Mat zt;
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& L = layers[l];
    const Eigen::Map<const Mat> w(params.data() + L.w_off, static_cast<Idx>(L.out), static_cast<Idx>(L.in));
    const Eigen::Map<const Eigen::VectorXd> b(params.data() + L.b_off, static_cast<Idx>(L.out));
    z.noalias() = w * h[l];
    z.colwise() += b;
    if (tangents) zt.noalias() = w * ht[l];
    if (l + 1 == nl) break;
    mask[l] = (z.array() >= 0.0).select(Mat::Ones(z.rows(), z.cols()), slope);
    h[l + 1] = z.cwiseMax(slope * z);
    if (tangents) {
      ht[l + 1].resize(zt.rows(), zt.cols());
      for (std::size_t j = 0; j < d; ++j) {
        const Idx c0 = static_cast<Idx>(j * n);
        ht[l + 1].middleCols(c0, cols) = mask[l].cwiseProduct(zt.middleCols(c0, cols));
      }
    }
  }

  // Output seeds.
  Mat dz(1, cols);
  Mat dzt = Mat::Zero(1, tcols);
  const bool live = tangents && (lambda_s != 0.0 || lambda_a != 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Idx c = static_cast<Idx>(i);
    const double err = z(0, c) - y[i];
    dz(0, c) = value_seed(err, n);
    if (!tangents) {
      terms[i] = err * err;
      continue;
    }
    double grad_s = 0.0;
    double grad_a = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const Idx tc = static_cast<Idx>(j * n + i);
      const double e = zt(0, tc) - dy[i * d + j];
      const double lam = j < ds ? lambda_s : lambda_a;
      (j < ds ? grad_s : grad_a) += e * e;
      dzt(0, tc) = 2.0 * lam * e / static_cast<double>(n);
    }
    terms[i] = err * err + lambda_s * grad_s + lambda_a * grad_a;
  }

  // Reductions go into owned (aligned) temporaries and are then added
  // elementwise: Eigen's vectorized reductions into a Map sum in an order
  // that depends on the Map's address, and grad is caller memory.
  Mat dh;
  Mat dht;
  Mat gw_tmp;
  Eigen::VectorXd gb_tmp;
  for (std::size_t l = nl; l-- > 0;) {
    const auto& L = layers[l];
    const Eigen::Map<const Mat> w(params.data() + L.w_off, static_cast<Idx>(L.out), static_cast<Idx>(L.in));
    Eigen::Map<Mat> gw(grad.data() + L.w_off, static_cast<Idx>(L.out), static_cast<Idx>(L.in));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + L.b_off, static_cast<Idx>(L.out));
    gw_tmp.noalias() = dz * h[l].transpose();
    if (live) gw_tmp.noalias() += dzt * ht[l].transpose();
    gw += gw_tmp;
    gb_tmp.noalias() = dz.rowwise().sum();
    gb += gb_tmp;
    if (l == 0) break;
    dh.noalias() = w.transpose() * dz;
    dz = mask[l - 1].cwiseProduct(dh);
    if (live) {
      dht.noalias() = w.transpose() * dzt;
      dzt.resize(dht.rows(), dht.cols());
      for (std::size_t j = 0; j < d; ++j) {
        const Idx c0 = static_cast<Idx>(j * n);
        dzt.middleCols(c0, cols) = mask[l - 1].cwiseProduct(dht.middleCols(c0, cols));
      }
    }
  }
}

}  // namespace sobolev_td::kernels
