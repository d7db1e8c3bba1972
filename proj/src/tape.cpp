#include "sobolev_td/diff/tape.hpp"

#include <algorithm>
#include <stdexcept>

#include "sobolev_td/diff/dense_ops.hpp"

namespace sobolev_td {

namespace {

using dense::ConstMatMap;
using dense::ConstVecMap;
using dense::MatMap;
using dense::VecMap;

bool all_zero(const double* p, std::size_t n) {
  return std::all_of(p, p + n, [](double v) { return v == 0.0; });
}

}  // namespace

ParamTape::ParamTape(std::span<const double> params, std::size_t tangent_dim)
    : params_(params), d_(tangent_dim) {}

void ParamTape::clear() {
  nodes_.clear();
  data_.clear();
  concat_parts_.clear();
}

void ParamTape::rebind(std::span<const double> params) {
  if (!nodes_.empty() && params.size() != params_.size()) {
    throw std::invalid_argument("ParamTape::rebind: parameter count changed under recorded nodes");
  }
  params_ = params;
}

ParamTape::NodeId ParamTape::push(Node node) {
  node.val_off = data_.size();
  data_.resize(data_.size() + node.k * (1 + d_), 0.0);
  nodes_.push_back(node);
  return static_cast<NodeId>(nodes_.size() - 1);
}

ParamTape::NodeId ParamTape::input(std::span<const double> values, std::span<const double> tangents) {
  if (tangents.size() != values.size() * d_) {
    throw std::invalid_argument("ParamTape::input: tangent block has wrong size");
  }
  Node n;
  n.op = Op::Input;
  n.k = values.size();
  const NodeId id = push(n);
  std::copy(values.begin(), values.end(), val(nodes_[id]));
  std::copy(tangents.begin(), tangents.end(), tan(nodes_[id]));
  return id;
}

ParamTape::NodeId ParamTape::seeded_input(std::span<const double> values) {
  if (values.size() != d_) throw std::invalid_argument("ParamTape::seeded_input: need one value per tangent");
  std::vector<double> eye(d_ * d_, 0.0);
  for (std::size_t i = 0; i < d_; ++i) eye[i * d_ + i] = 1.0;
  return input(values, eye);
}

ParamTape::NodeId ParamTape::slice(NodeId x, std::size_t offset, std::size_t len) {
  if (offset + len > nodes_.at(x).k) throw std::invalid_argument("ParamTape::slice: out of range");
  Node n;
  n.op = Op::Slice;
  n.a = x;
  n.k = len;
  n.aux0 = offset;
  const NodeId id = push(n);
  evaluate(nodes_[id]);
  return id;
}

ParamTape::NodeId ParamTape::concat(std::span<const NodeId> parts) {
  Node n;
  n.op = Op::Concat;
  n.aux0 = concat_parts_.size();
  n.aux1 = parts.size();
  for (NodeId p : parts) {
    n.k += nodes_.at(p).k;
    concat_parts_.push_back(p);
  }
  const NodeId id = push(n);
  evaluate(nodes_[id]);
  return id;
}

ParamTape::NodeId ParamTape::add(NodeId x, NodeId y) {
  if (nodes_.at(x).k != nodes_.at(y).k) throw std::invalid_argument("ParamTape::add: size mismatch");
  Node n;
  n.op = Op::Add;
  n.a = x;
  n.b = y;
  n.k = nodes_[x].k;
  const NodeId id = push(n);
  evaluate(nodes_[id]);
  return id;
}

ParamTape::NodeId ParamTape::mul(NodeId x, NodeId y) {
  if (nodes_.at(x).k != nodes_.at(y).k) throw std::invalid_argument("ParamTape::mul: size mismatch");
  Node n;
  n.op = Op::Mul;
  n.a = x;
  n.b = y;
  n.k = nodes_[x].k;
  const NodeId id = push(n);
  evaluate(nodes_[id]);
  return id;
}

ParamTape::NodeId ParamTape::affine(NodeId x, std::size_t weight_offset, std::size_t bias_offset,
                                    std::size_t out_dim) {
  const std::size_t in = nodes_.at(x).k;
  if (weight_offset + out_dim * in > params_.size() || bias_offset + out_dim > params_.size()) {
    throw std::invalid_argument("ParamTape::affine: parameter range out of bounds");
  }
  Node n;
  n.op = Op::Affine;
  n.a = x;
  n.k = out_dim;
  n.aux0 = weight_offset;
  n.aux1 = bias_offset;
  const NodeId id = push(n);
  evaluate(nodes_[id]);
  return id;
}

ParamTape::NodeId ParamTape::leaky_relu(NodeId x, double slope) {
  Node n;
  n.op = Op::LeakyRelu;
  n.a = x;
  n.k = nodes_.at(x).k;
  n.slope = slope;
  const NodeId id = push(n);
  evaluate(nodes_[id]);
  return id;
}

void ParamTape::evaluate(const Node& n) {
  const std::size_t k = n.k;
  double* v = val(n);
  double* t = tan(n);
  switch (n.op) {
    case Op::Input:
      break;
    case Op::Slice: {
      const Node& x = nodes_[n.a];
      std::copy_n(val(x) + n.aux0, k, v);
      for (std::size_t j = 0; j < d_; ++j) std::copy_n(tan(x) + j * x.k + n.aux0, k, t + j * k);
      break;
    }
    case Op::Concat: {
      std::size_t row = 0;
      for (std::size_t p = 0; p < n.aux1; ++p) {
        const Node& x = nodes_[concat_parts_[n.aux0 + p]];
        std::copy_n(val(x), x.k, v + row);
        for (std::size_t j = 0; j < d_; ++j) std::copy_n(tan(x) + j * x.k, x.k, t + j * k + row);
        row += x.k;
      }
      break;
    }
    case Op::Add: {
      const Node& x = nodes_[n.a];
      const Node& y = nodes_[n.b];
      for (std::size_t i = 0; i < k * (1 + d_); ++i) v[i] = val(x)[i] + val(y)[i];
      break;
    }
    case Op::Mul: {
      const double* xv = val(nodes_[n.a]);
      const double* yv = val(nodes_[n.b]);
      const double* xt = tan(nodes_[n.a]);
      const double* yt = tan(nodes_[n.b]);
      for (std::size_t i = 0; i < k; ++i) v[i] = xv[i] * yv[i];
      for (std::size_t j = 0; j < d_; ++j) {
        for (std::size_t i = 0; i < k; ++i) t[j * k + i] = xt[j * k + i] * yv[i] + xv[i] * yt[j * k + i];
      }
      break;
    }
    case Op::Affine: {
      const Node& x = nodes_[n.a];
      const ConstMatMap w(params_.data() + n.aux0, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(x.k));
      const ConstVecMap b(params_.data() + n.aux1, static_cast<Eigen::Index>(k));
      dense::affine_value(w, b, ConstVecMap(val(x), static_cast<Eigen::Index>(x.k)),
                          VecMap(v, static_cast<Eigen::Index>(k)));
      if (d_ > 0) {
        dense::linear_block(w, ConstMatMap(tan(x), static_cast<Eigen::Index>(x.k), static_cast<Eigen::Index>(d_)),
                            MatMap(t, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d_)));
      }
      break;
    }
    case Op::LeakyRelu: {
      const Node& x = nodes_[n.a];
      const double* xv = val(x);
      const double* xt = tan(x);
      for (std::size_t i = 0; i < k; ++i) {
        const double s = xv[i] >= 0.0 ? 1.0 : n.slope;
        v[i] = xv[i] >= 0.0 ? xv[i] : n.slope * xv[i];
        for (std::size_t j = 0; j < d_; ++j) t[j * k + i] = s * xt[j * k + i];
      }
      break;
    }
  }
}

void ParamTape::replay() {
  for (const Node& n : nodes_) evaluate(n);
}

std::span<const double> ParamTape::value(NodeId n) const { return {val(nodes_.at(n)), nodes_[n].k}; }

std::span<const double> ParamTape::tangents(NodeId n) const { return {tan(nodes_.at(n)), nodes_[n].k * d_}; }

void ParamTape::backward(NodeId out, std::span<const double> value_adjoint, std::span<const double> tangent_adjoint,
                         std::span<double> param_grad) const {
  const Node& o = nodes_.at(out);
  if (value_adjoint.size() != o.k || tangent_adjoint.size() != o.k * d_) {
    throw std::invalid_argument("ParamTape::backward: adjoint seed has wrong size");
  }
  if (param_grad.size() != params_.size()) throw std::invalid_argument("ParamTape::backward: gradient size mismatch");

  adjoint_.assign(data_.size(), 0.0);
  tangent_live_.assign(nodes_.size(), 0);
  std::copy(value_adjoint.begin(), value_adjoint.end(), adjoint_.begin() + static_cast<std::ptrdiff_t>(o.val_off));
  std::copy(tangent_adjoint.begin(), tangent_adjoint.end(),
            adjoint_.begin() + static_cast<std::ptrdiff_t>(o.val_off + o.k));
  tangent_live_[out] = all_zero(tangent_adjoint.data(), tangent_adjoint.size()) ? 0 : 1;

  auto adj_v = [&](const Node& n) { return adjoint_.data() + n.val_off; };
  auto adj_t = [&](const Node& n) { return adjoint_.data() + n.val_off + n.k; };

  for (std::size_t idx = out + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    const bool live = tangent_live_[idx] != 0;
    const std::size_t k = n.k;
    const double* gv = adj_v(n);
    const double* gt = adj_t(n);
    switch (n.op) {
      case Op::Input:
        break;
      case Op::Slice: {
        const Node& x = nodes_[n.a];
        for (std::size_t i = 0; i < k; ++i) adj_v(x)[n.aux0 + i] += gv[i];
        if (live) {
          for (std::size_t j = 0; j < d_; ++j) {
            for (std::size_t i = 0; i < k; ++i) adj_t(x)[j * x.k + n.aux0 + i] += gt[j * k + i];
          }
          tangent_live_[n.a] = 1;
        }
        break;
      }
      case Op::Concat: {
        std::size_t row = 0;
        for (std::size_t p = 0; p < n.aux1; ++p) {
          const NodeId pid = concat_parts_[n.aux0 + p];
          const Node& x = nodes_[pid];
          for (std::size_t i = 0; i < x.k; ++i) adj_v(x)[i] += gv[row + i];
          if (live) {
            for (std::size_t j = 0; j < d_; ++j) {
              for (std::size_t i = 0; i < x.k; ++i) adj_t(x)[j * x.k + i] += gt[j * k + row + i];
            }
            tangent_live_[pid] = 1;
          }
          row += x.k;
        }
        break;
      }
      case Op::Add: {
        for (NodeId pid : {n.a, n.b}) {
          const Node& x = nodes_[pid];
          for (std::size_t i = 0; i < k; ++i) adj_v(x)[i] += gv[i];
          if (live) {
            for (std::size_t i = 0; i < k * d_; ++i) adj_t(x)[i] += gt[i];
            tangent_live_[pid] = 1;
          }
        }
        break;
      }
      case Op::Mul: {
        const Node& x = nodes_[n.a];
        const Node& y = nodes_[n.b];
        const double* xv = val(x);
        const double* yv = val(y);
        const double* xt = tan(x);
        const double* yt = tan(y);
        for (std::size_t i = 0; i < k; ++i) {
          adj_v(x)[i] += gv[i] * yv[i];
          adj_v(y)[i] += gv[i] * xv[i];
        }
        if (live) {
          for (std::size_t j = 0; j < d_; ++j) {
            for (std::size_t i = 0; i < k; ++i) {
              const double g = gt[j * k + i];
              adj_v(x)[i] += g * yt[j * k + i];
              adj_v(y)[i] += g * xt[j * k + i];
              adj_t(x)[j * k + i] += g * yv[i];
              adj_t(y)[j * k + i] += g * xv[i];
            }
          }
          tangent_live_[n.a] = 1;
          tangent_live_[n.b] = 1;
        }
        break;
      }
      case Op::Affine: {
        const Node& x = nodes_[n.a];
        const auto rows = static_cast<Eigen::Index>(k);
        const auto cols = static_cast<Eigen::Index>(x.k);
        const ConstMatMap w(params_.data() + n.aux0, rows, cols);
        MatMap dw(param_grad.data() + n.aux0, rows, cols);
        VecMap db(param_grad.data() + n.aux1, rows);
        dense::affine_backward_value(w, ConstVecMap(gv, rows), ConstVecMap(val(x), cols), dw, db,
                                     VecMap(adj_v(x), cols));
        if (live && d_ > 0) {
          const auto dd = static_cast<Eigen::Index>(d_);
          dense::linear_backward_block(w, ConstMatMap(gt, rows, dd), ConstMatMap(tan(x), cols, dd), dw,
                                       MatMap(adj_t(x), cols, dd));
          tangent_live_[n.a] = 1;
        }
        break;
      }
      case Op::LeakyRelu: {
        // The activation is piecewise linear, so tangents see no curvature.
        const Node& x = nodes_[n.a];
        const double* xv = val(x);
        for (std::size_t i = 0; i < k; ++i) {
          const double s = xv[i] >= 0.0 ? 1.0 : n.slope;
          adj_v(x)[i] += s * gv[i];
          if (live) {
            for (std::size_t j = 0; j < d_; ++j) adj_t(x)[j * k + i] += s * gt[j * k + i];
          }
        }
        if (live) tangent_live_[n.a] = 1;
        break;
      }
    }
  }
}

}  // namespace sobolev_td
