#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sobolev_td {

/// Append-only record of a tangent-carrying computation over a flat
/// parameter vector.
///
/// Every node holds a value vector of length k and a k x d tangent block
/// (column-major, column j is the derivative along input direction j). The
/// reverse sweep propagates adjoints of both values and tangents back to the
/// parameters, so it differentiates input gradients with respect to
/// parameters (forward-over-reverse).
///
/// The tape keeps a non-owning view of the parameters; it must not outlive
/// them and is meant to live for a single evaluation or training step.
class ParamTape {
 public:
  using NodeId = std::uint32_t;

  ParamTape(std::span<const double> params, std::size_t tangent_dim);

  /// A leaf with explicit tangents (k x d column-major). Leaves take no
  /// parameter gradient.
  NodeId input(std::span<const double> values, std::span<const double> tangents);
  /// A leaf whose tangents are the identity; requires values.size() == d.
  NodeId seeded_input(std::span<const double> values);

  NodeId slice(NodeId x, std::size_t offset, std::size_t len);
  NodeId concat(std::span<const NodeId> parts);
  NodeId add(NodeId x, NodeId y);
  /// Elementwise product.
  NodeId mul(NodeId x, NodeId y);
  /// W x + b with W (out x in, column-major) at weight_offset and b at
  /// bias_offset inside the parameter vector.
  NodeId affine(NodeId x, std::size_t weight_offset, std::size_t bias_offset, std::size_t out_dim);
  NodeId leaky_relu(NodeId x, double slope);

  std::span<const double> value(NodeId n) const;
  std::span<const double> tangents(NodeId n) const;
  std::size_t size(NodeId n) const { return nodes_[n].k; }
  std::size_t tangent_dim() const { return d_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::span<const double> params() const { return params_; }

  /// Accumulates into param_grad the gradient of
  ///   <value_adjoint, value(out)> + <tangent_adjoint, tangents(out)>
  /// with respect to the parameters. Tangent adjoints that are identically
  /// zero skip the second-order terms entirely.
  void backward(NodeId out, std::span<const double> value_adjoint,
                std::span<const double> tangent_adjoint, std::span<double> param_grad) const;

  /// Recomputes every node from the recorded operations and leaf data.
  void replay();

  /// Drops all nodes but keeps allocated storage.
  void clear();
  /// Points the tape at another parameter vector of the same length. Recorded
  /// nodes are kept; replay() re-evaluates them with the new parameters.
  void rebind(std::span<const double> params);

 private:
  enum class Op : std::uint8_t { Input, Slice, Concat, Add, Mul, Affine, LeakyRelu };

  struct Node {
    Op op = Op::Input;
    NodeId a = 0;
    NodeId b = 0;
    std::size_t k = 0;
    std::size_t val_off = 0;  // into data_; tangents follow the values
    std::size_t aux0 = 0;     // slice offset | weight offset | concat part start
    std::size_t aux1 = 0;     // bias offset | concat part count
    double slope = 0.0;
  };

  NodeId push(Node node);
  void evaluate(const Node& node);
  double* val(const Node& n) { return data_.data() + n.val_off; }
  double* tan(const Node& n) { return data_.data() + n.val_off + n.k; }
  const double* val(const Node& n) const { return data_.data() + n.val_off; }
  const double* tan(const Node& n) const { return data_.data() + n.val_off + n.k; }

  std::span<const double> params_;
  std::size_t d_;
  std::vector<Node> nodes_;
  std::vector<double> data_;
  std::vector<NodeId> concat_parts_;
  mutable std::vector<double> adjoint_;
  mutable std::vector<std::uint8_t> tangent_live_;
};

}  // namespace sobolev_td
