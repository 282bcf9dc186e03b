#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "satcn/array.hpp"
#include "satcn/graph.hpp"
#include "satcn/sampling.hpp"

namespace satcn::ad {

using NodeId = std::size_t;

/// Lightweight reference to either a single graph or a per-column sequence;
/// the referenced objects must outlive the tape.
struct GraphRef {
  const GraphSeq* seq = nullptr;
  const NeighborGraph* single = nullptr;

  const NeighborGraph& at(std::size_t t) const {
    return single ? *single : seq->at(t);
  }
};

/// Reverse-mode tape over the SATCN operator set. Nodes are appended in
/// topological order by construction; backward walks them in reverse and
/// accumulates adjoints in a fixed schedule, so gradients are deterministic.
class Tape {
 public:
  /// Registers a trainable leaf (adjoint produced by backward).
  NodeId leaf(Array value);
  /// Registers a constant (inputs, broadcast distance features); no adjoint.
  NodeId constant(Array value);

  // Affine maps.
  NodeId linear(NodeId x, NodeId weight, NodeId bias);   // [n,T,ci] -> [n,T,co]
  NodeId conv1d(NodeId x, NodeId kernel, NodeId bias);   // [n,T,ci] -> [n,T-w+1,co]

  // Pointwise.
  NodeId relu(NodeId x);
  NodeId neg(NodeId x);
  NodeId affine(NodeId x, double mul, double add);  // elementwise mul*x + add
  NodeId square(NodeId x);

  // Neighborhood aggregation over the node axis, per time slice.
  NodeId neighbor_mean(NodeId x, GraphRef g);
  NodeId neighbor_weighted_mean(NodeId x, GraphRef g);
  NodeId neighbor_softmax(NodeId x, GraphRef g);
  NodeId neighbor_std(NodeId x, GraphRef g, double epsilon);

  /// Concatenates along the channel axis: all inputs [n,T,c_k] -> [n,T,sum c_k].
  NodeId concat_channels(const std::vector<NodeId>& xs);

  /// Multiplies node/time rows by constant factors [n,T].
  NodeId row_scale(NodeId x, Array factors);

  /// Squeezes a trailing channel of size 1: [n,T,1] -> [n,T].
  NodeId squeeze_last(NodeId x);

  /// Mean absolute error over cells where mask is true; scalar output.
  /// Subgradient of |.| at 0 is 0.
  NodeId masked_mae(NodeId pred, Array target, std::vector<std::uint8_t> mask);

  /// scale * sum of scalar nodes (batch averaging).
  NodeId scaled_sum(const std::vector<NodeId>& scalars, double scale);

  /// Reverse pass from a scalar loss node. May be called once per tape.
  void backward(NodeId loss);

  const Array& value(NodeId id) const { return nodes_[id].value; }
  const Array& grad(NodeId id) const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Array value;
    Array grad;
    bool requires_grad = false;
    std::function<void(Tape&, const Node&)> backward_fn;
  };

  NodeId push(Array value, bool requires_grad,
              std::function<void(Tape&, const Node&)> backward_fn);
  Node& node(NodeId id) { return nodes_[id]; }
  void check(NodeId id) const;
  Array& grad_buf(NodeId id);

  std::deque<Node> nodes_;  // stable references across push_back
  bool backward_done_ = false;
};

/// Max relative central-difference error over every coordinate of every
/// listed parameter tensor. `f` re-evaluates the scalar objective from the
/// parameters' current contents; `analytic` are the matching gradients.
/// Relative error uses denominator max(1, |analytic|, |numeric|).
struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

FiniteDiffReport finite_difference_check(
    const std::function<double()>& f,
    const std::vector<std::pair<std::string, Array*>>& params,
    const std::vector<const Array*>& analytic, double step);

}  // namespace satcn::ad
