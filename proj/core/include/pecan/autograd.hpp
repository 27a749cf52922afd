#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pecan/network.hpp"
#include "pecan/tensor.hpp"

namespace pecan {

using NodeId = std::size_t;

/**
 * Append-only reverse-mode tape. Every node's parents were created before it,
 * so creation order is a topological order and backward() is a single reverse
 * sweep. Gradient buffers are allocated lazily and only for nodes that
 * require a gradient.
 */
class Graph {
public:
    using Backward = std::function<void(Graph&, NodeId)>;

    /// Leaf without gradient (inputs, labels, frozen tensors).
    NodeId constant(Tensor value);
    /// Leaf whose gradient is accumulated when requires_grad is true.
    NodeId parameter(Tensor value, bool requires_grad = true);
    /**
     * Interior node. It requires a gradient iff any parent does; `backward`
     * is only invoked in that case and reads grad(self) to push into parents.
     * Throws Error if a parent id does not precede the new node.
     */
    NodeId add(std::string op, Tensor value, std::vector<NodeId> parents, Backward backward);

    std::size_t size() const noexcept { return nodes_.size(); }
    const Tensor& value(NodeId id) const { return node(id).value; }
    const std::string& op(NodeId id) const { return node(id).op; }
    const std::vector<NodeId>& parents(NodeId id) const { return node(id).parents; }
    bool requires_grad(NodeId id) const { return node(id).requires_grad; }

    /// Gradient of the last backward() target with respect to this node; zeros if none flowed.
    Tensor grad(NodeId id) const;
    /// Mutable gradient buffer (allocated on first use) for backward rules.
    Tensor& grad_buffer(NodeId id);
    bool has_grad(NodeId id) const { return node(id).has_grad; }

    /// Seed d(target)/d(target) = 1 on a single-element node and sweep in reverse.
    void backward(NodeId target);
    void zero_grad();

private:
    struct Node {
        std::string op;
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        bool requires_grad = false;
        std::vector<NodeId> parents;
        Backward backward;
    };
    const Node& node(NodeId id) const;
    Node& node(NodeId id);

    std::vector<Node> nodes_;
};

/// How a PECAN layer matches its inputs during training.
struct PecanOptions {
    Method method = Method::pecan_d;
    double tau = 0.5;
    /// a in tanh(a r), the epoch-aware replacement of sign(r).
    double slope = 1.0;
    /// Distance variant only: forward with the soft assignment instead of the hard one.
    bool relaxed_forward = false;
    /**
     * Distance variant only: use sum_r log(cosh(a r))/a as the distance, whose
     * exact derivative is tanh(a r). Makes the surrogate path a true gradient
     * so it can be checked against finite differences.
     */
    bool smooth_distance = false;
    /// Prototypes whose soft weight falls below this are skipped in backward.
    double skip_below = 1e-14;
};

namespace ops {

/// [B, c, h, w] -> [B*n, c*k*k]: one row per output position, im2col order.
NodeId lower(Graph& g, NodeId x, const ConvGeometry& geom);
/// [B*n, c] -> [B, c, h, w] with n = h*w.
NodeId unlower(Graph& g, NodeId y, std::size_t h, std::size_t w);
/// xt [N, K] times w [c_out, K] transposed, plus b [c_out]: [N, c_out].
NodeId affine(Graph& g, NodeId xt, NodeId w, NodeId b);
/// Per-row, per-group prototype matching; cb is [D, d, p]. Returns the reconstruction [N, K].
NodeId pecan_quantize(Graph& g, NodeId xt, NodeId cb, const PecanOptions& opt);
NodeId conv2d(Graph& g, NodeId x, NodeId w, NodeId b, const ConvGeometry& geom);
NodeId relu(Graph& g, NodeId x);
/// Square window; the gradient goes to the first maximal element of each window.
NodeId maxpool2d(Graph& g, NodeId x, std::size_t k, std::size_t stride);
NodeId reshape(Graph& g, NodeId x, Shape shape);
/// Mean softmax cross-entropy of logits [B, C] against class labels; [1].
NodeId softmax_cross_entropy(Graph& g, NodeId logits, std::span<const int> labels);
/// Sum of all entries; [1].
NodeId sum(Graph& g, NodeId x);

} // namespace ops

/// Number of rows of logits [B, C] whose argmax (lowest index on ties) equals the label.
std::size_t count_correct(const Tensor& logits, std::span<const int> labels);

} // namespace pecan
