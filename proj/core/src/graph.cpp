#include "pecan/autograd.hpp"

namespace pecan {

const Graph::Node& Graph::node(NodeId id) const {
    if (id >= nodes_.size()) throw Error("graph node " + std::to_string(id) + " does not exist");
    return nodes_[id];
}

Graph::Node& Graph::node(NodeId id) {
    if (id >= nodes_.size()) throw Error("graph node " + std::to_string(id) + " does not exist");
    return nodes_[id];
}

NodeId Graph::constant(Tensor value) {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

NodeId Graph::parameter(Tensor value, bool requires_grad) {
    Node n;
    n.op = "parameter";
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

NodeId Graph::add(std::string op, Tensor value, std::vector<NodeId> parents, Backward backward) {
    const NodeId self = nodes_.size();
    Node n;
    n.op = std::move(op);
    n.value = std::move(value);
    for (NodeId p : parents) {
        if (p >= self) throw Error("graph cycle: node '" + n.op + "' lists a parent that does not precede it");
        n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
    }
    n.parents = std::move(parents);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return self;
}

Tensor Graph::grad(NodeId id) const {
    const Node& n = node(id);
    return n.has_grad ? n.grad : Tensor(n.value.shape());
}

Tensor& Graph::grad_buffer(NodeId id) {
    Node& n = node(id);
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape());
        n.has_grad = true;
    }
    return n.grad;
}

void Graph::zero_grad() {
    for (Node& n : nodes_) {
        n.has_grad = false;
        n.grad = Tensor();
    }
}

void Graph::backward(NodeId target) {
    if (node(target).value.size() != 1) throw ShapeError("backward target must hold a single element");
    zero_grad();
    if (!node(target).requires_grad) return;
    grad_buffer(target)[0] = 1.0;
    for (NodeId id = target + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.requires_grad || !n.has_grad || !n.backward) continue;
        for (NodeId p : n.parents) {
            if (p >= id) throw Error("graph cycle detected at node '" + n.op + "'");
        }
        n.backward(*this, id);
    }
}

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2 || logits.extent(0) != labels.size()) {
        throw ShapeError("count_correct: logits " + to_string(logits.shape()) + " for " +
                         std::to_string(labels.size()) + " labels");
    }
    const std::size_t B = logits.extent(0), C = logits.extent(1);
    std::size_t correct = 0;
    for (std::size_t b = 0; b < B; ++b) {
        const double* row = logits.raw() + b * C;
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c)
            if (row[best] < row[c]) best = c;
        if (static_cast<int>(best) == labels[b]) ++correct;
    }
    return correct;
}

} // namespace pecan
