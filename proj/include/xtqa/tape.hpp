#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "xtqa/rng.hpp"
#include "xtqa/tensor.hpp"

namespace xtqa {

// Trainable weight. grad accumulates across the examples of a batch and is
// zeroed by the optimizer at the end of each step cycle.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;
};

using NodeId = std::uint32_t;
constexpr NodeId kNoNode = 0xffffffffu;

// Reverse-mode tape. Each op computes its output eagerly and records a
// closure that pushes the output's adjoint back into its inputs. backward()
// replays the closures from the loss down and then flushes leaf adjoints
// into the leased Parameters' grad tensors.
//
// One tape records one example's forward pass; tapes are cheap to build and
// never shared across threads.
class Tape {
public:
    NodeId constant(Tensor v);
    NodeId scalar(double v);

    // Lease a parameter onto the tape as a leaf (deduplicated per tape).
    NodeId leaf(Parameter& p);

    const Tensor& val(NodeId id) const { return nodes_[id].value; }
    Tensor& grad(NodeId id) { return nodes_[id].grad; }
    std::size_t node_count() const { return nodes_.size(); }

    // -- elementwise / shape ops ----------------------------------------
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);              // Hadamard
    NodeId scale(NodeId a, double c);
    NodeId blend(NodeId z, NodeId a, NodeId b);  // z*a + (1-z)*b
    NodeId sigmoid(NodeId x);
    NodeId tanh_(NodeId x);
    NodeId relu(NodeId x);
    NodeId clamp(NodeId x, double lo, double hi);
    NodeId concat(const std::vector<NodeId>& parts);       // 1-D concat
    NodeId interleave(NodeId a, NodeId b);                  // [a0,b0,a1,b1,...]
    NodeId avg_pool_pairs(NodeId x);                        // out[j]=(x[2j]+x[2j+1])/2
    NodeId row(NodeId matrix, std::size_t r);               // row slice of a 2-D node

    // -- linear algebra ---------------------------------------------------
    NodeId matvec(NodeId w, NodeId x);                      // w[m,n] * x[n]
    NodeId affine(NodeId w, NodeId x, NodeId b);            // w*x + b
    NodeId dot(NodeId a, NodeId b);                         // scalar
    NodeId weighted_sum(const std::vector<NodeId>& rows, NodeId weights);

    // -- reductions / losses ----------------------------------------------
    NodeId sum(NodeId x);
    NodeId softmax(NodeId x);                               // stabilized, 1-D
    NodeId neg_log(NodeId x);                               // scalar -ln(x[0])
    NodeId neg_log_pick(NodeId probs, std::size_t idx);     // -ln(probs[idx])
    // binary cross-entropy against a constant target in [0,1]
    NodeId bce(NodeId p, double target);

    // Inverted dropout; identity when !training or p == 0.
    NodeId dropout(NodeId x, double p, bool training, Rng& rng);

    void backward(NodeId root);

private:
    struct Node {
        Tensor value;
        Tensor grad;
    };

    NodeId make(Tensor value);

    std::vector<Node> nodes_;
    std::vector<std::function<void(Tape&)>> backward_ops_;
    std::vector<std::pair<Parameter*, NodeId>> leases_;
    std::unordered_map<const Parameter*, NodeId> lease_ids_;
};

}  // namespace xtqa
