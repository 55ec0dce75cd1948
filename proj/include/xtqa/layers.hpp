#pragma once

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "xtqa/tape.hpp"

namespace xtqa {

// Owns all model parameters in registration order. Registration order is the
// only order used for initialization draws, optimizer moments and checkpoint
// blobs, so it must be identical across runs.
class ParameterStore {
public:
    Parameter& add(const std::string& name, std::vector<std::size_t> shape, Rng& init_rng,
                   std::size_t fan_in);
    Parameter& add_zeros(const std::string& name, std::vector<std::size_t> shape);

    std::size_t count() const { return params_.size(); }
    Parameter& at(std::size_t i) { return params_[i]; }
    const Parameter& at(std::size_t i) const { return params_[i]; }
    Parameter* find(const std::string& name);

    void zero_grads();
    void scale_grads(double c);
    bool grads_finite() const;
    bool values_finite() const;

private:
    std::deque<Parameter> params_;  // deque: stable addresses
};

// Passed through every forward call; decides whether dropout fires and from
// which stream its masks are drawn.
struct ForwardCtx {
    bool training = false;
    Rng* dropout_rng = nullptr;
};

struct Linear {
    Parameter* w = nullptr;
    Parameter* b = nullptr;  // optional

    static Linear create(ParameterStore& store, const std::string& name, std::size_t out_dim,
                         std::size_t in_dim, Rng& rng, bool bias = true);
    NodeId apply(Tape& t, NodeId x) const;
};

// FC(in -> hidden) [-ReLU] -Dropout(p)- FC(hidden -> out)
struct Mlp {
    Linear fc1, fc2;
    bool use_relu = false;
    double dropout_p = 0.0;

    static Mlp create(ParameterStore& store, const std::string& name, std::size_t in_dim,
                      std::size_t hidden, std::size_t out_dim, bool use_relu, double dropout_p,
                      Rng& rng);
    NodeId apply(Tape& t, NodeId x, const ForwardCtx& ctx) const;
};

// Learned attention pooling: alpha = softmax(scorer(row_u)), out = sum alpha_u * row_u.
// The scorer is the shared FC(d1 -> hidden)-Dropout-FC(hidden -> 1).
struct AttentionPool {
    Mlp scorer;

    static AttentionPool create(ParameterStore& store, const std::string& name, std::size_t d1,
                                std::size_t hidden, double dropout_p, Rng& rng);
    NodeId pool(Tape& t, const std::vector<NodeId>& rows, const ForwardCtx& ctx) const;
};

// Uni-directional GRU cell, zero initial state. Gate matrices act on the
// concatenation [x; h]; the update gate blends the candidate state in:
//   z = sig(Wz [x;h] + bz), r = sig(Wr [x;h] + br)
//   c = tanh(Wc [x; r*h] + bc), h' = z*c + (1-z)*h
struct GruCell {
    std::size_t input_dim = 0, hidden_dim = 0;
    Parameter *w_update = nullptr, *b_update = nullptr;
    Parameter *w_reset = nullptr, *b_reset = nullptr;
    Parameter *w_cand = nullptr, *b_cand = nullptr;

    static GruCell create(ParameterStore& store, const std::string& name, std::size_t input_dim,
                          std::size_t hidden_dim, Rng& rng);
    // One hidden-state node per real input row. Positions beyond the inputs
    // (masked padding) copy the final state, so callers slice what they need.
    std::vector<NodeId> forward(Tape& t, const std::vector<NodeId>& inputs) const;
};

// Single-glimpse bilinear attention:
//   logits[x,r] = wa . (U qx * V dr), att = softmax over all pairs,
//   out = P (sum att[x,r] * (U qx * V dr)) + bp
struct BilinearAttention {
    Linear proj_q, proj_d;
    Parameter* glimpse = nullptr;  // wa
    Linear out;

    static BilinearAttention create(ParameterStore& store, const std::string& name,
                                    std::size_t d1, std::size_t hidden, Rng& rng);
    NodeId apply(Tape& t, const std::vector<NodeId>& q_rows,
                 const std::vector<NodeId>& d_rows) const;
};

// Epoch-indexed learning rate: min(warmup_rate * tau / warmup_denom, base_lr)
// while tau <= decay_after, then decay * base_lr. tau is 1-based.
struct LrSchedule {
    double warmup_rate = 2.5e-4;
    double warmup_denom = 1.0;
    double base_lr = 1e-4;
    double decay = 0.1;
    int decay_after = 8;

    double lr(int epoch) const;
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<Tensor> m, v;

    void init(const ParameterStore& params);
};

// Bias-corrected Adam over every trainable parameter; zeroes grads afterwards.
void adam_step(ParameterStore& params, AdamState& state, double lr);

}  // namespace xtqa
