#include "xtqa/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace xtqa {

Parameter& ParameterStore::add(const std::string& name, std::vector<std::size_t> shape,
                               Rng& init_rng, std::size_t fan_in) {
    Parameter p;
    p.name = name;
    p.value = Tensor::zeros(shape);
    p.grad = Tensor::zeros(shape);
    double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : p.value.data) v = init_rng.uniform(-k, k);
    params_.push_back(std::move(p));
    return params_.back();
}

Parameter& ParameterStore::add_zeros(const std::string& name, std::vector<std::size_t> shape) {
    Parameter p;
    p.name = name;
    p.value = Tensor::zeros(shape);
    p.grad = Tensor::zeros(std::move(shape));
    params_.push_back(std::move(p));
    return params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
    for (Parameter& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

void ParameterStore::zero_grads() {
    for (Parameter& p : params_)
        for (double& g : p.grad.data) g = 0.0;
}

void ParameterStore::scale_grads(double c) {
    for (Parameter& p : params_)
        for (double& g : p.grad.data) g *= c;
}

bool ParameterStore::grads_finite() const {
    for (const Parameter& p : params_)
        if (!p.grad.all_finite()) return false;
    return true;
}

bool ParameterStore::values_finite() const {
    for (const Parameter& p : params_)
        if (!p.value.all_finite()) return false;
    return true;
}

Linear Linear::create(ParameterStore& store, const std::string& name, std::size_t out_dim,
                      std::size_t in_dim, Rng& rng, bool bias) {
    Linear l;
    l.w = &store.add(name + ".w", {out_dim, in_dim}, rng, in_dim);
    l.b = bias ? &store.add_zeros(name + ".b", {out_dim}) : nullptr;
    return l;
}

NodeId Linear::apply(Tape& t, NodeId x) const {
    NodeId wn = t.leaf(*w);
    if (!b) return t.matvec(wn, x);
    return t.affine(wn, x, t.leaf(*b));
}

Mlp Mlp::create(ParameterStore& store, const std::string& name, std::size_t in_dim,
                std::size_t hidden, std::size_t out_dim, bool use_relu, double dropout_p,
                Rng& rng) {
    Mlp m;
    m.fc1 = Linear::create(store, name + ".fc1", hidden, in_dim, rng);
    m.fc2 = Linear::create(store, name + ".fc2", out_dim, hidden, rng);
    m.use_relu = use_relu;
    m.dropout_p = dropout_p;
    return m;
}

NodeId Mlp::apply(Tape& t, NodeId x, const ForwardCtx& ctx) const {
    NodeId h = fc1.apply(t, x);
    if (use_relu) h = t.relu(h);
    if (ctx.training && ctx.dropout_rng)
        h = t.dropout(h, dropout_p, true, *ctx.dropout_rng);
    return fc2.apply(t, h);
}

AttentionPool AttentionPool::create(ParameterStore& store, const std::string& name,
                                    std::size_t d1, std::size_t hidden, double dropout_p,
                                    Rng& rng) {
    AttentionPool a;
    a.scorer = Mlp::create(store, name, d1, hidden, 1, false, dropout_p, rng);
    return a;
}

NodeId AttentionPool::pool(Tape& t, const std::vector<NodeId>& rows,
                           const ForwardCtx& ctx) const {
    if (rows.empty()) throw std::invalid_argument("attention pool over zero positions");
    std::vector<NodeId> scores;
    scores.reserve(rows.size());
    for (NodeId r : rows) scores.push_back(scorer.apply(t, r, ctx));
    NodeId alpha = t.softmax(t.concat(scores));
    return t.weighted_sum(rows, alpha);
}

GruCell GruCell::create(ParameterStore& store, const std::string& name, std::size_t input_dim,
                        std::size_t hidden_dim, Rng& rng) {
    GruCell g;
    g.input_dim = input_dim;
    g.hidden_dim = hidden_dim;
    std::size_t in = input_dim + hidden_dim;
    g.w_update = &store.add(name + ".w_update", {hidden_dim, in}, rng, in);
    g.b_update = &store.add_zeros(name + ".b_update", {hidden_dim});
    g.w_reset = &store.add(name + ".w_reset", {hidden_dim, in}, rng, in);
    g.b_reset = &store.add_zeros(name + ".b_reset", {hidden_dim});
    g.w_cand = &store.add(name + ".w_cand", {hidden_dim, in}, rng, in);
    g.b_cand = &store.add_zeros(name + ".b_cand", {hidden_dim});
    return g;
}

std::vector<NodeId> GruCell::forward(Tape& t, const std::vector<NodeId>& inputs) const {
    NodeId wz = t.leaf(*w_update), bz = t.leaf(*b_update);
    NodeId wr = t.leaf(*w_reset), br = t.leaf(*b_reset);
    NodeId wc = t.leaf(*w_cand), bc = t.leaf(*b_cand);

    NodeId h = t.constant(Tensor::zeros({hidden_dim}));
    std::vector<NodeId> states;
    states.reserve(inputs.size());
    for (NodeId x : inputs) {
        NodeId xh = t.concat({x, h});
        NodeId z = t.sigmoid(t.affine(wz, xh, bz));
        NodeId r = t.sigmoid(t.affine(wr, xh, br));
        NodeId xrh = t.concat({x, t.mul(r, h)});
        NodeId cand = t.tanh_(t.affine(wc, xrh, bc));
        h = t.blend(z, cand, h);
        states.push_back(h);
    }
    return states;
}

BilinearAttention BilinearAttention::create(ParameterStore& store, const std::string& name,
                                            std::size_t d1, std::size_t hidden, Rng& rng) {
    BilinearAttention b;
    b.proj_q = Linear::create(store, name + ".proj_q", hidden, d1, rng);
    b.proj_d = Linear::create(store, name + ".proj_d", hidden, d1, rng);
    b.glimpse = &store.add(name + ".glimpse", {hidden}, rng, hidden);
    b.out = Linear::create(store, name + ".out", d1, hidden, rng);
    return b;
}

NodeId BilinearAttention::apply(Tape& t, const std::vector<NodeId>& q_rows,
                                const std::vector<NodeId>& d_rows) const {
    if (q_rows.empty() || d_rows.empty())
        throw std::invalid_argument("bilinear attention needs at least one row on each side");
    NodeId wa = t.leaf(*glimpse);

    std::vector<NodeId> uq, vd;
    uq.reserve(q_rows.size());
    vd.reserve(d_rows.size());
    for (NodeId q : q_rows) uq.push_back(proj_q.apply(t, q));
    for (NodeId d : d_rows) vd.push_back(proj_d.apply(t, d));

    std::vector<NodeId> pairs, logits;
    pairs.reserve(uq.size() * vd.size());
    logits.reserve(pairs.capacity());
    for (NodeId q : uq)
        for (NodeId d : vd) {
            NodeId had = t.mul(q, d);
            pairs.push_back(had);
            logits.push_back(t.dot(wa, had));
        }
    NodeId att = t.softmax(t.concat(logits));
    NodeId ctx = t.weighted_sum(pairs, att);
    return out.apply(t, ctx);
}

double LrSchedule::lr(int epoch) const {
    if (epoch > decay_after) return decay * base_lr;
    return std::min(warmup_rate * static_cast<double>(epoch) / warmup_denom, base_lr);
}

void AdamState::init(const ParameterStore& params) {
    step = 0;
    m.clear();
    v.clear();
    for (std::size_t i = 0; i < params.count(); ++i) {
        m.push_back(Tensor::zeros(params.at(i).value.shape));
        v.push_back(Tensor::zeros(params.at(i).value.shape));
    }
}

void adam_step(ParameterStore& params, AdamState& state, double lr) {
    ++state.step;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.count(); ++i) {
        Parameter& p = params.at(i);
        if (!p.trainable) continue;
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            double g = p.grad[k];
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
            double m_hat = m[k] / bc1;
            double v_hat = v[k] / bc2;
            p.value[k] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
    params.zero_grads();
}

}  // namespace xtqa
