#include "xtqa/tape.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace xtqa {

NodeId Tape::make(Tensor value) {
    NodeId id = static_cast<NodeId>(nodes_.size());
    Tensor g = Tensor::zeros(value.shape);
    nodes_.push_back({std::move(value), std::move(g)});
    backward_ops_.emplace_back();
    return id;
}

NodeId Tape::constant(Tensor v) { return make(std::move(v)); }

NodeId Tape::scalar(double v) { return make(Tensor::scalar(v)); }

NodeId Tape::leaf(Parameter& p) {
    auto it = lease_ids_.find(&p);
    if (it != lease_ids_.end()) return it->second;
    NodeId id = make(p.value);
    leases_.emplace_back(&p, id);
    lease_ids_.emplace(&p, id);
    return id;
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    assert(ta.same_shape(tb));
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
    NodeId id = make(std::move(out));
    backward_ops_[id] = [a, b, id](Tape& t) {
        const Tensor& g = t.grad(id);
        Tensor& ga = t.grad(a);
        Tensor& gb = t.grad(b);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    };
    return id;
}

NodeId Tape::sub(NodeId a, NodeId b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    assert(ta.same_shape(tb));
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
    NodeId id = make(std::move(out));
    backward_ops_[id] = [a, b, id](Tape& t) {
        const Tensor& g = t.grad(id);
        Tensor& ga = t.grad(a);
        Tensor& gb = t.grad(b);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    };
    return id;
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    assert(ta.same_shape(tb));
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
    NodeId id = make(std::move(out));
    backward_ops_[id] = [a, b, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& va = t.val(a);
        const Tensor& vb = t.val(b);
        Tensor& ga = t.grad(a);
        Tensor& gb = t.grad(b);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * vb[i];
            gb[i] += g[i] * va[i];
        }
    };
    return id;
}

NodeId Tape::scale(NodeId a, double c) {
    Tensor out = val(a);
    for (double& v : out.data) v *= c;
    NodeId id = make(std::move(out));
    backward_ops_[id] = [a, c, id](Tape& t) {
        const Tensor& g = t.grad(id);
        Tensor& ga = t.grad(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    };
    return id;
}

NodeId Tape::blend(NodeId z, NodeId a, NodeId b) {
    const Tensor& tz = val(z);
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    assert(tz.same_shape(ta) && tz.same_shape(tb));
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = tz[i] * ta[i] + (1.0 - tz[i]) * tb[i];
    NodeId id = make(std::move(out));
    backward_ops_[id] = [z, a, b, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& vz = t.val(z);
        const Tensor& va = t.val(a);
        const Tensor& vb = t.val(b);
        Tensor& gz = t.grad(z);
        Tensor& ga = t.grad(a);
        Tensor& gb = t.grad(b);
        for (std::size_t i = 0; i < g.size(); ++i) {
            gz[i] += g[i] * (va[i] - vb[i]);
            ga[i] += g[i] * vz[i];
            gb[i] += g[i] * (1.0 - vz[i]);
        }
    };
    return id;
}

NodeId Tape::sigmoid(NodeId x) {
    Tensor out = val(x);
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    NodeId id = make(std::move(out));
    backward_ops_[id] = [x, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& y = t.val(id);
        Tensor& gx = t.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
    };
    return id;
}

NodeId Tape::tanh_(NodeId x) {
    Tensor out = val(x);
    for (double& v : out.data) v = std::tanh(v);
    NodeId id = make(std::move(out));
    backward_ops_[id] = [x, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& y = t.val(id);
        Tensor& gx = t.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
    };
    return id;
}

NodeId Tape::relu(NodeId x) {
    Tensor out = val(x);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    NodeId id = make(std::move(out));
    backward_ops_[id] = [x, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& vx = t.val(x);
        Tensor& gx = t.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (vx[i] > 0.0) gx[i] += g[i];
    };
    return id;
}

NodeId Tape::clamp(NodeId x, double lo, double hi) {
    Tensor out = val(x);
    for (double& v : out.data) v = v < lo ? lo : (v > hi ? hi : v);
    NodeId id = make(std::move(out));
    backward_ops_[id] = [x, lo, hi, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& vx = t.val(x);
        Tensor& gx = t.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (vx[i] > lo && vx[i] < hi) gx[i] += g[i];
    };
    return id;
}

NodeId Tape::concat(const std::vector<NodeId>& parts) {
    std::size_t n = 0;
    for (NodeId p : parts) n += val(p).size();
    Tensor out = Tensor::zeros({n});
    std::size_t off = 0;
    for (NodeId p : parts) {
        const Tensor& tp = val(p);
        for (std::size_t i = 0; i < tp.size(); ++i) out[off + i] = tp[i];
        off += tp.size();
    }
    NodeId id = make(std::move(out));
    backward_ops_[id] = [parts, id](Tape& t) {
        const Tensor& g = t.grad(id);
        std::size_t off = 0;
        for (NodeId p : parts) {
            Tensor& gp = t.grad(p);
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
            off += gp.size();
        }
    };
    return id;
}

NodeId Tape::interleave(NodeId a, NodeId b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    assert(ta.same_shape(tb));
    Tensor out = Tensor::zeros({2 * ta.size()});
    for (std::size_t i = 0; i < ta.size(); ++i) {
        out[2 * i] = ta[i];
        out[2 * i + 1] = tb[i];
    }
    NodeId id = make(std::move(out));
    backward_ops_[id] = [a, b, id](Tape& t) {
        const Tensor& g = t.grad(id);
        Tensor& ga = t.grad(a);
        Tensor& gb = t.grad(b);
        for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] += g[2 * i];
            gb[i] += g[2 * i + 1];
        }
    };
    return id;
}

NodeId Tape::avg_pool_pairs(NodeId x) {
    const Tensor& tx = val(x);
    if (tx.size() % 2 != 0)
        throw std::invalid_argument("avg_pool_pairs requires an even last dimension");
    Tensor out = Tensor::zeros({tx.size() / 2});
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = (tx[2 * j] + tx[2 * j + 1]) / 2.0;
    NodeId id = make(std::move(out));
    backward_ops_[id] = [x, id](Tape& t) {
        const Tensor& g = t.grad(id);
        Tensor& gx = t.grad(x);
        for (std::size_t j = 0; j < g.size(); ++j) {
            gx[2 * j] += 0.5 * g[j];
            gx[2 * j + 1] += 0.5 * g[j];
        }
    };
    return id;
}

NodeId Tape::row(NodeId matrix, std::size_t r) {
    const Tensor& m = val(matrix);
    std::size_t c = m.cols();
    Tensor out = Tensor::zeros({c});
    for (std::size_t i = 0; i < c; ++i) out[i] = m.at(r, i);
    NodeId id = make(std::move(out));
    backward_ops_[id] = [matrix, r, id](Tape& t) {
        const Tensor& g = t.grad(id);
        Tensor& gm = t.grad(matrix);
        std::size_t c = g.size();
        for (std::size_t i = 0; i < c; ++i) gm.data[r * c + i] += g[i];
    };
    return id;
}

NodeId Tape::matvec(NodeId w, NodeId x) {
    const Tensor& tw = val(w);
    const Tensor& tx = val(x);
    std::size_t m = tw.rows(), n = tw.cols();
    assert(tx.size() == n);
    Tensor out = Tensor::zeros({m});
    for (std::size_t r = 0; r < m; ++r) {
        double acc = 0.0;
        const double* wr = tw.data.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) acc += wr[c] * tx[c];
        out[r] = acc;
    }
    NodeId id = make(std::move(out));
    backward_ops_[id] = [w, x, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& vw = t.val(w);
        const Tensor& vx = t.val(x);
        Tensor& gw = t.grad(w);
        Tensor& gx = t.grad(x);
        std::size_t m = vw.rows(), n = vw.cols();
        for (std::size_t r = 0; r < m; ++r) {
            double gr = g[r];
            if (gr == 0.0) continue;
            double* gwr = gw.data.data() + r * n;
            const double* wr = vw.data.data() + r * n;
            for (std::size_t c = 0; c < n; ++c) {
                gwr[c] += gr * vx[c];
                gx[c] += gr * wr[c];
            }
        }
    };
    return id;
}

NodeId Tape::affine(NodeId w, NodeId x, NodeId b) {
    const Tensor& tw = val(w);
    const Tensor& tx = val(x);
    const Tensor& tb = val(b);
    std::size_t m = tw.rows(), n = tw.cols();
    assert(tx.size() == n && tb.size() == m);
    Tensor out = Tensor::zeros({m});
    for (std::size_t r = 0; r < m; ++r) {
        double acc = tb[r];
        const double* wr = tw.data.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) acc += wr[c] * tx[c];
        out[r] = acc;
    }
    NodeId id = make(std::move(out));
    backward_ops_[id] = [w, x, b, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& vw = t.val(w);
        const Tensor& vx = t.val(x);
        Tensor& gw = t.grad(w);
        Tensor& gx = t.grad(x);
        Tensor& gb = t.grad(b);
        std::size_t m = vw.rows(), n = vw.cols();
        for (std::size_t r = 0; r < m; ++r) {
            double gr = g[r];
            gb[r] += gr;
            if (gr == 0.0) continue;
            double* gwr = gw.data.data() + r * n;
            const double* wr = vw.data.data() + r * n;
            for (std::size_t c = 0; c < n; ++c) {
                gwr[c] += gr * vx[c];
                gx[c] += gr * wr[c];
            }
        }
    };
    return id;
}

NodeId Tape::dot(NodeId a, NodeId b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    assert(ta.size() == tb.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i) acc += ta[i] * tb[i];
    NodeId id = make(Tensor::scalar(acc));
    backward_ops_[id] = [a, b, id](Tape& t) {
        double g = t.grad(id)[0];
        const Tensor& va = t.val(a);
        const Tensor& vb = t.val(b);
        Tensor& ga = t.grad(a);
        Tensor& gb = t.grad(b);
        for (std::size_t i = 0; i < va.size(); ++i) {
            ga[i] += g * vb[i];
            gb[i] += g * va[i];
        }
    };
    return id;
}

NodeId Tape::weighted_sum(const std::vector<NodeId>& rows, NodeId weights) {
    const Tensor& tw = val(weights);
    assert(tw.size() == rows.size() && !rows.empty());
    std::size_t d = val(rows[0]).size();
    Tensor out = Tensor::zeros({d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Tensor& r = val(rows[i]);
        double wi = tw[i];
        for (std::size_t j = 0; j < d; ++j) out[j] += wi * r[j];
    }
    NodeId id = make(std::move(out));
    backward_ops_[id] = [rows, weights, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& vw = t.val(weights);
        Tensor& gw = t.grad(weights);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Tensor& r = t.val(rows[i]);
            Tensor& gr = t.grad(rows[i]);
            double wi = vw[i];
            double acc = 0.0;
            for (std::size_t j = 0; j < g.size(); ++j) {
                gr[j] += wi * g[j];
                acc += g[j] * r[j];
            }
            gw[i] += acc;
        }
    };
    return id;
}

NodeId Tape::sum(NodeId x) {
    const Tensor& tx = val(x);
    double acc = 0.0;
    for (double v : tx.data) acc += v;
    NodeId id = make(Tensor::scalar(acc));
    backward_ops_[id] = [x, id](Tape& t) {
        double g = t.grad(id)[0];
        Tensor& gx = t.grad(x);
        for (double& v : gx.data) v += g;
    };
    return id;
}

NodeId Tape::softmax(NodeId x) {
    const Tensor& tx = val(x);
    double mx = tx[0];
    for (double v : tx.data) mx = std::max(mx, v);
    Tensor out = tx;
    double z = 0.0;
    for (double& v : out.data) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : out.data) v /= z;
    NodeId id = make(std::move(out));
    backward_ops_[id] = [x, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& y = t.val(id);
        Tensor& gx = t.grad(x);
        double gy = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) gy += g[i] * y[i];
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += y[i] * (g[i] - gy);
    };
    return id;
}

NodeId Tape::neg_log(NodeId x) {
    NodeId id = make(Tensor::scalar(-std::log(val(x)[0])));
    backward_ops_[id] = [x, id](Tape& t) {
        t.grad(x)[0] += -t.grad(id)[0] / t.val(x)[0];
    };
    return id;
}

NodeId Tape::neg_log_pick(NodeId probs, std::size_t idx) {
    NodeId id = make(Tensor::scalar(-std::log(val(probs)[idx])));
    backward_ops_[id] = [probs, idx, id](Tape& t) {
        t.grad(probs)[idx] += -t.grad(id)[0] / t.val(probs)[idx];
    };
    return id;
}

NodeId Tape::bce(NodeId p, double target) {
    double pv = val(p)[0];
    double loss = -(target * std::log(pv) + (1.0 - target) * std::log(1.0 - pv));
    NodeId id = make(Tensor::scalar(loss));
    backward_ops_[id] = [p, target, id](Tape& t) {
        double pv = t.val(p)[0];
        t.grad(p)[0] += t.grad(id)[0] * (-target / pv + (1.0 - target) / (1.0 - pv));
    };
    return id;
}

NodeId Tape::dropout(NodeId x, double p, bool training, Rng& rng) {
    if (!training || p == 0.0) return x;
    const Tensor& tx = val(x);
    std::vector<double> mask(tx.size());
    double keep_scale = 1.0 / (1.0 - p);
    for (double& m : mask) m = rng.uniform() >= p ? keep_scale : 0.0;
    Tensor out = tx;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    NodeId id = make(std::move(out));
    backward_ops_[id] = [x, mask = std::move(mask), id](Tape& t) {
        const Tensor& g = t.grad(id);
        Tensor& gx = t.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
    };
    return id;
}

void Tape::backward(NodeId root) {
    if (val(root).size() != 1)
        throw std::logic_error("backward root must be a scalar node");
    grad(root)[0] = 1.0;
    for (std::size_t i = root + 1; i-- > 0;) {
        if (backward_ops_[i]) backward_ops_[i](*this);
    }
    for (auto& [param, id] : leases_) {
        const Tensor& g = nodes_[id].grad;
        for (std::size_t i = 0; i < g.size(); ++i) param->grad[i] += g[i];
    }
}

}  // namespace xtqa
