#pragma once

// Dense reverse-mode differentiation: a tape of primitive ops over
// DenseMatrix values, named parameters with Adam state, a fused
// binary cross-entropy loss, and a finite-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "scresil/common.hpp"
#include "scresil/dense.hpp"

namespace scresil {

// ---------------------------------------------------------------------------
// Parameters

struct Param {
    std::string name;
    DenseMatrix value;
    DenseMatrix grad;
    DenseMatrix m;
    DenseMatrix v;
    long step = 0;
};

/// Named parameters in insertion order.
class ParamStore {
public:
    Param& add(const std::string& name, DenseMatrix value) {
        if (index_.count(name)) throw ValidationError("duplicate parameter name '" + name + "'");
        const auto r = value.rows(), c = value.cols();
        index_.emplace(name, params_.size());
        params_.push_back({name, std::move(value), DenseMatrix(r, c), DenseMatrix(r, c), DenseMatrix(r, c), 0});
        return params_.back();
    }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ValidationError("unknown parameter '" + name + "'");
        return it->second;
    }

    Param& at(const std::string& name) { return params_[index_of(name)]; }
    const Param& at(const std::string& name) const { return params_[index_of(name)]; }
    Param& at(std::size_t i) { return params_.at(i); }
    const Param& at(std::size_t i) const { return params_.at(i); }

    std::size_t size() const { return params_.size(); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad() {
        for (auto& p : params_) p.grad.fill(0.0);
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

private:
    std::vector<Param> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update for every parameter; clears gradients.
inline void adam_step(ParamStore& store, const AdamConfig& cfg) {
    for (auto& p : store) {
        ++p.step;
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
            p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = p.m[i] / c1;
            const double vhat = p.v[i] / c2;
            p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        p.grad.fill(0.0);
    }
}

// ---------------------------------------------------------------------------
// Tape

class Tape;

/// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const DenseMatrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

class Tape {
public:
    struct Node {
        DenseMatrix value;
        DenseMatrix grad;  // allocated lazily during the reverse sweep
        bool requires_grad = false;
        std::optional<std::size_t> param;  // ParamStore index for leaves
        std::function<void(Tape&, std::size_t)> backprop;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(DenseMatrix value) { return push(std::move(value), false, {}); }

    Var param(const ParamStore& store, const std::string& name) {
        const auto idx = store.index_of(name);
        auto it = param_nodes_.find(idx);
        if (it != param_nodes_.end()) return {this, it->second};
        Node n;
        n.value = store.at(idx).value;
        n.requires_grad = true;
        n.param = idx;
        nodes_.push_back(std::move(n));
        param_nodes_.emplace(idx, nodes_.size() - 1);
        return {this, nodes_.size() - 1};
    }

    Var push(DenseMatrix value, bool requires_grad, std::function<void(Tape&, std::size_t)> backprop) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        n.backprop = std::move(backprop);
        nodes_.push_back(std::move(n));
        return {this, nodes_.size() - 1};
    }

    Node& node(std::size_t id) { return nodes_[id]; }
    const Node& node(std::size_t id) const { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }

    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

    /// Gradient slot of a node, zero-initialised on first access.
    DenseMatrix& grad(std::size_t id) {
        auto& n = nodes_[id];
        if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols())
            n.grad = DenseMatrix(n.value.rows(), n.value.cols());
        return n.grad;
    }

    /// Reverse sweep from a scalar node. Each node is visited once, in
    /// reverse creation order (creation order is topological).
    void backward(Var loss) {
        check_owner(loss);
        const auto& lv = nodes_[loss.id].value;
        if (lv.rows() != 1 || lv.cols() != 1) throw ValidationError("backward: loss must be a 1x1 scalar");
        for (auto& n : nodes_) n.grad = DenseMatrix();
        grad(loss.id)(0, 0) = 1.0;
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (!n.requires_grad || n.grad.empty() || !n.backprop) continue;
            n.backprop(*this, i);
        }
    }

    /// Adds leaf gradients into the matching ParamStore slots.
    void accumulate_into(ParamStore& store) const {
        for (const auto& [pidx, nid] : param_nodes_) {
            const auto& n = nodes_[nid];
            if (n.grad.empty()) continue;
            store.at(pidx).grad += n.grad;
        }
    }

    void check_owner(Var v) const {
        if (v.tape != this || v.id >= nodes_.size()) throw ValidationError("variable does not belong to this tape");
    }

private:
    std::vector<Node> nodes_;
    std::map<std::size_t, std::size_t> param_nodes_;
};

inline const DenseMatrix& Var::value() const { return tape->node(id).value; }

namespace detail {

inline Tape& same_tape(Var a, Var b) {
    if (a.tape == nullptr || a.tape != b.tape) throw ValidationError("operands live on different tapes");
    return *a.tape;
}

inline void require(bool ok, const char* op, const DenseMatrix& a, const DenseMatrix& b) {
    if (!ok) {
        throw ValidationError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives

inline Var matmul(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::require(a.cols() == b.rows(), "matmul", a.value(), b.value());
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.push(matmul(a.value(), b.value()), rg, [a, b](Tape& tp, std::size_t self) {
        const auto& g = tp.node(self).grad;
        if (tp.requires_grad(a) && a.cols() > 0)
            tp.grad(a.id).map().noalias() += g.map() * b.value().map().transpose();
        if (tp.requires_grad(b) && a.cols() > 0)
            tp.grad(b.id).map().noalias() += a.value().map().transpose() * g.map();
    });
}

/// Per-block product: z holds `blocks` stacked row-blocks of p.rows() rows
/// each; block k of the result is p * z_k.
inline Var block_matmul(Var p, Var z, std::size_t blocks) {
    Tape& t = detail::same_tape(p, z);
    const auto n = static_cast<Eigen::Index>(p.rows());
    detail::require(p.rows() == p.cols() && z.rows() == p.rows() * blocks, "block_matmul", p.value(), z.value());
    const auto h = static_cast<Eigen::Index>(z.cols());
    const auto stride = static_cast<std::size_t>(n * h);
    DenseMatrix out(z.rows(), z.cols());
    if (n > 0 && h > 0) {
        for (std::size_t k = 0; k < blocks; ++k) {
            MatrixMap(out.data() + k * stride, n, h).noalias() =
                p.value().map() * ConstMatrixMap(z.value().data() + k * stride, n, h);
        }
    }
    const bool rg = t.requires_grad(p) || t.requires_grad(z);
    return t.push(std::move(out), rg, [p, z, blocks, n, h, stride](Tape& tp, std::size_t self) {
        if (n == 0 || h == 0) return;
        const auto& g = tp.node(self).grad;
        if (tp.requires_grad(z)) {
            auto& gz = tp.grad(z.id);
            for (std::size_t k = 0; k < blocks; ++k) {
                MatrixMap(gz.data() + k * stride, n, h).noalias() +=
                    p.value().map().transpose() * ConstMatrixMap(g.data() + k * stride, n, h);
            }
        }
        if (tp.requires_grad(p)) {
            auto& gp = tp.grad(p.id);
            for (std::size_t k = 0; k < blocks; ++k) {
                gp.map().noalias() += ConstMatrixMap(g.data() + k * stride, n, h) *
                                      ConstMatrixMap(z.value().data() + k * stride, n, h).transpose();
            }
        }
    });
}

inline Var add(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::require(a.value().same_shape(b.value()), "add", a.value(), b.value());
    DenseMatrix out = a.value();
    out += b.value();
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.push(std::move(out), rg, [a, b](Tape& tp, std::size_t self) {
        const auto& g = tp.node(self).grad;
        if (tp.requires_grad(a)) tp.grad(a.id) += g;
        if (tp.requires_grad(b)) tp.grad(b.id) += g;
    });
}

/// Adds a 1 x cols row vector to every row.
inline Var add_bias(Var a, Var bias) {
    Tape& t = detail::same_tape(a, bias);
    detail::require(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias", a.value(), bias.value());
    DenseMatrix out = a.value();
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bias.value()(0, c);
    const bool rg = t.requires_grad(a) || t.requires_grad(bias);
    return t.push(std::move(out), rg, [a, bias](Tape& tp, std::size_t self) {
        const auto& g = tp.node(self).grad;
        if (tp.requires_grad(a)) tp.grad(a.id) += g;
        if (tp.requires_grad(bias)) {
            auto& gb = tp.grad(bias.id);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
        }
    });
}

inline Var relu(Var a) {
    Tape& t = *a.tape;
    DenseMatrix out = a.value();
    for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
    return t.push(std::move(out), t.requires_grad(a), [a](Tape& tp, std::size_t self) {
        const auto& g = tp.node(self).grad;
        const auto& x = a.value();
        auto& ga = tp.grad(a.id);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > 0.0) ga[i] += g[i];
    });
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline Var sigmoid(Var a) {
    Tape& t = *a.tape;
    DenseMatrix out = a.value();
    for (auto& v : out.values()) v = sigmoid(v);
    return t.push(std::move(out), t.requires_grad(a), [a](Tape& tp, std::size_t self) {
        const auto& g = tp.node(self).grad;
        const auto& y = tp.node(self).value;
        auto& ga = tp.grad(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

/// Mean over rows: (r x c) -> (1 x c).
inline Var row_mean(Var a) {
    Tape& t = *a.tape;
    const auto r = a.rows(), c = a.cols();
    if (r == 0) throw ValidationError("row_mean: empty matrix");
    DenseMatrix out(1, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(0, j) += a.value()(i, j);
    const double inv = 1.0 / static_cast<double>(r);
    for (auto& v : out.values()) v *= inv;
    return t.push(std::move(out), t.requires_grad(a), [a, inv](Tape& tp, std::size_t self) {
        const auto& g = tp.node(self).grad;
        auto& ga = tp.grad(a.id);
        for (std::size_t i = 0; i < ga.rows(); ++i)
            for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j) * inv;
    });
}

inline Var concat_cols(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::require(a.rows() == b.rows(), "concat_cols", a.value(), b.value());
    const auto r = a.rows(), ca = a.cols(), cb = b.cols();
    DenseMatrix out(r, ca + cb);
    for (std::size_t i = 0; i < r; ++i) {
        std::copy_n(a.value().row(i).data(), ca, out.row(i).data());
        std::copy_n(b.value().row(i).data(), cb, out.row(i).data() + ca);
    }
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.push(std::move(out), rg, [a, b, r, ca, cb](Tape& tp, std::size_t self) {
        const auto& g = tp.node(self).grad;
        if (tp.requires_grad(a)) {
            auto& ga = tp.grad(a.id);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < ca; ++j) ga(i, j) += g(i, j);
        }
        if (tp.requires_grad(b)) {
            auto& gb = tp.grad(b.id);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < cb; ++j) gb(i, j) += g(i, ca + j);
        }
    });
}

inline Var concat_rows(Var a, Var b) {
    Tape& t = detail::same_tape(a, b);
    detail::require(a.cols() == b.cols(), "concat_rows", a.value(), b.value());
    std::vector<double> vals = a.value().values();
    vals.insert(vals.end(), b.value().values().begin(), b.value().values().end());
    DenseMatrix out(a.rows() + b.rows(), a.cols(), std::move(vals));
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.push(std::move(out), rg, [a, b](Tape& tp, std::size_t self) {
        const auto& g = tp.node(self).grad;
        const auto na = a.value().size();
        if (tp.requires_grad(a)) {
            auto& ga = tp.grad(a.id);
            for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
        }
        if (tp.requires_grad(b)) {
            auto& gb = tp.grad(b.id);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
        }
    });
}

/// Row gather: out.row(k) = table.row(indices[k]). Adjoint scatter-adds.
inline Var embed_rows(Var table, std::vector<std::size_t> indices) {
    Tape& t = *table.tape;
    const auto c = table.cols();
    DenseMatrix out(indices.size(), c);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= table.rows()) {
            throw ValidationError("embed_rows: index " + std::to_string(indices[k]) + " exceeds table of " +
                                  std::to_string(table.rows()) + " rows");
        }
        std::copy_n(table.value().row(indices[k]).data(), c, out.row(k).data());
    }
    return t.push(std::move(out), t.requires_grad(table),
                  [table, idx = std::move(indices), c](Tape& tp, std::size_t self) {
                      const auto& g = tp.node(self).grad;
                      auto& gt = tp.grad(table.id);
                      for (std::size_t k = 0; k < idx.size(); ++k)
                          for (std::size_t j = 0; j < c; ++j) gt(idx[k], j) += g(k, j);
                  });
}

inline Var scale(Var a, double factor) {
    Tape& t = *a.tape;
    DenseMatrix out = a.value();
    for (auto& v : out.values()) v *= factor;
    return t.push(std::move(out), t.requires_grad(a), [a, factor](Tape& tp, std::size_t self) {
        const auto& g = tp.node(self).grad;
        auto& ga = tp.grad(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
    });
}

/// Sum of all entries as a 1x1 node.
inline Var sum(Var a) {
    Tape& t = *a.tape;
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return t.push(DenseMatrix(1, 1, s), t.requires_grad(a), [a](Tape& tp, std::size_t self) {
        const double g = tp.node(self).grad(0, 0);
        auto& ga = tp.grad(a.id);
        for (auto& v : ga.values()) v += g;
    });
}

/// Fused set encoder first layer with mean pooling over features.
///
/// For every row r of `features` (rows x D, constant data):
///   out.row(r) = mean_d relu(features(r, d) * value_weight + pos_proj.row(d) + bias)
/// where value_weight and bias are 1 x H and pos_proj is D x H.
inline Var set_encode(Var features, Var value_weight, Var pos_proj, Var bias) {
    Tape& t = detail::same_tape(features, value_weight);
    detail::same_tape(features, pos_proj);
    detail::same_tape(features, bias);
    const auto rows = features.rows(), d_in = features.cols(), h = value_weight.cols();
    detail::require(value_weight.rows() == 1 && bias.rows() == 1 && bias.cols() == h, "set_encode",
                    value_weight.value(), bias.value());
    detail::require(pos_proj.rows() == d_in && pos_proj.cols() == h, "set_encode", features.value(),
                    pos_proj.value());
    if (d_in == 0) throw ValidationError("set_encode: feature dimension must be at least 1");

    // base(d, :) = pos_proj(d, :) + bias
    DenseMatrix base = pos_proj.value();
    for (std::size_t d = 0; d < d_in; ++d)
        for (std::size_t j = 0; j < h; ++j) base(d, j) += bias.value()(0, j);

    const double inv = 1.0 / static_cast<double>(d_in);
    DenseMatrix out(rows, h);
    const double* w = value_weight.value().data();
    for (std::size_t r = 0; r < rows; ++r) {
        double* o = out.row(r).data();
        for (std::size_t d = 0; d < d_in; ++d) {
            const double x = features.value()(r, d);
            const double* b = base.row(d).data();
            for (std::size_t j = 0; j < h; ++j) {
                const double pre = x * w[j] + b[j];
                o[j] += pre > 0.0 ? pre : 0.0;
            }
        }
        for (std::size_t j = 0; j < h; ++j) o[j] *= inv;
    }
    const bool rg = t.requires_grad(value_weight) || t.requires_grad(pos_proj) || t.requires_grad(bias) ||
                    t.requires_grad(features);
    return t.push(std::move(out), rg,
                  [features, value_weight, pos_proj, bias, base = std::move(base), rows, d_in, h, inv](
                      Tape& tp, std::size_t self) {
                      const auto& g = tp.node(self).grad;
                      const double* w = value_weight.value().data();
                      DenseMatrix gw(1, h), gpos(d_in, h), gx(rows, d_in);
                      for (std::size_t r = 0; r < rows; ++r) {
                          const double* gr = g.row(r).data();
                          for (std::size_t d = 0; d < d_in; ++d) {
                              const double x = features.value()(r, d);
                              const double* b = base.row(d).data();
                              double* gp = gpos.row(d).data();
                              double gxd = 0.0;
                              for (std::size_t j = 0; j < h; ++j) {
                                  if (x * w[j] + b[j] > 0.0) {
                                      const double gj = gr[j] * inv;
                                      gw[j] += x * gj;
                                      gp[j] += gj;
                                      gxd += w[j] * gj;
                                  }
                              }
                              gx(r, d) = gxd;
                          }
                      }
                      if (tp.requires_grad(value_weight)) tp.grad(value_weight.id) += gw;
                      if (tp.requires_grad(pos_proj)) tp.grad(pos_proj.id) += gpos;
                      if (tp.requires_grad(bias)) {
                          auto& gb = tp.grad(bias.id);
                          for (std::size_t d = 0; d < d_in; ++d)
                              for (std::size_t j = 0; j < h; ++j) gb(0, j) += gpos(d, j);
                      }
                      if (tp.requires_grad(features)) tp.grad(features.id) += gx;
                  });
}

/// Binary cross-entropy on a logit, fused for stability:
/// max(z, 0) - z*y + log(1 + exp(-|z|)). Gradient is sigmoid(z) - y.
inline double bce_value(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

inline Var bce_loss(Var logit, double target) {
    Tape& t = *logit.tape;
    if (logit.rows() != 1 || logit.cols() != 1) throw ValidationError("bce_loss: logit must be 1x1");
    const double z = logit.value()(0, 0);
    return t.push(DenseMatrix(1, 1, bce_value(z, target)), t.requires_grad(logit),
                  [logit, target, z](Tape& tp, std::size_t self) {
                      tp.grad(logit.id)(0, 0) += tp.node(self).grad(0, 0) * (sigmoid(z) - target);
                  });
}

/// Reverse sweep plus accumulation of parameter gradients into the store.
inline void backward(Var loss, ParamStore& store) {
    loss.tape->backward(loss);
    loss.tape->accumulate_into(store);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

using LossBuilder = std::function<Var(Tape&, const ParamStore&)>;

struct GradCheckOptions {
    double step = 1e-5;
    // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
    double floor = 1e-6;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;

    double worst() const {
        double w = 0.0;
        for (const auto& e : entries) w = std::max(w, e.max_rel_error);
        return w;
    }
    bool passes(double tol) const { return worst() < tol; }
};

/// Compares analytic gradients against central differences for every entry
/// of every parameter. Parameter values are restored afterwards.
inline GradCheckReport grad_check(const LossBuilder& build, ParamStore& store, const GradCheckOptions& opt = {}) {
    for (auto& p : store) p.grad.fill(0.0);
    {
        Tape tape;
        backward(build(tape, store), store);
    }
    auto eval = [&]() {
        Tape tape;
        return build(tape, store).value()(0, 0);
    };
    GradCheckReport report;
    for (auto& p : store) {
        GradCheckEntry e{p.name};
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double orig = p.value[i];
            p.value[i] = orig + opt.step;
            const double up = eval();
            p.value[i] = orig - opt.step;
            const double down = eval();
            p.value[i] = orig;
            const double numeric = (up - down) / (2.0 * opt.step);
            const double analytic = p.grad[i];
            const double abs_err = std::abs(analytic - numeric);
            const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.floor});
            e.max_abs_error = std::max(e.max_abs_error, abs_err);
            e.max_rel_error = std::max(e.max_rel_error, abs_err / denom);
        }
        report.entries.push_back(e);
    }
    store.zero_grad();
    return report;
}

// ---------------------------------------------------------------------------
// Checkpoints: {"format_version": 1, "params": {name: {"shape": [r, c], "values": [...]}}}
// Doubles are written in shortest round-trip decimal form.

inline nlohmann::json params_to_json(const ParamStore& store) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& p : store) {
        params[p.name] = {{"shape", {p.value.rows(), p.value.cols()}}, {"values", p.value.values()}};
    }
    return {{"format_version", kFormatVersion}, {"params", params}};
}

/// Loads values into an existing store, checking that names and shapes agree.
inline void load_params(ParamStore& store, const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != kFormatVersion)
            throw ValidationError("checkpoint: unsupported format version");
        const auto& params = j.at("params");
        if (params.size() != store.size()) throw ValidationError("checkpoint: parameter count mismatch");
        for (auto& p : store) {
            if (!params.contains(p.name)) throw ValidationError("checkpoint: missing parameter '" + p.name + "'");
            const auto& entry = params.at(p.name);
            const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
            if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols())
                throw ValidationError("checkpoint: shape mismatch for '" + p.name + "'");
            p.value = DenseMatrix(shape[0], shape[1], entry.at("values").get<std::vector<double>>());
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("checkpoint: ") + ex.what());
    }
}

/// Builds a fresh store from a checkpoint (names and shapes from the file).
inline ParamStore params_from_json(const nlohmann::json& j) {
    ParamStore store;
    try {
        if (j.at("format_version").get<int>() != kFormatVersion)
            throw ValidationError("checkpoint: unsupported format version");
        for (const auto& [name, entry] : j.at("params").items()) {
            const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
            if (shape.size() != 2) throw ValidationError("checkpoint: bad shape for '" + name + "'");
            store.add(name, DenseMatrix(shape[0], shape[1], entry.at("values").get<std::vector<double>>()));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("checkpoint: ") + ex.what());
    }
    return store;
}

}  // namespace scresil
