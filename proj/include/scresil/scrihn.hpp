#pragma once

// SC-RIHN and its baselines.
//
// Per time step t the window row x_c (one value per product) of every firm is
// encoded by a shared set encoder
//     h_c = mean_d phi([x_{c,d} ; pos(d)]),  phi = W2 relu(W1 [.] + b1) + b2,
// firm rows are stacked over learned product embeddings, L propagation layers
// relu(P Z W) follow, firm rows are mean-pooled, the T step summaries are
// mean-pooled and a two-layer head produces the logit.
//
// All T steps are processed together as T stacked node blocks, so one tape
// per sample holds the whole computation.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "scresil/common.hpp"
#include "scresil/dense.hpp"
#include "scresil/diffcore.hpp"
#include "scresil/hypercore.hpp"

namespace scresil {

enum class ModelKind { scrihn, mlp, gcn_clique, gcn_bipartite, gcn_firm_only, sage_clique };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::scrihn: return "scrihn";
        case ModelKind::mlp: return "mlp";
        case ModelKind::gcn_clique: return "gcn_clique";
        case ModelKind::gcn_bipartite: return "gcn_bipartite";
        case ModelKind::gcn_firm_only: return "gcn_firm_only";
        case ModelKind::sage_clique: return "sage_clique";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    for (auto k : {ModelKind::scrihn, ModelKind::mlp, ModelKind::gcn_clique, ModelKind::gcn_bipartite,
                   ModelKind::gcn_firm_only, ModelKind::sage_clique})
        if (s == to_string(k)) return k;
    throw ValidationError("unknown model kind '" + s + "'");
}

struct ModelConfig {
    ModelKind kind = ModelKind::scrihn;
    int hidden_dim = 64;
    int conv_layers = 2;
    int feature_pos_dim = 16;
    int max_feature_index = 64;
    int max_product_index = 64;
    int window_T = 5;
    bool use_feature_pos = true;
    bool pool_product_nodes = false;
    int head_hidden = 64;
};

inline void validate_config(const ModelConfig& c) {
    if (c.hidden_dim < 1) throw ValidationError("model: hidden_dim must be >= 1");
    if (c.conv_layers < 0) throw ValidationError("model: conv_layers must be >= 0");
    if (c.feature_pos_dim < 1) throw ValidationError("model: feature_pos_dim must be >= 1");
    if (c.max_feature_index < 1 || c.max_product_index < 1)
        throw ValidationError("model: table capacities must be >= 1");
    if (c.window_T < 1) throw ValidationError("model: window_T must be >= 1");
    if (c.head_hidden < 1) throw ValidationError("model: head_hidden must be >= 1");
}

inline bool uses_product_nodes(ModelKind k) {
    return k == ModelKind::scrihn || k == ModelKind::gcn_clique || k == ModelKind::gcn_bipartite ||
           k == ModelKind::sage_clique;
}

inline nlohmann::json to_json(const ModelConfig& c) {
    return {{"kind", to_string(c.kind)},
            {"hidden_dim", c.hidden_dim},
            {"conv_layers", c.conv_layers},
            {"feature_pos_dim", c.feature_pos_dim},
            {"max_feature_index", c.max_feature_index},
            {"max_product_index", c.max_product_index},
            {"window_T", c.window_T},
            {"use_feature_pos", c.use_feature_pos},
            {"pool_product_nodes", c.pool_product_nodes},
            {"head_hidden", c.head_hidden}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    for (const auto& [key, _] : j.items())
        if (!to_json(c).contains(key)) throw ValidationError("model config: unknown key '" + key + "'");
    try {
        if (j.contains("kind")) c.kind = model_kind_from_string(j.at("kind").get<std::string>());
        c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
        c.conv_layers = j.value("conv_layers", c.conv_layers);
        c.feature_pos_dim = j.value("feature_pos_dim", c.feature_pos_dim);
        c.max_feature_index = j.value("max_feature_index", c.max_feature_index);
        c.max_product_index = j.value("max_product_index", c.max_product_index);
        c.window_T = j.value("window_T", c.window_T);
        c.use_feature_pos = j.value("use_feature_pos", c.use_feature_pos);
        c.pool_product_nodes = j.value("pool_product_nodes", c.pool_product_nodes);
        c.head_hidden = j.value("head_hidden", c.head_hidden);
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("model config: ") + ex.what());
    }
    validate_config(c);
    return c;
}

// ---------------------------------------------------------------------------
// Parameters

namespace detail {

inline DenseMatrix xavier(std::size_t r, std::size_t c, double fan_in, double fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    DenseMatrix m(r, c);
    for (auto& v : m.values()) v = rng.uniform(-a, a);
    return m;
}

inline DenseMatrix gaussian(std::size_t r, std::size_t c, double sd, Rng& rng) {
    DenseMatrix m(r, c);
    for (auto& v : m.values()) v = rng.normal(0.0, sd);
    return m;
}

}  // namespace detail

/// Fresh parameters. Weights are Xavier-uniform, embedding tables N(0, 0.02),
/// biases zero. Parameters a configuration never reads are not created.
inline ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);
    Rng rng(derive_seed(seed, 0x1217));
    const auto h = static_cast<std::size_t>(cfg.hidden_dim);
    const auto fp = static_cast<std::size_t>(cfg.feature_pos_dim);
    const double phi_in = 1.0 + static_cast<double>(fp);
    ParamStore s;
    if (cfg.use_feature_pos) {
        s.add("feature_pos", detail::gaussian(static_cast<std::size_t>(cfg.max_feature_index), fp, 0.02, rng));
        s.add("phi.w_pos", detail::xavier(fp, h, phi_in, static_cast<double>(h), rng));
    }
    s.add("phi.w_value", detail::xavier(1, h, phi_in, static_cast<double>(h), rng));
    s.add("phi.b1", DenseMatrix(1, h));
    s.add("phi.w2", detail::xavier(h, h, static_cast<double>(h), static_cast<double>(h), rng));
    s.add("phi.b2", DenseMatrix(1, h));
    if (uses_product_nodes(cfg.kind))
        s.add("product_pos", detail::gaussian(static_cast<std::size_t>(cfg.max_product_index), h, 0.02, rng));
    if (cfg.kind != ModelKind::mlp) {
        const std::size_t in = cfg.kind == ModelKind::sage_clique ? 2 * h : h;
        for (int l = 0; l < cfg.conv_layers; ++l)
            s.add("conv." + std::to_string(l) + ".w",
                  detail::xavier(in, h, static_cast<double>(in), static_cast<double>(h), rng));
    }
    const auto hh = static_cast<std::size_t>(cfg.head_hidden);
    s.add("head.w1", detail::xavier(h, hh, static_cast<double>(h), static_cast<double>(hh), rng));
    s.add("head.b1", DenseMatrix(1, hh));
    s.add("head.w2", detail::xavier(hh, 1, static_cast<double>(hh), 1.0, rng));
    s.add("head.b2", DenseMatrix(1, 1));
    return s;
}

// ---------------------------------------------------------------------------
// Per-chain structure

/// Structure-dependent operators for one chain, computed once and reused for
/// every window of that chain.
struct ChainContext {
    std::size_t firm_count = 0;
    std::size_t product_count = 0;
    std::size_t node_count = 0;  // rows of one node block (firms, plus products when used)
    DenseMatrix propagation;     // node_count x node_count; empty for mlp
};

inline ChainContext make_context(const SupplyChainHypergraph& h, ModelKind kind) {
    require_valid(h);
    ChainContext ctx;
    ctx.firm_count = h.firm_count();
    ctx.product_count = h.product_count();
    ctx.node_count = uses_product_nodes(kind) ? h.node_count() : h.firm_count();
    switch (kind) {
        case ModelKind::scrihn: ctx.propagation = build_incidence_system(h).propagation; break;
        case ModelKind::mlp: break;
        case ModelKind::gcn_clique: ctx.propagation = reduce(h, ReductionMode::clique).normalized; break;
        case ModelKind::gcn_bipartite: ctx.propagation = reduce(h, ReductionMode::bipartite).normalized; break;
        case ModelKind::gcn_firm_only: ctx.propagation = reduce(h, ReductionMode::firm_only).normalized; break;
        case ModelKind::sage_clique: ctx.propagation = reduce(h, ReductionMode::clique).neighbor_mean(); break;
    }
    return ctx;
}

/// Fixed input transform applied to raw inventory before encoding.
inline double encode_input(double x) { return std::log1p(std::max(x, 0.0)); }

// ---------------------------------------------------------------------------
// Forward pieces

/// Set encoder over the rows of `features` (rows x D_in, already transformed).
/// Returns rows x hidden_dim.
inline Var encode_features(Tape& t, const ParamStore& s, const ModelConfig& cfg, Var features) {
    const auto d_in = features.cols();
    if (d_in > static_cast<std::size_t>(cfg.max_feature_index))
        throw ValidationError("encode_features: D_in " + std::to_string(d_in) + " exceeds feature table capacity " +
                              std::to_string(cfg.max_feature_index));
    const auto h = static_cast<std::size_t>(cfg.hidden_dim);
    Var pos_proj;
    if (cfg.use_feature_pos) {
        std::vector<std::size_t> idx(d_in);
        for (std::size_t d = 0; d < d_in; ++d) idx[d] = d;
        pos_proj = matmul(embed_rows(t.param(s, "feature_pos"), std::move(idx)), t.param(s, "phi.w_pos"));
    } else {
        pos_proj = t.constant(DenseMatrix(d_in, h));
    }
    // phi's output layer is affine, so it commutes with the mean over d.
    Var pooled = set_encode(features, t.param(s, "phi.w_value"), pos_proj, t.param(s, "phi.b1"));
    return add_bias(matmul(pooled, t.param(s, "phi.w2")), t.param(s, "phi.b2"));
}

/// Stacks firm embeddings (T blocks of |C| rows) with the product table rows
/// into T node blocks of |C| + |P| rows each. With include_products false the
/// firm rows are returned unchanged.
inline Var init_node_matrix(Tape& t, const ParamStore& s, const ModelConfig& cfg, Var firm_rows,
                            std::size_t firm_count, std::size_t product_count, bool include_products) {
    if (!include_products || product_count == 0) return firm_rows;
    if (product_count > static_cast<std::size_t>(cfg.max_product_index))
        throw ValidationError("init_node_matrix: |P| " + std::to_string(product_count) +
                              " exceeds product table capacity " + std::to_string(cfg.max_product_index));
    const std::size_t blocks = firm_rows.rows() / firm_count;
    Var table = t.param(s, "product_pos");
    const std::size_t firm_total = firm_rows.rows();
    std::vector<std::size_t> prod_idx(product_count);
    for (std::size_t k = 0; k < product_count; ++k) prod_idx[k] = k;
    Var both = concat_rows(firm_rows, embed_rows(table, std::move(prod_idx)));
    std::vector<std::size_t> gather;
    gather.reserve(blocks * (firm_count + product_count));
    for (std::size_t b = 0; b < blocks; ++b) {
        for (std::size_t c = 0; c < firm_count; ++c) gather.push_back(b * firm_count + c);
        for (std::size_t k = 0; k < product_count; ++k) gather.push_back(firm_total + k);
    }
    return embed_rows(both, std::move(gather));
}

/// relu(P Z W) applied to every node block of Z.
inline Var hconv_layer(Var z, Var propagation, Var w, std::size_t blocks) {
    return relu(matmul(block_matmul(propagation, z, blocks), w));
}

/// relu([Z ; M Z] W) with M the neighbour-mean operator.
inline Var sage_layer(Var z, Var neighbor_mean, Var w, std::size_t blocks) {
    return relu(matmul(concat_cols(z, block_matmul(neighbor_mean, z, blocks)), w));
}

/// Stacks the first T window states (transformed) into a (T |C|) x |P| matrix.
inline DenseMatrix stack_window(const std::vector<DenseMatrix>& window, std::size_t T) {
    if (window.size() < T)
        throw ValidationError("window holds " + std::to_string(window.size()) + " states, model needs " +
                              std::to_string(T));
    if (T == 0) throw ValidationError("window length must be >= 1");
    const auto nf = window[0].rows(), np = window[0].cols();
    DenseMatrix out(T * nf, np);
    for (std::size_t t = 0; t < T; ++t) {
        if (window[t].rows() != nf || window[t].cols() != np) throw ValidationError("window states differ in shape");
        for (std::size_t i = 0; i < nf * np; ++i) {
            const double x = window[t].values()[i];
            // relu would silently map NaN to zero further down
            if (!std::isfinite(x)) throw ValidationError("window contains a non-finite state value");
            out.values()[t * nf * np + i] = encode_input(x);
        }
    }
    return out;
}

/// Graph-level summary over the whole window: mean over time of the per-step
/// pooled node embeddings. Returns a 1 x hidden_dim node.
inline Var encode_window(Tape& t, const ParamStore& s, const ModelConfig& cfg, const ChainContext& ctx,
                         const std::vector<DenseMatrix>& window) {
    const auto T = static_cast<std::size_t>(cfg.window_T);
    DenseMatrix stacked = stack_window(window, T);
    if (stacked.rows() != T * ctx.firm_count || stacked.cols() != ctx.product_count)
        throw ValidationError("window shape " + window[0].shape_string() + " does not match chain");
    const auto h = static_cast<std::size_t>(cfg.hidden_dim);
    if (ctx.product_count == 0) return t.constant(DenseMatrix(1, h));

    Var firms = encode_features(t, s, cfg, t.constant(std::move(stacked)));
    const bool with_products = uses_product_nodes(cfg.kind);
    Var z = init_node_matrix(t, s, cfg, firms, ctx.firm_count, ctx.product_count, with_products);
    if (cfg.kind != ModelKind::mlp && cfg.conv_layers > 0) {
        Var p = t.constant(ctx.propagation);
        for (int l = 0; l < cfg.conv_layers; ++l) {
            Var w = t.param(s, "conv." + std::to_string(l) + ".w");
            z = cfg.kind == ModelKind::sage_clique ? sage_layer(z, p, w, T) : hconv_layer(z, p, w, T);
        }
    }
    // Blocks have equal size, so the mean over pooled rows of all blocks is
    // the mean over time of the per-step means.
    const std::size_t block = with_products ? ctx.firm_count + ctx.product_count : ctx.firm_count;
    if (!(with_products && !cfg.pool_product_nodes)) return row_mean(z);
    std::vector<std::size_t> firm_rows;
    firm_rows.reserve(T * ctx.firm_count);
    for (std::size_t b = 0; b < T; ++b)
        for (std::size_t c = 0; c < ctx.firm_count; ++c) firm_rows.push_back(b * block + c);
    return row_mean(embed_rows(z, std::move(firm_rows)));
}

inline Var head(Tape& t, const ParamStore& s, Var summary) {
    Var hidden = relu(add_bias(matmul(summary, t.param(s, "head.w1")), t.param(s, "head.b1")));
    return add_bias(matmul(hidden, t.param(s, "head.w2")), t.param(s, "head.b2"));
}

/// 1x1 logit node for one sample.
inline Var forward_logit(Tape& t, const ParamStore& s, const ModelConfig& cfg, const ChainContext& ctx,
                         const std::vector<DenseMatrix>& window) {
    return head(t, s, encode_window(t, s, cfg, ctx, window));
}

struct Prediction {
    double logit = 0.0;
    double probability = 0.0;
};

inline Prediction predict(const ParamStore& s, const ModelConfig& cfg, const ChainContext& ctx,
                          const std::vector<DenseMatrix>& window) {
    Tape t;
    const double z = forward_logit(t, s, cfg, ctx, window).value()(0, 0);
    return {z, sigmoid(z)};
}

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
    ModelConfig config;
    ParamStore params;
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
    auto j = params_to_json(c.params);
    j["model"] = to_json(c.config);
    return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    if (!j.contains("model")) throw ValidationError("checkpoint: missing model block");
    Checkpoint c;
    c.config = model_config_from_json(j.at("model"));
    c.params = init_params(c.config, 0);
    load_params(c.params, j);
    return c;
}

}  // namespace scresil
