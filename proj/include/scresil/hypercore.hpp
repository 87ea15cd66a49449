#pragma once

// Supply-chain hypergraph model: tripartite hyperedges (upstream firm,
// product, downstream firm), the normalized incidence operator used by
// hypergraph convolution, random perturbations, and pairwise reductions
// used by the graph baselines.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "scresil/common.hpp"
#include "scresil/dense.hpp"

namespace scresil {

struct Hyperedge {
    std::size_t upstream = 0;
    std::size_t product = 0;
    std::size_t downstream = 0;

    friend auto operator<=>(const Hyperedge&, const Hyperedge&) = default;
};

struct SupplyChainHypergraph {
    std::string chain_id;
    std::vector<std::string> firms;
    std::vector<std::string> products;
    std::vector<Hyperedge> hyperedges;

    std::size_t firm_count() const { return firms.size(); }
    std::size_t product_count() const { return products.size(); }
    std::size_t node_count() const { return firms.size() + products.size(); }
    std::size_t edge_count() const { return hyperedges.size(); }

    friend bool operator==(const SupplyChainHypergraph&, const SupplyChainHypergraph&) = default;
};

/// Returns one human-readable line per broken invariant; empty means valid.
inline std::vector<std::string> validate(const SupplyChainHypergraph& h) {
    std::vector<std::string> issues;
    if (h.firms.empty()) issues.emplace_back("hypergraph has no firms");
    std::set<Hyperedge> seen;
    for (std::size_t e = 0; e < h.hyperedges.size(); ++e) {
        const auto& edge = h.hyperedges[e];
        const auto tag = " at edge " + std::to_string(e);
        if (edge.upstream >= h.firm_count())
            issues.push_back("upstream firm index " + std::to_string(edge.upstream) + " out of range" + tag);
        if (edge.downstream >= h.firm_count())
            issues.push_back("downstream firm index " + std::to_string(edge.downstream) + " out of range" + tag);
        if (edge.product >= h.product_count())
            issues.push_back("product index " + std::to_string(edge.product) + " out of range" + tag);
        if (edge.upstream == edge.downstream) issues.push_back("self-supply" + tag);
        if (!seen.insert(edge).second) issues.push_back("duplicate hyperedge" + tag);
    }
    return issues;
}

inline void require_valid(const SupplyChainHypergraph& h) {
    const auto issues = validate(h);
    if (issues.empty()) return;
    std::string msg = "invalid hypergraph";
    if (!h.chain_id.empty()) msg += " '" + h.chain_id + "'";
    for (const auto& i : issues) msg += "; " + i;
    throw ValidationError(msg);
}

/// Incidence matrices and the normalized propagation operator
/// Dv^-1/2 H We De^-1 H^T Dv^-1/2. Node rows are firms first, then products.
struct IncidenceSystem {
    std::size_t firm_count = 0;
    std::size_t product_count = 0;
    std::size_t node_count = 0;
    std::size_t edge_count = 0;
    DenseMatrix incidence;              // node_count x edge_count, 0/1
    std::vector<double> node_degrees;   // diagonal of Dv
    std::vector<double> edge_degrees;   // diagonal of De (always 3)
    std::vector<double> edge_weights;   // diagonal of We (identity)
    DenseMatrix propagation;            // node_count x node_count, symmetric
};

inline IncidenceSystem build_incidence_system(const SupplyChainHypergraph& h) {
    require_valid(h);
    IncidenceSystem sys;
    sys.firm_count = h.firm_count();
    sys.product_count = h.product_count();
    sys.node_count = h.node_count();
    sys.edge_count = h.edge_count();
    sys.incidence = DenseMatrix(sys.node_count, sys.edge_count);
    sys.node_degrees.assign(sys.node_count, 0.0);
    sys.edge_degrees.assign(sys.edge_count, 0.0);
    sys.edge_weights.assign(sys.edge_count, 1.0);

    for (std::size_t e = 0; e < sys.edge_count; ++e) {
        const auto& edge = h.hyperedges[e];
        for (std::size_t row : {edge.upstream, sys.firm_count + edge.product, edge.downstream}) {
            sys.incidence(row, e) = 1.0;
            sys.node_degrees[row] += 1.0;
            sys.edge_degrees[e] += 1.0;
        }
    }

    std::vector<double> inv_sqrt(sys.node_count, 0.0);
    for (std::size_t i = 0; i < sys.node_count; ++i) {
        if (sys.node_degrees[i] > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(sys.node_degrees[i]);
    }

    // Each hyperedge contributes w_e / d_e to every ordered pair of its members.
    sys.propagation = DenseMatrix(sys.node_count, sys.node_count);
    for (std::size_t e = 0; e < sys.edge_count; ++e) {
        const auto& edge = h.hyperedges[e];
        const std::size_t members[3] = {edge.upstream, sys.firm_count + edge.product, edge.downstream};
        const double share = sys.edge_weights[e] / sys.edge_degrees[e];
        for (std::size_t a : members)
            for (std::size_t b : members) sys.propagation(a, b) += share * inv_sqrt[a] * inv_sqrt[b];
    }
    return sys;
}

enum class PerturbMode { node, edge };

inline constexpr std::size_t kRemoved = std::numeric_limits<std::size_t>::max();

struct PerturbResult {
    SupplyChainHypergraph hypergraph;
    std::vector<std::size_t> firm_map;     // old index -> new index, kRemoved if dropped
    std::vector<std::size_t> product_map;
};

/// Random structural removal. Node mode drops each firm and product with
/// probability p together with incident hyperedges and reindexes survivors in
/// their original order; edge mode drops hyperedges only.
/// Returns nullopt when every firm was dropped; the caller should redraw.
inline std::optional<PerturbResult> perturb(const SupplyChainHypergraph& h, PerturbMode mode, double p,
                                            std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("perturb: probability must lie in [0, 1]");
    require_valid(h);
    Rng rng(seed);
    PerturbResult out;
    out.hypergraph.chain_id = h.chain_id;
    out.firm_map.resize(h.firm_count());
    out.product_map.resize(h.product_count());

    if (mode == PerturbMode::edge) {
        out.hypergraph.firms = h.firms;
        out.hypergraph.products = h.products;
        for (std::size_t i = 0; i < h.firm_count(); ++i) out.firm_map[i] = i;
        for (std::size_t i = 0; i < h.product_count(); ++i) out.product_map[i] = i;
        for (const auto& e : h.hyperedges) {
            if (!rng.bernoulli(p)) out.hypergraph.hyperedges.push_back(e);
        }
        return out;
    }

    for (std::size_t i = 0; i < h.firm_count(); ++i) {
        if (rng.bernoulli(p)) {
            out.firm_map[i] = kRemoved;
        } else {
            out.firm_map[i] = out.hypergraph.firms.size();
            out.hypergraph.firms.push_back(h.firms[i]);
        }
    }
    for (std::size_t i = 0; i < h.product_count(); ++i) {
        if (rng.bernoulli(p)) {
            out.product_map[i] = kRemoved;
        } else {
            out.product_map[i] = out.hypergraph.products.size();
            out.hypergraph.products.push_back(h.products[i]);
        }
    }
    if (out.hypergraph.firms.empty()) return std::nullopt;
    for (const auto& e : h.hyperedges) {
        const auto u = out.firm_map[e.upstream];
        const auto q = out.product_map[e.product];
        const auto v = out.firm_map[e.downstream];
        if (u == kRemoved || q == kRemoved || v == kRemoved) continue;
        out.hypergraph.hyperedges.push_back({u, q, v});
    }
    return out;
}

enum class ReductionMode { clique, bipartite, firm_only };

/// Ordinary graph obtained by flattening the hypergraph.
struct ReducedGraph {
    std::size_t node_count = 0;
    DenseMatrix adjacency;    // symmetric 0/1 with unit diagonal (self-loops)
    DenseMatrix normalized;   // D^-1/2 adjacency D^-1/2
    std::vector<bool> firm_mask;

    /// Mean over neighbours excluding self; rows of isolated nodes are zero.
    DenseMatrix neighbor_mean() const {
        DenseMatrix m(node_count, node_count);
        for (std::size_t i = 0; i < node_count; ++i) {
            double deg = 0.0;
            for (std::size_t j = 0; j < node_count; ++j)
                if (i != j) deg += adjacency(i, j);
            if (deg == 0.0) continue;
            for (std::size_t j = 0; j < node_count; ++j)
                if (i != j) m(i, j) = adjacency(i, j) / deg;
        }
        return m;
    }
};

inline ReducedGraph reduce(const SupplyChainHypergraph& h, ReductionMode mode) {
    require_valid(h);
    const std::size_t nf = h.firm_count();
    ReducedGraph g;
    g.node_count = mode == ReductionMode::firm_only ? nf : h.node_count();
    g.adjacency = DenseMatrix(g.node_count, g.node_count);
    g.firm_mask.assign(g.node_count, false);
    for (std::size_t i = 0; i < nf; ++i) g.firm_mask[i] = true;

    auto link = [&g](std::size_t a, std::size_t b) {
        g.adjacency(a, b) = 1.0;
        g.adjacency(b, a) = 1.0;
    };
    for (const auto& e : h.hyperedges) {
        const std::size_t prow = nf + e.product;
        switch (mode) {
            case ReductionMode::clique:
                link(e.upstream, prow);
                link(prow, e.downstream);
                link(e.upstream, e.downstream);
                break;
            case ReductionMode::bipartite:
                link(e.upstream, prow);
                link(prow, e.downstream);
                break;
            case ReductionMode::firm_only:
                link(e.upstream, e.downstream);
                break;
        }
    }
    for (std::size_t i = 0; i < g.node_count; ++i) g.adjacency(i, i) = 1.0;

    std::vector<double> inv_sqrt(g.node_count, 0.0);
    for (std::size_t i = 0; i < g.node_count; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < g.node_count; ++j) deg += g.adjacency(i, j);
        if (deg > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(deg);
    }
    g.normalized = DenseMatrix(g.node_count, g.node_count);
    for (std::size_t i = 0; i < g.node_count; ++i)
        for (std::size_t j = 0; j < g.node_count; ++j)
            g.normalized(i, j) = inv_sqrt[i] * g.adjacency(i, j) * inv_sqrt[j];
    return g;
}

struct DegreeStats {
    std::size_t node_count = 0;
    std::size_t edge_count = 0;
    double mean_firm_degree = 0.0;
    double mean_product_degree = 0.0;
};

inline DegreeStats degree_stats(const SupplyChainHypergraph& h) {
    require_valid(h);
    DegreeStats s;
    s.node_count = h.node_count();
    s.edge_count = h.edge_count();
    std::vector<std::size_t> firm_deg(h.firm_count(), 0), product_deg(h.product_count(), 0);
    for (const auto& e : h.hyperedges) {
        ++firm_deg[e.upstream];
        ++firm_deg[e.downstream];
        ++product_deg[e.product];
    }
    auto mean = [](const std::vector<std::size_t>& v) {
        if (v.empty()) return 0.0;
        double total = 0.0;
        for (auto d : v) total += static_cast<double>(d);
        return total / static_cast<double>(v.size());
    };
    s.mean_firm_degree = mean(firm_deg);
    s.mean_product_degree = mean(product_deg);
    return s;
}

// ---------------------------------------------------------------------------
// JSON: {"chain_id", "firms", "products", "hyperedges": [[u, p, v], ...]}

inline nlohmann::json to_json(const SupplyChainHypergraph& h) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : h.hyperedges) edges.push_back({e.upstream, e.product, e.downstream});
    return {{"chain_id", h.chain_id}, {"firms", h.firms}, {"products", h.products}, {"hyperedges", edges}};
}

inline SupplyChainHypergraph hypergraph_from_json(const nlohmann::json& j) {
    SupplyChainHypergraph h;
    try {
        h.chain_id = j.at("chain_id").get<std::string>();
        h.firms = j.at("firms").get<std::vector<std::string>>();
        h.products = j.at("products").get<std::vector<std::string>>();
        for (const auto& e : j.at("hyperedges")) {
            if (!e.is_array() || e.size() != 3) throw ValidationError("hyperedge must be a triple");
            for (const auto& idx : e) {
                if (!idx.is_number_integer() || idx.get<long long>() < 0)
                    throw ValidationError("hyperedge indices must be non-negative integers");
            }
            h.hyperedges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e[2].get<std::size_t>()});
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("hypergraph json: ") + ex.what());
    }
    require_valid(h);
    return h;
}

}  // namespace scresil
