#pragma once

// Synthetic supply chains and their inventory dynamics.
//
// A generated chain is a tiered network: tier-0 firms make raw products from
// nothing, tier-k firms make one tier-k product whose bill of materials lists
// 1-3 tier-(k-1) products, and the last tier holds retailers that resell
// products of the tier below to an external market. Every firm/input
// requirement is served by several upstream makers, one hyperedge each.
//
// The simulator is a discrete-time inventory/production feedback loop with
// exponential-smoothing forecasts and a stock-adjustment ordering rule
// (gain alpha), which is where order amplification comes from. One step runs:
//   1. collect demand: orders placed by customers last step (+ d_ext at retailers)
//   2. forecast       F <- theta*d + (1-theta)*F
//   3. desired output W = max(0, F + alpha*(kappa*F - I_out))
//   4. production     P = min(W, min_r I_r, remaining capacity), unit BOM
//   5. consume inputs, add output
//   6. ship           orders filled from stock with proportional rationing;
//                     receipts land downstream in the same step
//   7. order          U <- theta*used + (1-theta)*U,
//                     o = max(0, U + alpha*(kappa*U - I_r)), split evenly over suppliers
//   8. clamp to [0, i_max]; flag divergence when a value exceeds g_div

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "scresil/common.hpp"
#include "scresil/dense.hpp"
#include "scresil/hypercore.hpp"

namespace scresil {

struct IntRange {
    int lo = 1;
    int hi = 1;

    int draw(Rng& rng) const { return rng.uniform_int(lo, hi); }
    friend bool operator==(const IntRange&, const IntRange&) = default;
};

struct RealRange {
    double lo = 0.0;
    double hi = 0.0;

    double draw(Rng& rng) const { return lo == hi ? lo : rng.uniform(lo, hi); }
    friend bool operator==(const RealRange&, const RealRange&) = default;
};

struct GeneratorConfig {
    IntRange tiers{3, 5};  // including the retail tier
    IntRange firms_per_tier{10, 15};
    IntRange products_per_tier{2, 3};
    IntRange inputs_per_product{1, 3};
    IntRange supplier_fanout{6, 10};
};

inline void validate_config(const GeneratorConfig& cfg) {
    auto check = [](const IntRange& r, int min_lo, const char* what) {
        if (r.lo < min_lo || r.hi < r.lo)
            throw ValidationError(std::string("generator: invalid range for ") + what);
    };
    check(cfg.tiers, 2, "tiers");
    check(cfg.firms_per_tier, 1, "firms_per_tier");
    check(cfg.products_per_tier, 1, "products_per_tier");
    check(cfg.inputs_per_product, 1, "inputs_per_product");
    check(cfg.supplier_fanout, 1, "supplier_fanout");
}

/// Draws a tiered chain. Deterministic per (cfg, seed).
inline SupplyChainHypergraph generate_network(const GeneratorConfig& cfg, std::uint64_t seed,
                                              std::string chain_id = "chain") {
    validate_config(cfg);
    Rng rng(seed);
    SupplyChainHypergraph h;
    h.chain_id = std::move(chain_id);

    const int tiers = cfg.tiers.draw(rng);
    std::vector<std::vector<std::size_t>> tier_firms(tiers), tier_products(tiers - 1);
    std::vector<std::size_t> firm_output;  // product made by each firm; unused for retailers

    for (int k = 0; k < tiers; ++k) {
        const bool retail = k == tiers - 1;
        if (!retail) {
            const int np = cfg.products_per_tier.draw(rng);
            for (int i = 0; i < np; ++i) {
                tier_products[k].push_back(h.products.size());
                h.products.push_back("p" + std::to_string(k) + "_" + std::to_string(i));
            }
        }
        const int nf = cfg.firms_per_tier.draw(rng);
        for (int i = 0; i < nf; ++i) {
            tier_firms[k].push_back(h.firms.size());
            h.firms.push_back((retail ? "r" : "f") + std::to_string(k) + "_" + std::to_string(i));
            firm_output.push_back(0);
        }
        if (!retail) {
            // every product gets at least one maker
            const auto& prods = tier_products[k];
            for (std::size_t i = 0; i < tier_firms[k].size(); ++i) {
                const auto f = tier_firms[k][i];
                firm_output[f] = i < prods.size() ? prods[i] : prods[rng.uniform_int(0, int(prods.size()) - 1)];
            }
        }
    }

    auto makers_of = [&](int k, std::size_t product) {
        std::vector<std::size_t> out;
        for (auto f : tier_firms[k])
            if (firm_output[f] == product) out.push_back(f);
        return out;
    };

    // Bill of materials per product (and stock list per retailer), drawn from
    // the tier below; products not yet used by anyone are preferred first so
    // that every product has downstream demand.
    auto draw_inputs = [&](int k, std::vector<char>& used) {
        const auto& below = tier_products[k - 1];
        const int want = std::min<int>(cfg.inputs_per_product.draw(rng), int(below.size()));
        std::vector<std::size_t> pool(below.begin(), below.end());
        rng.shuffle(pool);
        std::stable_partition(pool.begin(), pool.end(), [&](std::size_t p) { return !used[p]; });
        std::vector<std::size_t> inputs(pool.begin(), pool.begin() + want);
        for (auto p : inputs) used[p] = 1;
        std::sort(inputs.begin(), inputs.end());
        return inputs;
    };

    std::vector<std::vector<std::size_t>> bom(h.product_count());
    std::vector<std::vector<std::size_t>> retail_stock(h.firm_count());
    std::vector<char> used(h.product_count(), 0);
    for (int k = 1; k < tiers; ++k) {
        if (k < tiers - 1) {
            for (auto p : tier_products[k]) bom[p] = draw_inputs(k, used);
        } else {
            for (auto f : tier_firms[k]) retail_stock[f] = draw_inputs(k, used);
        }
    }

    std::vector<std::size_t> customers(h.firm_count(), 0);
    std::set<Hyperedge> edges;
    for (int k = 1; k < tiers; ++k) {
        const bool retail = k == tiers - 1;
        for (auto f : tier_firms[k]) {
            const auto& inputs = retail ? retail_stock[f] : bom[firm_output[f]];
            for (auto r : inputs) {
                auto makers = makers_of(k - 1, r);
                rng.shuffle(makers);
                const auto fanout = std::min<std::size_t>(cfg.supplier_fanout.draw(rng), makers.size());
                for (std::size_t i = 0; i < fanout; ++i) {
                    edges.insert({makers[i], r, f});
                    ++customers[makers[i]];
                }
            }
        }
    }
    // Makers nobody picked are attached to a random customer of their product.
    for (int k = 0; k + 1 < tiers; ++k) {
        for (auto f : tier_firms[k]) {
            if (customers[f] > 0) continue;
            const auto product = firm_output[f];
            std::vector<std::size_t> buyers;
            for (auto g : tier_firms[k + 1]) {
                const auto& inputs = k + 1 == tiers - 1 ? retail_stock[g] : bom[firm_output[g]];
                if (std::find(inputs.begin(), inputs.end(), product) != inputs.end()) buyers.push_back(g);
            }
            if (buyers.empty()) continue;
            const auto g = buyers[rng.uniform_int(0, int(buyers.size()) - 1)];
            edges.insert({f, product, g});
            ++customers[f];
        }
    }
    h.hyperedges.assign(edges.begin(), edges.end());
    require_valid(h);
    return h;
}

// ---------------------------------------------------------------------------
// Dynamics

struct DynamicsConfig {
    double theta = 0.5;      // forecast smoothing weight, (0, 1]
    double alpha = 0.5;      // stock-adjustment gain
    double kappa = 2.0;      // inventory coverage multiplier
    double capacity = 10.0;  // per-firm production cap per step
    double d_ext = 1.0;      // market demand per retailer product per step
    double u_hi = 5.0;       // initial inventory drawn from [0, kappa*max(d_ext, 1)*u_hi]
    double i_max = 1e6;
    double g_div = 1e5;
    int steps = 200;
    int n_trajectories = 12;

    friend bool operator==(const DynamicsConfig&, const DynamicsConfig&) = default;
};

inline void validate_config(const DynamicsConfig& c) {
    if (!(c.theta > 0.0 && c.theta <= 1.0)) throw ValidationError("dynamics: theta must lie in (0, 1]");
    if (!(c.alpha >= 0.0)) throw ValidationError("dynamics: alpha must be >= 0");
    if (!(c.kappa >= 0.0)) throw ValidationError("dynamics: kappa must be >= 0");
    if (!(c.capacity > 0.0)) throw ValidationError("dynamics: capacity must be > 0");
    if (!(c.d_ext >= 0.0)) throw ValidationError("dynamics: d_ext must be >= 0");
    if (!(c.u_hi >= 0.0)) throw ValidationError("dynamics: u_hi must be >= 0");
    if (!(c.i_max > 0.0)) throw ValidationError("dynamics: i_max must be > 0");
    if (c.g_div > c.i_max) throw ValidationError("dynamics: g_div must not exceed i_max");
    if (c.steps < 0) throw ValidationError("dynamics: steps must be >= 0");
    if (c.n_trajectories < 1) throw ValidationError("dynamics: n_trajectories must be >= 1");
}

/// Per-firm roles derived from the hyperedges.
///
/// A firm's inputs are the products it buys and does not itself sell; a firm
/// with no customers but with suppliers is a retailer that resells what it
/// buys to the market.
struct ChainTopology {
    std::size_t firm_count = 0;
    std::size_t product_count = 0;
    std::vector<Hyperedge> edges;
    std::vector<std::vector<std::size_t>> outputs;      // per firm
    std::vector<std::vector<std::size_t>> inputs;       // per firm
    std::vector<char> retailer;
    std::vector<std::vector<std::size_t>> held;         // products with a stock slot
    // edge ids by (firm, product) for customers / suppliers
    std::vector<std::vector<std::size_t>> customer_edges;  // index firm*P + product
    std::vector<std::vector<std::size_t>> supplier_edges;  // index firm*P + product

    explicit ChainTopology(const SupplyChainHypergraph& h)
        : firm_count(h.firm_count()),
          product_count(h.product_count()),
          edges(h.hyperedges),
          outputs(firm_count),
          inputs(firm_count),
          retailer(firm_count, 0),
          held(firm_count),
          customer_edges(firm_count * product_count),
          supplier_edges(firm_count * product_count) {
        require_valid(h);
        std::vector<std::vector<std::size_t>> bought(firm_count);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const auto& edge = edges[e];
            customer_edges[slot(edge.upstream, edge.product)].push_back(e);
            supplier_edges[slot(edge.downstream, edge.product)].push_back(e);
            outputs[edge.upstream].push_back(edge.product);
            bought[edge.downstream].push_back(edge.product);
        }
        for (std::size_t c = 0; c < firm_count; ++c) {
            auto uniq = [](std::vector<std::size_t>& v) {
                std::sort(v.begin(), v.end());
                v.erase(std::unique(v.begin(), v.end()), v.end());
            };
            uniq(outputs[c]);
            uniq(bought[c]);
            for (auto p : bought[c])
                if (!std::binary_search(outputs[c].begin(), outputs[c].end(), p)) inputs[c].push_back(p);
            retailer[c] = outputs[c].empty() && !inputs[c].empty();
            held[c] = outputs[c];
            held[c].insert(held[c].end(), bought[c].begin(), bought[c].end());
            uniq(held[c]);
        }
    }

    std::size_t slot(std::size_t firm, std::size_t product) const { return firm * product_count + product; }
};

/// Forecasts and in-flight orders carried between steps.
struct DynamicsCarry {
    DenseMatrix demand_forecast;  // F, firms x products (output / resale columns)
    DenseMatrix usage_forecast;   // U, firms x products (input columns)
    std::vector<double> orders;   // per hyperedge, placed last step by the downstream firm

    static DynamicsCarry zeros(const ChainTopology& topo) {
        return {DenseMatrix(topo.firm_count, topo.product_count), DenseMatrix(topo.firm_count, topo.product_count),
                std::vector<double>(topo.edges.size(), 0.0)};
    }

    /// Forecasts and orders of the chain running at its nominal operating
    /// point: every retailer sells d_ext per product, every producer makes
    /// what its customers order, orders are split evenly over suppliers and
    /// capacity is ignored. Exact for acyclic chains.
    static DynamicsCarry nominal(const ChainTopology& topo, double d_ext) {
        auto carry = zeros(topo);
        const auto nf = topo.firm_count;
        std::vector<double> throughput(nf, 0.0);
        for (std::size_t round = 0; round <= nf; ++round) {
            std::vector<double> next(nf, 0.0);
            std::fill(carry.orders.begin(), carry.orders.end(), 0.0);
            for (std::size_t c = 0; c < nf; ++c) {
                const double need = topo.retailer[c] ? d_ext : throughput[c];
                for (auto r : topo.inputs[c]) {
                    const auto& sup = topo.supplier_edges[topo.slot(c, r)];
                    carry.usage_forecast(c, r) = need;
                    for (auto e : sup) {
                        carry.orders[e] = need / static_cast<double>(sup.size());
                        next[topo.edges[e].upstream] += carry.orders[e];
                    }
                }
            }
            if (next == throughput) break;
            throughput = std::move(next);
        }
        for (std::size_t c = 0; c < nf; ++c) {
            if (topo.retailer[c]) {
                for (auto r : topo.inputs[c]) carry.demand_forecast(c, r) = d_ext;
                continue;
            }
            for (auto q : topo.outputs[c]) {
                double demand = 0.0;
                for (auto e : topo.customer_edges[topo.slot(c, q)]) demand += carry.orders[e];
                carry.demand_forecast(c, q) = demand;
            }
        }
        return carry;
    }
};

struct StepResult {
    DenseMatrix state;
    DynamicsCarry carry;
    bool diverged = false;
};

inline StepResult step_dynamics(const ChainTopology& topo, const DynamicsConfig& cfg, const DenseMatrix& state,
                                const DynamicsCarry& carry) {
    const auto nf = topo.firm_count, np = topo.product_count;
    if (state.rows() != nf || state.cols() != np) throw ValidationError("step_dynamics: state shape mismatch");
    if (carry.demand_forecast.rows() != nf || carry.demand_forecast.cols() != np ||
        carry.usage_forecast.rows() != nf || carry.usage_forecast.cols() != np ||
        carry.orders.size() != topo.edges.size())
        throw ValidationError("step_dynamics: carry shape mismatch");

    StepResult out{state, carry, false};
    DenseMatrix& inv = out.state;
    DenseMatrix& fcast = out.carry.demand_forecast;
    DenseMatrix& usage = out.carry.usage_forecast;
    const auto& orders = carry.orders;  // placed last step
    DenseMatrix used(nf, np);

    for (std::size_t c = 0; c < nf; ++c) {
        if (topo.retailer[c]) {
            // 1-2. market demand on every resold product
            for (auto r : topo.inputs[c]) fcast(c, r) = cfg.theta * cfg.d_ext + (1.0 - cfg.theta) * fcast(c, r);
            continue;
        }
        double cap_left = cfg.capacity;
        for (auto q : topo.outputs[c]) {
            // 1-2.
            double demand = 0.0;
            for (auto e : topo.customer_edges[topo.slot(c, q)]) demand += orders[e];
            fcast(c, q) = cfg.theta * demand + (1.0 - cfg.theta) * fcast(c, q);
            // 3.
            const double f = fcast(c, q);
            const double desired = std::max(0.0, f + cfg.alpha * (cfg.kappa * f - inv(c, q)));
            // 4.
            double feasible = std::min(desired, cap_left);
            for (auto r : topo.inputs[c]) feasible = std::min(feasible, inv(c, r));
            feasible = std::max(0.0, feasible);
            // 5.
            for (auto r : topo.inputs[c]) {
                inv(c, r) -= feasible;
                used(c, r) += feasible;
            }
            inv(c, q) += feasible;
            cap_left -= feasible;
        }
    }

    // 6. shipping, computed from post-production stock; receipts applied after.
    DenseMatrix receipts(nf, np);
    for (std::size_t c = 0; c < nf; ++c) {
        if (topo.retailer[c]) {
            for (auto r : topo.inputs[c]) {
                const double sold = std::min(inv(c, r), cfg.d_ext);
                inv(c, r) -= sold;
                used(c, r) += sold;
            }
            continue;
        }
        for (auto q : topo.outputs[c]) {
            const auto& cust = topo.customer_edges[topo.slot(c, q)];
            double total = 0.0;
            for (auto e : cust) total += orders[e];
            if (total <= 0.0) continue;
            const double fill = std::min(1.0, inv(c, q) / total);
            double shipped = 0.0;
            for (auto e : cust) {
                const double s = orders[e] * fill;
                receipts(topo.edges[e].downstream, q) += s;
                shipped += s;
            }
            inv(c, q) = std::max(0.0, inv(c, q) - shipped);
        }
    }
    inv += receipts;

    // 7. ordering
    std::fill(out.carry.orders.begin(), out.carry.orders.end(), 0.0);
    for (std::size_t c = 0; c < nf; ++c) {
        for (auto r : topo.inputs[c]) {
            usage(c, r) = cfg.theta * used(c, r) + (1.0 - cfg.theta) * usage(c, r);
            const double u = usage(c, r);
            const double order = std::max(0.0, u + cfg.alpha * (cfg.kappa * u - inv(c, r)));
            const auto& sup = topo.supplier_edges[topo.slot(c, r)];
            if (sup.empty()) continue;
            const double share = order / static_cast<double>(sup.size());
            for (auto e : sup) out.carry.orders[e] = share;
        }
    }

    // 8. clamp
    for (auto& v : inv.values()) {
        if (v < -1e-9) throw std::logic_error("step_dynamics: negative inventory");
        if (!std::isfinite(v) || v > cfg.g_div) out.diverged = true;
        v = std::clamp(std::isfinite(v) ? v : cfg.i_max, 0.0, cfg.i_max);
    }
    for (double o : out.carry.orders)
        if (!std::isfinite(o) || o > cfg.g_div) out.diverged = true;
    if (out.diverged) {
        for (auto& o : out.carry.orders) o = std::clamp(std::isfinite(o) ? o : cfg.i_max, 0.0, cfg.i_max);
    }
    return out;
}

/// Uniform initial stock on the (firm, product) pairs a firm holds; zero elsewhere.
inline DenseMatrix sample_initial_inventory(const ChainTopology& topo, const DynamicsConfig& cfg,
                                            std::uint64_t seed) {
    Rng rng(seed);
    DenseMatrix x(topo.firm_count, topo.product_count);
    // d_ext = 0 keeps a unit reference scale so that undriven chains still
    // start from distinct stocks.
    const double hi = cfg.kappa * std::max(cfg.d_ext, 1.0) * cfg.u_hi;
    for (std::size_t c = 0; c < topo.firm_count; ++c)
        for (auto p : topo.held[c]) x(c, p) = hi > 0.0 ? rng.uniform(0.0, hi) : 0.0;
    return x;
}

struct Trajectory {
    std::vector<DenseMatrix> states;  // steps + 1 entries
    bool diverged = false;
};

inline Trajectory simulate(const ChainTopology& topo, const DynamicsConfig& cfg, const DenseMatrix& init) {
    validate_config(cfg);
    if (init.rows() != topo.firm_count || init.cols() != topo.product_count)
        throw ValidationError("simulate: initial state shape mismatch");
    Trajectory traj;
    traj.states.reserve(static_cast<std::size_t>(cfg.steps) + 1);
    traj.states.push_back(init);
    auto carry = DynamicsCarry::nominal(topo, cfg.d_ext);
    for (int t = 0; t < cfg.steps; ++t) {
        if (traj.diverged) {
            traj.states.push_back(traj.states.back());
            continue;
        }
        auto next = step_dynamics(topo, cfg, traj.states.back(), carry);
        traj.diverged = next.diverged;
        traj.states.push_back(std::move(next.state));
        carry = std::move(next.carry);
    }
    return traj;
}

struct ConvergenceTolerances {
    int tail_steps = 20;  // K
    double eps_conv = 1e-3;
    double eps_agree = 5e-2;
    double eps_zero = 1e-6;

    friend bool operator==(const ConvergenceTolerances&, const ConvergenceTolerances&) = default;
};

struct ResilienceLabel {
    int label = 0;
    std::vector<char> settled;      // per trajectory
    double terminal_spread = 0.0;   // max pairwise max-norm distance
    double terminal_magnitude = 0.0;
    bool settled_all = false;
    bool common = false;
    bool nonzero = false;
};

/// Resilient iff every trajectory settles, all settle to the same state, and
/// that state is not the empty warehouse.
inline ResilienceLabel assess_convergence(const std::vector<Trajectory>& set, const ConvergenceTolerances& tol) {
    if (set.empty()) throw ValidationError("assess_convergence: empty trajectory set");
    ResilienceLabel res;
    res.settled.assign(set.size(), 0);
    double mag_sum = 0.0;
    std::size_t mag_count = 0;
    for (std::size_t j = 0; j < set.size(); ++j) {
        const auto& s = set[j].states;
        if (s.empty()) throw ValidationError("assess_convergence: empty trajectory");
        const auto& last = s.back();
        for (double v : last.values()) mag_sum += std::abs(v);
        mag_count += last.size();
        if (set[j].diverged) continue;
        double scale = 0.0;
        for (double v : last.values()) scale = std::max(scale, std::abs(v));
        double change = 0.0;
        const std::size_t first = s.size() > static_cast<std::size_t>(tol.tail_steps)
                                      ? s.size() - static_cast<std::size_t>(tol.tail_steps)
                                      : 1;
        for (std::size_t t = first; t < s.size(); ++t) change = std::max(change, max_abs_diff(s[t], s[t - 1]));
        res.settled[j] = change < tol.eps_conv * (1.0 + scale);
    }
    res.terminal_magnitude = mag_count ? mag_sum / static_cast<double>(mag_count) : 0.0;
    for (std::size_t a = 0; a < set.size(); ++a)
        for (std::size_t b = a + 1; b < set.size(); ++b)
            res.terminal_spread =
                std::max(res.terminal_spread, max_abs_diff(set[a].states.back(), set[b].states.back()));
    res.settled_all = std::all_of(res.settled.begin(), res.settled.end(), [](char c) { return c != 0; });
    res.common = res.terminal_spread < tol.eps_agree * (1.0 + res.terminal_magnitude);
    res.nonzero = res.terminal_magnitude > tol.eps_zero;
    res.label = res.settled_all && res.common && res.nonzero ? 1 : 0;
    return res;
}

struct LabeledChain {
    ResilienceLabel label;
    std::vector<Trajectory> trajectories;
};

inline std::uint64_t trajectory_seed(std::uint64_t base, std::size_t j) { return derive_seed(base, 0x1A17, j); }

/// Simulates n_trajectories random initial stocks and labels the chain.
inline LabeledChain label_network(const SupplyChainHypergraph& h, const DynamicsConfig& cfg, std::uint64_t seed,
                                  const ConvergenceTolerances& tol = {}) {
    validate_config(cfg);
    const ChainTopology topo(h);
    LabeledChain out;
    out.trajectories.reserve(static_cast<std::size_t>(cfg.n_trajectories));
    for (int j = 0; j < cfg.n_trajectories; ++j) {
        const auto init = sample_initial_inventory(topo, cfg, trajectory_seed(seed, static_cast<std::size_t>(j)));
        out.trajectories.push_back(simulate(topo, cfg, init));
    }
    out.label = assess_convergence(out.trajectories, tol);
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const IntRange& r) { return nlohmann::json::array({r.lo, r.hi}); }
inline nlohmann::json to_json(const RealRange& r) { return nlohmann::json::array({r.lo, r.hi}); }

inline nlohmann::json to_json(const GeneratorConfig& c) {
    return {{"tiers", to_json(c.tiers)},
            {"firms_per_tier", to_json(c.firms_per_tier)},
            {"products_per_tier", to_json(c.products_per_tier)},
            {"inputs_per_product", to_json(c.inputs_per_product)},
            {"supplier_fanout", to_json(c.supplier_fanout)}};
}

inline nlohmann::json to_json(const DynamicsConfig& c) {
    return {{"theta", c.theta},   {"alpha", c.alpha}, {"kappa", c.kappa},     {"capacity", c.capacity},
            {"d_ext", c.d_ext},   {"u_hi", c.u_hi},   {"i_max", c.i_max},     {"g_div", c.g_div},
            {"steps", c.steps},   {"n_trajectories", c.n_trajectories}};
}

inline DynamicsConfig dynamics_from_json(const nlohmann::json& j) {
    DynamicsConfig c;
    try {
        c.theta = j.at("theta").get<double>();
        c.alpha = j.at("alpha").get<double>();
        c.kappa = j.at("kappa").get<double>();
        c.capacity = j.at("capacity").get<double>();
        c.d_ext = j.at("d_ext").get<double>();
        c.u_hi = j.at("u_hi").get<double>();
        c.i_max = j.at("i_max").get<double>();
        c.g_div = j.at("g_div").get<double>();
        c.steps = j.at("steps").get<int>();
        c.n_trajectories = j.at("n_trajectories").get<int>();
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("dynamics json: ") + ex.what());
    }
    validate_config(c);
    return c;
}

inline nlohmann::json to_json(const ConvergenceTolerances& t) {
    return {{"tail_steps", t.tail_steps}, {"eps_conv", t.eps_conv}, {"eps_agree", t.eps_agree}, {"eps_zero", t.eps_zero}};
}

}  // namespace scresil
