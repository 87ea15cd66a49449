#pragma once

// Labelled corpora: chains.jsonl (topology + sampled dynamics),
// samples.jsonl (one observation window per simulated trajectory) and
// manifest.json. Also builds perturbed copies of a corpus.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "scresil/common.hpp"
#include "scresil/dense.hpp"
#include "scresil/hypercore.hpp"
#include "scresil/scsim.hpp"

namespace scresil {

/// Ranges from which each chain's dynamics are drawn. Fields not covered by
/// a range come from `base`.
struct DynamicsSampler {
    RealRange alpha{0.2, 1.6};
    RealRange theta{0.2, 0.8};
    RealRange kappa{1.5, 2.5};
    RealRange capacity{4.0, 16.0};
    DynamicsConfig base;

    DynamicsConfig draw(Rng& rng) const {
        DynamicsConfig d = base;
        d.alpha = alpha.draw(rng);
        d.theta = theta.draw(rng);
        d.kappa = kappa.draw(rng);
        d.capacity = capacity.draw(rng);
        return d;
    }
};

struct DatasetConfig {
    GeneratorConfig generator;
    DynamicsSampler dynamics;
    ConvergenceTolerances tolerances;
    int n_chains = 500;
    int window_length = 7;          // states stored per sample (models may use a prefix)
    double max_class_fraction = 0.6;
    int max_redraws = 1000;
    std::uint64_t seed = 0;
};

struct ChainRecord {
    SupplyChainHypergraph graph;
    DynamicsConfig dynamics;
    int label = 0;
    std::uint64_t label_seed = 0;  // seed of the initial-inventory draws
};

/// One observation window: window[t] is the firms x products state at step t.
struct Sample {
    std::string chain_id;
    int window_id = 0;
    int label = 0;
    std::vector<DenseMatrix> window;
};

struct Dataset {
    std::vector<ChainRecord> chains;
    std::vector<Sample> samples;
    nlohmann::json manifest = nlohmann::json::object();

    std::size_t chain_index(const std::string& id) const {
        for (std::size_t i = 0; i < chains.size(); ++i)
            if (chains[i].graph.chain_id == id) return i;
        throw ValidationError("unknown chain id '" + id + "'");
    }

    std::map<std::string, std::size_t> chain_lookup() const {
        std::map<std::string, std::size_t> m;
        for (std::size_t i = 0; i < chains.size(); ++i) m.emplace(chains[i].graph.chain_id, i);
        return m;
    }

    std::size_t window_length() const { return samples.empty() ? 0 : samples.front().window.size(); }
};

/// Stored window values keep 6 significant digits.
inline double round_sig(double v) {
    if (v == 0.0 || !std::isfinite(v)) return v;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::strtod(buf, nullptr);
}

inline std::string chain_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scr-%05zu", index);
    return buf;
}

inline std::uint64_t fnv1a(const std::string& text, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline nlohmann::json chain_to_json(const ChainRecord& c) {
    auto j = to_json(c.graph);
    j["dynamics"] = to_json(c.dynamics);
    j["label"] = c.label;
    j["label_seed"] = c.label_seed;
    return j;
}

inline nlohmann::json sample_to_json(const Sample& s) {
    nlohmann::json window = nlohmann::json::array();
    for (const auto& state : s.window) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t r = 0; r < state.rows(); ++r) {
            auto row = state.row(r);
            rows.push_back(std::vector<double>(row.begin(), row.end()));
        }
        window.push_back(std::move(rows));
    }
    return {{"chain_id", s.chain_id}, {"window_id", s.window_id}, {"label", s.label}, {"window", window}};
}

inline Sample sample_from_json(const nlohmann::json& j, std::size_t firms, std::size_t products) {
    Sample s;
    try {
        s.chain_id = j.at("chain_id").get<std::string>();
        s.window_id = j.at("window_id").get<int>();
        s.label = j.at("label").get<int>();
        for (const auto& state : j.at("window")) {
            if (state.size() != firms) throw ValidationError("window row count does not match firm count");
            DenseMatrix m(firms, products);
            for (std::size_t r = 0; r < firms; ++r) {
                const auto& row = state[r];
                if (row.size() != products) throw ValidationError("window column count does not match product count");
                for (std::size_t c = 0; c < products; ++c) m(r, c) = row[c].get<double>();
            }
            s.window.push_back(std::move(m));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("sample json: ") + ex.what());
    }
    if (s.label != 0 && s.label != 1) throw ValidationError("sample label must be 0 or 1");
    return s;
}

inline nlohmann::json sampler_to_json(const DynamicsSampler& s) {
    return {{"alpha", to_json(s.alpha)},
            {"theta", to_json(s.theta)},
            {"kappa", to_json(s.kappa)},
            {"capacity", to_json(s.capacity)},
            {"base", to_json(s.base)}};
}

/// Class counts over chains and over samples.
inline nlohmann::json class_counts(const Dataset& ds) {
    std::size_t chains[2] = {0, 0}, samples[2] = {0, 0};
    for (const auto& c : ds.chains) ++chains[c.label];
    for (const auto& s : ds.samples) ++samples[s.label];
    return {{"chains", {{"0", chains[0]}, {"1", chains[1]}}}, {"samples", {{"0", samples[0]}, {"1", samples[1]}}}};
}

inline std::string chains_jsonl(const Dataset& ds) {
    std::string out;
    for (const auto& c : ds.chains) out += chain_to_json(c).dump() + "\n";
    return out;
}

inline std::string samples_jsonl(const Dataset& ds) {
    std::string out;
    for (const auto& s : ds.samples) out += sample_to_json(s).dump() + "\n";
    return out;
}

inline void refresh_manifest(Dataset& ds) {
    ds.manifest["format_version"] = kFormatVersion;
    ds.manifest["n_chains"] = ds.chains.size();
    ds.manifest["n_samples"] = ds.samples.size();
    ds.manifest["window_length"] = ds.window_length();
    ds.manifest["class_counts"] = class_counts(ds);
    const auto digest = fnv1a(samples_jsonl(ds), fnv1a(chains_jsonl(ds)));
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
    ds.manifest["content_digest"] = buf;
}

/// Generates, simulates and labels `n_chains` chains. Chains whose label
/// would push one class above max_class_fraction are redrawn.
inline Dataset build_dataset(const DatasetConfig& cfg) {
    validate_config(cfg.generator);
    if (cfg.n_chains < 1) throw ValidationError("dataset: n_chains must be >= 1");
    if (cfg.window_length < 1) throw ValidationError("dataset: window_length must be >= 1");
    if (cfg.window_length > cfg.dynamics.base.steps + 1)
        throw ValidationError("dataset: window_length exceeds simulated states");
    const auto cap = static_cast<std::size_t>(std::ceil(cfg.max_class_fraction * cfg.n_chains));
    Dataset ds;
    std::size_t counts[2] = {0, 0};
    for (int i = 0; i < cfg.n_chains; ++i) {
        const auto id = chain_name(static_cast<std::size_t>(i));
        bool accepted = false;
        for (int attempt = 0; attempt <= cfg.max_redraws && !accepted; ++attempt) {
            const auto chain_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(attempt));
            Rng rng(derive_seed(chain_seed, 0xD1));
            auto graph = generate_network(cfg.generator, derive_seed(chain_seed, 0x6E), id);
            const auto dyn = cfg.dynamics.draw(rng);
            const auto label_seed = derive_seed(chain_seed, 0x51);
            auto labeled = label_network(graph, dyn, label_seed, cfg.tolerances);
            const int label = labeled.label.label;
            if (counts[label] + 1 > cap && cfg.n_chains > 1) continue;
            ++counts[label];
            for (std::size_t j = 0; j < labeled.trajectories.size(); ++j) {
                Sample s{id, static_cast<int>(j), label, {}};
                const auto& states = labeled.trajectories[j].states;
                for (int t = 0; t < cfg.window_length; ++t) {
                    DenseMatrix m = states[static_cast<std::size_t>(t)];
                    for (auto& v : m.values()) v = round_sig(v);
                    s.window.push_back(std::move(m));
                }
                ds.samples.push_back(std::move(s));
            }
            ds.chains.push_back({std::move(graph), dyn, label, label_seed});
            accepted = true;
        }
        if (!accepted) throw ValidationError("dataset: class balance unreachable within max_redraws");
    }
    ds.manifest = {{"seed", cfg.seed},
                   {"generator", to_json(cfg.generator)},
                   {"dynamics_sampler", sampler_to_json(cfg.dynamics)},
                   {"tolerances", to_json(cfg.tolerances)},
                   {"max_class_fraction", cfg.max_class_fraction},
                   {"variant", "scr"}};
    refresh_manifest(ds);
    return ds;
}

/// Re-simulates every chain from its stored dynamics and label seed under new
/// tolerances; labels and windows are replaced. No class-balance redraws.
inline Dataset relabel_dataset(const Dataset& src, const ConvergenceTolerances& tol, std::size_t window_length) {
    Dataset out;
    out.manifest = src.manifest;
    for (const auto& rec : src.chains) {
        if (window_length > static_cast<std::size_t>(rec.dynamics.steps) + 1)
            throw ValidationError("relabel: window_length exceeds simulated states");
        auto labeled = label_network(rec.graph, rec.dynamics, rec.label_seed, tol);
        const int label = labeled.label.label;
        for (std::size_t j = 0; j < labeled.trajectories.size(); ++j) {
            Sample s{rec.graph.chain_id, static_cast<int>(j), label, {}};
            for (std::size_t t = 0; t < window_length; ++t) {
                DenseMatrix m = labeled.trajectories[j].states[t];
                for (auto& v : m.values()) v = round_sig(v);
                s.window.push_back(std::move(m));
            }
            out.samples.push_back(std::move(s));
        }
        out.chains.push_back({rec.graph, rec.dynamics, label, rec.label_seed});
    }
    out.manifest["tolerances"] = to_json(tol);
    out.manifest["relabeled"] = true;
    refresh_manifest(out);
    return out;
}

// ---------------------------------------------------------------------------
// Files

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw IoError("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_text(dir / "chains.jsonl", chains_jsonl(ds));
    write_text(dir / "samples.jsonl", samples_jsonl(ds));
    write_text(dir / "manifest.json", ds.manifest.dump(2) + "\n");
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    try {
        ds.manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
    } catch (const nlohmann::json::parse_error& ex) {
        throw IoError("manifest.json: " + std::string(ex.what()));
    }
    {
        std::ifstream is(dir / "chains.jsonl");
        if (!is) throw IoError("cannot open " + (dir / "chains.jsonl").string());
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& ex) {
                throw IoError("chains.jsonl: " + std::string(ex.what()));
            }
            ChainRecord rec{hypergraph_from_json(j), {}, 0, 0};
            try {
                if (j.contains("dynamics")) rec.dynamics = dynamics_from_json(j.at("dynamics"));
                rec.label = j.value("label", 0);
                rec.label_seed = j.value("label_seed", std::uint64_t{0});
            } catch (const nlohmann::json::exception& ex) {
                throw ValidationError("chains.jsonl: " + std::string(ex.what()));
            }
            ds.chains.push_back(std::move(rec));
        }
    }
    const auto lookup = ds.chain_lookup();
    std::ifstream is(dir / "samples.jsonl");
    if (!is) throw IoError("cannot open " + (dir / "samples.jsonl").string());
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& ex) {
            throw IoError("samples.jsonl: " + std::string(ex.what()));
        }
        const auto it = lookup.find(j.value("chain_id", std::string()));
        if (it == lookup.end()) throw ValidationError("sample references unknown chain");
        const auto& g = ds.chains[it->second].graph;
        ds.samples.push_back(sample_from_json(j, g.firm_count(), g.product_count()));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Perturbed variants

/// Applies `perturb` to the listed chains (all chains when `only` is empty)
/// and realigns their windows: node removal drops the matching firm rows and
/// product columns. Labels are carried over unchanged.
inline Dataset perturb_dataset(const Dataset& src, PerturbMode mode, double p, std::uint64_t seed,
                               const std::vector<std::string>& only = {}) {
    Dataset out;
    out.manifest = src.manifest;
    std::map<std::string, PerturbResult> changed;
    for (std::size_t i = 0; i < src.chains.size(); ++i) {
        const auto& rec = src.chains[i];
        const bool selected =
            only.empty() || std::find(only.begin(), only.end(), rec.graph.chain_id) != only.end();
        if (!selected) {
            out.chains.push_back(rec);
            continue;
        }
        std::optional<PerturbResult> res;
        for (std::uint64_t attempt = 0; !res; ++attempt) {
            res = perturb(rec.graph, mode, p, derive_seed(seed, i, attempt));
            if (attempt > 10000) throw ValidationError("perturb: could not keep any firm");
        }
        out.chains.push_back({res->hypergraph, rec.dynamics, rec.label, rec.label_seed});
        changed.emplace(rec.graph.chain_id, std::move(*res));
    }
    for (const auto& s : src.samples) {
        auto it = changed.find(s.chain_id);
        if (it == changed.end() || mode == PerturbMode::edge) {
            out.samples.push_back(s);
            continue;
        }
        const auto& res = it->second;
        Sample t{s.chain_id, s.window_id, s.label, {}};
        for (const auto& state : s.window) {
            DenseMatrix m(res.hypergraph.firm_count(), res.hypergraph.product_count());
            for (std::size_t r = 0; r < state.rows(); ++r) {
                if (res.firm_map[r] == kRemoved) continue;
                for (std::size_t c = 0; c < state.cols(); ++c) {
                    if (res.product_map[c] == kRemoved) continue;
                    m(res.firm_map[r], res.product_map[c]) = state(r, c);
                }
            }
            t.window.push_back(std::move(m));
        }
        out.samples.push_back(std::move(t));
    }
    out.manifest["variant"] = mode == PerturbMode::node ? "scr_nr" : "scr_er";
    out.manifest["perturbation"] = {{"mode", mode == PerturbMode::node ? "node" : "edge"},
                                    {"p", p},
                                    {"seed", seed},
                                    {"chains", only.empty() ? nlohmann::json("all") : nlohmann::json(only)}};
    refresh_manifest(out);
    return out;
}

}  // namespace scresil
