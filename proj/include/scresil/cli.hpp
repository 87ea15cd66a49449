#pragma once

// The `scresil` command line: generate, label, perturb, split, train, eval,
// sweep, ablate, gradcheck and stats.
//
// Configuration is a nested JSON object whose leaves are addressed by dotted
// keys ("model.hidden_dim"). Defaults are overlaid by an optional --config
// file, then by --set key=value pairs, then by the dedicated flags of each
// subcommand. Unknown keys are rejected. Every command that writes a directory
// also writes the resolved configuration there as config.json.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "scresil/common.hpp"
#include "scresil/dataset.hpp"
#include "scresil/diffcore.hpp"
#include "scresil/harness.hpp"
#include "scresil/hypercore.hpp"
#include "scresil/scrihn.hpp"
#include "scresil/scsim.hpp"

namespace scresil::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
    std::uint64_t seed = 0;
    DatasetConfig dataset;
    ModelConfig model;
    TrainConfig train;
    SplitSpec split;
    PerturbMode perturb_mode = PerturbMode::edge;
    double perturb_p = 0.15;
    bool perturb_all = false;
};

inline json range_json(const IntRange& r) { return json::array({r.lo, r.hi}); }
inline json range_json(const RealRange& r) { return json::array({r.lo, r.hi}); }

inline json to_json(const RunConfig& c) {
    const auto& d = c.dataset;
    const auto& base = d.dynamics.base;
    return {{"format_version", kFormatVersion},
            {"seed", c.seed},
            {"generator", scresil::to_json(d.generator)},
            {"sampler",
             {{"alpha", range_json(d.dynamics.alpha)},
              {"theta", range_json(d.dynamics.theta)},
              {"kappa", range_json(d.dynamics.kappa)},
              {"capacity", range_json(d.dynamics.capacity)}}},
            {"dynamics",
             {{"d_ext", base.d_ext},
              {"u_hi", base.u_hi},
              {"i_max", base.i_max},
              {"g_div", base.g_div},
              {"steps", base.steps},
              {"n_trajectories", base.n_trajectories}}},
            {"tolerances", scresil::to_json(d.tolerances)},
            {"dataset",
             {{"chains", d.n_chains},
              {"window_length", d.window_length},
              {"max_class_fraction", d.max_class_fraction},
              {"max_redraws", d.max_redraws}}},
            {"model", scresil::to_json(c.model)},
            {"train",
             {{"epochs", c.train.epochs},
              {"batch_size", c.train.batch_size},
              {"lr", c.train.adam.lr},
              {"beta1", c.train.adam.beta1},
              {"beta2", c.train.adam.beta2},
              {"eps", c.train.adam.eps}}},
            {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
            {"perturb",
             {{"mode", c.perturb_mode == PerturbMode::node ? "node" : "edge"},
              {"p", c.perturb_p},
              {"all_chains", c.perturb_all}}}};
}

/// Overlays `patch` onto `base`. Keys must already exist in `base` and keep
/// their JSON kind (numbers may switch between integer and float).
inline void merge_strict(json& base, const json& patch, const std::string& prefix = "") {
    if (!patch.is_object()) throw ValidationError("config: expected an object at '" + prefix + "'");
    for (const auto& [key, value] : patch.items()) {
        const auto path = prefix.empty() ? key : prefix + "." + key;
        if (!base.contains(key)) throw ValidationError("config: unknown key '" + path + "'");
        auto& slot = base[key];
        if (slot.is_object()) {
            merge_strict(slot, value, path);
            continue;
        }
        const bool same_kind = (slot.is_number() && value.is_number()) || (slot.is_boolean() && value.is_boolean()) ||
                               (slot.is_string() && value.is_string()) || (slot.is_array() && value.is_array());
        if (!same_kind) throw ValidationError("config: wrong value type for '" + path + "'");
        slot = value;
    }
}

/// Applies "a.b.c=value"; the value is parsed as JSON, falling back to a
/// plain string.
inline void apply_assignment(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects key=value, got '" + assignment + "'");
    const auto key = assignment.substr(0, eq);
    const auto text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json patch = value;
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
    merge_strict(cfg, patch);
}

inline IntRange int_range(const json& j) {
    const auto v = j.get<std::vector<int>>();
    if (v.size() != 2) throw ValidationError("config: ranges are [lo, hi]");
    return {v[0], v[1]};
}

inline RealRange real_range(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 2 || v[1] < v[0]) throw ValidationError("config: ranges are [lo, hi] with lo <= hi");
    return {v[0], v[1]};
}

inline RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    json full = to_json(c);
    merge_strict(full, j);
    try {
        c.seed = full.at("seed").get<std::uint64_t>();
        auto& d = c.dataset;
        d.seed = c.seed;
        const auto& g = full.at("generator");
        d.generator.tiers = int_range(g.at("tiers"));
        d.generator.firms_per_tier = int_range(g.at("firms_per_tier"));
        d.generator.products_per_tier = int_range(g.at("products_per_tier"));
        d.generator.inputs_per_product = int_range(g.at("inputs_per_product"));
        d.generator.supplier_fanout = int_range(g.at("supplier_fanout"));
        const auto& s = full.at("sampler");
        d.dynamics.alpha = real_range(s.at("alpha"));
        d.dynamics.theta = real_range(s.at("theta"));
        d.dynamics.kappa = real_range(s.at("kappa"));
        d.dynamics.capacity = real_range(s.at("capacity"));
        const auto& dy = full.at("dynamics");
        d.dynamics.base.d_ext = dy.at("d_ext").get<double>();
        d.dynamics.base.u_hi = dy.at("u_hi").get<double>();
        d.dynamics.base.i_max = dy.at("i_max").get<double>();
        d.dynamics.base.g_div = dy.at("g_div").get<double>();
        d.dynamics.base.steps = dy.at("steps").get<int>();
        d.dynamics.base.n_trajectories = dy.at("n_trajectories").get<int>();
        const auto& t = full.at("tolerances");
        d.tolerances.tail_steps = t.at("tail_steps").get<int>();
        d.tolerances.eps_conv = t.at("eps_conv").get<double>();
        d.tolerances.eps_agree = t.at("eps_agree").get<double>();
        d.tolerances.eps_zero = t.at("eps_zero").get<double>();
        const auto& ds = full.at("dataset");
        d.n_chains = ds.at("chains").get<int>();
        d.window_length = ds.at("window_length").get<int>();
        d.max_class_fraction = ds.at("max_class_fraction").get<double>();
        d.max_redraws = ds.at("max_redraws").get<int>();
        c.model = model_config_from_json(full.at("model"));
        const auto& tr = full.at("train");
        c.train.epochs = tr.at("epochs").get<int>();
        c.train.batch_size = tr.at("batch_size").get<int>();
        c.train.adam.lr = tr.at("lr").get<double>();
        c.train.adam.beta1 = tr.at("beta1").get<double>();
        c.train.adam.beta2 = tr.at("beta2").get<double>();
        c.train.adam.eps = tr.at("eps").get<double>();
        c.train.seed = c.seed;
        const auto& sp = full.at("split");
        c.split = {sp.at("train").get<double>(), sp.at("val").get<double>(), sp.at("test").get<double>(), c.seed};
        const auto& pt = full.at("perturb");
        const auto mode = pt.at("mode").get<std::string>();
        if (mode != "node" && mode != "edge") throw ValidationError("config: perturb.mode must be node or edge");
        c.perturb_mode = mode == "node" ? PerturbMode::node : PerturbMode::edge;
        c.perturb_p = pt.at("p").get<double>();
        c.perturb_all = pt.at("all_chains").get<bool>();
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("config: ") + ex.what());
    }
    validate_config(c.dataset.generator);
    validate_config(c.dataset.dynamics.base);
    validate_config(c.train);
    if (!(c.perturb_p >= 0.0 && c.perturb_p <= 1.0)) throw ValidationError("config: perturb.p must lie in [0, 1]");
    return c;
}

inline json read_json_file(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& ex) {
        throw IoError(path.string() + ": " + ex.what());
    }
}

inline void write_json_file(const fs::path& path, const json& j) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    }
    write_text(path, j.dump(2) + "\n");
}

/// Shared --config / --set handling; `finish` applies subcommand flags last.
struct ConfigOptions {
    std::string config_file;
    std::vector<std::string> assignments;

    void attach(CLI::App* app) {
        app->add_option("--config", config_file, "JSON run configuration file");
        app->add_option("--set", assignments, "Override a configuration key, e.g. --set model.hidden_dim=32");
    }

    json resolve(const json& flag_overrides) const {
        json cfg = to_json(RunConfig{});
        if (!config_file.empty()) merge_strict(cfg, read_json_file(config_file));
        for (const auto& a : assignments) apply_assignment(cfg, a);
        merge_strict(cfg, flag_overrides);
        return cfg;
    }
};

inline Split load_or_make_split(const Dataset& ds, const std::string& split_file, const SplitSpec& spec) {
    if (split_file.empty()) return split_dataset(ds, spec);
    return split_from_json(read_json_file(split_file), ds);
}

inline std::string variant_of(const Dataset& ds) {
    return ds.manifest.contains("variant") ? ds.manifest.at("variant").get<std::string>() : "scr";
}

// ---------------------------------------------------------------------------
// Subcommands

inline void cmd_generate(const RunConfig& rc, const json& resolved, const fs::path& out) {
    auto ds = build_dataset(rc.dataset);
    write_dataset(ds, out);
    write_json_file(out / "config.json", resolved);
    std::cout << "wrote " << ds.chains.size() << " chains, " << ds.samples.size() << " samples to " << out.string()
              << " (class counts " << ds.manifest.at("class_counts").at("chains").dump() << ")\n";
}

inline void cmd_label(const RunConfig& rc, const json& resolved, const fs::path& in, const fs::path& out) {
    const auto src = read_dataset(in);
    auto ds = relabel_dataset(src, rc.dataset.tolerances, src.window_length());
    write_dataset(ds, out);
    write_json_file(out / "config.json", resolved);
    std::cout << "relabelled " << ds.chains.size() << " chains (class counts "
              << ds.manifest.at("class_counts").at("chains").dump() << ")\n";
}

inline void cmd_perturb(const RunConfig& rc, const json& resolved, const fs::path& in, const fs::path& out,
                        const std::string& split_file) {
    const auto src = read_dataset(in);
    std::vector<std::string> only;
    if (!rc.perturb_all) {
        only = load_or_make_split(src, split_file, rc.split).test_chains;
        if (only.empty()) throw ValidationError("perturb: split has no test chains");
    }
    auto ds = perturb_dataset(src, rc.perturb_mode, rc.perturb_p, rc.seed, only);
    write_dataset(ds, out);
    write_json_file(out / "config.json", resolved);
    std::cout << "perturbed " << (only.empty() ? src.chains.size() : only.size()) << " chains into " << out.string()
              << "\n";
}

inline void cmd_split(const RunConfig& rc, const fs::path& data, const fs::path& out) {
    const auto ds = read_dataset(data);
    const auto s = split_dataset(ds, rc.split);
    write_json_file(out, to_json(s));
    std::cout << "split " << s.train_chains.size() << "/" << s.val_chains.size() << "/" << s.test_chains.size()
              << " chains\n";
}

inline void write_eval_outputs(const fs::path& run, const std::string& run_id, const std::string& model,
                               const std::string& variant, std::uint64_t seed, const std::string& split_name,
                               const Dataset& ds, const std::vector<std::size_t>& samples, const EvalReport& r) {
    append_text(run / "metrics.csv", metrics_csv_header(),
                metrics_csv_row({run_id, model, variant, seed, split_name, r}));
    append_text(run / "probs.csv", "run_id,sample_id,label,probability\n",
                probs_csv(run_id, ds, samples, r, false));
}

inline TrainResult cmd_train(const RunConfig& rc, json resolved, const fs::path& data, const fs::path& run,
                             const std::string& split_file) {
    const auto ds = read_dataset(data);
    const auto split = load_or_make_split(ds, split_file, rc.split);
    ModelConfig model = rc.model;
    fit_capacities(model, ds);
    resolved["model"] = scresil::to_json(model);
    std::error_code ec;
    fs::create_directories(run, ec);
    if (ec) throw IoError("cannot create " + run.string() + ": " + ec.message());
    write_json_file(run / "config.json", resolved);
    write_json_file(run / "split.json", to_json(split));

    std::string log = "epoch,train_loss,val_macro_f1,val_accuracy\n";
    auto res = train(ds, split, model, rc.train, [&](const EpochLog& e) {
        log += std::to_string(e.epoch) + "," + csv_double(e.train_loss) + "," + csv_double(e.val_macro_f1) + "," +
               csv_double(e.val_accuracy) + "\n";
        std::cerr << "epoch " << e.epoch << " loss " << e.train_loss << " val_macro_f1 " << e.val_macro_f1 << "\n";
    });
    write_text(run / "train_log.csv", log);
    write_json_file(run / "checkpoint.json", checkpoint_to_json(res.best));

    const auto run_id = run.filename().string();
    const auto variant = variant_of(ds);
    const auto val = evaluate(res.best, ds, split.val);
    const auto test = evaluate(res.best, ds, split.test);
    write_eval_outputs(run, run_id, to_string(model.kind), variant, rc.seed, "val", ds, split.val, val);
    write_eval_outputs(run, run_id, to_string(model.kind), variant, rc.seed, "test", ds, split.test, test);
    std::cout << "best epoch " << res.best_epoch << ", val macro-F1 " << val.macro_f1 << ", test macro-F1 "
              << test.macro_f1 << "\n";
    return res;
}

inline void cmd_eval(const fs::path& run, const fs::path& data, const std::string& split_name) {
    const auto ck = checkpoint_from_json(read_json_file(run / "checkpoint.json"));
    const auto cfg = read_json_file(run / "config.json");
    const auto ds = read_dataset(data);
    const auto split = split_from_json(read_json_file(run / "split.json"), ds);
    std::vector<std::size_t> samples;
    if (split_name == "test") samples = split.test;
    else if (split_name == "val") samples = split.val;
    else if (split_name == "train") samples = split.train;
    else if (split_name == "all") {
        samples.resize(ds.samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = i;
    } else {
        throw ValidationError("eval: --split must be train, val, test or all");
    }
    if (samples.empty()) throw ValidationError("eval: no samples selected");
    const auto r = evaluate(ck, ds, samples);
    write_eval_outputs(run, run.filename().string(), to_string(ck.config.kind), variant_of(ds),
                       cfg.value("seed", std::uint64_t{0}), split_name, ds, samples, r);
    std::cout << variant_of(ds) << " " << split_name << " macro-F1 " << r.macro_f1 << " accuracy " << r.accuracy
              << " (tp " << r.tp << " fp " << r.fp << " tn " << r.tn << " fn " << r.fn << ")\n";
}

inline std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("expected a comma-separated integer list, got '" + text + "'");
        }
    }
    if (out.empty()) throw ValidationError("empty integer list");
    return out;
}

inline void cmd_sweep(const RunConfig& rc, json resolved, const fs::path& data, const fs::path& out,
                      const std::string& split_file, const std::string& windows, const std::string& layers,
                      int repeats) {
    const auto ds = read_dataset(data);
    const auto split = load_or_make_split(ds, split_file, rc.split);
    ModelConfig model = rc.model;
    fit_capacities(model, ds);
    resolved["model"] = scresil::to_json(model);
    write_json_file(out / "config.json", resolved);
    const auto cells = sweep(ds, split, model, rc.train, parse_int_list(windows), parse_int_list(layers), repeats,
                             [](const SweepCell& c) {
                                 std::cerr << "T=" << c.window_T << " L=" << c.layers << " seed " << c.seed
                                           << " macro-F1 " << c.macro_f1 << "\n";
                             });
    write_text(out / "sweep.csv", sweep_csv(cells));
    for (const auto& s : summarize(cells))
        std::cout << "T=" << s.window_T << " L=" << s.layers << " mean " << s.mean << " std " << s.stddev << "\n";
}

struct AblationVariant {
    std::string name;
    ModelConfig model;
};

inline std::vector<AblationVariant> ablation_variants(const ModelConfig& base, const std::string& list) {
    std::vector<AblationVariant> out;
    std::stringstream ss(list);
    for (std::string name; std::getline(ss, name, ',');) {
        ModelConfig m = base;
        m.kind = ModelKind::scrihn;
        if (name == "full") {
        } else if (name == "no-feature-pos") {
            m.use_feature_pos = false;
        } else if (name == "pool-product-nodes") {
            m.pool_product_nodes = true;
        } else {
            m.kind = model_kind_from_string(name);
        }
        out.push_back({name, m});
    }
    if (out.empty()) throw ValidationError("ablate: no variants requested");
    return out;
}

/// Trains every variant with seeds base..base+repeats-1 and compares each to
/// the first variant with a paired t-test over the per-seed test macro-F1.
inline void cmd_ablate(const RunConfig& rc, json resolved, const fs::path& data, const fs::path& out,
                       const std::string& split_file, const std::string& variants, int repeats,
                       const std::vector<std::string>& eval_dirs) {
    if (repeats < 1) throw ValidationError("ablate: repeats must be >= 1");
    const auto ds = read_dataset(data);
    const auto split = load_or_make_split(ds, split_file, rc.split);
    std::vector<Dataset> extra;
    for (const auto& dir : eval_dirs) extra.push_back(read_dataset(dir));
    ModelConfig base = rc.model;
    fit_capacities(base, ds);
    for (const auto& e : extra) fit_capacities(base, e);
    resolved["model"] = scresil::to_json(base);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
    write_json_file(out / "config.json", resolved);
    write_json_file(out / "split.json", to_json(split));

    const auto list = ablation_variants(base, variants);
    std::vector<std::vector<double>> scores(list.size());
    for (std::size_t v = 0; v < list.size(); ++v) {
        for (int r = 0; r < repeats; ++r) {
            TrainConfig tc = rc.train;
            tc.seed = repeat_seed(rc.seed, r);
            const auto res = train(ds, split, list[v].model, tc);
            const auto run_id = list[v].name + "-s" + std::to_string(tc.seed);
            const auto test = evaluate(res.best, ds, split.test);
            write_eval_outputs(out, run_id, list[v].name, variant_of(ds), tc.seed, "test", ds, split.test, test);
            scores[v].push_back(test.macro_f1);
            for (const auto& e : extra) {
                const auto es = split_from_json(to_json(split), e);
                const auto rep = evaluate(res.best, e, es.test);
                write_eval_outputs(out, run_id, list[v].name, variant_of(e), tc.seed, "test", e, es.test, rep);
            }
            std::cerr << run_id << " test macro-F1 " << test.macro_f1 << "\n";
        }
    }
    std::string table = "variant,mean_macro_f1,std_macro_f1,t_vs_first,p_vs_first\n";
    for (std::size_t v = 0; v < list.size(); ++v) {
        std::vector<SweepCell> cells;
        for (double f : scores[v]) cells.push_back({0, 0, 0, f});
        const auto summary = summarize(cells).front();
        std::string t = "", p = "";
        if (v > 0 && repeats >= 2) {
            const auto tt = paired_ttest(scores[0], scores[v]);
            t = csv_double(tt.t);
            p = csv_double(tt.p);
        }
        table += list[v].name + "," + csv_double(summary.mean) + "," + csv_double(summary.stddev) + "," + t + "," +
                 p + "\n";
        std::cout << list[v].name << " mean " << summary.mean << " std " << summary.stddev
                  << (p.empty() ? "" : " p " + p) << "\n";
    }
    write_text(out / "ablation.csv", table);
}

/// Gradient check of a model on a fixed 4-firm / 2-product chain with T = 2.
inline GradCheckReport gradcheck_tiny(ModelKind kind, int layers, std::uint64_t seed) {
    SupplyChainHypergraph h;
    h.chain_id = "gradcheck";
    h.firms = {"f0", "f1", "f2", "f3"};
    h.products = {"p0", "p1"};
    h.hyperedges = {{0, 0, 1}, {0, 0, 2}, {1, 1, 3}, {2, 1, 3}};
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.hidden_dim = 6;
    cfg.feature_pos_dim = 3;
    cfg.head_hidden = 5;
    cfg.conv_layers = layers;
    cfg.window_T = 2;
    cfg.max_feature_index = 3;
    cfg.max_product_index = 3;
    auto store = init_params(cfg, seed);
    // Larger tables than the N(0, 0.02) default keep relu kinks away from the
    // finite-difference stencil.
    Rng rng(derive_seed(seed, 0x6C));
    for (auto& p : store)
        for (auto& v : p.value.values()) v += rng.uniform(-0.3, 0.3);
    std::vector<DenseMatrix> window;
    for (int t = 0; t < 2; ++t) {
        DenseMatrix m(4, 2);
        for (auto& v : m.values()) v = rng.uniform(0.0, 6.0);
        window.push_back(m);
    }
    const auto ctx = make_context(h, kind);
    return grad_check(
        [&](Tape& t, const ParamStore& s) { return bce_loss(forward_logit(t, s, cfg, ctx, window), 1.0); }, store);
}

inline void cmd_stats(const fs::path& data) {
    const auto ds = read_dataset(data);
    double nodes = 0, edges = 0, firm_deg = 0, prod_deg = 0;
    for (const auto& c : ds.chains) {
        const auto s = degree_stats(c.graph);
        nodes += static_cast<double>(s.node_count);
        edges += static_cast<double>(s.edge_count);
        firm_deg += s.mean_firm_degree;
        prod_deg += s.mean_product_degree;
    }
    const double n = static_cast<double>(std::max<std::size_t>(ds.chains.size(), 1));
    const auto counts = class_counts(ds);
    std::cout << "chains " << ds.chains.size() << "\nsamples " << ds.samples.size() << "\nmean_nodes " << nodes / n
              << "\nmean_hyperedges " << edges / n << "\nmean_firm_degree " << firm_deg / n
              << "\nmean_product_degree " << prod_deg / n << "\nchains_label_0 "
              << counts.at("chains").at("0").get<std::size_t>() << "\nchains_label_1 "
              << counts.at("chains").at("1").get<std::size_t>() << "\n";
}

// ---------------------------------------------------------------------------
// Dispatch

/// Runs the command line; returns 0 on success, 1 on validation errors (bad
/// flags, bad config, inconsistent data), 2 on I/O errors.
inline int dispatch(int argc, char** argv) {
    CLI::App app{"scresil: synthetic supply-chain resilience data and hypergraph models"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    std::uint64_t seed = 0;
    bool seed_given = false;
    ConfigOptions opts;
    std::string in, out, data, run, split_file, mode, model_kind, windows = "1,3,5,7", layers_list = "2,3,4,5";
    std::string variants = "full,no-feature-pos,pool-product-nodes,mlp,gcn_clique";
    std::string eval_split = "test";
    std::vector<std::string> eval_dirs;
    std::optional<int> chains, layers, window, epochs;
    std::optional<double> p;
    int repeats = 5;
    bool all_chains = false, no_feature_pos = false, pool_products = false;
    double tolerance = 1e-4;

    auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Base seed for all randomness")->each([&](const std::string&) {
            seed_given = true;
        });
        opts.attach(sub);
    };
    auto add_model_flags = [&](CLI::App* sub) {
        sub->add_option("--model", model_kind, "scrihn, mlp, gcn_clique, gcn_bipartite, gcn_firm_only, sage_clique");
        sub->add_option("--layers", layers, "Convolution layers L");
        sub->add_option("--window", window, "Observation window T");
        sub->add_option("--epochs", epochs, "Training epochs");
        sub->add_flag("--no-feature-pos", no_feature_pos, "Disable feature positional embeddings");
        sub->add_flag("--pool-product-nodes", pool_products, "Pool product rows together with firm rows");
    };

    auto* gen = app.add_subcommand("generate", "Generate and label a synthetic corpus");
    add_seed(gen);
    gen->add_option("--chains", chains, "Number of chains");
    gen->add_option("--out", out, "Output directory")->required();

    auto* lab = app.add_subcommand("label", "Re-simulate a corpus under the configured tolerances");
    add_seed(lab);
    lab->add_option("--in", in, "Input corpus directory")->required();
    lab->add_option("--out", out, "Output directory")->required();

    auto* per = app.add_subcommand("perturb", "Write a node- or edge-removal variant of the test chains");
    add_seed(per);
    per->add_option("--in", in, "Input corpus directory")->required();
    per->add_option("--out", out, "Output directory")->required();
    per->add_option("--mode", mode, "node or edge")->check(CLI::IsMember({"node", "edge"}));
    per->add_option("--p", p, "Removal probability");
    per->add_option("--split", split_file, "Split file (default: split derived from --seed)");
    per->add_flag("--all-chains", all_chains, "Perturb every chain, not only the test split");

    auto* spl = app.add_subcommand("split", "Write a chain-level train/val/test split");
    add_seed(spl);
    spl->add_option("--data", data, "Corpus directory")->required();
    spl->add_option("--out", out, "Output split file")->required();

    auto* trn = app.add_subcommand("train", "Train a model and keep the best validation epoch");
    add_seed(trn);
    add_model_flags(trn);
    trn->add_option("--data", data, "Corpus directory")->required();
    trn->add_option("--out", out, "Run directory")->required();
    trn->add_option("--split", split_file, "Split file (default: split derived from --seed)");

    auto* evl = app.add_subcommand("eval", "Evaluate a trained run on a corpus; appends to metrics.csv");
    evl->add_option("--run", run, "Run directory")->required();
    evl->add_option("--data", data, "Corpus directory")->required();
    evl->add_option("--split", eval_split, "train, val, test or all");

    auto* swp = app.add_subcommand("sweep", "Grid over window length T and depth L");
    add_seed(swp);
    add_model_flags(swp);
    swp->add_option("--data", data, "Corpus directory")->required();
    swp->add_option("--out", out, "Output directory")->required();
    swp->add_option("--split", split_file, "Split file");
    swp->add_option("--windows", windows, "Comma-separated T values");
    swp->add_option("--layer-grid", layers_list, "Comma-separated L values");
    swp->add_option("--repeats", repeats, "Seeds per cell");

    auto* abl = app.add_subcommand("ablate", "Train model variants over several seeds and compare");
    add_seed(abl);
    add_model_flags(abl);
    abl->add_option("--data", data, "Corpus directory")->required();
    abl->add_option("--out", out, "Output directory")->required();
    abl->add_option("--split", split_file, "Split file");
    abl->add_option("--variants", variants,
                    "Comma-separated: full, no-feature-pos, pool-product-nodes or a model kind");
    abl->add_option("--repeats", repeats, "Seeds per variant");
    abl->add_option("--also-eval", eval_dirs, "Extra corpora (e.g. perturbed) evaluated on the same test chains");

    auto* grd = app.add_subcommand("gradcheck", "Finite-difference check of a model on a tiny chain");
    add_seed(grd);
    add_model_flags(grd);
    grd->add_option("--tolerance", tolerance, "Largest accepted relative error");

    auto* sts = app.add_subcommand("stats", "Degree statistics and class counts of a corpus");
    sts->add_option("--data", data, "Corpus directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        json flags = json::object();
        if (seed_given) flags["seed"] = seed;
        if (chains) flags["dataset"]["chains"] = *chains;
        if (!model_kind.empty()) flags["model"]["kind"] = model_kind;
        if (layers) flags["model"]["conv_layers"] = *layers;
        if (window) flags["model"]["window_T"] = *window;
        if (no_feature_pos) flags["model"]["use_feature_pos"] = false;
        if (pool_products) flags["model"]["pool_product_nodes"] = true;
        if (epochs) flags["train"]["epochs"] = *epochs;
        if (!mode.empty()) flags["perturb"]["mode"] = mode;
        if (p) flags["perturb"]["p"] = *p;
        if (all_chains) flags["perturb"]["all_chains"] = true;
        const json resolved = opts.resolve(flags);
        const RunConfig rc = run_config_from_json(resolved);

        if (gen->parsed()) cmd_generate(rc, resolved, out);
        else if (lab->parsed()) cmd_label(rc, resolved, in, out);
        else if (per->parsed()) cmd_perturb(rc, resolved, in, out, split_file);
        else if (spl->parsed()) cmd_split(rc, data, out);
        else if (trn->parsed()) cmd_train(rc, resolved, data, out, split_file);
        else if (evl->parsed()) cmd_eval(run, data, eval_split);
        else if (swp->parsed()) cmd_sweep(rc, resolved, data, out, split_file, windows, layers_list, repeats);
        else if (abl->parsed()) cmd_ablate(rc, resolved, data, out, split_file, variants, repeats, eval_dirs);
        else if (grd->parsed()) {
            const auto report = gradcheck_tiny(rc.model.kind, rc.model.conv_layers, rc.seed);
            for (const auto& e : report.entries)
                std::cout << e.name << " max_rel_error " << e.max_rel_error << "\n";
            std::cout << "worst " << report.worst() << (report.passes(tolerance) ? " ok" : " FAIL") << "\n";
            return report.passes(tolerance) ? 0 : 1;
        } else if (sts->parsed()) cmd_stats(data);
        return 0;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace scresil::cli
