#pragma once

// Chain-level splits, the training loop with validation-based checkpoint
// selection, metrics, sweeps over (T, L) and the paired t-test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"

#include "scresil/common.hpp"
#include "scresil/dataset.hpp"
#include "scresil/diffcore.hpp"
#include "scresil/scrihn.hpp"

namespace scresil {

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
    std::uint64_t seed = 0;
};

struct Split {
    std::vector<std::string> train_chains, val_chains, test_chains;
    std::vector<std::size_t> train, val, test;  // sample indices into the dataset
};

/// Shuffles chain ids and cuts them as train = round(f_train n),
/// val = round(f_val n), test = the rest; every part keeps at least one chain.
/// Samples follow their chain.
inline Split split_dataset(const Dataset& ds, const SplitSpec& spec) {
    if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9 || spec.train < 0 || spec.val < 0 || spec.test < 0)
        throw ValidationError("split: fractions must be non-negative and sum to 1");
    const std::size_t n = ds.chains.size();
    if (n < 3) throw ValidationError("split: need at least 3 chains");
    std::vector<std::string> ids;
    ids.reserve(n);
    for (const auto& c : ds.chains) ids.push_back(c.graph.chain_id);
    Rng rng(derive_seed(spec.seed, 0x5B17));
    rng.shuffle(ids);

    auto n_train = static_cast<std::size_t>(std::llround(spec.train * static_cast<double>(n)));
    auto n_val = static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
    n_val = std::clamp<std::size_t>(n_val, 1, n - n_train - 1);

    Split s;
    s.train_chains.assign(ids.begin(), ids.begin() + static_cast<long>(n_train));
    s.val_chains.assign(ids.begin() + static_cast<long>(n_train), ids.begin() + static_cast<long>(n_train + n_val));
    s.test_chains.assign(ids.begin() + static_cast<long>(n_train + n_val), ids.end());

    std::map<std::string, int> part;
    for (const auto& id : s.train_chains) part[id] = 0;
    for (const auto& id : s.val_chains) part[id] = 1;
    for (const auto& id : s.test_chains) part[id] = 2;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        switch (part.at(ds.samples[i].chain_id)) {
            case 0: s.train.push_back(i); break;
            case 1: s.val.push_back(i); break;
            default: s.test.push_back(i); break;
        }
    }
    return s;
}

inline nlohmann::json to_json(const Split& s) {
    return {{"format_version", kFormatVersion},
            {"train", s.train_chains},
            {"val", s.val_chains},
            {"test", s.test_chains}};
}

/// Rebuilds sample index lists for a stored split against a dataset.
inline Split split_from_json(const nlohmann::json& j, const Dataset& ds) {
    Split s;
    try {
        s.train_chains = j.at("train").get<std::vector<std::string>>();
        s.val_chains = j.at("val").get<std::vector<std::string>>();
        s.test_chains = j.at("test").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("split file: ") + ex.what());
    }
    std::map<std::string, int> part;
    for (const auto& id : s.train_chains) part[id] = 0;
    for (const auto& id : s.val_chains)
        if (!part.emplace(id, 1).second) throw ValidationError("split file: chain '" + id + "' in two parts");
    for (const auto& id : s.test_chains)
        if (!part.emplace(id, 2).second) throw ValidationError("split file: chain '" + id + "' in two parts");
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        auto it = part.find(ds.samples[i].chain_id);
        if (it == part.end()) continue;
        (it->second == 0 ? s.train : it->second == 1 ? s.val : s.test).push_back(i);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Metrics

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    ClassScores positive, negative;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::vector<double> probabilities;
    std::vector<int> labels;
};

namespace detail {
inline double ratio(std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

inline ClassScores class_scores(std::size_t tp, std::size_t fp, std::size_t fn) {
    ClassScores s;
    s.precision = ratio(tp, tp + fp);
    s.recall = ratio(tp, tp + fn);
    s.f1 = ratio(2 * tp, 2 * tp + fp + fn);
    return s;
}
}  // namespace detail

/// Metrics at threshold 0.5. Undefined ratios (0/0) are reported as 0.
inline EvalReport make_report(const std::vector<int>& labels, const std::vector<double>& probabilities) {
    if (labels.size() != probabilities.size()) throw ValidationError("report: label/probability count mismatch");
    EvalReport r;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = probabilities[i] >= 0.5;
        const bool truth = labels[i] == 1;
        if (pred && truth) ++r.tp;
        else if (pred) ++r.fp;
        else if (truth) ++r.fn;
        else ++r.tn;
    }
    r.positive = detail::class_scores(r.tp, r.fp, r.fn);
    r.negative = detail::class_scores(r.tn, r.fn, r.fp);
    r.macro_f1 = 0.5 * (r.positive.f1 + r.negative.f1);
    r.accuracy = detail::ratio(r.tp + r.tn, labels.size());
    r.probabilities = probabilities;
    r.labels = labels;
    return r;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    int epochs = 20;
    int batch_size = 64;
    AdamConfig adam;
    std::uint64_t seed = 0;
};

inline void validate_config(const TrainConfig& c) {
    if (c.epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (c.batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (!(c.adam.lr > 0.0)) throw ValidationError("train: lr must be > 0");
}

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},           {"batch_size", c.batch_size}, {"lr", c.adam.lr},
            {"beta1", c.adam.beta1},        {"beta2", c.adam.beta2},      {"eps", c.adam.eps},
            {"seed", c.seed}};
}

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_macro_f1 = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    Checkpoint best;
    int best_epoch = 0;
    std::vector<EpochLog> log;
};

class TrainingError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Lazily built per-chain operators for one model kind.
class ContextCache {
public:
    ContextCache(const Dataset& ds, ModelKind kind) : ds_(ds), kind_(kind), lookup_(ds.chain_lookup()) {}

    const ChainContext& get(const std::string& chain_id) {
        const auto idx = lookup_.at(chain_id);
        auto it = cache_.find(idx);
        if (it == cache_.end()) it = cache_.emplace(idx, make_context(ds_.chains[idx].graph, kind_)).first;
        return it->second;
    }

private:
    const Dataset& ds_;
    ModelKind kind_;
    std::map<std::string, std::size_t> lookup_;
    std::map<std::size_t, ChainContext> cache_;
};

/// Corpus-wide table capacities needed by a dataset.
inline void fit_capacities(ModelConfig& cfg, const Dataset& ds) {
    std::size_t mp = 1;
    for (const auto& c : ds.chains) mp = std::max(mp, c.graph.product_count());
    cfg.max_feature_index = std::max(cfg.max_feature_index, static_cast<int>(mp));
    cfg.max_product_index = std::max(cfg.max_product_index, static_cast<int>(mp));
}

inline EvalReport evaluate(const Checkpoint& ck, const Dataset& ds, const std::vector<std::size_t>& samples,
                           ContextCache* cache = nullptr) {
    std::optional<ContextCache> own;
    if (!cache) cache = &own.emplace(ds, ck.config.kind);
    std::vector<int> labels;
    std::vector<double> probs;
    labels.reserve(samples.size());
    probs.reserve(samples.size());
    for (auto i : samples) {
        const auto& s = ds.samples.at(i);
        probs.push_back(predict(ck.params, ck.config, cache->get(s.chain_id), s.window).probability);
        labels.push_back(s.label);
    }
    return make_report(labels, probs);
}

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch Adam on mean BCE; after every epoch the validation macro-F1 is
/// computed and the best epoch's parameters are kept (ties keep the earlier).
inline TrainResult train(const Dataset& ds, const Split& split, const ModelConfig& model_cfg,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    validate_config(model_cfg);
    validate_config(cfg);
    tune_allocator();
    if (split.train.empty() || split.val.empty()) throw ValidationError("train: empty train or validation split");
    ContextCache cache(ds, model_cfg.kind);
    ParamStore params = init_params(model_cfg, derive_seed(cfg.seed, 0xA11));
    TrainResult result;
    result.best.config = model_cfg;
    double best_f1 = -1.0;
    std::vector<std::size_t> order = split.train;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, 0xE90C, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const double w = 1.0 / static_cast<double>(end - start);
            for (std::size_t k = start; k < end; ++k) {
                const auto& s = ds.samples[order[k]];
                Tape tape;
                Var logit = forward_logit(tape, params, model_cfg, cache.get(s.chain_id), s.window);
                Var loss = bce_loss(logit, static_cast<double>(s.label));
                const double lv = loss.value()(0, 0);
                if (!std::isfinite(lv))
                    throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                                        std::to_string(order[k]) + " (check learning rate and initialisation)");
                loss_sum += lv;
                backward(scale(loss, w), params);
            }
            adam_step(params, cfg.adam);
        }
        Checkpoint current{model_cfg, params};
        const auto val = evaluate(current, ds, split.val, &cache);
        EpochLog entry{epoch, loss_sum / static_cast<double>(order.size()), val.macro_f1, val.accuracy};
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
        if (val.macro_f1 > best_f1) {
            best_f1 = val.macro_f1;
            result.best_epoch = epoch;
            result.best.params = std::move(current.params);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string csv_double(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

struct MetricsRow {
    std::string run_id, model, variant;
    std::uint64_t seed = 0;
    std::string split;
    EvalReport report;
};

inline std::string metrics_csv_header() { return "run_id,model,dataset_variant,seed,split,macro_f1,f1_pos,f1_neg,accuracy\n"; }

inline std::string metrics_csv_row(const MetricsRow& r) {
    return r.run_id + "," + r.model + "," + r.variant + "," + std::to_string(r.seed) + "," + r.split + "," +
           csv_double(r.report.macro_f1) + "," + csv_double(r.report.positive.f1) + "," +
           csv_double(r.report.negative.f1) + "," + csv_double(r.report.accuracy) + "\n";
}

/// probs.csv body; sample ids are "<chain_id>/<window_id>".
inline std::string probs_csv(const std::string& run_id, const Dataset& ds, const std::vector<std::size_t>& samples,
                             const EvalReport& r, bool header = true) {
    std::string out = header ? "run_id,sample_id,label,probability\n" : "";
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& s = ds.samples[samples[k]];
        out += run_id + "," + s.chain_id + "/" + std::to_string(s.window_id) + "," + std::to_string(r.labels[k]) +
               "," + csv_double(r.probabilities[k]) + "\n";
    }
    return out;
}

inline void append_text(const std::filesystem::path& path, const std::string& header, const std::string& body) {
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream os(path, std::ios::app);
    if (!os) throw IoError("cannot open " + path.string() + " for appending");
    if (fresh) os << header;
    os << body;
    if (!os) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepCell {
    int window_T = 0;
    int layers = 0;
    std::uint64_t seed = 0;
    double macro_f1 = 0.0;
};

struct SweepSummary {
    int window_T = 0;
    int layers = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation, 0 for one repeat
    std::size_t n = 0;
};

inline std::uint64_t repeat_seed(std::uint64_t base, int repeat) { return base + static_cast<std::uint64_t>(repeat); }

/// Trains and tests every (T, L) pair `repeats` times with seeds base+r.
inline std::vector<SweepCell> sweep(const Dataset& ds, const Split& split, const ModelConfig& base_model,
                                    const TrainConfig& base_train, const std::vector<int>& windows,
                                    const std::vector<int>& layers, int repeats,
                                    const std::function<void(const SweepCell&)>& on_cell = {}) {
    if (repeats < 1) throw ValidationError("sweep: repeats must be >= 1");
    for (int T : windows)
        if (T < 1 || static_cast<std::size_t>(T) > ds.window_length())
            throw ValidationError("sweep: window T=" + std::to_string(T) + " exceeds stored window length " +
                                  std::to_string(ds.window_length()));
    std::vector<SweepCell> out;
    for (int T : windows)
        for (int L : layers)
            for (int r = 0; r < repeats; ++r) {
                ModelConfig m = base_model;
                m.window_T = T;
                m.conv_layers = L;
                TrainConfig tc = base_train;
                tc.seed = repeat_seed(base_train.seed, r);
                const auto res = train(ds, split, m, tc);
                SweepCell cell{T, L, tc.seed, evaluate(res.best, ds, split.test).macro_f1};
                if (on_cell) on_cell(cell);
                out.push_back(cell);
            }
    return out;
}

inline std::vector<SweepSummary> summarize(const std::vector<SweepCell>& cells) {
    std::map<std::pair<int, int>, std::vector<double>> groups;
    for (const auto& c : cells) groups[{c.window_T, c.layers}].push_back(c.macro_f1);
    std::vector<SweepSummary> out;
    for (const auto& [key, v] : groups) {
        SweepSummary s{key.first, key.second, 0.0, 0.0, v.size()};
        s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        if (v.size() > 1) {
            double ss = 0.0;
            for (double x : v) ss += (x - s.mean) * (x - s.mean);
            s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
        }
        out.push_back(s);
    }
    return out;
}

/// One row per trained cell, then one aggregate row per (T, L).
inline std::string sweep_csv(const std::vector<SweepCell>& cells) {
    std::string out = "row,window_T,layers,seed,macro_f1,std\n";
    for (const auto& c : cells)
        out += "run," + std::to_string(c.window_T) + "," + std::to_string(c.layers) + "," + std::to_string(c.seed) +
               "," + csv_double(c.macro_f1) + ",\n";
    for (const auto& s : summarize(cells))
        out += "mean," + std::to_string(s.window_T) + "," + std::to_string(s.layers) + ",," + csv_double(s.mean) +
               "," + csv_double(s.stddev) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Paired t-test

/// Two-sided tail probability P(|T| >= |t|) for Student t with df degrees.
inline double student_t_two_sided(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    const boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    std::size_t df = 0;
};

/// Paired t-test on a - b. Zero variance of the differences gives p = 1 when
/// all differences are zero and p = 0 (t = +-inf) otherwise.
inline TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("paired_ttest: score lists differ in length");
    const std::size_t n = a.size();
    if (n < 2) throw ValidationError("paired_ttest: need at least 2 pairs");
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : d) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(n - 1);
    TTestResult r;
    r.df = n - 1;
    if (var == 0.0) {
        if (mean == 0.0) return {0.0, 1.0, n - 1};
        return {mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(), 0.0,
                n - 1};
    }
    r.t = mean / std::sqrt(var / static_cast<double>(n));
    r.p = student_t_two_sided(r.t, static_cast<double>(n - 1));
    return r;
}

}  // namespace scresil
