#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "scresil/cli.hpp"
#include "scresil/scrihn.hpp"
#include "scresil/scsim.hpp"

using namespace scresil;

namespace {

ModelConfig small_config(ModelKind kind = ModelKind::scrihn) {
    ModelConfig c;
    c.kind = kind;
    c.hidden_dim = 8;
    c.feature_pos_dim = 4;
    c.head_hidden = 6;
    c.max_feature_index = 16;
    c.max_product_index = 16;
    c.window_T = 3;
    return c;
}

std::vector<DenseMatrix> random_window(std::size_t nf, std::size_t np, std::size_t T, Rng& rng) {
    std::vector<DenseMatrix> w;
    for (std::size_t t = 0; t < T; ++t) {
        DenseMatrix m(nf, np);
        for (auto& v : m.values()) v = rng.uniform(0.0, 10.0);
        w.push_back(m);
    }
    return w;
}

}  // namespace

TEST(Config, JsonRoundTripAndStrictKeys) {
    auto c = small_config(ModelKind::gcn_clique);
    c.pool_product_nodes = true;
    const auto back = model_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    auto j = to_json(c);
    j["hiden_dim"] = 3;
    EXPECT_THROW(model_config_from_json(j), ValidationError);
    EXPECT_THROW(model_kind_from_string("gat"), ValidationError);
    j = to_json(c);
    j["window_T"] = 0;
    EXPECT_THROW(model_config_from_json(j), ValidationError);
}

TEST(Params, OnlyReadParametersExist) {
    auto c = small_config();
    EXPECT_TRUE(init_params(c, 1).contains("feature_pos"));
    c.use_feature_pos = false;
    EXPECT_FALSE(init_params(c, 1).contains("feature_pos"));
    c = small_config(ModelKind::mlp);
    const auto s = init_params(c, 1);
    EXPECT_FALSE(s.contains("conv.0.w"));
    EXPECT_FALSE(s.contains("product_pos"));
    EXPECT_EQ(init_params(small_config(ModelKind::sage_clique), 1).at("conv.0.w").value.rows(), 16u);
}

TEST(Encoder, RowsAreIndependentAndEquivariant) {
    const auto cfg = small_config();
    const auto s = init_params(cfg, 2);
    Rng rng(3);
    DenseMatrix x(5, 4);
    for (auto& v : x.values()) v = rng.uniform(0.0, 2.0);
    Tape t;
    const auto full = encode_features(t, s, cfg, t.constant(x)).value();
    DenseMatrix row3(1, 4);
    for (std::size_t j = 0; j < 4; ++j) row3(0, j) = x(3, j);
    const auto single = encode_features(t, s, cfg, t.constant(row3)).value();
    for (std::size_t j = 0; j < full.cols(); ++j) EXPECT_NEAR(full(3, j), single(0, j), 1e-12);
}

TEST(Encoder, WithoutPositionsFeatureOrderIsIrrelevant) {
    auto cfg = small_config();
    cfg.use_feature_pos = false;
    const auto s = init_params(cfg, 4);
    DenseMatrix x(1, 4, std::vector<double>{0.1, 0.7, 1.3, 2.0});
    DenseMatrix y(1, 4, std::vector<double>{2.0, 0.1, 1.3, 0.7});
    Tape t;
    const auto a = encode_features(t, s, cfg, t.constant(x)).value();
    const auto b = encode_features(t, s, cfg, t.constant(y)).value();
    EXPECT_LT(max_abs_diff(a, b), 1e-13);

    cfg.use_feature_pos = true;
    auto sp = init_params(cfg, 4);
    for (auto& v : sp.at("feature_pos").value.values()) v *= 50.0;
    Tape t2;
    const auto c = encode_features(t2, sp, cfg, t2.constant(x)).value();
    const auto d = encode_features(t2, sp, cfg, t2.constant(y)).value();
    EXPECT_GT(max_abs_diff(c, d), 1e-6);
}

TEST(Encoder, FeatureCapacityChecked) {
    auto cfg = small_config();
    cfg.max_feature_index = 3;
    const auto s = init_params(cfg, 1);
    Tape t;
    EXPECT_THROW(encode_features(t, s, cfg, t.constant(DenseMatrix(2, 4))), ValidationError);
}

TEST(NodeMatrix, ProductRowsRepeatPerBlock) {
    const auto cfg = small_config();
    const auto s = init_params(cfg, 5);
    Rng rng(6);
    DenseMatrix firms(2 * 3, 8);  // T=2, |C|=3
    for (auto& v : firms.values()) v = rng.uniform(-1.0, 1.0);
    Tape t;
    const auto z = init_node_matrix(t, s, cfg, t.constant(firms), 3, 2, true).value();
    ASSERT_EQ(z.rows(), 2u * 5u);
    const auto& table = s.at("product_pos").value;
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(z(b * 5 + c, j), firms(b * 3 + c, j));
        for (std::size_t k = 0; k < 2; ++k)
            for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(z(b * 5 + 3 + k, j), table(k, j));
    }
    EXPECT_EQ(init_node_matrix(t, s, cfg, t.constant(firms), 3, 2, false).value(), firms);
}

TEST(HConv, MatchesDenseOracleOnEveryBlock) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto h = oracle::random_hypergraph(3 + trial % 3, 1 + trial % 3, 0.3, 100 + trial);
        const auto n = h.node_count();
        const auto P = oracle::propagation(h);
        const auto z = oracle::random_mat(2 * n, 4, rng), w = oracle::random_mat(4, 3, rng);
        Tape t;
        const auto out = hconv_layer(t.constant(oracle::to_dense(z)),
                                     t.constant(build_incidence_system(h).propagation), t.constant(oracle::to_dense(w)),
                                     2)
                             .value();
        for (std::size_t b = 0; b < 2; ++b) {
            oracle::Mat zb(z.begin() + long(b * n), z.begin() + long((b + 1) * n));
            const auto ref = oracle::hconv(P, zb, w);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < 3; ++j)
                    EXPECT_NEAR(out(b * n + i, j), static_cast<double>(ref[i][j]), 1e-12);
        }
    }
}

TEST(Model, FirmPermutationInvariance) {
    for (auto kind : {ModelKind::scrihn, ModelKind::mlp, ModelKind::gcn_clique, ModelKind::gcn_firm_only,
                      ModelKind::sage_clique}) {
        const auto cfg = small_config(kind);
        const auto s = init_params(cfg, 8);
        const auto h = generate_network({}, 9);
        Rng rng(10);
        const auto window = random_window(h.firm_count(), h.product_count(), 3, rng);

        std::vector<std::size_t> perm(h.firm_count());
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);  // new index of old firm i is perm[i]
        auto g = h;
        for (std::size_t i = 0; i < perm.size(); ++i) g.firms[perm[i]] = h.firms[i];
        for (auto& e : g.hyperedges) {
            e.upstream = perm[e.upstream];
            e.downstream = perm[e.downstream];
        }
        auto pw = window;
        for (std::size_t t = 0; t < pw.size(); ++t)
            for (std::size_t i = 0; i < perm.size(); ++i)
                for (std::size_t p = 0; p < h.product_count(); ++p) pw[t](perm[i], p) = window[t](i, p);

        const double a = predict(s, cfg, make_context(h, kind), window).logit;
        const double b = predict(s, cfg, make_context(g, kind), pw).logit;
        EXPECT_NEAR(a, b, 1e-9) << to_string(kind);
    }
}

TEST(Model, IdenticalStatesMakeWindowLengthIrrelevant) {
    auto cfg = small_config();
    const auto s = init_params(cfg, 11);
    const auto h = generate_network({}, 12);
    Rng rng(13);
    const auto one = random_window(h.firm_count(), h.product_count(), 1, rng);
    const std::vector<DenseMatrix> three(3, one[0]);
    const auto ctx = make_context(h, cfg.kind);
    const double z3 = predict(s, cfg, ctx, three).logit;
    cfg.window_T = 1;
    EXPECT_NEAR(predict(s, cfg, ctx, one).logit, z3, 1e-12);
}

TEST(Model, WindowChecks) {
    const auto cfg = small_config();
    const auto s = init_params(cfg, 1);
    const auto h = generate_network({}, 1);
    const auto ctx = make_context(h, cfg.kind);
    Rng rng(2);
    EXPECT_THROW(predict(s, cfg, ctx, random_window(h.firm_count(), h.product_count(), 2, rng)), ValidationError);
    EXPECT_THROW(predict(s, cfg, ctx, random_window(h.firm_count() + 1, h.product_count(), 3, rng)),
                 ValidationError);
    auto w = random_window(h.firm_count(), h.product_count(), 3, rng);
    w[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(predict(s, cfg, ctx, w), ValidationError);
}

TEST(Model, ProductPoolingChangesSummary) {
    auto cfg = small_config();
    const auto s = init_params(cfg, 14);
    const auto h = generate_network({}, 15);
    Rng rng(16);
    const auto w = random_window(h.firm_count(), h.product_count(), 3, rng);
    const auto ctx = make_context(h, cfg.kind);
    const double firms_only = predict(s, cfg, ctx, w).logit;
    cfg.pool_product_nodes = true;
    EXPECT_GT(std::abs(predict(s, cfg, ctx, w).logit - firms_only), 1e-9);
}

TEST(Model, EveryParameterReceivesGradient) {
    for (auto kind : {ModelKind::scrihn, ModelKind::mlp, ModelKind::gcn_clique, ModelKind::sage_clique}) {
        auto cfg = small_config(kind);
        // at width 8 an unlucky init can leave every conv column dead
        cfg.hidden_dim = 16;
        auto s = init_params(cfg, 17);
        const auto h = generate_network({}, 18);
        Rng rng(19);
        const auto ctx = make_context(h, kind);
        for (int k = 0; k < 4; ++k) {
            Tape t;
            backward(bce_loss(forward_logit(t, s, cfg, ctx, random_window(h.firm_count(), h.product_count(), 3, rng)),
                              k % 2),
                     s);
        }
        for (const auto& p : s) {
            const bool any = std::any_of(p.grad.values().begin(), p.grad.values().end(),
                                         [](double g) { return g != 0.0; });
            EXPECT_TRUE(any) << to_string(kind) << " " << p.name;
        }
    }
}

TEST(Model, GradientsMatchFiniteDifferences) {
    for (auto kind : {ModelKind::scrihn, ModelKind::mlp, ModelKind::gcn_clique, ModelKind::gcn_bipartite,
                      ModelKind::gcn_firm_only, ModelKind::sage_clique}) {
        const auto report = cli::gradcheck_tiny(kind, 2, 3);
        EXPECT_LT(report.worst(), 1e-4) << to_string(kind);
    }
}

TEST(Checkpoint, RoundTripPreservesPredictions) {
    const auto cfg = small_config(ModelKind::gcn_clique);
    Checkpoint ck{cfg, init_params(cfg, 20)};
    const auto back = checkpoint_from_json(nlohmann::json::parse(checkpoint_to_json(ck).dump()));
    const auto h = generate_network({}, 21);
    Rng rng(22);
    const auto w = random_window(h.firm_count(), h.product_count(), 3, rng);
    const auto ctx = make_context(h, cfg.kind);
    EXPECT_EQ(predict(ck.params, ck.config, ctx, w).logit, predict(back.params, back.config, ctx, w).logit);
}
