#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "divrank/error.hpp"
#include "divrank/reencoder.hpp"
#include "divrank/scl.hpp"
#include "divrank/synthetic.hpp"
#include "helpers.hpp"
#include "instances.hpp"

using namespace divrank;

TEST(ReEncoder, ZeroBetaIsIdentity) {
    RngStream rng(1, "re");
    const ReEncoderModel m = ReEncoderModel::create(6, 0.0, rng);
    const Vec h = testing_util::random_unit(6, rng);
    EXPECT_EQ(reencode(h, m), h);
}

TEST(ReEncoder, ZeroWeightsIsIdentity) {
    RngStream rng(2, "re");
    ReEncoderModel m = ReEncoderModel::create(6, 0.02, rng);
    for (auto& p : m.params.params()) p.value.fill(0.0);
    const Vec h = testing_util::random_unit(6, rng);
    EXPECT_EQ(reencode(h, m), h);
}

TEST(ReEncoder, AnalyticForcedCorrection) {
    // Hidden width 1 with w1 = 0, b1 = 1 gives act = gelu(1); w2 scales it
    // so that g(h) = [0.5, -0.5].
    RngStream rng(3, "re");
    ReEncoderModel m = ReEncoderModel::create(2, 0.02, rng, 1);
    m.params.value("g.w1").fill(0.0);
    m.params.value("g.b1").fill(1.0);
    const double act = 0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)));
    m.params.value("g.w2") = Matrix{{0.5 / act, -0.5 / act}};
    m.params.value("g.b2").fill(0.0);
    const Vec out = reencode(Vec{1, 1}, m);
    EXPECT_NEAR(out[0], 1.01, 1e-15);
    EXPECT_NEAR(out[1], 0.99, 1e-15);
}

TEST(ReEncoder, DimMismatchAndBadConfig) {
    RngStream rng(4, "re");
    const ReEncoderModel m = ReEncoderModel::create(4, 0.02, rng);
    EXPECT_THROW(reencode(Vec{1, 0, 0}, m), ContractViolation);
    EXPECT_THROW(ReEncoderModel::create(4, -1.0, rng), ConfigError);
}

TEST(ReEncoder, GradCheck) {
    for (std::uint64_t s = 0; s < 5; ++s) EXPECT_LE(instances::reencoder_grad_check(s).max_rel_error, 1e-6);
}

TEST(InitBank, CopiesDescriptors) {
    const std::vector<CategoryDescriptor> desc{{4, {1, 0}}, {9, {0, 1}}};
    const PrototypeBank bank = init_bank(desc);
    EXPECT_EQ(bank.size(), 2u);
    EXPECT_EQ(bank.prototypes, (Matrix{{1, 0}, {0, 1}}));
    EXPECT_EQ(bank.row_of(9), 1u);
    EXPECT_THROW(init_bank({}), ContractViolation);
    EXPECT_THROW(init_bank({{1, {1, 0}}, {1, {0, 1}}}), ContractViolation);
}

namespace {

// Every dot product zero: query, relevant, irrelevant and prototype are
// mutually orthogonal basis vectors.
SclLoss hand_case(bool with_irrelevant) {
    SclBatch b;
    b.tau = 1.0;
    b.query = {1, 0, 0, 0};
    b.relevant = Matrix{{0, 1, 0, 0}};
    b.relevant_ids = {7};
    b.irrelevant = with_irrelevant ? Matrix{{0, 0, 1, 0}} : Matrix(0, 4);
    const PrototypeBank bank = init_bank({{3, {0, 0, 0, 1}}});
    CategoryMap g;
    g.set(7, 3);
    return scl_loss(b, bank, g);
}

}  // namespace

TEST(SclLoss, HandCases) {
    EXPECT_NEAR(hand_case(false).loss, 0.0, 1e-12);
    EXPECT_NEAR(hand_case(true).loss, std::log(2.0), 1e-12);
}

TEST(SclLoss, MatchesScalarOracle) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto inst = instances::scl_instance(s);
        for (SclPairs pairs : {SclPairs{true, true}, SclPairs{false, true}, SclPairs{true, false},
                               SclPairs{false, false}}) {
            const double got = scl_loss(inst.batch, inst.bank, inst.categories, pairs).loss;
            EXPECT_NEAR(got, instances::scl_oracle(inst, pairs), 1e-12);
        }
    }
}

TEST(SclLoss, GradCheck) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto inst = instances::scl_instance(s);
        EXPECT_LE(instances::scl_grad_check(inst).max_rel_error, 1e-6);
        EXPECT_LE(instances::scl_grad_check(inst, {false, false}).max_rel_error, 1e-6);
    }
}

TEST(SclLoss, StableForSmallTau) {
    auto inst = instances::scl_instance(3);
    inst.batch.tau = 1e-3;
    const auto r = scl_loss(inst.batch, inst.bank, inst.categories);
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_TRUE(r.grad_relevant.all_finite());
}

TEST(SclLoss, IrrelevantDotIncreasesLoss) {
    auto inst = instances::scl_instance(4);
    const double before = scl_loss(inst.batch, inst.bank, inst.categories).loss;
    // Moving an irrelevant feature toward the query raises its dot product.
    for (std::size_t j = 0; j < inst.batch.query.size(); ++j) inst.batch.irrelevant(0, j) += 0.1 * inst.batch.query[j];
    EXPECT_GT(scl_loss(inst.batch, inst.bank, inst.categories).loss, before);
}

TEST(SclLoss, EmptyRelevantRejected) {
    auto inst = instances::scl_instance(5);
    inst.batch.relevant = Matrix(0, 6);
    inst.batch.relevant_ids.clear();
    EXPECT_THROW(scl_loss(inst.batch, inst.bank, inst.categories), ContractViolation);
}

TEST(Ema, HandCases) {
    const Matrix f{{0, 1}};
    const std::vector<int> cat{2};
    PrototypeBank bank = init_bank({{2, {1, 0}}});
    ema_update(bank, f, cat, 1.0);
    EXPECT_EQ(bank.prototypes, (Matrix{{1, 0}}));
    ema_update(bank, f, cat, 0.0);
    EXPECT_EQ(bank.prototypes, (Matrix{{0, 1}}));

    bank = init_bank({{2, {1, 0}}});
    ema_update(bank, f, cat, 0.01);
    EXPECT_EQ(bank.prototypes(0, 0), 0.01 * 1.0 + 0.99 * 0.0);
    EXPECT_EQ(bank.prototypes(0, 1), 0.01 * 0.0 + 0.99 * 1.0);

    bank = init_bank({{2, {1, 0}}});
    ema_update(bank, f, cat, 0.01, true);
    EXPECT_EQ(bank.prototypes(0, 0), 0.99 * 1.0 + 0.01 * 0.0);
}

TEST(Ema, SequentialAndUnknownCategory) {
    PrototypeBank bank = init_bank({{0, {0, 0}}});
    const Matrix f{{1, 0}, {0, 1}};
    const std::vector<int> cats{0, 0};
    ema_update(bank, f, cats, 0.5);
    EXPECT_EQ(bank.prototypes, (Matrix{{0.25, 0.5}}));
    const std::vector<int> bad{5};
    EXPECT_THROW(ema_update(bank, Matrix{{1, 0}}, bad, 0.5), ContractViolation);
}

namespace {

EmbeddingCorpus toy_corpus() {
    GeneratorConfig g;
    g.queries = 2;
    g.dim = 8;
    g.mean_categories = 2;
    g.global_categories = 2;
    g.relevant_per_query = 12;
    g.irrelevant_per_query = 8;
    return generate_synthetic(g, 3);
}

}  // namespace

TEST(TrainReencoder, LossDecreases) {
    const EmbeddingCorpus c = toy_corpus();
    RngStream rng(3, "model");
    ReEncoderModel m = ReEncoderModel::create(8, 0.02, rng);
    PrototypeBank bank = init_bank(c.descriptors);
    SclTrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch = 1;
    cfg.epochs = 100;
    cfg.seed = 3;
    const auto rep = train_reencoder(c, m, bank, cfg);
    ASSERT_EQ(rep.steps, 200);
    auto mean = [](auto b, auto e) { return std::accumulate(b, e, 0.0) / static_cast<double>(e - b); };
    const auto& h = rep.loss_history;
    EXPECT_LT(mean(h.end() - 20, h.end()), mean(h.begin(), h.begin() + 20));
}

TEST(TrainReencoder, ZeroEpochsIsNoOp) {
    const EmbeddingCorpus c = toy_corpus();
    RngStream rng(3, "model");
    ReEncoderModel m = ReEncoderModel::create(8, 0.02, rng);
    const ReEncoderModel before = m;
    PrototypeBank bank = init_bank(c.descriptors);
    SclTrainConfig cfg;
    cfg.epochs = 0;
    train_reencoder(c, m, bank, cfg);
    EXPECT_TRUE(m.params.same_values(before.params));
    EXPECT_EQ(bank, init_bank(c.descriptors));
}

TEST(TrainReencoder, Deterministic) {
    const EmbeddingCorpus c = toy_corpus();
    auto run = [&] {
        RngStream rng(3, "model");
        ReEncoderModel m = ReEncoderModel::create(8, 0.02, rng);
        PrototypeBank bank = init_bank(c.descriptors);
        SclTrainConfig cfg;
        cfg.lr = 1e-3;
        cfg.epochs = 5;
        cfg.seed = 9;
        train_reencoder(c, m, bank, cfg);
        return std::make_pair(m, bank);
    };
    const auto a = run(), b = run();
    EXPECT_TRUE(a.first.params.same_values(b.first.params));
    EXPECT_EQ(a.second, b.second);
}
