// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and instance counts are pinned below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "divrank/augmentation.hpp"
#include "divrank/checkpoint.hpp"
#include "divrank/config.hpp"
#include "divrank/corpus_io.hpp"
#include "divrank/metrics.hpp"
#include "divrank/pipeline.hpp"
#include "divrank/retrieval.hpp"
#include "divrank/synthetic.hpp"
#include "divrank/transformer.hpp"
#include "instances.hpp"
#include "oracles.hpp"

#ifndef DIVRANK_DESK_CONFIG
#error "DIVRANK_DESK_CONFIG must name the desk-scale config file"
#endif

using namespace divrank;

namespace {

// ---- pinned tolerances -------------------------------------------------
constexpr double kF1TolPct = 0.01;
constexpr double kGradTol = 1e-3;
constexpr int kGradInstances = 20;
constexpr double kHandTol = 1e-12;
constexpr int kOracleInstances = 1000;
constexpr double kOracleTol = 1e-12;
constexpr double kEquivarianceTol = 1e-9;
constexpr double kRowSumTol = 1e-9;
constexpr long kAugSequences = 100000;
constexpr double kAugFreqTol = 0.01;
constexpr int kSeeds = 5;
constexpr double kMinCrGainPct = 10.0;
constexpr double kMaxPDropPct = 5.0;
constexpr int kCoreSeedsNeeded = 4;
constexpr int kXSweepSeedsNeeded = 4;
constexpr int kAblationSeedsNeeded = 3;
constexpr int kEvalK = 20;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---- 1: F1 arithmetic --------------------------------------------------

Outcome f1_arithmetic() {
    const auto t0 = Clock::now();
    struct Row {
        const char* name;
        double p, cr, f1;
    };
    const Row rows[] = {{"CoLT", 85.48, 64.16, 73.30},
                        {"VMIG", 83.01, 59.46, 69.28},
                        {"MMR", 84.52, 53.88, 65.81},
                        {"UMONS", 73.37, 63.24, 67.93},
                        {"DESA", 73.82, 52.82, 61.58}};
    double worst = 0;
    for (const Row& r : rows) worst = std::max(worst, std::abs(100 * f1_at_k(r.p / 100, r.cr / 100) - r.f1));
    const double secs = seconds_since(t0);
    return {worst <= kF1TolPct && secs < 1.0, fmt("5 rows, max |dF1| %.4f pp (tol %.2f), %.3f s", worst, kF1TolPct, secs)};
}

// ---- 2: gradient fidelity ----------------------------------------------

Outcome gradient_fidelity() {
    const auto t0 = Clock::now();
    double scl = 0, ttc = 0, re = 0;
    for (int i = 0; i < kGradInstances; ++i) {
        const auto s = static_cast<std::uint64_t>(i);
        scl = std::max(scl, instances::scl_grad_check(instances::scl_instance(s)).max_rel_error);
        ttc = std::max(ttc, instances::ttc_grad_check(instances::ttc_instance(s)).max_rel_error);
        re = std::max(re, instances::reencoder_grad_check(s).max_rel_error);
    }
    const double secs = seconds_since(t0);
    const bool ok = scl <= kGradTol && ttc <= kGradTol && re <= kGradTol && secs < 60.0;
    return {ok, fmt("%d instances each, max rel err scl %.2e ttc %.2e reencoder %.2e (tol %.0e), %.1f s",
                    kGradInstances, scl, ttc, re, kGradTol, secs)};
}

// ---- 3: loss hand cases ------------------------------------------------

Outcome loss_hand_cases() {
    auto hand = [](bool with_irrelevant) {
        SclBatch b;
        b.tau = 1.0;
        b.query = {1, 0, 0, 0};
        b.relevant = Matrix{{0, 1, 0, 0}};
        b.relevant_ids = {7};
        b.irrelevant = with_irrelevant ? Matrix{{0, 0, 1, 0}} : Matrix(0, 4);
        CategoryMap g;
        g.set(7, 3);
        return scl_loss(b, init_bank({{3, {0, 0, 0, 1}}}), g).loss;
    };
    const double e0 = std::abs(hand(false)), e1 = std::abs(hand(true) - std::log(2.0));

    bool ema_ok = true;
    const Matrix f{{0, 1}};
    const std::vector<int> cat{0};
    for (double alpha : {0.0, 1.0, 0.01}) {
        PrototypeBank bank = init_bank({{0, {1, 0}}});
        ema_update(bank, f, cat, alpha);
        ema_ok = ema_ok && bank.prototypes(0, 0) == alpha * 1.0 + (1 - alpha) * 0.0 &&
                 bank.prototypes(0, 1) == alpha * 0.0 + (1 - alpha) * 1.0;
    }
    return {e0 <= kHandTol && e1 <= kHandTol && ema_ok,
            fmt("scl |err| %.1e and %.1e (tol %.0e), EMA alpha in {0,1,0.01} %s", e0, e1, kHandTol,
                ema_ok ? "bit-exact" : "MISMATCH")};
}

// ---- 4: oracle equivalence ---------------------------------------------

std::size_t small(RngStream& rng, std::size_t hi) { return 1 + rng.uniform_index(hi); }

int metrics_oracle(RngStream& rng) {
    int bad = 0;
    for (int t = 0; t < kOracleInstances; ++t) {
        const std::size_t pool = small(rng, 12), cats = small(rng, 4);
        QueryTruth truth;
        oracle::Truth ot;
        truth.category_count = cats;
        ot.categories = static_cast<int>(cats);
        std::vector<ImageId> ids;
        for (std::size_t i = 0; i < pool; ++i) {
            const auto id = static_cast<ImageId>(i);
            ids.push_back(id);
            if (rng.bernoulli(0.6)) truth.relevant[id] = ot.relevant[id] = static_cast<int>(rng.uniform_index(cats));
        }
        rng.shuffle(ids);
        ids.resize(small(rng, pool));
        const int k = static_cast<int>(small(rng, 6));
        const double p = precision_at_k(ids, truth, k), cr = cluster_recall_at_k(ids, truth, k);
        const double op = oracle::precision(ids, ot, k), ocr = oracle::cluster_recall(ids, ot, k);
        const double of1 = op + ocr > 0 ? 2 * op * ocr / (op + ocr) : 0.0;
        if (std::abs(p - op) > kOracleTol || std::abs(cr - ocr) > kOracleTol ||
            std::abs(f1_at_k(p, cr) - of1) > kOracleTol)
            ++bad;
    }
    return bad;
}

// Image token i gets argmax class cls[i]; classes 4 and 5 are IRRELEVANT
// and QUERY, padding predicts IRRELEVANT.
int post_process_oracle(RngStream& rng) {
    const LabelSpace ls({10, 11, 12, 13});
    int bad = 0;
    for (int t = 0; t < kOracleInstances; ++t) {
        const std::size_t n = small(rng, 12), budget = n + rng.uniform_index(3);
        TokenSequence seq;
        seq.tokens = Matrix(budget + 1, 2);
        seq.image_ids.assign(budget, kPadId);
        seq.similarities.assign(budget, -std::numeric_limits<double>::infinity());
        Matrix probs(budget + 1, 6, 0.1);
        std::vector<oracle::Token> toks;
        std::set<ImageId> seen;
        for (std::size_t i = 0; i < budget; ++i) {
            if (i >= n) {
                probs(i + 1, 4) = 0.9;
                continue;
            }
            const int cls = static_cast<int>(rng.uniform_index(6));
            seq.image_ids[i] = static_cast<ImageId>(rng.uniform_index(40));
            seq.similarities[i] = std::round(rng.uniform() * 8) / 8;
            probs(i + 1, static_cast<std::size_t>(cls)) = 0.9;
            if (seen.insert(seq.image_ids[i]).second)
                toks.push_back({seq.image_ids[i], seq.similarities[i], cls < 4 ? cls : -1});
        }
        const int k = static_cast<int>(small(rng, 6));
        const int X = static_cast<int>(small(rng, static_cast<std::size_t>(std::min(k, 3))));
        if (post_process(probs, seq, ls, {X, k}).ids() != oracle::post_process(toks, X, k)) ++bad;
    }
    return bad;
}

CandidatePool random_pool(RngStream& rng, std::size_t n, std::size_t d) {
    CandidatePool p;
    const Vec q = instances::unit(d, rng);
    p.features = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec f = instances::unit(d, rng);
        std::copy(f.begin(), f.end(), p.features.row(i).begin());
        p.ids.push_back(static_cast<ImageId>(i));
        p.sims.push_back(cosine_similarity(f, q));
    }
    return p;
}

int mmr_oracle(RngStream& rng) {
    int bad = 0;
    for (int t = 0; t < kOracleInstances; ++t) {
        const CandidatePool p = random_pool(rng, small(rng, 12), 3);
        const std::size_t k = small(rng, 6);
        const double lambda = rng.uniform();
        if (mmr_from_pool(p, k, lambda).ids() !=
            oracle::mmr(p.ids, oracle::to_rows(p.features), p.sims, static_cast<int>(k), lambda))
            ++bad;
    }
    return bad;
}

int dbscan_oracle(RngStream& rng) {
    int bad = 0;
    for (int t = 0; t < kOracleInstances; ++t) {
        const Matrix pts = instances::gaussian(small(rng, 12), 2, rng);
        const double eps = 0.2 + rng.uniform();
        const int min_pts = static_cast<int>(small(rng, 4));
        if (dbscan(pts, eps, min_pts) != oracle::dbscan(oracle::to_rows(pts), eps, min_pts)) ++bad;
    }
    return bad;
}

Outcome oracle_equivalence() {
    const auto t0 = Clock::now();
    RngStream rng(4, "acceptance-oracles");
    const int m = metrics_oracle(rng), pp = post_process_oracle(rng), mmr = mmr_oracle(rng), db = dbscan_oracle(rng);
    const double secs = seconds_since(t0);
    return {m + pp + mmr + db == 0 && secs < 120.0,
            fmt("%d instances each, mismatches metrics %d post_process %d mmr %d dbscan %d, %.1f s", kOracleInstances, m,
                pp, mmr, db, secs)};
}

// ---- 5: structural invariants ------------------------------------------

double equivariance_error() {
    double worst = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        RngStream rng(s, "acceptance-perm");
        ParamStore p;
        init_transformer_params(p, TransformerConfig{16, 2, 4, 32}, rng);
        const Matrix x = instances::gaussian(9, 16, rng);
        std::vector<std::size_t> perm(9);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        Matrix xp(9, 16);
        for (std::size_t i = 0; i < 9; ++i) std::copy_n(x.row(perm[i]).begin(), 16, xp.row(i).begin());
        const Matrix y = transformer_encoder_forward(x, p, 2, 4), yp = transformer_encoder_forward(xp, p, 2, 4);
        for (std::size_t i = 0; i < 9; ++i)
            for (std::size_t j = 0; j < 16; ++j) worst = std::max(worst, std::abs(yp(i, j) - y(perm[i], j)));
    }
    return worst;
}

double row_sum_error() {
    double worst = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto inst = instances::ttc_instance(s);
        const Matrix probs = classify_tokens(inst.seq, inst.model);
        for (std::size_t r = 0; r < probs.rows(); ++r) {
            double sum = 0;
            for (double v : probs.row(r)) sum += v;
            worst = std::max(worst, std::abs(sum - 1.0));
        }
    }
    return worst;
}

// Worst |empirical - configured| over the four augmentation operations.
double augmentation_error(std::string* rates) {
    const LabelSpace ls({1, 2});
    RngStream rng(5, "acceptance-aug");
    std::vector<ImageId> ids;
    Matrix f(6, 4);
    CategoryMap truth;
    for (std::size_t i = 0; i < 6; ++i) {
        ids.push_back(static_cast<ImageId>(i));
        const Vec u = instances::unit(4, rng);
        std::copy(u.begin(), u.end(), f.row(i).begin());
        if (i % 3 != 2) truth.set(static_cast<ImageId>(i), 1 + static_cast<int>(i % 2));
    }
    const TokenSequence seq = build_sequence(instances::unit(4, rng), ids, f, 6, &ls, &truth);
    const AugmentationConfig cfg;
    AugmentationStats st;
    for (long i = 0; i < kAugSequences; ++i) augment_sequence(seq, ls, cfg, rng, &st);
    auto rate = [](long h, long n) { return static_cast<double>(h) / static_cast<double>(n); };
    const double q = rate(st.query_hits, st.query_trials), d = rate(st.delete_hits, st.delete_trials),
                 c = rate(st.copy_hits, st.copy_trials), v = rate(st.perturb_hits, st.perturb_trials);
    *rates = fmt("(%.4f, %.4f, %.4f, %.4f)", q, d, c, v);
    return std::max({std::abs(q - cfg.p_q), std::abs(d - cfg.p_d), std::abs(c - cfg.p_c), std::abs(v - cfg.p_v)});
}

bool round_trips() {
    GeneratorConfig g;
    g.queries = 8;
    g.test_queries = 4;
    g.dim = 16;
    g.mean_categories = 4;
    const EmbeddingCorpus c = generate_synthetic(g, 9);
    const std::string base = "acceptance_roundtrip";
    save_corpus(c, base);
    const bool corpus_ok = load_corpus(base) == c;
    std::remove((base + ".manifest.jsonl").c_str());
    std::remove((base + ".f32").c_str());

    ExperimentConfig cfg;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.budget = 16;
    cfg.batch = 4;
    cfg.lr_g = cfg.lr_phi = 1e-3;
    const TrainedSystem sys = train_system(c.subset("train"), cfg);
    const auto bytes = serialize_checkpoint(to_checkpoint(sys, cfg));
    const Checkpoint back = deserialize_checkpoint(bytes);
    const TrainedSystem sys2 = from_checkpoint(back);
    bool lists_ok = true;
    for (const auto& s : kStrategies) {
        const auto a = run_strategy(c, sys, cfg, {s, 10, false}), b = run_strategy(c, sys2, cfg, {s, 10, false});
        for (std::size_t i = 0; i < a.size(); ++i) lists_ok = lists_ok && a[i].ids() == b[i].ids();
    }
    return corpus_ok && serialize_checkpoint(back) == bytes && lists_ok;
}

Outcome structural_invariants() {
    const double eq = equivariance_error(), rs = row_sum_error();
    std::string rates;
    const double aug = augmentation_error(&rates);
    const bool rt = round_trips();
    return {eq <= kEquivarianceTol && rs <= kRowSumTol && aug <= kAugFreqTol && rt,
            fmt("permutation %.1e (tol %.0e), row sums %.1e (tol %.0e), augmentation rates %s max dev %.4f "
                "(tol %.2f), round trips %s",
                eq, kEquivarianceTol, rs, kRowSumTol, rates.c_str(), aug, kAugFreqTol, rt ? "bit-exact" : "MISMATCH")};
}

// ---- 6-8: end-to-end on synthetic corpora ------------------------------

struct SeedResult {
    MetricsAtK raw, colt[3], no_scl, no_da;
};

MetricsAtK score(const EmbeddingCorpus& test, const TrainedSystem& sys, ExperimentConfig cfg, const std::string& s,
                 bool raw, int X = 1) {
    cfg.X = X;
    return evaluate_run(run_strategy(test, sys, cfg, {s, kEvalK, raw}), test, {kEvalK}).at_k(kEvalK);
}

std::vector<SeedResult> run_end_to_end(const ExperimentConfig& base, double* secs) {
    const auto t0 = Clock::now();
    std::vector<SeedResult> out;
    for (int s = 1; s <= kSeeds; ++s) {
        ExperimentConfig cfg = base;
        cfg.seed = static_cast<std::uint64_t>(s);
        const EmbeddingCorpus corpus = generate_synthetic(cfg.generator, cfg.seed);
        const EmbeddingCorpus train = corpus.subset("train"), test = corpus.subset("test");
        SeedResult r;
        const TrainedSystem full = train_system(train, cfg);
        r.raw = score(test, full, cfg, "topk", true);
        for (int X = 1; X <= 3; ++X) r.colt[X - 1] = score(test, full, cfg, "colt", false, X);

        ExperimentConfig no_scl = cfg;
        no_scl.skip_scl = true;
        r.no_scl = score(test, train_system(train, no_scl), no_scl, "colt", false);
        ExperimentConfig no_da = cfg;
        no_da.augmentation.enabled = false;
        r.no_da = score(test, train_system(train, no_da), no_da, "colt", false);
        out.push_back(r);
        std::printf("  seed %d: raw P %.3f CR %.3f | CoLT X=1 P %.3f CR %.3f F1 %.3f | X=2 P %.3f CR %.3f | "
                    "X=3 P %.3f CR %.3f | skip-scl F1 %.3f | no-da F1 %.3f\n",
                    s, r.raw.p, r.raw.cr, r.colt[0].p, r.colt[0].cr, r.colt[0].f1_harmonic, r.colt[1].p, r.colt[1].cr,
                    r.colt[2].p, r.colt[2].cr, r.no_scl.f1_harmonic, r.no_da.f1_harmonic);
        std::fflush(stdout);
    }
    *secs = seconds_since(t0);
    return out;
}

Outcome core_claim(const std::vector<SeedResult>& rs, double secs) {
    int ok = 0;
    std::string per;
    for (const auto& r : rs) {
        const double dcr = 100 * (r.colt[0].cr - r.raw.cr), dp = 100 * (r.raw.p - r.colt[0].p);
        const bool pass = dcr >= kMinCrGainPct && dp <= kMaxPDropPct;
        ok += pass;
        per += fmt(" [CR %+.1f P %+.1f]", dcr, -dp);
    }
    return {ok >= kCoreSeedsNeeded && secs < 600.0,
            fmt("%d/%d seeds with CR@20 gain >= %.0f pp and P@20 drop <= %.0f pp (need %d);%s; %.0f s for all "
                "end-to-end runs",
                ok, kSeeds, kMinCrGainPct, kMaxPDropPct, kCoreSeedsNeeded, per.c_str(), secs)};
}

Outcome x_sweep(const std::vector<SeedResult>& rs) {
    int ok = 0;
    for (const auto& r : rs)
        ok += r.colt[0].cr >= r.colt[1].cr && r.colt[1].cr >= r.colt[2].cr && r.colt[0].p <= r.colt[1].p &&
              r.colt[1].p <= r.colt[2].p;
    return {ok >= kXSweepSeedsNeeded,
            fmt("%d/%d seeds with CR@20 non-increasing and P@20 non-decreasing over X = 1, 2, 3 (need %d)", ok, kSeeds,
                kXSweepSeedsNeeded)};
}

Outcome ablation_pathways(const std::vector<SeedResult>& rs) {
    int scl = 0, da = 0;
    for (const auto& r : rs) {
        scl += r.colt[0].f1_harmonic >= r.no_scl.f1_harmonic;
        da += r.colt[0].f1_harmonic >= r.no_da.f1_harmonic;
    }
    return {scl >= kAblationSeedsNeeded && da >= kAblationSeedsNeeded,
            fmt("full F1@20 >= skip-scl on %d/%d seeds, >= no-da on %d/%d seeds (need %d each)", scl, kSeeds, da,
                kSeeds, kAblationSeedsNeeded)};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    };
    auto guarded = [](const std::function<Outcome()>& f) {
        try {
            return f();
        } catch (const std::exception& e) {
            return Outcome{false, std::string("exception: ") + e.what()};
        }
    };

    report(1, "F1 arithmetic", guarded(f1_arithmetic));
    report(2, "gradient fidelity", guarded(gradient_fidelity));
    report(3, "loss hand cases", guarded(loss_hand_cases));
    report(4, "oracle equivalence", guarded(oracle_equivalence));
    report(5, "structural invariants", guarded(structural_invariants));

    std::vector<SeedResult> rs;
    double secs = 0;
    std::string e2e_error;
    try {
        ExperimentConfig cfg;
        cfg.apply(read_config_file(DIVRANK_DESK_CONFIG));
        rs = run_end_to_end(cfg, &secs);
    } catch (const std::exception& e) {
        e2e_error = std::string("exception: ") + e.what();
    }
    auto e2e = [&](auto f) { return e2e_error.empty() ? f() : Outcome{false, e2e_error}; };
    report(6, "diversity up, precision held", e2e([&] { return core_claim(rs, secs); }));
    report(7, "X-sweep direction", e2e([&] { return x_sweep(rs); }));
    report(8, "ablation pathways", e2e([&] { return ablation_pathways(rs); }));

    std::printf("%d of 8 criteria passed\n", 8 - failures);
    return failures == 0 ? 0 : 1;
}
