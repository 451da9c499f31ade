#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "divrank/corpus.hpp"
#include "divrank/corpus_io.hpp"
#include "divrank/error.hpp"
#include "divrank/synthetic.hpp"
#include "helpers.hpp"

using namespace divrank;
namespace fs = std::filesystem;

namespace {

GeneratorConfig small_config() {
    GeneratorConfig g;
    g.queries = 4;
    g.test_queries = 2;
    g.dim = 16;
    g.mean_categories = 4;
    g.relevant_per_query = 20;
    g.irrelevant_per_query = 8;
    return g;
}

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

std::string expect_format_error(const std::string& path) {
    try {
        load_corpus(path);
    } catch (const FormatError& e) {
        return e.kind();
    }
    return "no error";
}

}  // namespace

TEST(Cosine, SpecExamples) {
    Vec a{1, 0}, b{0, 1}, c{1, 2}, d{2, 1};
    EXPECT_DOUBLE_EQ(cosine_similarity(a, b), 0.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(a, a), 1.0);
    EXPECT_NEAR(cosine_similarity(c, d), 0.8, 1e-15);
    Vec z{0, 0};
    EXPECT_THROW(cosine_similarity(a, z), ContractViolation);
}

TEST(Canonicalize, SurvivesFloatRoundTrip) {
    RngStream rng(3, "canon");
    for (int t = 0; t < 200; ++t) {
        Vec v(33);
        for (double& x : v) x = rng.normal();
        canonicalize_feature(v);
        EXPECT_NEAR(norm2(v), 1.0, 1e-9);
        Vec back(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) back[i] = static_cast<float>(v[i]);
        normalize_inplace(back);
        EXPECT_EQ(back, v);
    }
}

TEST(Synthetic, ForcedSizesStructure) {
    GeneratorConfig g;
    g.queries = 1;
    g.dim = 4;
    g.mean_categories = 2;
    g.forced_sizes = {3, 1};
    g.irrelevant_per_query = 2;
    const EmbeddingCorpus c = generate_synthetic(g, 1);
    EXPECT_EQ(c.images.size(), 6u);
    EXPECT_EQ(c.descriptors.size(), 2u);
    EXPECT_NO_THROW(c.validate());
    std::vector<int> sizes;
    for (int cat : c.queries[0].gt_categories)
        sizes.push_back(static_cast<int>(std::count_if(c.images.begin(), c.images.end(),
                                                       [&](const ImageRecord& im) { return im.category == cat; })));
    std::sort(sizes.begin(), sizes.end());
    EXPECT_EQ(sizes, (std::vector<int>{1, 3}));
}

TEST(Synthetic, NoiseFreeLimitHitsPrototypes) {
    GeneratorConfig g = small_config();
    g.sigma = 1e-13;
    const SyntheticCorpus s = generate_synthetic_detailed(g, 2);
    for (const auto& im : s.corpus.images) {
        if (!im.relevant) continue;
        EXPECT_EQ(im.feature, s.prototypes.at({im.query_id, im.category}));
    }
}

TEST(Synthetic, DeterministicUnderSeed) {
    const auto g = small_config();
    EXPECT_EQ(generate_synthetic(g, 7), generate_synthetic(g, 7));
    EXPECT_FALSE(generate_synthetic(g, 7) == generate_synthetic(g, 8));
}

TEST(Synthetic, RejectsBadConfig) {
    GeneratorConfig g = small_config();
    g.mean_categories = 1.5;
    EXPECT_THROW(generate_synthetic(g, 1), ConfigError);
    g = small_config();
    g.sigma = 0;
    EXPECT_THROW(generate_synthetic(g, 1), ConfigError);
}

TEST(Synthetic, InvariantsAndSplits) {
    GeneratorConfig g = small_config();
    const EmbeddingCorpus c = generate_synthetic(g, 5);
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.subset("train").queries.size(), 4u);
    EXPECT_EQ(c.subset("test").queries.size(), 2u);
    EXPECT_NO_THROW(c.subset("test").validate());
}

TEST(Synthetic, ImagesNearestToOwnPrototype) {
    GeneratorConfig g;
    g.queries = 170;
    g.dim = 64;
    const SyntheticCorpus s = generate_synthetic_detailed(g, 11);
    long total = 0, hit = 0;
    for (const auto& im : s.corpus.images) {
        if (!im.relevant) continue;
        const auto& q = s.corpus.query(im.query_id);
        int best = -1;
        double best_sim = -2;
        for (int cat : q.gt_categories) {
            const double sim = cosine_similarity(im.feature, s.prototypes.at({q.query_id, cat}));
            if (sim > best_sim) {
                best_sim = sim;
                best = cat;
            }
        }
        ++total;
        hit += best == im.category;
    }
    ASSERT_GE(total, 10000);
    EXPECT_GE(static_cast<double>(hit) / total, 0.99);
}

TEST(Synthetic, ZipfLargestAtLeastTwiceMedian) {
    for (int count = 6; count <= 14; ++count)
        for (double s : {1.0, 1.2, 2.0}) {
            auto sizes = zipf_sizes(60, count, s);
            EXPECT_NEAR(std::accumulate(sizes.begin(), sizes.end(), 0), 60, count);
            std::sort(sizes.begin(), sizes.end());
            const double median = count % 2 ? sizes[count / 2] : 0.5 * (sizes[count / 2 - 1] + sizes[count / 2]);
            EXPECT_GE(sizes.back(), 2 * median) << count << " " << s;
        }
}

class CorpusFiles : public ::testing::Test {
protected:
    void SetUp() override {
        base = testing_util::temp_path(::testing::UnitTest::GetInstance()->current_test_info()->name());
        corpus = generate_synthetic(small_config(), 9);
        save_corpus(corpus, base);
        manifest = base + ".manifest.jsonl";
        blob = base + ".f32";
    }
    std::string base, manifest, blob;
    EmbeddingCorpus corpus;
};

TEST_F(CorpusFiles, RoundTripIsBitExact) {
    const EmbeddingCorpus back = load_corpus(base);
    EXPECT_EQ(back, corpus);
    EXPECT_EQ(load_corpus(manifest), corpus);
}

TEST_F(CorpusFiles, BadMagic) {
    std::string m = slurp(manifest);
    m.replace(m.find("\"DRC1\""), 6, "\"DRC9\"");
    spit(manifest, m);
    EXPECT_EQ(expect_format_error(base), "bad magic");
}

TEST_F(CorpusFiles, BadBlobMagic) {
    std::string b = slurp(blob);
    b[0] = 'X';
    spit(blob, b);
    EXPECT_EQ(expect_format_error(base), "bad magic");
}

TEST_F(CorpusFiles, UnsupportedVersion) {
    std::string m = slurp(manifest);
    m.replace(m.find("\"version\":1"), 11, "\"version\":2");
    spit(manifest, m);
    EXPECT_EQ(expect_format_error(base), "unsupported version");
}

TEST_F(CorpusFiles, MissingChecksum) {
    std::string m = slurp(manifest);
    m.erase(m.rfind("{\"crc32\""));
    spit(manifest, m);
    EXPECT_EQ(expect_format_error(base), "missing checksum");
}

TEST_F(CorpusFiles, TruncatedBlob) {
    std::string b = slurp(blob);
    spit(blob, b.substr(0, b.size() - 5));
    EXPECT_EQ(expect_format_error(base), "truncated blob");
}

TEST_F(CorpusFiles, ChecksumMismatch) {
    std::string b = slurp(blob);
    b[b.size() / 2] ^= 0x01;
    spit(blob, b);
    EXPECT_EQ(expect_format_error(base), "checksum mismatch");
}

TEST_F(CorpusFiles, BlobBounds) {
    std::string m = slurp(manifest);
    const auto pos = m.find("\"row\":");
    const auto end = m.find_first_of(",}", pos);
    m.replace(pos, end - pos, "\"row\":999999");
    spit(manifest, m);
    EXPECT_EQ(expect_format_error(base), "blob bounds");
}

TEST_F(CorpusFiles, MalformedManifest) {
    std::string m = slurp(manifest);
    m.insert(m.find('\n') + 1, "{not json\n");
    spit(manifest, m);
    EXPECT_EQ(expect_format_error(base), "malformed manifest");
}
