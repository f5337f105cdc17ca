#include "ptg/composer.hpp"
#include "ptg/digest.hpp"
#include "ptg/error.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

using namespace ptg;

namespace {

std::shared_ptr<EmbeddingTable> table_of(std::size_t dim,
                                         std::vector<std::pair<std::string, std::vector<float>>> rows) {
    auto t = std::make_shared<EmbeddingTable>(dim);
    for (auto& [id, v] : rows) t->add(id, EmbeddingVector(std::move(v)));
    return t;
}

}  // namespace

TEST(Composer, TextKeyIsSha256) {
    EXPECT_EQ(text_key("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(composite_id("img1", "abc"),
              "img1|ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Composer, ToyBlendOfOrthogonalUnitVectors) {
    auto images = table_of(2, {{"r", {1.0f, 0.0f}}});
    auto texts = table_of(2, {{text_key("t"), {0.0f, 1.0f}}});
    const auto backend = ComposerBackend::toy(images, texts, 0.5);
    const auto v = backend.compose("p", "r", text_key("t"));
    const float expected = static_cast<float>(1.0 / std::sqrt(2.0));
    EXPECT_FLOAT_EQ(v[0], expected);
    EXPECT_FLOAT_EQ(v[1], expected);
}

TEST(Composer, ToyOutputHasUnitNorm) {
    std::mt19937_64 rng(11);
    auto images = std::make_shared<EmbeddingTable>(ptg::testing::random_table(rng, 20, 64));
    auto texts = std::make_shared<EmbeddingTable>(64);
    for (int i = 0; i < 20; ++i) {
        texts->add(text_key("caption " + std::to_string(i)),
                   EmbeddingVector(ptg::testing::random_vector(rng, 64)));
    }
    for (double alpha : {0.1, 0.5, 0.9}) {
        const auto backend = ComposerBackend::toy(images, texts, alpha);
        for (int i = 0; i < 20; ++i) {
            const auto v = backend.compose("", images->ids()[i], text_key("caption " + std::to_string(i)));
            EXPECT_NEAR(l2_norm(v.values()), 1.0, 1e-6);
        }
    }
}

TEST(Composer, ToyMatchesHandComputedBlend) {
    auto images = table_of(3, {{"r", {3.0f, 0.0f, 4.0f}}});
    auto texts = table_of(3, {{"t", {0.0f, 2.0f, 0.0f}}});
    const auto v = ComposerBackend::toy(images, texts, 0.25).compose("p", "r", "t");
    // 0.25*(3,0,4) + 0.75*(0,2,0) = (0.75, 1.5, 1.0); norm = sqrt(0.5625+2.25+1) = sqrt(3.8125)
    const double n = std::sqrt(3.8125);
    EXPECT_NEAR(v[0], 0.75 / n, 1e-7);
    EXPECT_NEAR(v[1], 1.5 / n, 1e-7);
    EXPECT_NEAR(v[2], 1.0 / n, 1e-7);
}

TEST(Composer, ToyRejectsDegenerateAlpha) {
    auto images = table_of(2, {{"r", {1.0f, 0.0f}}});
    auto texts = table_of(2, {{"t", {0.0f, 1.0f}}});
    for (double alpha : {0.0, 1.0, -0.5, 1.5, std::nan("")}) {
        EXPECT_THROW(ComposerBackend::toy(images, texts, alpha), Error) << alpha;
    }
}

TEST(Composer, ToyRejectsDimensionMismatch) {
    auto images = table_of(2, {{"r", {1.0f, 0.0f}}});
    auto texts = table_of(3, {{"t", {0.0f, 1.0f, 0.0f}}});
    try {
        ComposerBackend::toy(images, texts);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
    }
}

TEST(Composer, ToyMissingIdsAreNotFound) {
    auto images = table_of(2, {{"r", {1.0f, 0.0f}}});
    auto texts = table_of(2, {{"t", {0.0f, 1.0f}}});
    const auto backend = ComposerBackend::toy(images, texts);
    try {
        backend.compose("p", "missing", "t");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_found);
    }
    EXPECT_THROW(backend.compose("p", "r", "nope"), Error);
}

TEST(Composer, PrecomputedIsBitwisePassthrough) {
    std::mt19937_64 rng(3);
    auto composites = std::make_shared<EmbeddingTable>(ptg::testing::random_table(rng, 50, 128, "c"));
    const auto backend = ComposerBackend::precomputed(composites);
    EXPECT_EQ(backend.mode(), ComposerMode::precomputed);
    for (std::size_t i = 0; i < composites->size(); ++i) {
        const auto& id = composites->ids()[i];
        const auto v = backend.compose(id, "ignored", "ignored");
        const auto expected = composites->vector_at(i).values();
        ASSERT_EQ(v.dim(), expected.size());
        EXPECT_EQ(std::memcmp(v.values().data(), expected.data(), expected.size() * sizeof(float)), 0);
    }
    EXPECT_THROW(backend.compose("absent", "", ""), Error);
}

TEST(Composer, ComposeIsPure) {
    std::mt19937_64 rng(5);
    auto images = std::make_shared<EmbeddingTable>(ptg::testing::random_table(rng, 4, 32));
    auto texts = std::make_shared<EmbeddingTable>(ptg::testing::random_table(rng, 4, 32, "t"));
    const auto backend = ComposerBackend::toy(images, texts, 0.3);
    const auto a = backend.compose("x", images->ids()[1], texts->ids()[2]);
    backend.compose("y", images->ids()[0], texts->ids()[3]);
    const auto b = backend.compose("x", images->ids()[1], texts->ids()[2]);
    EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
    EXPECT_EQ(backend.digest(), ComposerBackend::toy(images, texts, 0.3).digest());
}
