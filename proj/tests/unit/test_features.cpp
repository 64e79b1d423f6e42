#include "saber/features.hpp"
#include "saber/random.hpp"

#include <gtest/gtest.h>

namespace {

using namespace saber;

TEST(MeanPool, Examples) {
    EXPECT_EQ(mean_pool({{1, 3}, {3, 5}, {2, 1}}), (Vector{2, 3}));
    EXPECT_EQ(mean_pool({{4, 4}}), (Vector{4, 4}));
}

TEST(MeanPool, Errors) {
    try {
        mean_pool({{1}, {1, 2}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "dimension mismatch");
    }
    try {
        mean_pool({});
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "no traces");
    }
}

TEST(MeanPool, PermutationAndCopyInvariance) {
    SplitMix64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Vector> traces(1 + rng.below(6), Vector(5));
        for (auto& t : traces)
            for (double& e : t) e = static_cast<double>(static_cast<int>(rng.below(64)) - 32) / 8.0;
        auto shuffled = traces;
        shuffle(std::span<Vector>(shuffled), rng);
        EXPECT_EQ(mean_pool(shuffled), mean_pool(traces));
        const std::vector<Vector> copies(1 + rng.below(7), traces.front());
        EXPECT_EQ(mean_pool(copies), traces.front());
    }
}

TEST(Fuse, Examples) {
    EXPECT_EQ(fuse(Vector{1, 2}, Vector{3}), (Vector{1, 2, 3}));
    EXPECT_EQ(fuse(Vector{}, Vector{3, 4}), (Vector{3, 4}));
    EXPECT_EQ(fuse(Vector{0, 0}, Vector{0}), (Vector{0, 0, 0}));
}

TEST(BuildInput, HandArithmetic) {
    FeatureRecord r{"a", {5}, {{1}, {3}}, {{2}, {2}}};
    const auto in = build_input(r);
    EXPECT_EQ(in.z_pk, (Vector{5, 2}));
    EXPECT_EQ(in.z_ck, (Vector{5, 2}));
    EXPECT_EQ(in.x, (Vector{5, 2, 5, 2}));
}

TEST(BuildInput, ZeroAndSingleTrace) {
    FeatureRecord zero{"z", {0, 0}, {{0, 0, 0}}, {{0, 0, 0}}};
    EXPECT_EQ(build_input(zero).x, Vector(10, 0.0));
    FeatureRecord one{"o", {1}, {{7, 8}}, {{9, 10}}};
    EXPECT_EQ(build_input(one).x, (Vector{1, 7, 8, 1, 9, 10}));
}

TEST(BuildInput, OutputLengthIsTwiceTheRecordWidth) {
    for (std::size_t dp : {1u, 3u, 8u})
        for (std::size_t dc : {1u, 4u}) {
            FeatureRecord r{"a", Vector(dp, 1.0), {Vector(dc, 2.0), Vector(dc, 3.0)}, {Vector(dc, 4.0), Vector(dc, 5.0)}};
            EXPECT_EQ(build_input(r).x.size(), 2 * (dp + dc));
            EXPECT_EQ(build_input(r).x, build_input(r).x);
        }
}

TEST(BuildInput, RejectsMismatchedSides) {
    FeatureRecord r{"a", {1}, {{1, 2}}, {{1}}};
    EXPECT_THROW(build_input(r), Error);
}

TEST(Standardizer, Examples) {
    const auto s = fit_standardizer({{1, 7, 0}, {3, 7, 0}, {1, 7, 3}, {3, 7, 3}}, 1e-6);
    EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(s.std[0], 1.0);
    EXPECT_DOUBLE_EQ(s.std[1], 1e-6);
    EXPECT_DOUBLE_EQ(s.mean[2], 1.5);
    EXPECT_DOUBLE_EQ(s.std[2], 1.5);

    const auto one = fit_standardizer({{1}, {3}});
    EXPECT_EQ(one.apply(Vector{1}), (Vector{-1}));
    EXPECT_EQ(one.apply(Vector{3}), (Vector{1}));
    EXPECT_EQ(one.apply(one.mean), (Vector{0}));
}

TEST(Standardizer, Errors) {
    EXPECT_THROW(fit_standardizer({}), Error);
    const auto s = fit_standardizer({{1, 2}, {3, 4}});
    EXPECT_THROW(s.apply(Vector{1}), Error);
}

TEST(Standardizer, RoundTripAndMoments) {
    SplitMix64 rng(5);
    std::vector<Vector> xs;
    for (int i = 0; i < 500; ++i) {
        Vector v(6);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = 100.0 * static_cast<double>(j) + (j + 1) * 3.0 * rng.normal();
        xs.push_back(v);
    }
    const auto s = fit_standardizer(xs);
    std::vector<double> sum(6, 0.0), sq(6, 0.0);
    for (const auto& x : xs) {
        const auto z = s.apply(x);
        const auto back = s.invert(z);
        for (std::size_t j = 0; j < 6; ++j) {
            EXPECT_NEAR(back[j], x[j], 1e-12 * std::max(1.0, std::abs(x[j])));
            sum[j] += z[j];
            sq[j] += z[j] * z[j];
        }
    }
    for (std::size_t j = 0; j < 6; ++j) {
        EXPECT_NEAR(sum[j] / 500.0, 0.0, 1e-9);
        EXPECT_NEAR(sq[j] / 500.0, 1.0, 1e-9);
    }
}

} // namespace
