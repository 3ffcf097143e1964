#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace cwpca;
using cwpca::testing::TempDir;
using cwpca::testing::unit;

TEST(Rng, SplitMix64ReferenceValues) {
    // First outputs of SplitMix64 seeded with 1234567.
    Rng rng(1234567);
    EXPECT_EQ(rng.next(), 6457827717110365317ULL);
    EXPECT_EQ(rng.next(), 3203168211198807973ULL);
    EXPECT_EQ(rng.next(), 9817491932198370423ULL);
}

TEST(Rng, StreamsDiffer) {
    auto a = Rng::stream(7, 1);
    auto b = Rng::stream(7, 2);
    EXPECT_NE(a.next(), b.next());
}

TEST(Generate, NoiselessClassMeansExact) {
    SceneSpec s;
    s.width = 10;
    s.height = 10;
    s.bands = 4;
    s.seed = 3;
    ClassSpec a{"a", {2, 0, 0, 0}, 0.0, 0.3, {}};
    ClassSpec b{"b", {0, 0, 5, 0}, 0.0, 0.2, {}};
    s.classes = {a, b};
    const auto [cube, raster] = generate(s);
    const auto all = cube_to_samples(cube, raster, SampleSubset::AllLabeled);
    for (int c = 1; c <= 2; ++c) {
        Vector sum = Vector::Zero(4);
        int n = 0;
        for (Eigen::Index r = 0; r < all.size(); ++r)
            if (all.labels[static_cast<std::size_t>(r)] == c) {
                sum += all.features.row(r).transpose();
                ++n;
            }
        const auto& mean = s.classes[static_cast<std::size_t>(c - 1)].mean;
        for (int k = 0; k < 4; ++k) EXPECT_EQ(sum[k] / n, mean[static_cast<std::size_t>(k)]);
    }
    EXPECT_EQ(raster.class_names, (std::vector<std::string>{"a", "b"}));
}

TEST(Generate, ClassCountsFollowFractions) {
    SceneSpec s;
    s.width = 100;
    s.height = 100;
    s.bands = 2;
    s.classes = {{"", {0, 0}, 1.0, 0.9, {}}, {"", {1, 1}, 1.0, 0.01, {}}};
    const auto [cube, raster] = generate(s);
    const auto hist = raster.class_histogram();
    EXPECT_EQ(hist[1], 9000u);
    EXPECT_EQ(hist[2], 100u);
    EXPECT_EQ(hist[0], 900u);
}

TEST(Generate, DeterministicBytes) {
    TempDir dir("synth");
    const auto spec = cwpca::testing::random_scene(5, 3, 6, 12);
    save_cube(generate(spec).first, dir / "a.hsdr");
    save_cube(generate(spec).first, dir / "b.hsdr");
    EXPECT_EQ(cwpca::testing::read_file(dir / "a.hsdr"), cwpca::testing::read_file(dir / "b.hsdr"));
    auto other = spec;
    other.seed = 6;
    save_cube(generate(other).first, dir / "c.hsdr");
    EXPECT_NE(cwpca::testing::read_file(dir / "a.hsdr"), cwpca::testing::read_file(dir / "c.hsdr"));
}

TEST(GenerateProperty, EmpiricalMeansConverge) {
    SceneSpec s;
    s.width = 100;
    s.height = 100;
    s.bands = 5;
    s.noise_sigma = 0.5;
    s.seed = 9;
    s.classes = {{"", {1, 2, 3, 4, 5}, 0.0, 0.5, {}}, {"", {-1, 0, 1, 0, -1}, 0.0, 0.5, {}}};
    const auto [cube, raster] = generate(s);
    const auto all = cube_to_samples(cube, raster, SampleSubset::AllLabeled);
    for (int c = 1; c <= 2; ++c) {
        Vector sum = Vector::Zero(5);
        double n = 0;
        for (Eigen::Index r = 0; r < all.size(); ++r)
            if (all.labels[static_cast<std::size_t>(r)] == c) {
                sum += all.features.row(r).transpose();
                n += 1;
            }
        ASSERT_GE(n, 5000);
        for (int b = 0; b < 5; ++b) {
            EXPECT_LE(std::abs(sum[b] / n - s.classes[static_cast<std::size_t>(c - 1)].mean[static_cast<std::size_t>(b)]),
                      5.0 * s.noise_sigma / std::sqrt(n));
        }
    }
}

TEST(Generate, FactorsShapeCovariance) {
    SceneSpec s;
    s.width = 60;
    s.height = 60;
    s.bands = 3;
    s.seed = 1;
    s.classes = {{"", {0, 0, 0}, 1.0, 1.0, {{unit(3, 2), 2.0}}}};
    const auto [cube, raster] = generate(s);
    const auto cov = covariance(cube_to_samples(cube, raster, SampleSubset::AllLabeled).features).covariance;
    EXPECT_NEAR(cov(2, 2), 4.0, 0.3);
    EXPECT_EQ(cov(0, 0), 0.0);
}

TEST(Generate, InvalidSpecs) {
    SceneSpec s;
    s.width = 4;
    s.height = 4;
    s.bands = 2;
    auto expect_invalid = [](const SceneSpec& spec) {
        try {
            generate(spec);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::SpecInvalid);
        }
    };
    expect_invalid(s); // no classes
    s.classes = {{"", {0, 0}, 1.0, 0.7, {}}, {"", {0, 0}, 1.0, 0.4, {}}};
    expect_invalid(s); // fractions > 1
    s.classes = {{"", {0}, 1.0, 0.5, {}}};
    expect_invalid(s); // mean length
    s.classes = {{"", {0, 0}, 1.0, -0.1, {}}};
    expect_invalid(s);
}

TEST(SceneSpec, JsonRoundTrip) {
    TempDir dir("spec");
    const auto spec = cwpca::testing::random_scene(3, 2, 4, 8);
    std::ofstream(dir / "s.json") << to_json(spec).dump(2);
    const auto back = load_scene_spec(dir / "s.json");
    EXPECT_EQ(to_json(back).dump(), to_json(spec).dump());
    std::ofstream(dir / "bad.json") << "{\"width\": 3}";
    EXPECT_THROW(load_scene_spec(dir / "bad.json"), Error);
}
