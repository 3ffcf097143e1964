#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace cwpca;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::ConfigInvalid;
}

LabelRaster raster_from_counts(const std::vector<std::size_t>& counts, std::size_t unlabeled = 0) {
    const std::size_t total = std::accumulate(counts.begin(), counts.end(), unlabeled);
    LabelRaster r(static_cast<std::uint32_t>(total), 1);
    std::size_t i = unlabeled;
    for (std::size_t c = 0; c < counts.size(); ++c)
        for (std::size_t k = 0; k < counts[c]; ++k) r.labels[i++] = static_cast<std::uint16_t>(c + 1);
    return r;
}

} // namespace

TEST(Evaluate, PerfectPrediction) {
    const std::vector<int> y{3, 1, 2, 2, 3, 3};
    const auto r = evaluate(y, y, 3);
    EXPECT_EQ(r.overall_accuracy, 1.0);
    EXPECT_EQ(r.average_accuracy, 1.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) {
                EXPECT_EQ(r.confusion[i][j], 0u);
            }
    EXPECT_EQ(r.confusion[2][2], 3u);
}

TEST(Evaluate, HandCountedTwoClassCase) {
    const auto r = evaluate({1, 1, 1, 2}, {1, 1, 2, 2}, 2);
    EXPECT_DOUBLE_EQ(r.overall_accuracy, 0.75);
    EXPECT_DOUBLE_EQ(r.per_class_accuracy[0], 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.per_class_accuracy[1], 1.0);
    EXPECT_DOUBLE_EQ(r.average_accuracy, 5.0 / 6.0);
    EXPECT_EQ(r.confusion[0][1], 1u);
    EXPECT_EQ(r.total, 4u);
}

TEST(Evaluate, AbsentClassExcludedFromAverage) {
    const auto r = evaluate({1, 1, 3}, {1, 2, 3}, 3);
    EXPECT_EQ(r.excluded_classes, (std::vector<int>{2}));
    EXPECT_TRUE(std::isnan(r.per_class_accuracy[1]));
    EXPECT_DOUBLE_EQ(r.average_accuracy, (0.5 + 1.0) / 2.0);
}

TEST(Evaluate, Errors) {
    EXPECT_EQ(code_of([] { evaluate({1, 2}, {1}, 2); }), ErrorCode::LengthMismatch);
    EXPECT_EQ(code_of([] { evaluate({1, 3}, {1, 1}, 2); }), ErrorCode::LabelOutOfRange);
    EXPECT_EQ(code_of([] { evaluate({1, 0}, {1, 1}, 2); }), ErrorCode::LabelOutOfRange);
    EXPECT_EQ(code_of([] { evaluate({}, {}, 2); }), ErrorCode::EmptyInput);
}

TEST(EvaluateProperty, InvariantsUnderPermutations) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(6));
        const std::size_t m = 20 + rng.below(80);
        std::vector<int> t(m), p(m);
        for (std::size_t i = 0; i < m; ++i) {
            t[i] = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            p[i] = rng.uniform() < 0.7 ? t[i] : 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        }
        const auto base = evaluate(t, p, n);
        std::size_t sum = 0;
        for (const auto& row : base.confusion) sum = std::accumulate(row.begin(), row.end(), sum);
        EXPECT_EQ(sum, m);

        // Shuffle pairs together.
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        std::vector<int> t2, p2;
        for (auto i : order) {
            t2.push_back(t[i]);
            p2.push_back(p[i]);
        }
        EXPECT_EQ(evaluate(t2, p2, n).overall_accuracy, base.overall_accuracy);

        // Relabel classes by a permutation pi.
        std::vector<int> pi(static_cast<std::size_t>(n));
        std::iota(pi.begin(), pi.end(), 1);
        rng.shuffle(pi);
        for (auto& v : t2) v = pi[static_cast<std::size_t>(v - 1)];
        for (auto& v : p2) v = pi[static_cast<std::size_t>(v - 1)];
        const auto rel = evaluate(t2, p2, n);
        EXPECT_DOUBLE_EQ(rel.overall_accuracy, base.overall_accuracy);
        EXPECT_NEAR(rel.average_accuracy, base.average_accuracy, 1e-15);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                EXPECT_EQ(rel.confusion[static_cast<std::size_t>(pi[a] - 1)][static_cast<std::size_t>(pi[b] - 1)],
                          base.confusion[a][b]);
    }
}

TEST(EvaluateProperty, BalancedSetGivesAaEqualOa) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3;
        std::vector<int> t, p;
        for (int c = 1; c <= n; ++c)
            for (int k = 0; k < 30; ++k) {
                t.push_back(c);
                p.push_back(rng.uniform() < 0.6 ? c : 1 + static_cast<int>(rng.below(3)));
            }
        const auto r = evaluate(t, p, n);
        EXPECT_NEAR(r.average_accuracy, r.overall_accuracy, 1e-12);
    }
}

TEST(WeakClasses, IndianPinesHistogram) {
    // Ground-truth pixel counts of the 16 Indian Pines classes.
    const auto r = raster_from_counts({46, 1428, 830, 237, 483, 730, 28, 478, 20, 972, 2455, 593, 205, 1265, 386, 93}, 500);
    EXPECT_EQ(weak_classes(r, 0.01), (std::vector<int>{1, 7, 9, 16}));
}

TEST(WeakClasses, UniformRasterHasNone) {
    EXPECT_TRUE(weak_classes(raster_from_counts({10, 10, 10, 10}), 0.01).empty());
}

TEST(WeakClasses, SinglePixelOfThousand) {
    EXPECT_EQ(weak_classes(raster_from_counts({999, 1}), 0.01), (std::vector<int>{2}));
    EXPECT_EQ(code_of([] { weak_classes(LabelRaster(1, 1), 0.0); }), ErrorCode::ConfigInvalid);
}

TEST(Export, JsonRoundTripAndCsv) {
    auto r = evaluate({1, 1, 1, 2}, {1, 1, 2, 2}, 3);
    r.method = "pca:2";
    r.class_names = {"Alfalfa", "Corn, notill", "Oats"};
    r.weak_class_ids = {3};
    const auto j = to_json(r);
    EXPECT_TRUE(j["classes"][2]["accuracy"].is_null());
    const auto back = report_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(to_json(back).dump(), j.dump());
    EXPECT_EQ(per_class_csv(r),
              "class_id,name,n_test,accuracy\n"
              "1,Alfalfa,3,0.666667\n"
              "2,\"Corn, notill\",1,1.000000\n"
              "3,Oats,0,\n");
}
