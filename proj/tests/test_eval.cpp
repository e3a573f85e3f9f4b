#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "leafnet/classes.hpp"
#include "leafnet/eval.hpp"
#include "leafnet/image.hpp"
#include "leafnet/tensor.hpp"

namespace leafnet {
namespace {

namespace fs = std::filesystem;

TEST(Confusion, CountsPairs) {
    const std::vector<std::size_t> t = {0, 0, 1}, p = {0, 1, 1};
    const auto cm = confusion(t, p, 2);
    EXPECT_EQ(cm.at(0, 0), 1u);
    EXPECT_EQ(cm.at(0, 1), 1u);
    EXPECT_EQ(cm.at(1, 0), 0u);
    EXPECT_EQ(cm.at(1, 1), 1u);
    EXPECT_EQ(cm.total(), 3u);
}

TEST(Confusion, PerfectPredictionsAreDiagonal) {
    std::vector<std::size_t> labels(100);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % kClassCount;
    const auto cm = confusion(labels, labels, kClassCount);
    EXPECT_EQ(cm.trace(), 100u);
    EXPECT_EQ(cm.total(), 100u);
}

TEST(Confusion, EmptyAndInvalidInputs) {
    const auto cm = confusion({}, {}, 3);
    EXPECT_EQ(cm.total(), 0u);
    EXPECT_EQ(cm.classes(), 3u);
    const std::vector<std::size_t> a = {0, 3}, b = {0, 1}, c = {0};
    EXPECT_THROW(confusion(a, b, 3), ArgumentError);
    EXPECT_THROW(confusion(b, a, 3), ArgumentError);
    EXPECT_THROW(confusion(b, c, 3), ArgumentError);
}

TEST(Metrics, TwoClassHandComputed) {
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 8;
    cm.at(0, 1) = 2;
    cm.at(1, 0) = 1;
    cm.at(1, 1) = 9;
    const auto r = compute_metrics(cm);
    EXPECT_DOUBLE_EQ(r.accuracy, 0.85);
    EXPECT_DOUBLE_EQ(r.per_class[0].precision, 8.0 / 9.0);
    EXPECT_DOUBLE_EQ(r.per_class[0].recall, 0.8);
    EXPECT_DOUBLE_EQ(r.per_class[1].precision, 9.0 / 11.0);
    EXPECT_DOUBLE_EQ(r.per_class[1].recall, 0.9);
    const double f0 = 2 * (8.0 / 9.0) * 0.8 / (8.0 / 9.0 + 0.8);
    const double f1 = 2 * (9.0 / 11.0) * 0.9 / (9.0 / 11.0 + 0.9);
    EXPECT_NEAR(r.macro_precision, (8.0 / 9.0 + 9.0 / 11.0) / 2, 1e-15);
    EXPECT_NEAR(r.macro_recall, 0.85, 1e-15);
    EXPECT_NEAR(r.macro_f1, (f0 + f1) / 2, 1e-15);
    EXPECT_EQ(r.per_class[0].support, 10u);
    EXPECT_FALSE(r.per_class[0].flagged);
}

TEST(Metrics, PerfectAndSingleClass) {
    std::vector<std::size_t> labels = {0, 1, 2, 2, 1};
    const auto r = compute_metrics(confusion(labels, labels, 3));
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.macro_precision, 1.0);
    EXPECT_EQ(r.macro_recall, 1.0);
    EXPECT_EQ(r.macro_f1, 1.0);

    ConfusionMatrix one(1);
    one.at(0, 0) = 4;
    const auto s = compute_metrics(one);
    EXPECT_EQ(s.accuracy, 1.0);
    EXPECT_EQ(s.macro_f1, 1.0);
}

TEST(Metrics, ZeroDenominatorsScoreZeroAndAreFlagged) {
    // Class 1 is never predicted; class 2 is predicted but never true; class 3
    // never occurs at all and stays out of the macro mean.
    const std::vector<std::size_t> t = {0, 0, 1, 1}, p = {0, 2, 0, 0};
    const auto r = compute_metrics(confusion(t, p, 4));
    EXPECT_TRUE(r.per_class[1].flagged);
    EXPECT_EQ(r.per_class[1].precision, 0.0);
    EXPECT_TRUE(r.per_class[2].flagged);
    EXPECT_EQ(r.per_class[2].recall, 0.0);
    EXPECT_EQ(r.absent_classes, 1u);
    EXPECT_DOUBLE_EQ(r.macro_recall, (0.5 + 0.0 + 0.0) / 3);
    EXPECT_DOUBLE_EQ(r.macro_precision, (1.0 / 3.0) / 3);
}

TEST(Metrics, EmptyMatrixThrows) {
    EXPECT_THROW(compute_metrics(ConfusionMatrix(38)), ArgumentError);
    EXPECT_THROW(compute_metrics(ConfusionMatrix(0)), ArgumentError);
}

struct Oracle {
    double accuracy, macro_p, macro_r, macro_f1;
    std::vector<double> p, r, f;
};

// Recounts TP/FP/FN straight from the label lists.
Oracle brute_force(const std::vector<std::size_t>& t, const std::vector<std::size_t>& pr, std::size_t k) {
    Oracle o{0, 0, 0, 0, std::vector<double>(k), std::vector<double>(k), std::vector<double>(k)};
    std::size_t correct = 0, present = 0;
    for (std::size_t i = 0; i < t.size(); ++i) correct += t[i] == pr[i];
    o.accuracy = static_cast<double>(correct) / static_cast<double>(t.size());
    for (std::size_t c = 0; c < k; ++c) {
        std::uint64_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            tp += t[i] == c && pr[i] == c;
            fp += t[i] != c && pr[i] == c;
            fn += t[i] == c && pr[i] != c;
        }
        if (tp + fp + fn == 0) continue;
        ++present;
        o.p[c] = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        o.r[c] = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        o.f[c] = o.p[c] + o.r[c] > 0 ? 2 * o.p[c] * o.r[c] / (o.p[c] + o.r[c]) : 0.0;
        o.macro_p += o.p[c];
        o.macro_r += o.r[c];
        o.macro_f1 += o.f[c];
    }
    o.macro_p /= static_cast<double>(present);
    o.macro_r /= static_cast<double>(present);
    o.macro_f1 /= static_cast<double>(present);
    return o;
}

TEST(Metrics, AgreesExactlyWithBruteForceOracle) {
    SeededRng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + rng.index(kClassCount - 1);
        const std::size_t n = 1 + rng.index(200);
        std::vector<std::size_t> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng.index(k);
            p[i] = rng.bernoulli(0.6) ? t[i] : rng.index(k);
        }
        const auto r = compute_metrics(confusion(t, p, k));
        const auto o = brute_force(t, p, k);
        ASSERT_EQ(r.accuracy, o.accuracy) << trial;
        ASSERT_EQ(r.macro_precision, o.macro_p) << trial;
        ASSERT_EQ(r.macro_recall, o.macro_r) << trial;
        ASSERT_EQ(r.macro_f1, o.macro_f1) << trial;
        for (std::size_t c = 0; c < k; ++c) {
            ASSERT_EQ(r.per_class[c].precision, o.p[c]) << trial << " class " << c;
            ASSERT_EQ(r.per_class[c].recall, o.r[c]) << trial << " class " << c;
            ASSERT_EQ(r.per_class[c].f1, o.f[c]) << trial << " class " << c;
        }
    }
}

TEST(Metrics, PermutingClassesPermutesPerClassEntries) {
    SeededRng rng(5);
    const std::size_t k = 7, n = 300;
    std::vector<std::size_t> t(n), p(n), perm(k);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = rng.index(k);
        p[i] = rng.bernoulli(0.5) ? t[i] : rng.index(k);
    }
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<std::size_t> tp(n), pp(n);
    for (std::size_t i = 0; i < n; ++i) {
        tp[i] = perm[t[i]];
        pp[i] = perm[p[i]];
    }
    const auto a = compute_metrics(confusion(t, p, k));
    const auto b = compute_metrics(confusion(tp, pp, k));
    EXPECT_NEAR(a.accuracy, b.accuracy, 1e-9);
    EXPECT_NEAR(a.macro_precision, b.macro_precision, 1e-9);
    EXPECT_NEAR(a.macro_recall, b.macro_recall, 1e-9);
    EXPECT_NEAR(a.macro_f1, b.macro_f1, 1e-9);
    for (std::size_t c = 0; c < k; ++c) {
        EXPECT_EQ(a.per_class[c].precision, b.per_class[perm[c]].precision);
        EXPECT_EQ(a.per_class[c].support, b.per_class[perm[c]].support);
    }
}

TEST(Metrics, MicroPrecisionEqualsAccuracy) {
    SeededRng rng(8);
    std::vector<std::size_t> t(500), p(500);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.index(kClassCount);
        p[i] = rng.bernoulli(0.7) ? t[i] : rng.index(kClassCount);
    }
    const auto cm = confusion(t, p, kClassCount);
    std::uint64_t tp = 0, predicted = 0;
    for (std::size_t c = 0; c < kClassCount; ++c) {
        tp += cm.at(c, c);
        predicted += cm.col_sum(c);
    }
    EXPECT_EQ(static_cast<double>(tp) / static_cast<double>(predicted), compute_metrics(cm).accuracy);
}

TEST(Report, PercentFormatMatchesTableStyle) {
    EXPECT_EQ(format_percent(0.9817), "98.17 %");
    EXPECT_EQ(format_percent(0.98136), "98.14 %");
    EXPECT_EQ(format_percent(1.0), "100.00 %");
    EXPECT_EQ(format_percent(0.0), "0.00 %");
}

TEST(Report, TableAndJson) {
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 8;
    cm.at(0, 1) = 2;
    cm.at(1, 0) = 1;
    cm.at(1, 1) = 9;
    const auto r = compute_metrics(cm);
    const std::vector<std::string> names = {"Tomato / Healthy", "Tomato / Late Blight"};
    const std::string table = format_report(r, names);
    EXPECT_NE(table.find("Tomato / Late Blight"), std::string::npos);
    EXPECT_NE(table.find("Accuracy: 85.00 %"), std::string::npos);
    EXPECT_NE(table.find("88.89 %"), std::string::npos);
    const auto j = report_to_json(r, names);
    EXPECT_DOUBLE_EQ(j["accuracy"].get<double>(), 0.85);
    ASSERT_EQ(j["per_class"].size(), 2u);
    EXPECT_EQ(j["per_class"][1]["name"], "Tomato / Late Blight");
    EXPECT_EQ(j["per_class"][0]["support"], 10);
}

TEST(ConfusionCsv, RoundTripAndNameAddressing) {
    const auto names = default_class_names();
    ASSERT_EQ(names.size(), kClassCount);
    SeededRng rng(3);
    std::vector<std::size_t> t(400), p(400);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.index(kClassCount);
        p[i] = rng.index(kClassCount);
    }
    auto cm = confusion(t, p, kClassCount);
    const auto late = find_class_by_directory("Tomato___Late_blight");
    const auto early = find_class_by_directory("Tomato___Early_blight");
    ASSERT_TRUE(late && early);
    cm.at(*late, *early) = 77;

    const fs::path path = fs::temp_directory_path() / "leafnet_confusion.csv";
    export_confusion_csv(cm, names, path);
    std::ifstream in(path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    fs::remove(path);
    const auto parsed = parse_confusion_csv(text);
    EXPECT_EQ(parsed.matrix, cm);
    EXPECT_EQ(parsed.class_names, names);
    EXPECT_EQ(parsed.at("Tomato / Late Blight", "Tomato / Early Blight"), 77u);
    EXPECT_THROW(parsed.at("Tomato / Sunburn", "Tomato / Early Blight"), ArgumentError);
}

TEST(ConfusionCsv, ZeroMatrixAndQuoting) {
    const std::vector<std::string> names = {"a, with comma", "b \"quoted\""};
    const std::string text = format_confusion_csv(ConfusionMatrix(2), names);
    EXPECT_EQ(text, "true\\predicted,\"a, with comma\",\"b \"\"quoted\"\"\"\n\"a, with comma\",0,0\n"
                    "\"b \"\"quoted\"\"\",0,0\n");
    const auto parsed = parse_confusion_csv(text);
    EXPECT_EQ(parsed.class_names, names);
    EXPECT_EQ(parsed.matrix.total(), 0u);
}

TEST(ConfusionCsv, RejectsMalformed) {
    EXPECT_THROW(format_confusion_csv(ConfusionMatrix(2), {"only one"}), ArgumentError);
    EXPECT_THROW(parse_confusion_csv(""), ArgumentError);
    EXPECT_THROW(parse_confusion_csv("x,a,b\na,1,2\n"), ArgumentError);
    EXPECT_THROW(parse_confusion_csv("x,a,b\na,1,2\nb,3,-4\n"), ArgumentError);
    EXPECT_THROW(parse_confusion_csv("x,a,b\nb,1,2\na,3,4\n"), ArgumentError);
    const fs::path unwritable = "/nonexistent/dir/c.csv";
    EXPECT_THROW(export_confusion_csv(ConfusionMatrix(1), {"a"}, unwritable), IoError);
}

}  // namespace
}  // namespace leafnet
