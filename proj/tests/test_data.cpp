#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "leafnet/data.hpp"

#ifndef LEAFNET_SOURCE_DIR
#error "LEAFNET_SOURCE_DIR must point at the repository root"
#endif

namespace leafnet {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("leafnet_data_" + std::string(info->test_suite_name()) + "_" + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

Tensor checker(std::size_t h, std::size_t w) {
    Tensor img(Shape{h, w, 3});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>((y * 31 + x * 17 + c * 70) % 256);
    return img;
}

// ---------------------------------------------------------------- classes

TEST(ClassTable, ThirtyEightClassesTwelveHealthy) {
    const auto& t = class_table();
    ASSERT_EQ(t.size(), 38u);
    std::size_t healthy = 0;
    std::set<std::string> plants;
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_EQ(t[i].class_index, i);
        healthy += t[i].healthy;
        EXPECT_EQ(t[i].healthy, t[i].condition == "Healthy");
        plants.insert(t[i].plant);
    }
    EXPECT_EQ(healthy, 12u);
    EXPECT_EQ(plants, (std::set<std::string>{"Apple", "Blueberry", "Cherry", "Corn", "Grape", "Orange", "Peach",
                                             "Bell Pepper", "Potato", "Raspberry", "Soybean", "Squash", "Strawberry",
                                             "Tomato"}));
}

TEST(ClassTable, DirectoryNamesAreSortedAndUnique) {
    const auto& t = class_table();
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LT(t[i - 1].directory_name, t[i].directory_name);
}

TEST(ClassTable, PerPlantCountsMatchDataDescription) {
    // Rows per plant in the published data description table.
    const std::map<std::string, std::size_t> expected = {
        {"Apple", 4},  {"Blueberry", 1}, {"Cherry", 2},  {"Corn", 4},    {"Grape", 4},
        {"Orange", 1}, {"Peach", 2},     {"Bell Pepper", 2}, {"Potato", 3}, {"Raspberry", 1},
        {"Soybean", 1}, {"Squash", 1},   {"Strawberry", 2}, {"Tomato", 10},
    };
    std::map<std::string, std::size_t> got;
    for (const auto& c : class_table()) ++got[c.plant];
    EXPECT_EQ(got, expected);
}

TEST(ClassTable, EmojiMapping) {
    EXPECT_EQ(plant_emoji_for("Tomato"), "🍅");
    EXPECT_EQ(plant_emoji_for("Apple"), "🍏");
    EXPECT_EQ(plant_emoji_for("Corn"), "🌽");
    EXPECT_EQ(plant_emoji_for("Squash"), "🌱");
    EXPECT_EQ(plant_emoji_for("Soybean"), "🌱");
    EXPECT_EQ(plant_emoji_for("Raspberry"), "🌱");
    for (const auto& c : class_table()) EXPECT_EQ(c.plant_emoji, plant_emoji_for(c.plant));
}

TEST(ClassTable, DirectoryLookupIgnoresCase) {
    EXPECT_EQ(find_class_by_directory("apple___apple_scab"), 0u);
    EXPECT_EQ(find_class_by_directory("TOMATO___HEALTHY"), 37u);
    EXPECT_FALSE(find_class_by_directory("Banana___healthy").has_value());
}

TEST(ClassTable, ShippedMetadataFileMatchesBuiltInTable) {
    const auto loaded = load_class_metadata(fs::path(LEAFNET_SOURCE_DIR) / "data" / "classes.json");
    EXPECT_EQ(loaded, class_table());
}

TEST_F(TempDir, ClassMetadataRoundTrip) {
    save_class_metadata(class_table(), dir_ / "c.json");
    EXPECT_EQ(load_class_metadata(dir_ / "c.json"), class_table());
}

// ---------------------------------------------------------------- image I/O

TEST_F(TempDir, PngRoundTripIsLossless) {
    const Tensor img = checker(7, 5);
    write_file_bytes(dir_ / "a.png", encode_png(img));
    EXPECT_EQ(decode_image_file(dir_ / "a.png"), img);
}

TEST(ImageIo, JpegDecodesToSameShape) {
    const Tensor img(Shape{16, 24, 3}, 128.0f);
    const Tensor back = decode_image(encode_jpeg(img, 95));
    EXPECT_EQ(back.shape(), img.shape());
    for (float v : back.data()) EXPECT_NEAR(v, 128.0f, 2.0f);
}

TEST(ImageIo, GarbageRejected) {
    const std::vector<std::uint8_t> one{0x42};
    EXPECT_THROW(decode_image(one), DecodeError);
    auto png = encode_png(checker(8, 8));
    png.resize(png.size() / 2);
    EXPECT_THROW(decode_image(png), DecodeError);
}

TEST(ImageIo, TruncatedJpegRejected) {
    auto jpeg = encode_jpeg(checker(32, 32));
    jpeg.resize(jpeg.size() / 2);
    EXPECT_THROW(decode_image(jpeg), DecodeError);
}

// ---------------------------------------------------------------- resize and normalize

TEST(Resize, SameSizeIsIdentity) {
    const Tensor img = checker(256, 256);
    EXPECT_EQ(resize_bilinear(img, 256, 256), img);
}

TEST(Resize, TwoByTwoUpscaleByHand) {
    // Corners a b / c d; output sample positions in source space are
    // -0.25 (clamped to 0), 0.25, 0.75, 1.25 (clamped to 1) on each axis.
    const float a = 0, b = 100, c = 40, d = 200;
    Tensor img(Shape{2, 2, 3});
    for (std::size_t ch = 0; ch < 3; ++ch) {
        img.at(0, 0, ch) = a;
        img.at(0, 1, ch) = b;
        img.at(1, 0, ch) = c;
        img.at(1, 1, ch) = d;
    }
    const double pos[4] = {0.0, 0.25, 0.75, 1.0};
    const Tensor out = resize_bilinear(img, 4, 4);
    for (std::size_t y = 0; y < 4; ++y) {
        for (std::size_t x = 0; x < 4; ++x) {
            const double fy = pos[y], fx = pos[x];
            const double expected = a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx;
            EXPECT_NEAR(out.at(y, x, 1), expected, 1e-4) << y << "," << x;
        }
    }
}

TEST_F(TempDir, DecodeResizeAlwaysGivesTargetShape) {
    write_file_bytes(dir_ / "big.png", encode_png(checker(384, 512)));
    EXPECT_EQ(decode_resize(dir_ / "big.png").shape(), (Shape{256, 256, 3}));
    write_file_bytes(dir_ / "same.png", encode_png(checker(256, 256)));
    EXPECT_EQ(decode_resize(dir_ / "same.png"), checker(256, 256));
}

TEST(Normalize, EndpointsAndMonotone) {
    const Tensor in(Shape{4}, std::vector<float>{0, 128, 255, 254});
    const Tensor out = normalize(in);
    EXPECT_EQ(out[0], 0.0f);
    EXPECT_EQ(out[2], 1.0f);
    EXPECT_NEAR(out[1], 128.0 / 255.0, 1e-7);
    EXPECT_NEAR(out[1], 0.50196, 1e-5);
    EXPECT_LT(out[3], out[2]);
}

// ---------------------------------------------------------------- validation

TEST(Validate, SolidColourRejected) {
    const auto v = validate_image_bytes(encode_png(Tensor(Shape{10, 10, 3}, 77.0f)));
    EXPECT_FALSE(v.accepted);
    EXPECT_EQ(v.reason, "zero variance");
}

TEST(Validate, TruncatedJpegRejected) {
    auto jpeg = encode_jpeg(checker(32, 32));
    jpeg.resize(jpeg.size() - 40);
    const auto v = validate_image_bytes(jpeg);
    EXPECT_FALSE(v.accepted);
    EXPECT_NE(v.reason.find("decode failure"), std::string::npos);
}

TEST(Validate, TexturedSyntheticLeafAccepted) {
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_TRUE(validate_image_bytes(encode_png(synthetic_image(c, 4, 0, 1, 64))).accepted);
    }
}

// ---------------------------------------------------------------- augmentation

TEST(Augment, IdentityConfigIsExactIdentity) {
    SeededRng rng(1);
    const Tensor img = normalize(checker(20, 20));
    EXPECT_EQ(augment(img, AugmentConfig::none(), rng), img);
    EXPECT_TRUE(AugmentConfig::none().is_identity());
}

TEST(Augment, FlipIsInvolution) {
    const Tensor img = normalize(checker(9, 6));
    AugmentConfig cfg = AugmentConfig::none();
    cfg.horizontal_flip_prob = 1.0;
    SeededRng rng(2);
    const Tensor once = augment(img, cfg, rng);
    EXPECT_NE(once, img);
    EXPECT_EQ(augment(once, cfg, rng), img);
    EXPECT_EQ(flip_vertical(flip_vertical(img)), img);
    EXPECT_EQ(once.at(0, 0, 0), img.at(0, 5, 0));
}

TEST(Augment, SeededOutputIsReproducibleAndInRange) {
    const Tensor img = normalize(checker(32, 32));
    SeededRng a(9), b(9);
    const Tensor x = augment(img, AugmentConfig{}, a);
    EXPECT_EQ(x, augment(img, AugmentConfig{}, b));
    EXPECT_EQ(x.shape(), img.shape());
    for (float v : x.data()) {
        ASSERT_GE(v, 0.0f);
        ASSERT_LE(v, 1.0f);
    }
}

TEST(Augment, QuarterTurnMovesCorners) {
    Tensor img(Shape{3, 3, 1});
    img.at(0, 0, 0) = 1.0f;
    const Tensor r = rotate(img, 90.0);
    float total = 0;
    for (float v : r.data()) total += v;
    EXPECT_NEAR(total, 1.0f, 1e-5);
    EXPECT_NEAR(r.at(0, 0, 0), 0.0f, 1e-5);
    // The marked corner lands on one of the adjacent corners.
    EXPECT_NEAR(r.at(0, 2, 0) + r.at(2, 0, 0), 1.0f, 1e-5);
}

TEST(Augment, ZoomInPicksCentre) {
    Tensor img(Shape{5, 5, 1});
    for (std::size_t i = 0; i < 25; ++i) img[i] = static_cast<float>(i);
    const Tensor z = zoom(img, 2.0);
    EXPECT_NEAR(z.at(2, 2, 0), 12.0f, 1e-5);
    EXPECT_NEAR(z.at(0, 0, 0), img.at(1, 1, 0), 1e-5);
}

TEST(Augment, InvalidConfigRejected) {
    SeededRng rng(1);
    const Tensor img(Shape{4, 4, 3});
    AugmentConfig c;
    c.horizontal_flip_prob = 1.5;
    EXPECT_THROW(augment(img, c, rng), ArgumentError);
    c = AugmentConfig{};
    c.zoom_min = 1.3;
    EXPECT_THROW(augment(img, c, rng), ArgumentError);
    c = AugmentConfig{};
    c.rotation_degrees_max = -1;
    EXPECT_THROW(augment(img, c, rng), ArgumentError);
}

// ---------------------------------------------------------------- split

std::vector<Sample> labelled(std::size_t n, std::size_t cls, const std::string& prefix = "s") {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({prefix + std::to_string(cls) + "_" + std::to_string(i), cls});
    return out;
}

TEST(Split, SeventyFiveTwentyFive) {
    const auto s = split(labelled(1000, 0), 0.75, 3);
    EXPECT_EQ(s.train.size(), 750u);
    EXPECT_EQ(s.val.size(), 250u);
}

TEST(Split, EightyTwentyOnAppleScabCount) {
    const auto s = split(labelled(2520, 0), 0.8, 3);
    EXPECT_EQ(s.train.size(), 2016u);
    EXPECT_EQ(s.val.size(), 504u);
}

TEST(Split, PartitionIsStratifiedAndDeterministic) {
    std::vector<Sample> all;
    const std::size_t sizes[] = {7, 13, 2, 40, 5};
    for (std::size_t c = 0; c < 5; ++c) {
        auto g = labelled(sizes[c], c);
        all.insert(all.end(), g.begin(), g.end());
    }
    const auto a = split(all, 0.75, 11), b = split(all, 0.75, 11);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
    std::set<std::string> seen;
    for (const auto& s : a.train) EXPECT_TRUE(seen.insert(s.path.string()).second);
    for (const auto& s : a.val) EXPECT_TRUE(seen.insert(s.path.string()).second);
    EXPECT_EQ(seen.size(), all.size());
    for (std::size_t c = 0; c < 5; ++c) {
        const auto tc = std::count_if(a.train.begin(), a.train.end(), [&](const Sample& s) { return s.class_index == c; });
        const double n = static_cast<double>(sizes[c]);
        EXPECT_LE(std::abs(static_cast<double>(tc) / n - 0.75), 1.0 / n) << "class " << c;
    }
    EXPECT_NE(split(all, 0.75, 12).train, a.train);
}

TEST(Split, SingletonClassGoesToTrainWithWarning) {
    auto all = labelled(10, 0);
    all.push_back({"lonely", 3});
    const auto s = split(all, 0.75, 1);
    ASSERT_EQ(s.warnings.size(), 1u);
    EXPECT_EQ(std::count_if(s.train.begin(), s.train.end(), [](const Sample& x) { return x.class_index == 3; }), 1);
}

TEST(Split, FractionOutOfRangeRejected) {
    EXPECT_THROW(split(labelled(4, 0), 1.0, 1), ArgumentError);
    EXPECT_THROW(split(labelled(4, 0), 0.0, 1), ArgumentError);
}

// ---------------------------------------------------------------- batching

TEST(Batches, SizesAndCoverage) {
    const auto samples = labelled(100, 0);
    const auto plan = batch_plan(samples, 32, 5);
    ASSERT_EQ(plan.size(), 4u);
    EXPECT_EQ(plan[0].size(), 32u);
    EXPECT_EQ(plan[3].size(), 4u);
    std::multiset<std::string> seen;
    for (const auto& b : plan)
        for (const auto& s : b) seen.insert(s.path.string());
    std::multiset<std::string> expected;
    for (const auto& s : samples) expected.insert(s.path.string());
    EXPECT_EQ(seen, expected);
    EXPECT_TRUE(batch_plan({}, 32, 1).empty());
    EXPECT_THROW(batch_plan(samples, 0, 1), ArgumentError);
}

TEST(Batches, DifferentSeedsReorderSameMultiset) {
    auto samples = labelled(50, 0);
    const auto a = batch_plan(samples, 50, 1), b = batch_plan(samples, 50, 2);
    EXPECT_NE(a[0], b[0]);
    auto sa = a[0], sb = b[0];
    auto by_path = [](const Sample& x, const Sample& y) { return x.path < y.path; };
    std::sort(sa.begin(), sa.end(), by_path);
    std::sort(sb.begin(), sb.end(), by_path);
    EXPECT_EQ(sa, sb);
}

TEST_F(TempDir, LoadedBatchesAreInUnitRange) {
    generate_synthetic_dataset({2, 5, 3, 32}, dir_);
    const auto m = scan_manifest(dir_);
    const auto bs = batches(m.samples, 4, 1, 32);
    ASSERT_EQ(bs.size(), 3u);
    std::multiset<std::size_t> labels;
    for (const auto& b : bs) {
        EXPECT_EQ(b.inputs.dim(0), b.labels.size());
        for (float v : b.inputs.data()) {
            ASSERT_GE(v, 0.0f);
            ASSERT_LE(v, 1.0f);
        }
        labels.insert(b.labels.begin(), b.labels.end());
    }
    EXPECT_EQ(labels.count(0), 5u);
    EXPECT_EQ(labels.count(1), 5u);
}

// ---------------------------------------------------------------- manifest and synthetic data

TEST_F(TempDir, ManifestOfSyntheticTree) {
    generate_synthetic_dataset({2, 3, 1, 16}, dir_);
    fs::create_directories(dir_ / "Not_a_class");
    fs::create_directories(dir_ / class_table()[5].directory_name);
    std::ofstream(dir_ / class_table()[0].directory_name / "notes.txt") << "hello";
    const auto m = scan_manifest(dir_);
    EXPECT_EQ(m.samples.size(), 6u);
    EXPECT_EQ(m.matched_classes, (std::vector<std::size_t>{0, 1, 5}));
    const auto counts = m.class_counts();
    EXPECT_EQ(counts[0], 3u);
    EXPECT_EQ(counts[1], 3u);
    EXPECT_EQ(counts[5], 0u);
    auto has = [&](const std::string& needle) {
        return std::any_of(m.warnings.begin(), m.warnings.end(),
                           [&](const std::string& w) { return w.find(needle) != std::string::npos; });
    };
    EXPECT_TRUE(has("Not_a_class"));
    EXPECT_TRUE(has("no images"));
    EXPECT_TRUE(has("notes.txt"));
}

TEST_F(TempDir, ManifestWithValidationSkipsBlankImages) {
    generate_synthetic_dataset({1, 2, 1, 16}, dir_);
    write_file_bytes(dir_ / class_table()[0].directory_name / "blank.png", encode_png(Tensor(Shape{8, 8, 3}, 9.0f)));
    EXPECT_EQ(scan_manifest(dir_).samples.size(), 3u);
    EXPECT_EQ(scan_manifest(dir_, {true}).samples.size(), 2u);
}

TEST_F(TempDir, ManifestErrors) {
    EXPECT_THROW(scan_manifest(dir_ / "missing"), IoError);
    fs::create_directories(dir_ / "random");
    EXPECT_THROW(scan_manifest(dir_), ManifestError);
}

TEST_F(TempDir, SyntheticCountsAndDeterminism) {
    const auto files = generate_synthetic_dataset({4, 8, 7, 32}, dir_ / "a");
    EXPECT_EQ(files.size(), 32u);
    std::size_t dirs = 0;
    for (const auto& e : fs::directory_iterator(dir_ / "a")) dirs += e.is_directory();
    EXPECT_EQ(dirs, 4u);
    generate_synthetic_dataset({4, 8, 7, 32}, dir_ / "b");
    for (const auto& f : files) {
        EXPECT_EQ(read_file_bytes(f), read_file_bytes(dir_ / "b" / fs::relative(f, dir_ / "a")));
    }
}

TEST(Synthetic, ClassMeanColoursAreSeparated) {
    const std::size_t n = 4;
    std::vector<std::array<double, 3>> means(n, {0, 0, 0});
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t i = 0; i < 8; ++i) {
            const Tensor img = normalize(synthetic_image(c, n, i, 7, 64));
            for (std::size_t p = 0; p < img.size(); ++p) means[c][p % 3] += img[p] / (img.size() / 3.0 * 8);
        }
    }
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            double d2 = 0;
            for (int ch = 0; ch < 3; ++ch) d2 += (means[a][ch] - means[b][ch]) * (means[a][ch] - means[b][ch]);
            EXPECT_GE(std::sqrt(d2), 0.2) << a << " vs " << b;
        }
    }
}

TEST(Synthetic, TooManyClassesRejected) {
    EXPECT_THROW(generate_synthetic_dataset({39, 1, 0, 8}, fs::temp_directory_path() / "leafnet_never"),
                 ArgumentError);
}

// Runs only when LEAFNET_DATASET points at a local copy of the public dataset.
TEST(Dataset, RealTreeMatchesClassTable) {
    const char* root = std::getenv("LEAFNET_DATASET");
    if (!root) GTEST_SKIP() << "LEAFNET_DATASET not set";
    const auto m = scan_manifest(root);
    EXPECT_FALSE(m.samples.empty());
    for (const auto& s : m.samples) ASSERT_LT(s.class_index, 38u);
}

}  // namespace
}  // namespace leafnet
