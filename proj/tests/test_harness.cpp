#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "segtrack/core/checkpoint.hpp"
#include "segtrack/core/image_io.hpp"
#include "segtrack/harness/config.hpp"
#include "segtrack/harness/dataset.hpp"

using namespace segtrack;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("config parses keys, comments and whitespace") {
    const KeyValueConfig cfg = KeyValueConfig::from_string(
        "# a comment\n"
        "\n"
        "alpha = 0.25 \n"
        "  steps=200\n"
        "name = hello world\n"
        "flag = yes\n");
    CHECK(cfg.get_double("alpha", -1) == doctest::Approx(0.25));
    CHECK(cfg.get_int("steps", -1) == 200);
    CHECK(cfg.get_string("name", "") == "hello world");
    CHECK(cfg.get_bool("flag", false));
    CHECK(cfg.get_int("missing", 42) == 42);
    CHECK(!cfg.has("missing"));
}

TEST_CASE("config rejects malformed input") {
    CHECK_THROWS_AS(KeyValueConfig::from_string("no equals sign\n"), std::invalid_argument);
    CHECK_THROWS_AS(KeyValueConfig::from_string("= value\n"), std::invalid_argument);
    const KeyValueConfig cfg = KeyValueConfig::from_string("n = abc\nb = maybe\nd = 1.5x\n");
    CHECK_THROWS_AS(cfg.get_int("n", 0), std::invalid_argument);
    CHECK_THROWS_AS(cfg.get_bool("b", false), std::invalid_argument);
    CHECK_THROWS_AS(cfg.get_double("d", 0), std::invalid_argument);
    CHECK_THROWS_AS(KeyValueConfig::from_file("/nonexistent/config.cfg"), std::runtime_error);
}

TEST_CASE("config set overrides parsed values") {
    KeyValueConfig cfg = KeyValueConfig::from_string("k = 1\n");
    cfg.set("k", "2");
    CHECK(cfg.get_int("k", 0) == 2);
}

TEST_CASE("boolean spellings") {
    const KeyValueConfig cfg =
        KeyValueConfig::from_string("a=1\nb=true\nc=on\nd=0\ne=false\nf=off\ng=no\n");
    CHECK(cfg.get_bool("a", false));
    CHECK(cfg.get_bool("b", false));
    CHECK(cfg.get_bool("c", false));
    CHECK(!cfg.get_bool("d", true));
    CHECK(!cfg.get_bool("e", true));
    CHECK(!cfg.get_bool("f", true));
    CHECK(!cfg.get_bool("g", true));
}

TEST_CASE("box lines round-trip through formatting") {
    const RotatedBox box = RotatedBox::make(120.25, 80.5, 60.0, 30.0, 0.7);
    const RotatedBox parsed = parse_box_line(format_box_line(box));
    CHECK(parsed.cx == doctest::Approx(box.cx).epsilon(1e-5));
    CHECK(parsed.cy == doctest::Approx(box.cy).epsilon(1e-5));
    CHECK(parsed.s_major == doctest::Approx(box.s_major).epsilon(1e-5));
    CHECK(parsed.s_minor == doctest::Approx(box.s_minor).epsilon(1e-5));
    CHECK(parsed.angle == doctest::Approx(box.angle).epsilon(1e-4));
}

TEST_CASE("four-number lines are axis-aligned x,y,w,h boxes") {
    const RotatedBox b = parse_box_line("10,20,40,30");
    CHECK(b.cx == doctest::Approx(30.0));
    CHECK(b.cy == doctest::Approx(35.0));
    CHECK(b.area() == doctest::Approx(1200.0));
    CHECK_THROWS_AS(parse_box_line("10,20,0,30"), std::invalid_argument);
    CHECK_THROWS_AS(parse_box_line("1,2,3"), std::invalid_argument);
    CHECK_THROWS_AS(parse_box_line("1,2,3,4,5,6,7"), std::invalid_argument);
}

TEST_CASE("box files round-trip on disk") {
    TempDir dir("segtrack_test_boxfile");
    const std::vector<RotatedBox> boxes = {RotatedBox::make(10, 20, 8, 4, 0.3),
                                           RotatedBox::make(55.5, 44.25, 12, 12, 1.2)};
    const std::string path = (dir.path / "boxes.txt").string();
    write_box_file(path, boxes);
    const std::vector<RotatedBox> back = read_box_file(path);
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(back[i].cx == doctest::Approx(boxes[i].cx).epsilon(1e-5));
        CHECK(back[i].area() == doctest::Approx(boxes[i].area()).epsilon(1e-4));
    }
    CHECK_THROWS_AS(read_box_file((dir.path / "missing.txt").string()), std::runtime_error);
}

TEST_CASE("png image round-trip") {
    TempDir dir("segtrack_test_png");
    std::mt19937 rng(3);
    Tensor<float> img({3, 17, 23});
    std::uniform_int_distribution<int> level(0, 255);
    for (Eigen::Index i = 0; i < img.size(); ++i) img[i] = level(rng) / 255.0f;
    const std::string path = (dir.path / "img.png").string();
    write_image_png(path, img);
    const Tensor<float> back = read_image_png(path);
    REQUIRE(back.shape() == img.shape());
    // 8-bit quantization is exact when values sit on the grid
    CHECK((back.vec() - img.vec()).cwiseAbs().maxCoeff() < 1e-6f);
    CHECK_THROWS_AS(read_image_png((dir.path / "missing.png").string()), std::runtime_error);
}

TEST_CASE("png mask round-trip") {
    TempDir dir("segtrack_test_mask");
    Mask m(11, 14);
    m.setZero();
    for (int y = 3; y < 8; ++y)
        for (int x = 2; x < 12; ++x) m(y, x) = 1;
    const std::string path = (dir.path / "mask.png").string();
    write_mask_png(path, m);
    const Mask back = read_mask_png(path);
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    CHECK((back.array() == m.array()).all());
}

TEST_CASE("checkpoints restore layer parameters exactly") {
    TempDir dir("segtrack_test_ckpt");
    std::mt19937 rng(5);
    LayerParams<float> layer = LayerParams<float>::conv(4, 3, 3);
    kaiming_init(layer, rng);
    testutil::fill_uniform(layer.bias, rng, -1.0, 1.0);

    std::vector<CheckpointEntry> entries;
    append_layer(entries, "layer", layer);
    const std::string path = (dir.path / "w.bin").string();
    write_checkpoint(path, entries);

    const auto back = read_checkpoint(path);
    LayerParams<float> restored = LayerParams<float>::conv(4, 3, 3);
    load_layer(back, "layer", restored);
    CHECK(restored.weights.vec() == layer.weights.vec());
    CHECK(restored.bias.vec() == layer.bias.vec());

    LayerParams<float> wrong_shape = LayerParams<float>::conv(4, 3, 5);
    CHECK_THROWS_AS(load_layer(back, "layer", wrong_shape), std::runtime_error);
    LayerParams<float> other = LayerParams<float>::conv(4, 3, 3);
    CHECK_THROWS_AS(load_layer(back, "absent", other), std::runtime_error);
}

TEST_CASE("corrupt checkpoints are rejected") {
    TempDir dir("segtrack_test_ckpt_bad");
    const std::string path = (dir.path / "w.bin").string();
    write_text(path, "BADMAGIC this is not a checkpoint");
    CHECK_THROWS_AS(read_checkpoint(path), std::runtime_error);
    CHECK_THROWS_AS(read_checkpoint((dir.path / "missing.bin").string()), std::runtime_error);

    // truncate a valid file
    std::vector<CheckpointEntry> entries{to_entry("t", Tensor<float>({2, 2}))};
    write_checkpoint(path, entries);
    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 4);
    CHECK_THROWS_AS(read_checkpoint(path), std::runtime_error);
}

TEST_CASE("sequences load from a frames directory with box ground truth") {
    TempDir dir("segtrack_test_seq");
    const fs::path seq = dir.path / "ball";
    fs::create_directories(seq / "frames");
    Tensor<float> img({3, 8, 8});
    img.set_zero();
    for (int i = 0; i < 3; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%04d.png", i);
        write_image_png((seq / "frames" / name).string(), img);
    }
    write_text(seq / "groundtruth.txt", "1,1,4,4\n1,2,4,4\n2,2,4,4\n");

    const SequenceData data = load_sequence(seq.string());
    CHECK(data.name == "ball");
    REQUIRE(data.frame_paths.size() == 3);
    CHECK(data.frame_paths[0] < data.frame_paths[1]);  // sorted
    REQUIRE(data.ground_truth.size() == 3);
    CHECK(data.ground_truth[0].box.has_value());
    CHECK(!data.first_frame_only);
    CHECK(data.ground_truth[1].box->cy == doctest::Approx(4.0));
}

TEST_CASE("single ground-truth record marks first-frame-only sequences") {
    TempDir dir("segtrack_test_seq_ffo");
    const fs::path seq = dir.path / "car";
    fs::create_directories(seq);
    Tensor<float> img({3, 8, 8});
    img.set_zero();
    // frames directly in the sequence directory
    write_image_png((seq / "a.png").string(), img);
    write_image_png((seq / "b.png").string(), img);
    write_text(seq / "groundtruth.txt", "1,1,4,4\n");
    const SequenceData data = load_sequence(seq.string());
    CHECK(data.first_frame_only);
    CHECK(data.frame_paths.size() == 2);
    CHECK(data.ground_truth.size() == 1);
}

TEST_CASE("mask ground truth is loaded from a masks directory") {
    TempDir dir("segtrack_test_seq_masks");
    const fs::path seq = dir.path / "fish";
    fs::create_directories(seq / "frames");
    fs::create_directories(seq / "masks");
    Tensor<float> img({3, 8, 8});
    img.set_zero();
    Mask m(8, 8);
    m.setZero();
    m(4, 4) = 1;
    for (int i = 0; i < 2; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%04d.png", i);
        write_image_png((seq / "frames" / name).string(), img);
        write_mask_png((seq / "masks" / name).string(), m);
    }
    const SequenceData data = load_sequence(seq.string());
    REQUIRE(data.ground_truth.size() == 2);
    CHECK(data.ground_truth[0].mask.has_value());
    CHECK(foreground_count(*data.ground_truth[0].mask) == 1);
}

TEST_CASE("sequence loading errors are explicit") {
    TempDir dir("segtrack_test_seq_err");
    CHECK_THROWS_AS(load_sequence((dir.path / "nope").string()), std::runtime_error);

    const fs::path no_frames = dir.path / "empty";
    fs::create_directories(no_frames);
    write_text(no_frames / "groundtruth.txt", "1,1,4,4\n");
    CHECK_THROWS_AS(load_sequence(no_frames.string()), std::runtime_error);

    const fs::path no_gt = dir.path / "nogt";
    fs::create_directories(no_gt);
    Tensor<float> img({3, 8, 8});
    img.set_zero();
    write_image_png((no_gt / "a.png").string(), img);
    CHECK_THROWS_AS(load_sequence(no_gt.string()), std::runtime_error);

    const fs::path mismatch = dir.path / "mismatch";
    fs::create_directories(mismatch);
    write_image_png((mismatch / "a.png").string(), img);
    write_image_png((mismatch / "b.png").string(), img);
    write_image_png((mismatch / "c.png").string(), img);
    write_text(mismatch / "groundtruth.txt", "1,1,4,4\n1,1,4,4\n");
    CHECK_THROWS_AS(load_sequence(mismatch.string()), std::runtime_error);
}

TEST_CASE("dataset listing finds sequence directories sorted by name") {
    TempDir dir("segtrack_test_dataset");
    for (const std::string name : {"zebra", "ant"}) {
        const fs::path seq = dir.path / name;
        fs::create_directories(seq);
        write_text(seq / "groundtruth.txt", "1,1,4,4\n");
    }
    fs::create_directories(dir.path / "not_a_sequence");
    write_text(dir.path / "stray.txt", "x");

    const std::vector<std::string> seqs = list_sequences(dir.path.string());
    REQUIRE(seqs.size() == 2);
    CHECK(fs::path(seqs[0]).filename() == "ant");
    CHECK(fs::path(seqs[1]).filename() == "zebra");
    CHECK_THROWS_AS(list_sequences((dir.path / "missing").string()), std::runtime_error);
}
