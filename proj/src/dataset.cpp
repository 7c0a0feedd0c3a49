#include "segtrack/harness/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "segtrack/core/image_io.hpp"

namespace fs = std::filesystem;

namespace segtrack {

namespace {

std::vector<double> parse_numbers(const std::string& line) {
    std::vector<double> out;
    std::string token;
    std::istringstream in(line);
    while (std::getline(in, token, ',')) {
        if (token.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        size_t pos = 0;
        out.push_back(std::stod(token, &pos));
    }
    return out;
}

std::vector<std::string> sorted_files(const fs::path& dir, const std::string& extension) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == extension)
            out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

RotatedBox parse_box_line(const std::string& line) {
    const std::vector<double> v = parse_numbers(line);
    if (v.size() == 4) {
        if (!(v[2] > 0) || !(v[3] > 0))
            throw std::invalid_argument("box line: non-positive size: " + line);
        return RotatedBox::make(v[0] + v[2] / 2, v[1] + v[3] / 2, v[2], v[3], 0.0);
    }
    if (v.size() == 8) {
        const Eigen::Vector2d p0(v[0], v[1]), p1(v[2], v[3]), p2(v[4], v[5]), p3(v[6], v[7]);
        const Eigen::Vector2d c = 0.25 * (p0 + p1 + p2 + p3);
        const double side_u = 0.5 * ((p1 - p0).norm() + (p2 - p3).norm());
        const double side_v = 0.5 * ((p2 - p1).norm() + (p3 - p0).norm());
        if (!(side_u > 0) || !(side_v > 0))
            throw std::invalid_argument("box line: degenerate polygon: " + line);
        const Eigen::Vector2d edge = (p1 - p0) + (p2 - p3);
        return RotatedBox::make(c.x(), c.y(), side_u, side_v, std::atan2(edge.y(), edge.x()));
    }
    throw std::invalid_argument("box line: expected 4 or 8 numbers, got " +
                                std::to_string(v.size()) + ": " + line);
}

std::string format_box_line(const RotatedBox& box) {
    const auto corners = box.corners();
    char buf[256];
    std::string out;
    for (int i = 0; i < 4; ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f", corners[static_cast<size_t>(i)].x(),
                      corners[static_cast<size_t>(i)].y());
        if (i) out += ',';
        out += buf;
    }
    return out;
}

std::vector<RotatedBox> read_box_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("box file not found: " + path);
    std::vector<RotatedBox> boxes;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        boxes.push_back(parse_box_line(line));
    }
    return boxes;
}

void write_box_file(const std::string& path, const std::vector<RotatedBox>& boxes) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write box file: " + path);
    for (const auto& b : boxes) out << format_box_line(b) << '\n';
}

SequenceData load_sequence(const std::string& sequence_dir) {
    const fs::path root(sequence_dir);
    if (!fs::is_directory(root)) throw std::runtime_error("sequence directory not found: " + sequence_dir);

    SequenceData seq;
    seq.name = root.filename().string();
    seq.frame_paths = sorted_files(root / "frames", ".png");
    if (seq.frame_paths.empty()) {
        // frames may also sit directly in the sequence directory
        seq.frame_paths = sorted_files(root, ".png");
    }
    if (seq.frame_paths.empty())
        throw std::runtime_error("sequence has no .png frames: " + sequence_dir);

    const fs::path gt_file = root / "groundtruth.txt";
    const fs::path mask_dir = root / "masks";
    if (fs::exists(gt_file)) {
        for (const auto& b : read_box_file(gt_file.string()))
            seq.ground_truth.push_back(Region::from_box(b));
    } else if (fs::is_directory(mask_dir)) {
        for (const auto& p : sorted_files(mask_dir, ".png"))
            seq.ground_truth.push_back(Region::from_mask(read_mask_png(p)));
    } else {
        throw std::runtime_error("sequence has no groundtruth.txt or masks/: " + sequence_dir);
    }

    if (seq.ground_truth.size() == 1 && seq.frame_paths.size() > 1) {
        seq.first_frame_only = true;
    } else if (seq.ground_truth.size() != seq.frame_paths.size()) {
        throw std::runtime_error("sequence " + seq.name + ": " +
                                 std::to_string(seq.frame_paths.size()) + " frames but " +
                                 std::to_string(seq.ground_truth.size()) + " ground-truth records");
    }
    return seq;
}

std::vector<std::string> list_sequences(const std::string& dataset_dir) {
    const fs::path root(dataset_dir);
    if (!fs::is_directory(root)) throw std::runtime_error("dataset directory not found: " + dataset_dir);
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(root)) {
        if (!e.is_directory()) continue;
        if (fs::exists(e.path() / "groundtruth.txt") || fs::is_directory(e.path() / "masks"))
            out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace segtrack
