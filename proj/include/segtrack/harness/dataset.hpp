#pragma once

#include <string>
#include <vector>

#include "segtrack/eval/metrics.hpp"

namespace segtrack {

// One sequence on disk: image frames plus ground truth as box lines
// (groundtruth.txt, 4 or 8 comma-separated numbers per frame) or mask PNGs
// (masks/ directory, one per frame).
struct SequenceData {
    std::string name;
    std::vector<std::string> frame_paths;
    std::vector<Region> ground_truth;
    bool first_frame_only = false;  // single ground-truth record datasets
};

SequenceData load_sequence(const std::string& sequence_dir);

// Subdirectories of `dataset_dir` that look like sequences, sorted by name.
std::vector<std::string> list_sequences(const std::string& dataset_dir);

// Box serialization: one line of 8 comma-separated corner coordinates
// (x1,y1,...,x4,y4) at 6 decimals.
RotatedBox parse_box_line(const std::string& line);
std::string format_box_line(const RotatedBox& box);

std::vector<RotatedBox> read_box_file(const std::string& path);
void write_box_file(const std::string& path, const std::vector<RotatedBox>& boxes);

}  // namespace segtrack
