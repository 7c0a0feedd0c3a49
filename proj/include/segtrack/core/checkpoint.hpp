#pragma once

#include <string>
#include <vector>

#include "segtrack/core/tensor.hpp"
#include "segtrack/nn/layers.hpp"

namespace segtrack {

// Versioned binary parameter file. Layout (little endian):
//   8 bytes  magic "SGTKWTS1"
//   u32      format version (1)
//   u32      entry count
//   entries: u32 name length, name bytes, u32 ndims, u32 dims[ndims],
//            float32 data[prod(dims)]
struct CheckpointEntry {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

inline constexpr char kCheckpointMagic[8] = {'S', 'G', 'T', 'K', 'W', 'T', 'S', '1'};
inline constexpr uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::string& path);

template <typename Scalar>
CheckpointEntry to_entry(const std::string& name, const Tensor<Scalar>& t) {
    CheckpointEntry e;
    e.name = name;
    e.shape = t.shape();
    e.data.resize(static_cast<size_t>(t.size()));
    for (Eigen::Index i = 0; i < t.size(); ++i) e.data[static_cast<size_t>(i)] = static_cast<float>(t[i]);
    return e;
}

template <typename Scalar>
Tensor<Scalar> from_entry(const CheckpointEntry& e) {
    Tensor<Scalar> t(e.shape);
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(e.data[static_cast<size_t>(i)]);
    return t;
}

template <typename Scalar>
void append_layer(std::vector<CheckpointEntry>& entries, const std::string& name,
                  const LayerParams<Scalar>& p) {
    entries.push_back(to_entry(name + ".weights", p.weights));
    entries.push_back(to_entry(name + ".bias", p.bias));
}

template <typename Scalar>
void load_layer(const std::vector<CheckpointEntry>& entries, const std::string& name,
                LayerParams<Scalar>& p) {
    bool got_w = false, got_b = false;
    for (const auto& e : entries) {
        if (e.name == name + ".weights") {
            if (e.shape != p.weights.shape())
                throw std::runtime_error("checkpoint: shape mismatch for " + e.name);
            p.weights = from_entry<Scalar>(e);
            got_w = true;
        } else if (e.name == name + ".bias") {
            if (e.shape != p.bias.shape())
                throw std::runtime_error("checkpoint: shape mismatch for " + e.name);
            p.bias = from_entry<Scalar>(e);
            got_b = true;
        }
    }
    if (!got_w || !got_b) throw std::runtime_error("checkpoint: missing layer " + name);
}

}  // namespace segtrack
