#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "segtrack/core/checkpoint.hpp"
#include "segtrack/features/features.hpp"
#include "segtrack/refine/refine.hpp"

namespace segtrack {

// All trainable parameters of the segmentation network: the feature
// adjustment layers and the refinement pathway.
struct NetworkWeights {
    FeatureAdjustLayers adjust;
    RefineNet<float> refine = RefineNet<float>::create(64, kBaseChannels);

    std::vector<std::pair<std::string, LayerParams<float>*>> layers() {
        std::vector<std::pair<std::string, LayerParams<float>*>> all = {
            {"adjust.reduce1x1", &adjust.reduce1x1}, {"adjust.match3x3", &adjust.match3x3}};
        for (auto& [name, p] : refine.layers()) all.emplace_back(name, p);
        return all;
    }

    void init(unsigned seed) {
        std::mt19937 rng(seed);
        for (auto& [name, p] : layers()) {
            (void)name;
            kaiming_init(*p, rng);
        }
    }

    void save(const std::string& path) {
        std::vector<CheckpointEntry> entries;
        for (auto& [name, p] : layers()) append_layer(entries, name, *p);
        write_checkpoint(path, entries);
    }

    void load(const std::string& path) {
        const auto entries = read_checkpoint(path);
        for (auto& [name, p] : layers()) load_layer(entries, name, *p);
    }
};

}  // namespace segtrack
