#pragma once

#include <functional>
#include <vector>

#include "segtrack/eval/metrics.hpp"

namespace segtrack {

struct ResetProtocolConfig {
    int skip_frames = 5;  // frames skipped after a failure before reinit
    int burn_in = 10;     // tracked frames after each init excluded from accuracy
};

// Per-sequence trace of a protocol run. overlaps[i] < 0 marks frames that
// were never tracked (init frames and reset gaps).
struct TrackRun {
    std::vector<double> overlaps;
    std::vector<int> init_frames;
    std::vector<int> failure_frames;

    int failure_count() const { return static_cast<int>(failure_frames.size()); }
};

// Reset-based evaluation: the tracker is (re)initialized from ground truth,
// a zero-overlap frame counts as a failure, and tracking resumes
// skip_frames later.
//   initialize(frame_index) sets the tracker up from ground truth
//   track(frame_index) returns the predicted region for that frame
TrackRun run_reset_protocol(const std::function<void(int)>& initialize,
                            const std::function<Region(int)>& track,
                            const std::vector<Region>& ground_truth,
                            const ResetProtocolConfig& config = {});

// Replays the reset accounting over a fixed per-frame overlap trace, as used
// by the offline CLI path.
TrackRun reset_accounting(const std::vector<double>& overlaps,
                          const ResetProtocolConfig& config = {});

// Mean overlap over successfully tracked frames, excluding the post-init
// burn-in window.
double protocol_accuracy(const TrackRun& run, const ResetProtocolConfig& config = {});

}  // namespace segtrack
