#include "segtrack/eval/protocol.hpp"

namespace segtrack {

namespace {

TrackRun run_protocol_impl(const std::function<void(int)>& initialize,
                           const std::function<double(int)>& overlap_at, int n,
                           const ResetProtocolConfig& config) {
    TrackRun run;
    run.overlaps.assign(static_cast<size_t>(n), -1.0);
    int start = 0;
    while (start < n) {
        if (initialize) initialize(start);
        run.init_frames.push_back(start);
        int failed_at = -1;
        for (int i = start + 1; i < n; ++i) {
            const double o = overlap_at(i);
            run.overlaps[static_cast<size_t>(i)] = o;
            if (o == 0.0) {
                run.failure_frames.push_back(i);
                failed_at = i;
                break;
            }
        }
        if (failed_at < 0) break;
        start = failed_at + config.skip_frames;
    }
    return run;
}

}  // namespace

TrackRun run_reset_protocol(const std::function<void(int)>& initialize,
                            const std::function<Region(int)>& track,
                            const std::vector<Region>& ground_truth,
                            const ResetProtocolConfig& config) {
    const int n = static_cast<int>(ground_truth.size());
    return run_protocol_impl(
        initialize,
        [&](int i) { return region_overlap(track(i), ground_truth[static_cast<size_t>(i)]); }, n,
        config);
}

TrackRun reset_accounting(const std::vector<double>& overlaps, const ResetProtocolConfig& config) {
    return run_protocol_impl(
        nullptr, [&](int i) { return overlaps[static_cast<size_t>(i)]; },
        static_cast<int>(overlaps.size()), config);
}

double protocol_accuracy(const TrackRun& run, const ResetProtocolConfig& config) {
    double sum = 0;
    long count = 0;
    size_t init_idx = 0;
    int last_init = run.init_frames.empty() ? 0 : run.init_frames.front();
    for (int i = 0; i < static_cast<int>(run.overlaps.size()); ++i) {
        while (init_idx < run.init_frames.size() && run.init_frames[init_idx] <= i)
            last_init = run.init_frames[init_idx++];
        const double o = run.overlaps[static_cast<size_t>(i)];
        if (o < 0 || o == 0.0) continue;  // untracked or failure frame
        if (i - last_init <= config.burn_in) continue;
        sum += o;
        ++count;
    }
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace segtrack
