#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "acceptance.hpp"
#include "segtrack/core/image_io.hpp"
#include "segtrack/eval/protocol.hpp"
#include "segtrack/harness/dataset.hpp"

using namespace segtrack;
namespace fs = std::filesystem;

namespace {

bool check_reset_hand_values() {
    // failure at frame 3, reinit two frames later, one-frame burn-in
    ResetProtocolConfig cfg;
    cfg.skip_frames = 2;
    cfg.burn_in = 1;
    const std::vector<double> overlaps{0.9, 0.8, 0.7, 0.0, 0.9, 0.9, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
    const TrackRun run = reset_accounting(overlaps, cfg);
    if (run.failure_frames != std::vector<int>{3}) return false;
    if (run.init_frames != std::vector<int>{0, 5}) return false;
    const double expect = (0.7 + 0.5 + 0.4 + 0.3 + 0.2 + 0.1) / 6.0;
    return protocol_accuracy(run, cfg) == expect;
}

bool check_default_protocol_hand_values() {
    // default skip 5 / burn-in 10: only frames 11 and 28..29 survive the burn-in
    std::vector<double> overlaps(30, 0.5);
    overlaps[12] = 0.0;
    for (int i = 18; i < 30; ++i) overlaps[i] = 0.8;
    const TrackRun run = reset_accounting(overlaps, {});
    if (run.failure_frames != std::vector<int>{12}) return false;
    if (run.init_frames != std::vector<int>{0, 17}) return false;
    return protocol_accuracy(run, {}) == (0.5 + 0.8 + 0.8) / 3.0;
}

bool check_no_reset_hand_values() {
    const NoResetSummary s = average_overlap_sr({0.2, 0.6, 0.8, 1.0}, {5.0, 25.0, 10.0, 40.0});
    return s.average_overlap == (0.2 + 0.6 + 0.8 + 1.0) / 4.0 && s.sr_050 == 0.75 &&
           s.sr_075 == 0.5 && s.precision_20px == 0.5;
}

bool check_davis_hand_values() {
    Mask sq(100, 100), shifted(100, 100);
    sq.setZero();
    shifted.setZero();
    for (int y = 40; y < 60; ++y)
        for (int x = 40; x < 60; ++x) {
            sq(y, x) = 1;
            shifted(y, x + 1) = 1;
        }
    const DavisSummary s = davis_measures({shifted}, {sq});
    // one-pixel shift stays inside the 0.008 * diagonal boundary tolerance
    return s.j_mean == 380.0 / 420.0 && s.f_mean == 1.0;
}

// deterministic miniature dataset + predictions exercised through the CLI
void build_golden_inputs(const fs::path& root) {
    const Tensor<float> blank({3, 8, 8});
    const auto make_seq = [&](const std::string& name, int frames, const std::string& gt_line) {
        const fs::path seq = root / "dataset" / name;
        fs::create_directories(seq / "frames");
        for (int i = 0; i < frames; ++i) {
            char fname[32];
            std::snprintf(fname, sizeof(fname), "%04d.png", i);
            write_image_png((seq / "frames" / fname).string(), blank);
        }
        std::ofstream gt(seq / "groundtruth.txt");
        for (int i = 0; i < frames; ++i) gt << gt_line << "\n";
    };
    make_seq("alpha", 5, "1,1,4,4");
    make_seq("beta", 4, "2,2,6,6");

    fs::create_directories(root / "predictions");
    write_box_file((root / "predictions" / "alpha.txt").string(),
                   {RotatedBox::make(3, 3, 4, 4, 0), RotatedBox::make(3, 3, 4, 4, 0),
                    RotatedBox::make(5, 3, 4, 4, 0), RotatedBox::make(13, 13, 4, 4, 0),
                    RotatedBox::make(3, 3, 2, 2, 0)});
    write_box_file((root / "predictions" / "beta.txt").string(),
                   {RotatedBox::make(5, 5, 6, 6, 0), RotatedBox::make(5, 5, 6, 6, 0),
                    RotatedBox::make(8, 5, 6, 6, 0), RotatedBox::make(5, 5, 3, 6, 0)});
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: acc_protocol <cli-binary> <golden-dir> [--update]\n");
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path golden_dir = argv[2];
    const bool update = argc > 3 && std::string(argv[3]) == "--update";

    Acceptance acc;
    acc.criterion("protocol: reset accounting reproduces hand-computed accuracy and failures",
                  check_reset_hand_values());
    acc.criterion("protocol: default skip/burn-in parameters match hand computation",
                  check_default_protocol_hand_values());
    acc.criterion("protocol: AO/SR/precision summary matches hand computation",
                  check_no_reset_hand_values());
    acc.criterion("protocol: DAVIS J/F match hand computation", check_davis_hand_values());

    const fs::path root = fs::temp_directory_path() / "segtrack_acc_protocol";
    fs::remove_all(root);
    build_golden_inputs(root);

    bool cli_ok = true;
    for (const std::string protocol : {"noreset", "reset"}) {
        const fs::path got = root / ("report_" + protocol + ".csv");
        const std::string cmd = cli + " eval --predictions " + (root / "predictions").string() +
                                " --dataset " + (root / "dataset").string() + " --protocol " +
                                protocol + " --out " + got.string() + " > /dev/null";
        if (std::system(cmd.c_str()) != 0) {
            cli_ok = false;
            break;
        }
        const fs::path want = golden_dir / ("eval_" + protocol + ".csv");
        if (update) {
            fs::create_directories(golden_dir);
            fs::copy_file(got, want, fs::copy_options::overwrite_existing);
            continue;
        }
        if (read_file(got) != read_file(want)) {
            std::fprintf(stderr, "golden mismatch for %s:\n--- got ---\n%s--- want ---\n%s",
                         protocol.c_str(), read_file(got).c_str(), read_file(want).c_str());
            cli_ok = false;
        }
    }
    acc.criterion("protocol: evaluation reports match the golden files byte-for-byte",
                  cli_ok && !update, update ? "golden files regenerated" : "");
    fs::remove_all(root);
    return update ? 0 : acc.exit_code();
}
