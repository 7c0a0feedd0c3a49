#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "segtrack/core/image_io.hpp"
#include "segtrack/eval/protocol.hpp"
#include "segtrack/harness/config.hpp"
#include "segtrack/harness/dataset.hpp"
#include "segtrack/tracker/tracker.hpp"
#include "segtrack/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace segtrack;

namespace {

// one exit code per error class
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kMissingFile = 2,
    kBadData = 3,
    kCheckpointError = 4,
    kInternal = 5,
};

int worker_count() {
    if (const char* env = std::getenv("SEGTRACK_WORKERS")) {
        const int n = std::atoi(env);
        if (n >= 1) return std::min(n, 64);
    }
    return 1;
}

// Runs fn(i) for i in [0,n) on the configured number of workers; results go
// into pre-sized slots so the output order stays deterministic.
void run_parallel(int n, const std::function<void(int)>& fn) {
    const int workers = std::min(worker_count(), std::max(1, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

TrackerConfig tracker_config_for(const std::string& ablation) {
    TrackerConfig cfg;
    if (ablation.empty() || ablation == "full") return cfg;
    if (ablation == "no_f") cfg.drop_F = true;
    else if (ablation == "no_p") cfg.drop_P = true;
    else if (ablation == "no_fp") { cfg.drop_F = true; cfg.drop_P = true; }
    else if (ablation == "no_l") cfg.drop_L = true;
    else if (ablation == "no_update") cfg.self_update_dcf = true;
    else if (ablation == "minarea_box") cfg.box_variant = BoxVariant::kMinArea;
    else if (ablation == "minmax_box") cfg.box_variant = BoxVariant::kMinMax;
    else throw std::invalid_argument("unknown ablation variant: " + ablation);
    return cfg;
}

const std::vector<std::string> kAblationVariants = {
    "full", "no_f", "no_p", "no_fp", "no_l", "no_update", "minarea_box", "minmax_box"};

Mask rasterize_box(const RotatedBox& box, int h, int w) {
    Mask m = Mask::Zero(h, w);
    const Eigen::Vector2d c(box.cx, box.cy);
    const Eigen::Vector2d u(std::cos(box.angle), std::sin(box.angle));
    const Eigen::Vector2d v(-u.y(), u.x());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Eigen::Vector2d p = Eigen::Vector2d(x, y) - c;
            if (std::abs(p.dot(u)) <= box.s_major / 2 && std::abs(p.dot(v)) <= box.s_minor / 2)
                m(y, x) = 1;
        }
    return m;
}

void draw_box_overlay(Tensor<float>& image, const RotatedBox& box) {
    const int H = image.dim(1), W = image.dim(2);
    const auto corners = box.corners();
    for (int e = 0; e < 4; ++e) {
        const Eigen::Vector2d a = corners[static_cast<size_t>(e)];
        const Eigen::Vector2d b = corners[static_cast<size_t>((e + 1) % 4)];
        const int steps = std::max(2, static_cast<int>((b - a).norm() * 2));
        for (int s = 0; s <= steps; ++s) {
            const Eigen::Vector2d p = a + (b - a) * (static_cast<double>(s) / steps);
            const int x = static_cast<int>(std::lround(p.x()));
            const int y = static_cast<int>(std::lround(p.y()));
            if (x < 0 || x >= W || y < 0 || y >= H) continue;
            image(0, y, x) = 1.f;
            image(1, y, x) = 0.f;
            image(2, y, x) = 0.f;
        }
    }
}

std::string frame_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d.png", index);
    return buf;
}

std::optional<Eigen::Vector2d> region_center(const Region& r) {
    if (r.box) return Eigen::Vector2d(r.box->cx, r.box->cy);
    if (r.mask) {
        double sx = 0, sy = 0;
        long n = 0;
        for (int y = 0; y < r.mask->rows(); ++y)
            for (int x = 0; x < r.mask->cols(); ++x)
                if ((*r.mask)(y, x)) {
                    sx += x;
                    sy += y;
                    ++n;
                }
        if (n > 0) return Eigen::Vector2d(sx / n, sy / n);
    }
    return std::nullopt;
}

// ---- track ----

int cmd_track(const std::string& sequence_dir, const std::string& weights_path,
              const std::string& out_dir, const std::string& ablation, bool save_masks,
              bool save_overlays) {
    const SequenceData seq = load_sequence(sequence_dir);
    NetworkWeights weights;
    weights.load(weights_path);
    Tracker tracker(weights, tracker_config_for(ablation));

    fs::create_directories(out_dir);
    const fs::path mask_dir = fs::path(out_dir) / "masks";
    const fs::path overlay_dir = fs::path(out_dir) / "overlays";
    if (save_masks) fs::create_directories(mask_dir);
    if (save_overlays) fs::create_directories(overlay_dir);

    const Tensor<float> first = read_image_png(seq.frame_paths[0]);
    const Region& init = seq.ground_truth[0];
    if (init.mask)
        tracker.initialize(first, *init.mask);
    else
        tracker.initialize(first, *init.box);

    std::vector<RotatedBox> boxes;
    boxes.push_back(init.box ? *init.box : min_max_box(*init.mask));
    if (save_masks) {
        const Mask m0 = init.mask ? *init.mask
                                  : rasterize_box(*init.box, first.dim(1), first.dim(2));
        write_mask_png((mask_dir / frame_name(0)).string(), m0);
    }
    if (save_overlays) {
        Tensor<float> img = first;
        draw_box_overlay(img, boxes.back());
        write_image_png((overlay_dir / frame_name(0)).string(), img);
    }

    for (size_t i = 1; i < seq.frame_paths.size(); ++i) {
        Tensor<float> frame = read_image_png(seq.frame_paths[i]);
        const FrameResult r = tracker.track(frame);
        boxes.push_back(r.box);
        if (save_masks) write_mask_png((mask_dir / frame_name(static_cast<int>(i))).string(), r.mask);
        if (save_overlays) {
            draw_box_overlay(frame, r.box);
            write_image_png((overlay_dir / frame_name(static_cast<int>(i))).string(), frame);
        }
    }
    write_box_file((fs::path(out_dir) / "boxes.txt").string(), boxes);
    std::cout << "tracked " << seq.frame_paths.size() << " frames -> " << out_dir << std::endl;
    return kOk;
}

// ---- train ----

int cmd_train(const std::string& config_path, const std::string& out_path,
              const std::vector<std::string>& overrides) {
    KeyValueConfig kv;
    if (!config_path.empty()) kv = KeyValueConfig::from_file(config_path);
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + o + "'");
        kv.set(o.substr(0, eq), o.substr(eq + 1));
    }

    TrainingConfig cfg;
    if (kv.get_bool("paper_scale", false)) cfg = paper_scale_config();
    cfg.batch_size = kv.get_int("batch_size", cfg.batch_size);
    cfg.epochs = kv.get_int("epochs", cfg.epochs);
    cfg.iterations_per_epoch = kv.get_int("iterations_per_epoch", cfg.iterations_per_epoch);
    cfg.learning_rate = static_cast<float>(kv.get_double("learning_rate", cfg.learning_rate));
    cfg.decay_factor = static_cast<float>(kv.get_double("decay_factor", cfg.decay_factor));
    cfg.decay_interval_epochs = kv.get_int("decay_interval_epochs", cfg.decay_interval_epochs);
    cfg.top_k = kv.get_int("top_k", cfg.top_k);
    cfg.gim_caps.max_foreground = kv.get_int("gim_max_foreground", cfg.gim_caps.max_foreground);
    cfg.gim_caps.max_background = kv.get_int("gim_max_background", cfg.gim_caps.max_background);
    cfg.perturbation_fraction = kv.get_double("perturbation_fraction", cfg.perturbation_fraction);
    cfg.validation_samples = kv.get_int("validation_samples", cfg.validation_samples);
    cfg.seed = static_cast<unsigned>(kv.get_int("seed", static_cast<int>(cfg.seed)));
    cfg.overfit = kv.get_bool("overfit", cfg.overfit);
    cfg.overfit_steps = kv.get_int("overfit_steps", cfg.overfit_steps);
    cfg.synthetic.pair_range = kv.get_int("pair_range", cfg.synthetic.pair_range);
    cfg.synthetic.num_frames = kv.get_int("sequence_frames", cfg.synthetic.num_frames);
    cfg.loss_csv_path = kv.get_string("loss_csv", out_path + ".loss.csv");
    cfg.verbose = kv.get_bool("verbose", true);

    NetworkWeights weights;
    const std::string init_weights = kv.get_string("init_weights", "");
    if (!init_weights.empty())
        weights.load(init_weights);
    else
        weights.init(static_cast<unsigned>(kv.get_int("init_seed", 42)));

    const TrainingResult result = train_network(weights, cfg);
    if (result.diverged) {
        std::cerr << "training diverged: " << result.divergence_note << std::endl;
        return kInternal;
    }
    weights.save(out_path);
    std::cout << "final loss " << result.final_loss;
    if (result.validation_curve.size() >= 2)
        std::cout << ", validation " << result.validation_curve.front() << " -> "
                  << result.validation_curve.back();
    std::cout << "\nweights -> " << out_path << "\nloss curve -> " << cfg.loss_csv_path
              << std::endl;
    return kOk;
}

// ---- eval ----

std::vector<RotatedBox> load_predicted_boxes(const fs::path& predictions, const std::string& name) {
    const fs::path flat = predictions / (name + ".txt");
    if (fs::exists(flat)) return read_box_file(flat.string());
    const fs::path nested = predictions / name / "boxes.txt";
    if (fs::exists(nested)) return read_box_file(nested.string());
    throw std::runtime_error("predictions not found for sequence '" + name + "' under " +
                             predictions.string());
}

std::vector<std::string> list_masks(const fs::path& dir) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

int cmd_eval(const std::string& predictions_dir, const std::string& dataset_dir,
             const std::string& protocol, const std::string& out_csv) {
    const auto seq_dirs = list_sequences(dataset_dir);
    if (seq_dirs.empty()) throw std::runtime_error("no sequences found in " + dataset_dir);
    const fs::path predictions(predictions_dir);

    std::vector<std::string> rows(seq_dirs.size());
    std::vector<std::vector<double>> row_values(seq_dirs.size());

    run_parallel(static_cast<int>(seq_dirs.size()), [&](int idx) {
        const SequenceData seq = load_sequence(seq_dirs[static_cast<size_t>(idx)]);
        if (protocol == "davis") {
            const fs::path mask_root = predictions / seq.name;
            std::vector<std::string> paths = list_masks(mask_root / "masks");
            if (paths.empty()) paths = list_masks(mask_root);
            if (paths.size() != seq.ground_truth.size())
                throw std::runtime_error("sequence " + seq.name + ": " +
                                         std::to_string(paths.size()) + " predicted masks but " +
                                         std::to_string(seq.ground_truth.size()) + " ground-truth");
            std::vector<Mask> pred, gt;
            for (size_t i = 1; i < paths.size(); ++i) {
                if (!seq.ground_truth[i].mask)
                    throw std::invalid_argument("davis protocol needs mask ground truth: " +
                                                seq.name);
                pred.push_back(read_mask_png(paths[i]));
                gt.push_back(*seq.ground_truth[i].mask);
            }
            const DavisSummary s = davis_measures(pred, gt);
            row_values[static_cast<size_t>(idx)] = {s.j_mean, s.f_mean};
            rows[static_cast<size_t>(idx)] =
                seq.name + "," + fmt6(s.j_mean) + "," + fmt6(s.f_mean);
            return;
        }

        const std::vector<RotatedBox> pred = load_predicted_boxes(predictions, seq.name);
        if (pred.size() != seq.ground_truth.size())
            throw std::runtime_error("sequence " + seq.name + ": " + std::to_string(pred.size()) +
                                     " predictions but " +
                                     std::to_string(seq.ground_truth.size()) + " ground-truth");
        std::vector<double> overlaps, center_errors;
        for (size_t i = 1; i < pred.size(); ++i) {
            const Region p = Region::from_box(pred[i]);
            overlaps.push_back(region_overlap(p, seq.ground_truth[i]));
            const auto pc = region_center(p), gc = region_center(seq.ground_truth[i]);
            if (pc && gc) center_errors.push_back((*pc - *gc).norm());
        }
        if (protocol == "reset") {
            const TrackRun run = reset_accounting(overlaps);
            const double acc = protocol_accuracy(run);
            row_values[static_cast<size_t>(idx)] = {acc,
                                                    static_cast<double>(run.failure_count())};
            rows[static_cast<size_t>(idx)] =
                seq.name + "," + fmt6(acc) + "," + std::to_string(run.failure_count());
        } else {
            const NoResetSummary s = average_overlap_sr(overlaps, center_errors);
            row_values[static_cast<size_t>(idx)] = {s.average_overlap, s.sr_050, s.sr_075,
                                                    s.precision_20px};
            rows[static_cast<size_t>(idx)] = seq.name + "," + fmt6(s.average_overlap) + "," +
                                             fmt6(s.sr_050) + "," + fmt6(s.sr_075) + "," +
                                             fmt6(s.precision_20px);
        }
    });

    std::string header;
    if (protocol == "davis") header = "sequence,j_mean,f_mean";
    else if (protocol == "reset") header = "sequence,accuracy,failures";
    else header = "sequence,ao,sr050,sr075,precision20";

    const size_t ncols = row_values[0].size();
    std::vector<double> mean(ncols, 0.0);
    for (const auto& v : row_values)
        for (size_t c = 0; c < ncols; ++c) mean[c] += v[c] / static_cast<double>(row_values.size());
    std::string mean_row = "mean";
    for (size_t c = 0; c < ncols; ++c) mean_row += "," + fmt6(mean[c]);

    std::cout << header << "\n";
    for (const auto& r : rows) std::cout << r << "\n";
    std::cout << mean_row << std::endl;

    if (!out_csv.empty()) {
        std::ofstream os(out_csv);
        if (!os) throw std::runtime_error("cannot write report: " + out_csv);
        os << header << "\n";
        for (const auto& r : rows) os << r << "\n";
        os << mean_row << "\n";
    }
    return kOk;
}

// ---- ablate ----

int cmd_ablate(const std::string& dataset_dir, const std::string& weights_path) {
    const auto seq_dirs = list_sequences(dataset_dir);
    if (seq_dirs.empty()) throw std::runtime_error("no sequences found in " + dataset_dir);
    NetworkWeights weights;
    weights.load(weights_path);

    std::cout << "variant,accuracy,failures,mean_overlap\n";
    for (const auto& variant : kAblationVariants) {
        double acc_sum = 0, ov_sum = 0;
        long ov_n = 0;
        int failures = 0;
        for (const auto& dir : seq_dirs) {
            const SequenceData seq = load_sequence(dir);
            std::vector<Tensor<float>> frames;
            for (const auto& p : seq.frame_paths) frames.push_back(read_image_png(p));

            Tracker tracker(weights, tracker_config_for(variant));
            const auto initialize = [&](int i) {
                const Region& g = seq.ground_truth[static_cast<size_t>(i)];
                if (g.mask)
                    tracker.initialize(frames[static_cast<size_t>(i)], *g.mask);
                else
                    tracker.initialize(frames[static_cast<size_t>(i)], *g.box);
            };
            const auto track = [&](int i) {
                const FrameResult r = tracker.track(frames[static_cast<size_t>(i)]);
                return r.lost ? Region{} : Region::from_mask(r.mask);
            };
            const TrackRun run = run_reset_protocol(initialize, track, seq.ground_truth);
            acc_sum += protocol_accuracy(run);
            failures += run.failure_count();
            for (double o : run.overlaps)
                if (o >= 0) {
                    ov_sum += o;
                    ++ov_n;
                }
        }
        const double n = static_cast<double>(seq_dirs.size());
        std::cout << variant << "," << fmt6(acc_sum / n) << "," << failures << ","
                  << fmt6(ov_n ? ov_sum / ov_n : 0.0) << std::endl;
    }
    return kOk;
}

int dispatch_errors(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kBadData;
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        std::cerr << "error: " << msg << std::endl;
        if (msg.find("checkpoint") != std::string::npos) return kCheckpointError;
        if (msg.find("not found") != std::string::npos ||
            msg.find("cannot open") != std::string::npos)
            return kMissingFile;
        return kInternal;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kInternal;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"discriminative single-shot segmentation tracker"};
    app.require_subcommand(1);

    std::string sequence_dir, weights_path, out_dir, ablation;
    bool save_masks = false, save_overlays = false;
    auto* track = app.add_subcommand("track", "run the tracker over one sequence");
    track->add_option("--sequence", sequence_dir, "sequence directory")->required();
    track->add_option("--weights", weights_path, "weights checkpoint")->required();
    track->add_option("--out", out_dir, "output directory")->required();
    track->add_option("--ablation", ablation, "variant: full no_f no_p no_fp no_l no_update minarea_box minmax_box");
    track->add_flag("--masks", save_masks, "write per-frame mask PNGs");
    track->add_flag("--overlays", save_overlays, "write box overlay images");

    std::string train_config, train_out;
    std::vector<std::string> train_overrides;
    auto* train = app.add_subcommand("train", "train weights on procedural sequences");
    train->add_option("--config", train_config, "key=value config file");
    train->add_option("--out", train_out, "output checkpoint path")->required();
    train->add_option("--set", train_overrides, "override config entries (key=value)");

    std::string predictions_dir, dataset_dir, protocol = "noreset", eval_out;
    auto* eval = app.add_subcommand("eval", "score stored predictions against ground truth");
    eval->add_option("--predictions", predictions_dir, "predictions directory")->required();
    eval->add_option("--dataset", dataset_dir, "dataset directory")->required();
    eval->add_option("--protocol", protocol, "reset | noreset | davis")
        ->check(CLI::IsMember({"reset", "noreset", "davis"}));
    eval->add_option("--out", eval_out, "also write the report CSV here");

    std::string abl_dataset, abl_weights;
    auto* ablate = app.add_subcommand("ablate", "compare ablation variants on a dataset");
    ablate->add_option("--dataset", abl_dataset, "dataset directory")->required();
    ablate->add_option("--weights", abl_weights, "weights checkpoint")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    if (track->parsed())
        return dispatch_errors([&] {
            return cmd_track(sequence_dir, weights_path, out_dir, ablation, save_masks,
                             save_overlays);
        });
    if (train->parsed())
        return dispatch_errors([&] { return cmd_train(train_config, train_out, train_overrides); });
    if (eval->parsed())
        return dispatch_errors(
            [&] { return cmd_eval(predictions_dir, dataset_dir, protocol, eval_out); });
    if (ablate->parsed())
        return dispatch_errors([&] { return cmd_ablate(abl_dataset, abl_weights); });
    return kUsage;
}
