#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "segtrack/train/synthetic.hpp"
#include "segtrack/tracker/tracker.hpp"

using namespace segtrack;

namespace {

SyntheticConfig scene_config() {
    SyntheticConfig cfg;
    cfg.frame_w = 200;
    cfg.frame_h = 200;
    cfg.num_frames = 12;
    cfg.target_radius = 26;
    cfg.translation_speed = 2.0;
    return cfg;
}

const NetworkWeights& shared_weights() {
    static NetworkWeights w = [] {
        NetworkWeights weights;
        weights.init(17);
        return weights;
    }();
    return w;
}

bool box_inside_frame(const RotatedBox& b, int w, int h) {
    for (const auto& c : b.corners())
        if (c.x() < -1e-6 || c.x() > w - 1 + 1e-6 || c.y() < -1e-6 || c.y() > h - 1 + 1e-6)
            return false;
    return true;
}

}  // namespace

TEST_CASE("tracking before initialization is rejected") {
    Tracker tracker(shared_weights());
    const RenderedFrame f = render_frame(make_scene(1, scene_config()), 0);
    CHECK(!tracker.initialized());
    CHECK_THROWS_AS(tracker.track(f.image), std::logic_error);
}

TEST_CASE("degenerate initializations are rejected") {
    Tracker tracker(shared_weights());
    const RenderedFrame f = render_frame(make_scene(1, scene_config()), 0);
    Mask empty(f.mask.rows(), f.mask.cols());
    empty.setZero();
    CHECK_THROWS_AS(tracker.initialize(f.image, empty), std::invalid_argument);
    CHECK_THROWS_AS(tracker.initialize(f.image, RotatedBox::make(50, 50, 0, 10, 0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(tracker.initialize(f.image, RotatedBox::make(-500, -500, 10, 10, 0)),
                    std::invalid_argument);
}

TEST_CASE("mask initialization builds a capped appearance model") {
    const RenderedFrame f = render_frame(make_scene(2, scene_config()), 0);

    Tracker uncapped(shared_weights());
    uncapped.initialize(f.image, f.mask);
    CHECK(uncapped.initialized());
    CHECK(uncapped.gim().foreground.cols() > 0);
    CHECK(uncapped.gim().background.cols() > 0);
    CHECK(uncapped.gim().foreground.rows() == uncapped.gim().background.rows());
    // columns are unit vectors
    for (int c = 0; c < std::min<int>(8, uncapped.gim().foreground.cols()); ++c)
        CHECK(uncapped.gim().foreground.col(c).norm() == doctest::Approx(1.0).epsilon(1e-4));
    // the reported center starts at the mask bounds center
    CHECK(std::abs(uncapped.center_x() - f.center_x) < 10.0);
    CHECK(std::abs(uncapped.center_y() - f.center_y) < 10.0);

    TrackerConfig capped_cfg;
    capped_cfg.gim_caps = GimCaps{5, 9};
    Tracker capped(shared_weights(), capped_cfg);
    capped.initialize(f.image, f.mask);
    CHECK(capped.gim().foreground.cols() == 5);
    CHECK(capped.gim().background.cols() == 9);
}

TEST_CASE("box initialization bootstraps a model too") {
    const RenderedFrame f = render_frame(make_scene(3, scene_config()), 0);
    Tracker tracker(shared_weights());
    tracker.initialize(f.image, min_max_box(f.mask));
    CHECK(tracker.initialized());
    CHECK(tracker.gim().foreground.cols() > 0);
}

TEST_CASE("tracking produces frame-resolution in-bounds results") {
    const SyntheticConfig scfg = scene_config();
    const SceneParams scene = make_scene(4, scfg);
    Tracker tracker(shared_weights());
    tracker.initialize(render_frame(scene, 0).image, render_frame(scene, 0).mask);
    for (int t = 1; t <= 4; ++t) {
        const RenderedFrame f = render_frame(scene, t);
        const FrameResult r = tracker.track(f.image);
        CHECK(r.mask.rows() == scfg.frame_h);
        CHECK(r.mask.cols() == scfg.frame_w);
        CHECK(box_inside_frame(r.box, scfg.frame_w, scfg.frame_h));
    }
}

TEST_CASE("tracking is deterministic") {
    const SceneParams scene = make_scene(5, scene_config());
    Tracker a(shared_weights()), b(shared_weights());
    a.initialize(render_frame(scene, 0).image, render_frame(scene, 0).mask);
    b.initialize(render_frame(scene, 0).image, render_frame(scene, 0).mask);
    for (int t = 1; t <= 3; ++t) {
        const RenderedFrame f = render_frame(scene, t);
        const FrameResult ra = a.track(f.image);
        const FrameResult rb = b.track(f.image);
        CHECK((ra.mask.array() == rb.mask.array()).all());
        CHECK(ra.box.cx == rb.box.cx);
        CHECK(ra.box.angle == rb.box.angle);
        CHECK(ra.lost == rb.lost);
    }
}

TEST_CASE("an empty segmentation sets the lost flag and keeps the last box") {
    const SceneParams scene = make_scene(6, scene_config());
    const RenderedFrame f0 = render_frame(scene, 0);

    // rig the head so the background class always wins by a wide margin
    NetworkWeights rigged;
    rigged.init(17);
    Tracker tracker(rigged, {});
    tracker.initialize(f0.image, f0.mask);
    rigged.refine.head.weights.set_zero();
    rigged.refine.head.bias[0] = 10.0f;
    rigged.refine.head.bias[1] = -10.0f;

    const FrameResult r = tracker.track(render_frame(scene, 1).image);
    CHECK(r.lost);
    CHECK(tracker.lost());
    CHECK(foreground_count(r.mask) == 0);
    CHECK(r.box.area() > 0);  // falls back to the box from initialization
}

TEST_CASE("channel-drop toggles change the segmentation") {
    const SceneParams scene = make_scene(8, scene_config());
    const RenderedFrame f0 = render_frame(scene, 0);
    const RenderedFrame f1 = render_frame(scene, 1);

    // the box is fitted to the raw segmentation, so it reflects any change in
    // the predicted mask even when parts fall outside the frame
    const auto run = [&](TrackerConfig cfg) {
        Tracker t(shared_weights(), cfg);
        t.initialize(f0.image, f0.mask);
        const FrameResult r = t.track(f1.image);
        return std::array<double, 4>{r.lost ? 1.0 : 0.0, r.box.cx, r.box.cy, r.box.area()};
    };
    const auto base = run({});
    for (int which = 0; which < 3; ++which) {
        TrackerConfig cfg;
        if (which == 0) cfg.drop_F = true;
        if (which == 1) cfg.drop_P = true;
        if (which == 2) cfg.drop_L = true;
        CHECK(run(cfg) != base);
    }
}

TEST_CASE("the update-position override steers the filter update") {
    const SceneParams scene = make_scene(8, scene_config());
    const RenderedFrame f0 = render_frame(scene, 0);
    const RenderedFrame f1 = render_frame(scene, 1);

    const auto filter_after = [&](std::pair<int, int> pos) {
        Tracker t(shared_weights());
        t.initialize(f0.image, f0.mask);
        t.test_segmentation_center_override = pos;
        t.track(f1.image);
        return t.dcf();
    };
    const auto a = filter_after({24, 24});
    const auto b = filter_after({4, 40});
    REQUIRE(!a.numerator.empty());
    CHECK(!a.numerator[0].isApprox(b.numerator[0]));
}

TEST_CASE("boxes are clamped into the frame") {
    const RotatedBox inside = RotatedBox::make(50, 50, 20, 10, 0.3);
    const RotatedBox same = clamp_box_to_frame(inside, 100, 100);
    CHECK(same.cx == doctest::Approx(inside.cx));
    CHECK(same.s_major == doctest::Approx(inside.s_major));

    const RotatedBox big = RotatedBox::make(95, 50, 40, 30, 0.5);
    const RotatedBox clamped = clamp_box_to_frame(big, 100, 100);
    CHECK(box_inside_frame(clamped, 100, 100));
    CHECK(clamped.s_major < big.s_major);
    CHECK(clamped.s_major / clamped.s_minor ==
          doctest::Approx(big.s_major / big.s_minor));  // aspect preserved

    const RotatedBox outside = RotatedBox::make(-20, 150, 10, 10, 0);
    const RotatedBox pulled = clamp_box_to_frame(outside, 100, 100);
    CHECK(pulled.cx >= 0.0);
    CHECK(pulled.cy <= 99.0);
    CHECK(box_inside_frame(pulled, 100, 100));
}
