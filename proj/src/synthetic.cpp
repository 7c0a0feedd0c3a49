#include "segtrack/train/synthetic.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace segtrack {

namespace {

constexpr double kPi = 3.14159265358979323846;

float hash01(int x, int y, unsigned seed) {
    uint32_t h = seed;
    h ^= static_cast<uint32_t>(x) * 0x9E3779B1u;
    h = (h ^ (h >> 15)) * 0x85EBCA77u;
    h ^= static_cast<uint32_t>(y) * 0xC2B2AE3Du;
    h = (h ^ (h >> 13)) * 0x27D4EB2Fu;
    h ^= h >> 16;
    return static_cast<float>(h & 0xFFFFFFu) / static_cast<float>(0x1000000);
}

float smoothstep(float t) { return t * t * (3.f - 2.f * t); }

// Bilinear value noise on an integer lattice.
float value_noise(float x, float y, unsigned seed) {
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const float tx = smoothstep(x - static_cast<float>(x0));
    const float ty = smoothstep(y - static_cast<float>(y0));
    const float a = hash01(x0, y0, seed), b = hash01(x0 + 1, y0, seed);
    const float c = hash01(x0, y0 + 1, seed), d = hash01(x0 + 1, y0 + 1, seed);
    return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
}

// Two-octave texture intensity in [0,1].
float texture(float x, float y, unsigned seed) {
    return 0.65f * value_noise(x / 14.f, y / 14.f, seed) +
           0.35f * value_noise(x / 4.f, y / 4.f, seed ^ 0xA511E9B3u);
}

// Constant-velocity motion reflected off the walls of [margin, limit-margin].
double bounce(double start, double velocity, int t, double margin, double limit) {
    const double span = limit - 2 * margin;
    if (span <= 0) return limit / 2;
    double p = std::fmod(start - margin + velocity * t, 2 * span);
    if (p < 0) p += 2 * span;
    return margin + (p <= span ? p : 2 * span - p);
}

struct Blob {
    double cx, cy, radius, rotation;
    const std::vector<double>* amp;
    const std::vector<double>* phase;
    double max_extent;

    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double d2 = dx * dx + dy * dy;
        if (d2 > max_extent * max_extent) return false;
        const double theta = std::atan2(dy, dx) - rotation;
        double r = 1.0;
        if (amp)
            for (size_t k = 0; k < amp->size(); ++k)
                r += (*amp)[k] * std::sin(static_cast<double>(k + 2) * theta + (*phase)[k]);
        return d2 <= radius * r * radius * r;
    }
};

}  // namespace

SceneParams make_scene(unsigned seed, const SyntheticConfig& config) {
    if (config.frame_w < 64 || config.frame_h < 64)
        throw std::invalid_argument("make_scene: frame too small");
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    SceneParams s;
    s.config = config;
    s.base_radius = config.target_radius * (0.85 + 0.3 * uni(rng));
    const double margin = s.base_radius * 1.6;
    s.start_x = margin + uni(rng) * (config.frame_w - 2 * margin);
    s.start_y = margin + uni(rng) * (config.frame_h - 2 * margin);
    const double dir = uni(rng) * 2 * kPi;
    const double speed = config.translation_speed * (0.6 + 0.8 * uni(rng));
    s.vel_x = speed * std::cos(dir);
    s.vel_y = speed * std::sin(dir);
    s.rotation_phase = uni(rng) * 2 * kPi;
    for (int k = 0; k < 4; ++k) {
        s.lobe_amp.push_back(config.deform_amplitude * (0.3 + 0.7 * uni(rng)) / (k + 1));
        s.lobe_phase.push_back(uni(rng) * 2 * kPi);
        s.lobe_rate.push_back((uni(rng) - 0.5) * 0.1);
    }
    // target bright and warm, background dark and cool, so the palettes stay
    // separable but textures still overlap in intensity
    s.target_color = Eigen::Vector3f(0.7f + 0.3f * static_cast<float>(uni(rng)),
                                     0.4f + 0.4f * static_cast<float>(uni(rng)),
                                     0.15f + 0.3f * static_cast<float>(uni(rng)));
    s.background_color = Eigen::Vector3f(0.2f + 0.25f * static_cast<float>(uni(rng)),
                                         0.3f + 0.3f * static_cast<float>(uni(rng)),
                                         0.45f + 0.4f * static_cast<float>(uni(rng)));
    s.distractor_color =
        0.5f * (s.target_color + s.background_color) +
        Eigen::Vector3f::Constant(0.1f * static_cast<float>(uni(rng)));
    s.texture_seed = rng();
    s.distractor_radius = s.base_radius * (0.6 + 0.5 * uni(rng));
    s.distractor_x = margin + uni(rng) * (config.frame_w - 2 * margin);
    s.distractor_y = margin + uni(rng) * (config.frame_h - 2 * margin);
    const double ddir = uni(rng) * 2 * kPi;
    const double dspeed = config.translation_speed * (0.4 + 0.8 * uni(rng));
    s.distractor_vx = dspeed * std::cos(ddir);
    s.distractor_vy = dspeed * std::sin(ddir);
    return s;
}

RenderedFrame render_frame(const SceneParams& scene, int frame_index) {
    const auto& cfg = scene.config;
    const int W = cfg.frame_w, H = cfg.frame_h;
    const double t = frame_index;

    const double scale = 1.0 + cfg.scale_amplitude * std::sin(2 * kPi * t / 40.0);
    const double radius = scene.base_radius * scale;
    const double margin = scene.base_radius * 1.3;
    std::vector<double> phases(scene.lobe_phase);
    for (size_t k = 0; k < phases.size(); ++k) phases[k] += scene.lobe_rate[k] * t;
    double amp_sum = 0;
    for (double a : scene.lobe_amp) amp_sum += a;

    Blob target;
    target.cx = bounce(scene.start_x, scene.vel_x, frame_index, margin, W);
    target.cy = bounce(scene.start_y, scene.vel_y, frame_index, margin, H);
    target.radius = radius;
    target.rotation = scene.rotation_phase + cfg.rotation_speed * t;
    target.amp = &scene.lobe_amp;
    target.phase = &phases;
    target.max_extent = radius * (1.0 + amp_sum) + 1.0;

    Blob distractor;
    distractor.cx = bounce(scene.distractor_x, scene.distractor_vx, frame_index, margin, W);
    distractor.cy = bounce(scene.distractor_y, scene.distractor_vy, frame_index, margin, H);
    distractor.radius = scene.distractor_radius;
    distractor.rotation = 0;
    distractor.amp = nullptr;
    distractor.phase = nullptr;
    distractor.max_extent = scene.distractor_radius + 1.0;

    RenderedFrame out;
    out.image = Tensor<float>::zeros({3, H, W});
    out.mask = Mask::Zero(H, W);
    out.center_x = target.cx;
    out.center_y = target.cy;

    const double cr = std::cos(target.rotation), sr = std::sin(target.rotation);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            Eigen::Vector3f color;
            if (target.contains(x, y)) {
                out.mask(y, x) = 1;
                // texture in object coordinates so it translates and rotates
                // with the target
                const double dx = x - target.cx, dy = y - target.cy;
                const float ox = static_cast<float>(cr * dx + sr * dy);
                const float oy = static_cast<float>(-sr * dx + cr * dy);
                const float tex = texture(ox, oy, scene.texture_seed ^ 0x51EDA7u);
                color = scene.target_color * (0.55f + 0.65f * tex);
            } else if (cfg.distractor && distractor.contains(x, y)) {
                const float ox = static_cast<float>(x - distractor.cx);
                const float oy = static_cast<float>(y - distractor.cy);
                const float tex = texture(ox, oy, scene.texture_seed ^ 0xD157A7u);
                color = scene.distractor_color * (0.55f + 0.65f * tex);
            } else {
                const float tex =
                    texture(static_cast<float>(x), static_cast<float>(y), scene.texture_seed);
                color = scene.background_color * (0.5f + 0.7f * tex);
            }
            for (int c = 0; c < 3; ++c)
                out.image(c, y, x) = std::clamp(color[c], 0.f, 1.f);
        }
    return out;
}

SyntheticSequence generate_synthetic_sequence(unsigned seed, const SyntheticConfig& config) {
    const SceneParams scene = make_scene(seed, config);
    SyntheticSequence seq;
    seq.seed = seed;
    seq.frames.reserve(static_cast<size_t>(config.num_frames));
    for (int t = 0; t < config.num_frames; ++t) {
        RenderedFrame f = render_frame(scene, t);
        seq.frames.push_back(std::move(f.image));
        seq.masks.push_back(std::move(f.mask));
    }
    return seq;
}

TrainingSample generate_synthetic_sample(unsigned seed, const SyntheticConfig& config) {
    std::mt19937 rng(seed);
    const unsigned scene_seed = rng();
    const SceneParams scene = make_scene(scene_seed, config);

    const int n = config.num_frames;
    std::uniform_int_distribution<int> frame_dist(0, n - 1);
    const int t1 = frame_dist(rng);
    const int lo = std::max(0, t1 - config.pair_range);
    const int hi = std::min(n - 1, t1 + config.pair_range);
    std::uniform_int_distribution<int> pair_dist(lo, hi);
    int t2 = pair_dist(rng);
    if (t2 == t1) t2 = t1 == hi ? t1 - 1 : t1 + 1;

    TrainingSample sample;
    sample.train_index = t1;
    sample.test_index = t2;
    RenderedFrame a = render_frame(scene, t1);
    RenderedFrame b = render_frame(scene, t2);
    sample.train_frame = std::move(a.image);
    sample.train_mask = std::move(a.mask);
    sample.test_frame = std::move(b.image);
    sample.test_mask = std::move(b.mask);
    return sample;
}

}  // namespace segtrack
