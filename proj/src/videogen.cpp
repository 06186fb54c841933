#include "ctvos/videogen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ctvos/png_io.hpp"

namespace fs = std::filesystem;

namespace ctvos {

namespace {

double color_dist(const std::array<float, 3>& a, const std::array<float, 3>& b) {
    double s = 0;
    for (int i = 0; i < 3; ++i) s += double(a[i] - b[i]) * double(a[i] - b[i]);
    return std::sqrt(s);
}

std::array<float, 3> random_color(Rng& rng) {
    return {float(rng.uniform()), float(rng.uniform()), float(rng.uniform())};
}

// Triangle vertices around the center; aspect/skew keep it scalene.
std::array<Vec2, 3> triangle_vertices(const SceneObject& o) {
    double r = o.size;
    return {Vec2{o.position.x - r, o.position.y + r * o.tri_aspect},
            Vec2{o.position.x + r * (1.0 + o.tri_skew), o.position.y + r * o.tri_aspect * 0.8},
            Vec2{o.position.x + r * o.tri_skew * 0.5, o.position.y - r}};
}

bool inside_object(const SceneObject& o, double px, double py) {
    switch (o.kind) {
        case ShapeKind::disk: {
            double dx = px - o.position.x, dy = py - o.position.y;
            return dx * dx + dy * dy <= o.size * o.size;
        }
        case ShapeKind::square:
            return std::abs(px - o.position.x) <= o.size && std::abs(py - o.position.y) <= o.size;
        case ShapeKind::triangle: {
            auto v = triangle_vertices(o);
            auto edge = [&](const Vec2& a, const Vec2& b) {
                return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
            };
            double e0 = edge(v[0], v[1]), e1 = edge(v[1], v[2]), e2 = edge(v[2], v[0]);
            return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
        }
    }
    return false;
}

// Conservative footprint half-extent, used for placement and bouncing.
double half_extent(const SceneObject& o) {
    switch (o.kind) {
        case ShapeKind::disk:
        case ShapeKind::square:
            return o.size;
        case ShapeKind::triangle:
            return o.size * 1.6;
    }
    return o.size;
}

void bounce(double& pos, double& vel, double lo, double hi) {
    // Mirror until inside; velocities are small relative to the frame.
    for (int guard = 0; guard < 8 && (pos < lo || pos > hi); ++guard) {
        if (pos < lo) {
            pos = 2 * lo - pos;
            vel = -vel;
        } else if (pos > hi) {
            pos = 2 * hi - pos;
            vel = -vel;
        }
    }
    check(pos >= lo && pos <= hi, "object escaped the frame while bouncing");
}

void render_background(const Background& bg, Image& frame) {
    if (bg.kind == BackgroundKind::solid) {
        for (int ch = 0; ch < 3; ++ch)
            std::fill(frame.data.begin() + ch * frame.pixels(),
                      frame.data.begin() + (ch + 1) * frame.pixels(), bg.color_a[ch]);
        return;
    }
    for (int y = 0; y < frame.h; ++y) {
        float t = frame.h > 1 ? float(y) / float(frame.h - 1) : 0.f;
        for (int ch = 0; ch < 3; ++ch) {
            float v = (1.f - t) * bg.color_a[ch] + t * bg.color_b[ch];
            for (int x = 0; x < frame.w; ++x) frame.at(ch, y, x) = v;
        }
    }
}

std::string frame_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05d.png", i);
    return buf;
}

}  // namespace

Scene generate_scene(uint64_t seed, const SceneConfig& config) {
    check(config.width >= 32 && config.height >= 32, "scene size must be at least 32x32, got ",
          config.width, "x", config.height);
    check(config.min_objects >= 1 && config.max_objects <= 4 &&
              config.min_objects <= config.max_objects,
          "object count range must lie within [1, 4]");
    check(config.min_size >= 4, "object size must be at least 4 px");

    Rng rng(seed);
    Scene scene;
    scene.width = config.width;
    scene.height = config.height;

    scene.background.kind = (config.allow_gradient_background && rng.coin())
                                ? BackgroundKind::gradient
                                : BackgroundKind::solid;
    scene.background.color_a = random_color(rng);
    scene.background.color_b = random_color(rng);

    int count = rng.uniform_int(config.min_objects, config.max_objects);
    std::vector<std::array<float, 3>> used = {scene.background.color_a};
    if (scene.background.kind == BackgroundKind::gradient) used.push_back(scene.background.color_b);

    for (int i = 0; i < count; ++i) {
        SceneObject obj;
        int kind = rng.uniform_int(0, 2);
        obj.kind = kind == 0 ? ShapeKind::disk : (kind == 1 ? ShapeKind::square : ShapeKind::triangle);
        obj.size = rng.uniform(config.min_size, config.max_size);
        obj.tri_aspect = rng.uniform(0.75, 1.3);
        obj.tri_skew = rng.uniform(-0.45, 0.45);

        // Distinct colors: at least 0.3 apart from every other object (and
        // kept away from the background so masks are visually meaningful).
        bool colored = false;
        for (int attempt = 0; attempt < 256 && !colored; ++attempt) {
            auto c = random_color(rng);
            colored = true;
            for (const auto& u : used)
                if (color_dist(c, u) < 0.3) {
                    colored = false;
                    break;
                }
            if (colored) {
                obj.color = c;
                used.push_back(c);
            }
        }
        check(colored, "could not draw ", count, " mutually distinct object colors");

        double margin = half_extent(obj) + 1.0;
        check(2 * margin < config.width && 2 * margin < config.height,
              "objects of size ", obj.size, " cannot fit a ", config.width, "x", config.height,
              " frame");
        obj.position.x = rng.uniform(margin, config.width - 1 - margin);
        obj.position.y = rng.uniform(margin, config.height - 1 - margin);
        int speed_x = rng.uniform_int(-config.max_speed, config.max_speed);
        int speed_y = rng.uniform_int(-config.max_speed, config.max_speed);
        if (speed_x == 0 && speed_y == 0) speed_x = 1;
        obj.velocity = {double(speed_x), double(speed_y)};
        scene.objects.push_back(obj);
    }
    return scene;
}

Clip render_clip(const Scene& scene, int num_frames, const std::string& id) {
    check(num_frames >= 2, "render_clip: need at least 2 frames, got ", num_frames);
    Clip clip;
    clip.id = id;
    clip.num_objects = int(scene.objects.size());

    std::vector<SceneObject> state = scene.objects;
    for (int t = 0; t < num_frames; ++t) {
        Image frame(scene.height, scene.width, 3);
        render_background(scene.background, frame);
        IndexMask mask(scene.height, scene.width);

        for (size_t k = 0; k < state.size(); ++k) {
            const auto& obj = state[k];
            int y0 = std::max(0, int(std::floor(obj.position.y - half_extent(obj) - 1)));
            int y1 = std::min(scene.height - 1, int(std::ceil(obj.position.y + half_extent(obj) + 1)));
            int x0 = std::max(0, int(std::floor(obj.position.x - half_extent(obj) - 1)));
            int x1 = std::min(scene.width - 1, int(std::ceil(obj.position.x + half_extent(obj) + 1)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    if (inside_object(obj, x, y)) {
                        mask.at(y, x) = uint8_t(k + 1);
                        for (int ch = 0; ch < 3; ++ch) frame.at(ch, y, x) = obj.color[ch];
                    }
        }
        clip.frames.push_back(std::move(frame));
        clip.gt.push_back(std::move(mask));

        for (auto& obj : state) {
            obj.position.x += obj.velocity.x;
            obj.position.y += obj.velocity.y;
            double m = half_extent(obj);
            bounce(obj.position.x, obj.velocity.x, m, scene.width - 1 - m);
            bounce(obj.position.y, obj.velocity.y, m, scene.height - 1 - m);
        }
    }
    return clip;
}

ClipSplit split_clip(const Clip& clip) {
    check(clip.size() >= 8, "split_clip: need at least 8 frames, got ", clip.size());
    ClipSplit out;
    out.past.assign(clip.frames.begin(), clip.frames.begin() + 7);
    out.current = clip.frames[7];
    return out;
}

Clip load_frame_directory(const std::string& frames_dir,
                          const std::optional<std::string>& masks_dir) {
    check(fs::is_directory(frames_dir), "not a directory: ", frames_dir);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(frames_dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    check(!names.empty(), "no PNG frames in ", frames_dir);

    Clip clip;
    clip.id = fs::path(frames_dir).filename().string();
    for (const auto& n : names) {
        Image f = read_rgb_png(frames_dir + "/" + n);
        if (!clip.frames.empty())
            check(f.same_dims(clip.frames.front()), "frame dimensions differ: ", n, " is ", f.h,
                  "x", f.w, " vs ", clip.frames.front().h, "x", clip.frames.front().w);
        clip.frames.push_back(std::move(f));
    }

    if (masks_dir) {
        std::vector<std::string> mnames;
        for (const auto& e : fs::directory_iterator(*masks_dir))
            if (e.is_regular_file() && e.path().extension() == ".png")
                mnames.push_back(e.path().filename().string());
        std::sort(mnames.begin(), mnames.end());
        check(mnames.size() == names.size(), "frame/mask count mismatch: ", names.size(),
              " frames vs ", mnames.size(), " masks");
        for (const auto& n : mnames) {
            IndexMask m = read_indexed_png(*masks_dir + "/" + n);
            check(m.h == clip.frames.front().h && m.w == clip.frames.front().w,
                  "mask dimensions differ from frames: ", n, " is ", m.h, "x", m.w);
            clip.num_objects = std::max(clip.num_objects, m.max_index());
            clip.gt.push_back(std::move(m));
        }
    }
    return clip;
}

void write_corpus_sequence(const std::string& root, const Clip& clip) {
    fs::create_directories(root + "/JPEGImages/" + clip.id);
    if (clip.has_gt()) fs::create_directories(root + "/Annotations/" + clip.id);
    for (int t = 0; t < clip.size(); ++t) {
        write_rgb_png(root + "/JPEGImages/" + clip.id + "/" + frame_name(t), clip.frames[t]);
        if (clip.has_gt())
            write_indexed_png(root + "/Annotations/" + clip.id + "/" + frame_name(t), clip.gt[t]);
    }
}

std::vector<ManifestEntry> read_manifest(const std::string& root) {
    std::ifstream in(root + "/manifest.txt");
    check(in.good(), "missing manifest: ", root, "/manifest.txt");
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ManifestEntry e;
        ls >> e.id >> e.seed >> e.num_frames >> e.width >> e.height >> e.num_objects;
        check(!ls.fail(), "malformed manifest line: '", line, "'");
        entries.push_back(e);
    }
    check(!entries.empty(), "empty manifest in ", root);
    return entries;
}

void write_manifest(const std::string& root, const std::vector<ManifestEntry>& entries) {
    fs::create_directories(root);
    std::ofstream out(root + "/manifest.txt");
    check(out.good(), "cannot write manifest in ", root);
    for (const auto& e : entries)
        out << e.id << ' ' << e.seed << ' ' << e.num_frames << ' ' << e.width << ' ' << e.height
            << ' ' << e.num_objects << '\n';
}

Clip load_corpus_sequence(const std::string& root, const std::string& id, bool with_masks) {
    std::optional<std::string> masks;
    if (with_masks) masks = root + "/Annotations/" + id;
    Clip clip = load_frame_directory(root + "/JPEGImages/" + id, masks);
    clip.id = id;
    return clip;
}

}  // namespace ctvos
