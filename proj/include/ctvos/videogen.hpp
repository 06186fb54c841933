// Procedural moving-shapes corpus with exact ground-truth masks, plus
// frames-as-PNG ingestion in the standard JPEGImages/Annotations layout.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctvos/image.hpp"

namespace ctvos {

struct Vec2 {
    double x = 0, y = 0;
};

enum class ShapeKind { disk, square, triangle };

struct SceneObject {
    ShapeKind kind = ShapeKind::disk;
    std::array<float, 3> color{};
    double size = 0;  // disk radius | square half-side | triangle circumradius-ish
    Vec2 position;    // center, pixels
    Vec2 velocity;    // pixels per frame (integer-valued draws keep mask areas exact)
    double tri_aspect = 1.0, tri_skew = 0.0;  // scalene triangle irregularity
};

enum class BackgroundKind { solid, gradient };

struct Background {
    BackgroundKind kind = BackgroundKind::solid;
    std::array<float, 3> color_a{};
    std::array<float, 3> color_b{};  // gradient bottom color
};

struct Scene {
    int width = 0, height = 0;
    Background background;
    std::vector<SceneObject> objects;
};

struct SceneConfig {
    int width = 64, height = 64;
    int min_objects = 1, max_objects = 3;
    double min_size = 6, max_size = 14;
    int max_speed = 3;                  // per-axis, integer px/frame
    bool allow_gradient_background = true;
};

struct Clip {
    std::string id;
    std::vector<Image> frames;        // RGB in [0,1]
    std::vector<IndexMask> gt;        // empty when unannotated
    int num_objects = 0;

    bool has_gt() const { return !gt.empty(); }
    int size() const { return int(frames.size()); }
};

// Deterministic in (seed, config). Object colors are pairwise separated by
// at least 0.3 in RGB L2 and every object starts fully inside the frame.
Scene generate_scene(uint64_t seed, const SceneConfig& config);

// Objects translate with border reflection; no anti-aliasing, so gt masks and
// rendered colors agree pixel-for-pixel.
Clip render_clip(const Scene& scene, int num_frames, const std::string& id = "clip");

// First 7 frames as past context, the 8th as the current frame.
struct ClipSplit {
    std::vector<Image> past;
    Image current;
};
ClipSplit split_clip(const Clip& clip);

// Reads ordered PNG frames (and an optional parallel indexed-mask directory).
Clip load_frame_directory(const std::string& frames_dir,
                          const std::optional<std::string>& masks_dir = std::nullopt);

// Corpus on disk: <root>/manifest.txt, <root>/JPEGImages/<id>/NNNNN.png,
// <root>/Annotations/<id>/NNNNN.png.
struct ManifestEntry {
    std::string id;
    uint64_t seed = 0;
    int num_frames = 0, width = 0, height = 0, num_objects = 0;
};

void write_corpus_sequence(const std::string& root, const Clip& clip);
std::vector<ManifestEntry> read_manifest(const std::string& root);
void write_manifest(const std::string& root, const std::vector<ManifestEntry>& entries);
Clip load_corpus_sequence(const std::string& root, const std::string& id, bool with_masks = true);

}  // namespace ctvos
