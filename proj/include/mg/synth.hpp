#pragma once

#include "mg/image.hpp"

#include <array>
#include <string>
#include <vector>

namespace mg {

enum class BackgroundMode { flat, gradient };

/// Recipe for one procedural scene; same spec gives a bit-identical image.
struct SceneSpec {
    std::uint64_t seed = 0;
    int size = 64;
    int min_shapes = 2;
    int max_shapes = 6;
    BackgroundMode background = BackgroundMode::gradient;
    std::vector<std::array<float, 3>> palette = default_palette();

    static std::vector<std::array<float, 3>> default_palette();
};

/// Background plus 2-6 anti-aliased rectangles/disks plus one high-contrast
/// glyph patch near the center (the natural protected content).
ImageTensor generate_scene(const SceneSpec& spec);

/// One axis-aligned rectangle whose area fraction is drawn uniformly from
/// [lo, hi]; the realized pixel count matches the drawn target to within
/// rounding of the closest achievable h*w.
BinaryMask random_rect_mask(std::uint64_t seed, int size, double cov_lo, double cov_hi);

/// Dataset = shared scene parameters plus one seed per scene; reproducible
/// from this manifest alone.
struct DatasetManifest {
    int schema_version = 1;
    SceneSpec base;  // seed field unused; per-scene seeds below
    std::vector<std::uint64_t> seeds;

    SceneSpec scene_spec(std::size_t i) const {
        SceneSpec s = base;
        s.seed = seeds.at(i);
        return s;
    }
};

DatasetManifest make_manifest(std::uint64_t seed, int count, int size);
void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

std::vector<ImageTensor> generate_dataset(const DatasetManifest& m);

}  // namespace mg
