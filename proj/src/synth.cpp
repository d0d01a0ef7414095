#include "mg/synth.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mg {

namespace {

using Color = std::array<float, 3>;

Color jitter(const Color& c, Rng& rng, float amount = 0.08f) {
    Color out;
    for (int k = 0; k < 3; ++k)
        out[k] = std::clamp(c[k] + rng.next_range(-amount, amount), 0.0f, 1.0f);
    return out;
}

void blend_pixel(ImageTensor& img, int i, int j, const Color& c, float alpha) {
    for (int k = 0; k < 3; ++k)
        img.at(k, i, j) = std::clamp((1.0f - alpha) * img.at(k, i, j) + alpha * c[k],
                                     0.0f, 1.0f);
}

// 8x8 glyph bitmaps, row-major, MSB left.
constexpr std::array<std::array<std::uint8_t, 8>, 4> kGlyphs{{
    {0x3C, 0x66, 0x60, 0x60, 0x60, 0x66, 0x3C, 0x00},  // C
    {0x66, 0x66, 0x66, 0x7E, 0x66, 0x66, 0x66, 0x00},  // H
    {0x7E, 0x18, 0x18, 0x18, 0x18, 0x18, 0x7E, 0x00},  // I
    {0x81, 0x42, 0x24, 0x18, 0x18, 0x24, 0x42, 0x81},  // X
}};

}  // namespace

std::vector<Color> SceneSpec::default_palette() {
    return {{0.85f, 0.25f, 0.20f}, {0.20f, 0.65f, 0.30f}, {0.20f, 0.35f, 0.80f},
            {0.90f, 0.75f, 0.20f}, {0.60f, 0.30f, 0.70f}, {0.25f, 0.70f, 0.70f},
            {0.95f, 0.55f, 0.25f}};
}

ImageTensor generate_scene(const SceneSpec& spec) {
    if (spec.size % 4 != 0) throw ParamError("generate_scene: size must be divisible by 4");
    if (spec.palette.empty()) throw ParamError("generate_scene: empty palette");
    Rng rng(spec.seed);
    const int n = spec.size;
    ImageTensor img(3, n, n);

    const Color bg1 = jitter(spec.palette[rng.next_int(0, int(spec.palette.size()) - 1)], rng);
    if (spec.background == BackgroundMode::flat) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) blend_pixel(img, i, j, bg1, 1.0f);
    } else {
        const Color bg2 =
            jitter(spec.palette[rng.next_int(0, int(spec.palette.size()) - 1)], rng);
        const double theta = rng.next_double() * 2.0 * M_PI;
        const double di = std::cos(theta), dj = std::sin(theta);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double t = 0.5 + ((i - n / 2.0) * di + (j - n / 2.0) * dj) / (1.5 * n);
                const float tc = static_cast<float>(std::clamp(t, 0.0, 1.0));
                Color c;
                for (int k = 0; k < 3; ++k) c[k] = (1.0f - tc) * bg1[k] + tc * bg2[k];
                blend_pixel(img, i, j, c, 1.0f);
            }
        }
    }

    const int shapes = rng.next_int(spec.min_shapes, spec.max_shapes);
    for (int s = 0; s < shapes; ++s) {
        const Color c =
            jitter(spec.palette[rng.next_int(0, int(spec.palette.size()) - 1)], rng);
        const bool disk = rng.next_double() < 0.5;
        if (disk) {
            const float r = rng.next_range(n / 10.0f, n / 4.0f);
            const float ci = rng.next_range(0.0f, float(n)), cj = rng.next_range(0.0f, float(n));
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    const float d = std::hypot(i + 0.5f - ci, j + 0.5f - cj);
                    const float a = std::clamp(r + 0.5f - d, 0.0f, 1.0f);
                    if (a > 0.0f) blend_pixel(img, i, j, c, a);
                }
            }
        } else {
            const float h = rng.next_range(n / 8.0f, n / 2.5f);
            const float w = rng.next_range(n / 8.0f, n / 2.5f);
            const float i0 = rng.next_range(-h / 2, n - h / 2), j0 = rng.next_range(-w / 2, n - w / 2);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    const float ai =
                        std::clamp(std::min(i + 0.5f - i0, i0 + h - i - 0.5f) + 0.5f, 0.0f, 1.0f);
                    const float aj =
                        std::clamp(std::min(j + 0.5f - j0, j0 + w - j - 0.5f) + 0.5f, 0.0f, 1.0f);
                    const float a = ai * aj;
                    if (a > 0.0f) blend_pixel(img, i, j, c, a);
                }
            }
        }
    }

    // High-contrast glyph patch near the center: the protected content.
    const auto& glyph = kGlyphs[rng.next_int(0, int(kGlyphs.size()) - 1)];
    const int cell = std::max(1, n / 48);          // pixels per glyph bit
    const int patch = 10 * cell;                   // glyph plus border
    const int jitter_px = std::max(1, n / 32);
    const int pi = n / 2 - patch / 2 + rng.next_int(-jitter_px, jitter_px);
    const int pj = n / 2 - patch / 2 + rng.next_int(-jitter_px, jitter_px);
    const bool dark_on_light = rng.next_double() < 0.5;
    const Color fg = dark_on_light ? Color{0.05f, 0.05f, 0.05f} : Color{0.97f, 0.97f, 0.97f};
    const Color bg = dark_on_light ? Color{0.95f, 0.95f, 0.92f} : Color{0.08f, 0.08f, 0.10f};
    for (int i = 0; i < patch; ++i) {
        for (int j = 0; j < patch; ++j) {
            const int ii = pi + i, jj = pj + j;
            if (ii < 0 || ii >= n || jj < 0 || jj >= n) continue;
            const int gi = i / cell - 1, gj = j / cell - 1;
            bool on = false;
            if (gi >= 0 && gi < 8 && gj >= 0 && gj < 8)
                on = (glyph[static_cast<std::size_t>(gi)] >> (7 - gj)) & 1;
            blend_pixel(img, ii, jj, on ? fg : bg, 1.0f);
        }
    }
    return img;
}

BinaryMask random_rect_mask(std::uint64_t seed, int size, double cov_lo, double cov_hi) {
    if (!(cov_lo > 0.0 && cov_lo <= cov_hi && cov_hi < 1.0))
        throw ParamError("random_rect_mask: invalid coverage range");
    Rng rng(seed);
    const double area = rng.next_range(static_cast<float>(cov_lo), static_cast<float>(cov_hi)) *
                        size * size;
    // Pick (h, w) whose product is as close to the drawn area as achievable,
    // tie-broken toward a randomly drawn aspect ratio.
    const double aspect = std::exp(rng.next_range(-0.7f, 0.7f));
    const double ideal_h = std::clamp(std::sqrt(area * aspect), 1.0, double(size));
    int best_h = 1, best_w = 1;
    double best_err = 1e30, best_dist = 1e30;
    for (int h = std::max(1, int(std::ceil(area / size))); h <= size; ++h) {
        const int w = std::clamp(int(std::lround(area / h)), 1, size);
        const double err = std::abs(double(h) * w - area);
        const double dist = std::abs(h - ideal_h);
        if (err < best_err - 1e-9 || (std::abs(err - best_err) <= 1e-9 && dist < best_dist)) {
            best_err = err;
            best_dist = dist;
            best_h = h;
            best_w = w;
        }
    }
    const int i0 = rng.next_int(0, size - best_h);
    const int j0 = rng.next_int(0, size - best_w);
    return rect_mask(size, size, i0, j0, best_h, best_w);
}

DatasetManifest make_manifest(std::uint64_t seed, int count, int size) {
    if (count <= 0) throw ParamError("make_manifest: count must be positive");
    DatasetManifest m;
    m.base.size = size;
    for (int i = 0; i < count; ++i) m.seeds.push_back(Rng::derive(seed, std::uint64_t(i)));
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = m.schema_version;
    j["size"] = m.base.size;
    j["min_shapes"] = m.base.min_shapes;
    j["max_shapes"] = m.base.max_shapes;
    j["background"] = m.base.background == BackgroundMode::flat ? "flat" : "gradient";
    j["palette"] = m.base.palette;
    j["seeds"] = m.seeds;
    std::ofstream os(path);
    if (!os) throw IoError("save_manifest: cannot open '" + path + "'");
    os << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("load_manifest: cannot open '" + path + "'");
    nlohmann::json j;
    is >> j;
    DatasetManifest m;
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != 1) throw IoError("load_manifest: unsupported schema_version");
    m.base.size = j.at("size").get<int>();
    m.base.min_shapes = j.at("min_shapes").get<int>();
    m.base.max_shapes = j.at("max_shapes").get<int>();
    m.base.background = j.at("background").get<std::string>() == "flat"
                            ? BackgroundMode::flat
                            : BackgroundMode::gradient;
    m.base.palette = j.at("palette").get<std::vector<std::array<float, 3>>>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    return m;
}

std::vector<ImageTensor> generate_dataset(const DatasetManifest& m) {
    std::vector<ImageTensor> out;
    out.reserve(m.seeds.size());
    for (std::size_t i = 0; i < m.seeds.size(); ++i)
        out.push_back(generate_scene(m.scene_spec(i)));
    return out;
}

}  // namespace mg
