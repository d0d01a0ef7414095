#include "mg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mg {

namespace {

void check_pair(const ImageTensor& a, const ImageTensor& b, const BinaryMask* region) {
    if (!a.same_shape(b)) throw ShapeError("metric: image shape mismatch");
    if (region && (region->height() != a.height() || region->width() != a.width()))
        throw ShapeError("metric: region shape mismatch");
    if (region && region->empty()) throw ParamError("metric: empty region");
}

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> luminance(const ImageTensor& img) {
    const Eigen::Index plane = static_cast<Eigen::Index>(img.height()) * img.width();
    std::vector<double> lum(static_cast<std::size_t>(plane));
    for (Eigen::Index k = 0; k < plane; ++k)
        lum[static_cast<std::size_t>(k)] =
            (double(img.data()[k]) + img.data()[plane + k] + img.data()[2 * plane + k]) / 3.0;
    return lum;
}

}  // namespace

MetricValue psnr(const ImageTensor& a, const ImageTensor& b, const BinaryMask* region) {
    check_pair(a, b, region);
    const Eigen::Index plane = static_cast<Eigen::Index>(a.height()) * a.width();
    double se = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index k = 0; k < plane; ++k) {
        if (region && region->data()[k] == 0.0f) continue;
        ++count;
        for (int c = 0; c < a.channels(); ++c) {
            const double d = double(a.data()[c * plane + k]) - b.data()[c * plane + k];
            se += d * d;
        }
    }
    const double mse = se / (double(count) * a.channels());
    MetricValue v;
    v.name = "psnr";
    v.region = region ? Region::masked : Region::full;
    v.pixels = count;
    v.value = mse < 1e-10 ? 100.0 : std::min(100.0, 10.0 * std::log10(1.0 / mse));
    return v;
}

MetricValue ssim(const ImageTensor& a, const ImageTensor& b, const BinaryMask* region) {
    check_pair(a, b, region);
    const int H = a.height(), W = a.width();
    if (H < kWin || W < kWin) throw ParamError("ssim: image smaller than window");
    const int half = kWin / 2;
    static const auto kernel = [] {
        std::array<double, kWin * kWin> k{};
        for (int i = 0; i < kWin; ++i)
            for (int j = 0; j < kWin; ++j)
                k[std::size_t(i * kWin + j)] = std::exp(
                    -((i - half) * (i - half) + (j - half) * (j - half)) / (2.0 * kSigma * kSigma));
        return k;
    }();

    const auto la = luminance(a), lb = luminance(b);
    double acc = 0.0;
    Eigen::Index count = 0;
    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            if (region && region->at(i, j) == 0.0f) continue;
            double wsum = 0, ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
            for (int di = -half; di <= half; ++di) {
                const int ii = i + di;
                if (ii < 0 || ii >= H) continue;
                for (int dj = -half; dj <= half; ++dj) {
                    const int jj = j + dj;
                    if (jj < 0 || jj >= W) continue;
                    const double w = kernel[std::size_t((di + half) * kWin + dj + half)];
                    const double va = la[std::size_t(ii * W + jj)];
                    const double vb = lb[std::size_t(ii * W + jj)];
                    wsum += w;
                    ma += w * va;
                    mb += w * vb;
                    maa += w * va * va;
                    mbb += w * vb * vb;
                    mab += w * va * vb;
                }
            }
            ma /= wsum;
            mb /= wsum;
            // raw (unclamped) moments keep cov and var consistent, so
            // ssim(x, x) is exactly 1; C2 dwarfs any negative rounding residue
            const double var_a = maa / wsum - ma * ma;
            const double var_b = mbb / wsum - mb * mb;
            const double cov = mab / wsum - ma * mb;
            acc += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
                   ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
            ++count;
        }
    }
    MetricValue v;
    v.name = "ssim";
    v.region = region ? Region::masked : Region::full;
    v.pixels = count;
    v.value = acc / double(count);
    return v;
}

MetricValue featdist(const InpaintModel& model, const ImageTensor& a, const ImageTensor& b,
                     const BinaryMask* region) {
    check_pair(a, b, region);
    // The network sees x*(1-m); with m = complement(region) only the region
    // content is visible. Full image: m = 0 everywhere.
    BinaryMask hide(a.height(), a.width());
    if (region) hide.data() = 1.0f - region->data();
    const Array fa = bottleneck_features(model, a, hide);
    const Array fb = bottleneck_features(model, b, hide);
    MetricValue v;
    v.name = "featdist";
    v.region = region ? Region::masked : Region::full;
    v.pixels = region ? region->count()
                      : static_cast<Eigen::Index>(a.height()) * a.width();
    v.value = std::sqrt(double((fa - fb).square().sum()));
    v.warning = !model.trained;
    return v;
}

}  // namespace mg
