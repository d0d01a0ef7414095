#pragma once

#include "mg/image.hpp"
#include "mg/model.hpp"

#include <string>

namespace mg {

enum class Region { full, masked };

struct MetricValue {
    std::string name;  // psnr | ssim | featdist
    double value = 0.0;
    Region region = Region::full;
    Eigen::Index pixels = 0;
    bool warning = false;  // e.g. featdist on an untrained model
};

/// 10*log10(1/MSE) with peak 1, over region pixels (all channels); capped at
/// 100 dB when MSE < 1e-10. region == nullptr means full image.
MetricValue psnr(const ImageTensor& a, const ImageTensor& b,
                 const BinaryMask* region = nullptr);

/// Mean SSIM on luminance (unweighted RGB mean), 11x11 Gaussian window
/// sigma 1.5, C1 = 0.01^2, C2 = 0.03^2. Window weights renormalize at image
/// borders. Averaged over pixels whose window center lies in the region.
MetricValue ssim(const ImageTensor& a, const ImageTensor& b,
                 const BinaryMask* region = nullptr);

/// L2 distance between the model's bottleneck activations of a and b with
/// only the region content visible to the network (full = whole image).
/// A stand-in perceptual distance; not LPIPS.
MetricValue featdist(const InpaintModel& model, const ImageTensor& a, const ImageTensor& b,
                     const BinaryMask* region = nullptr);

}  // namespace mg
