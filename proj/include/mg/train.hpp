#pragma once

#include "mg/model.hpp"
#include "mg/synth.hpp"

#include <vector>

namespace mg {

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    int epochs = 120;
    int batch_size = 8;
    float learning_rate = 1e-3f;
    double cov_lo = 0.05;  // mask coverage range, area fractions
    double cov_hi = 0.10;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(cov_lo > 0.0 && cov_lo <= cov_hi && cov_hi < 1.0))
            throw ParamError("TrainConfig: invalid coverage range");
        if (learning_rate <= 0.0f) throw ParamError("TrainConfig: learning rate must be > 0");
        if (epochs < 0 || batch_size < 1) throw ParamError("TrainConfig: bad epochs/batch");
    }
};

/// Minimizes full-image MSE between each scene and its inpainted composite
/// under fresh random rectangle masks per step (equals masked-region MSE,
/// since the composite matches the input outside the mask). Returns the
/// per-epoch mean loss trace. Throws TrainError with the epoch index if the
/// loss goes non-finite.
std::vector<double> train(InpaintModel& model, const std::vector<ImageTensor>& scenes,
                          const TrainConfig& cfg);

struct ReconScore {
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
};

/// Masked-region PSNR/SSIM of predictions against ground truth, averaged
/// over the dataset with per-scene masks derived from `seed`.
ReconScore evaluate_recon(const InpaintModel& model, const std::vector<ImageTensor>& scenes,
                          std::uint64_t seed, double cov_lo = 0.05, double cov_hi = 0.10);

}  // namespace mg
