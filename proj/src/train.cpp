#include "mg/train.hpp"

#include "mg/metrics.hpp"
#include "mg/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mg {

std::vector<double> train(InpaintModel& model, const std::vector<ImageTensor>& scenes,
                          const TrainConfig& cfg) {
    cfg.validate();
    if (scenes.empty()) throw ParamError("train: empty dataset");
    Adam<float> opt(model.param_nodes(), cfg.learning_rate);
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(cfg.epochs));
    std::uint64_t mask_counter = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(scenes.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(Rng::derive(cfg.seed, 0x50000000ULL + static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(
                                        shuffle_rng.next_int(0, static_cast<int>(i) - 1))]);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            ad::NodePtr<float> total;
            for (std::size_t k = start; k < end; ++k) {
                const ImageTensor& x = scenes[order[k]];
                const BinaryMask m = random_rect_mask(
                    Rng::derive(cfg.seed, 0x7a5c0000ULL + mask_counter++), x.height(),
                    cfg.cov_lo, cfg.cov_hi);
                auto xn = image_node<float>(x, false);
                auto res = forward(model, xn, m);
                auto loss = ad::mse(res.composited, xn);
                total = total ? ad::add(total, loss) : loss;
            }
            total = ad::scale(total, 1.0f / static_cast<float>(end - start));
            if (!std::isfinite(total->value[0]))
                throw TrainError("train: non-finite loss at epoch " + std::to_string(epoch));
            ad::backward(total);
            opt.step();
            epoch_loss += total->value[0];
            ++batches;
        }
        trace.push_back(epoch_loss / static_cast<double>(batches));
    }
    if (cfg.epochs > 0) model.trained = true;
    return trace;
}

ReconScore evaluate_recon(const InpaintModel& model, const std::vector<ImageTensor>& scenes,
                          std::uint64_t seed, double cov_lo, double cov_hi) {
    if (scenes.empty()) throw ParamError("evaluate_recon: empty dataset");
    ReconScore score;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const BinaryMask m =
            random_rect_mask(Rng::derive(seed, i), scenes[i].height(), cov_lo, cov_hi);
        const ImageTensor pred = predict(model, scenes[i], m);
        score.psnr_mean += psnr(pred, scenes[i], &m).value;
        score.ssim_mean += ssim(pred, scenes[i], &m).value;
    }
    score.psnr_mean /= static_cast<double>(scenes.size());
    score.ssim_mean /= static_cast<double>(scenes.size());
    return score;
}

}  // namespace mg
