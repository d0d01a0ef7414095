#pragma once

#include "mg/image.hpp"
#include "mg/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mg {

struct OptimizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TargetMode { pure_color, inverted };

struct BackdoorTarget {
    ImageTensor image;  // the distorted output the edit should collapse toward
    TargetMode mode = TargetMode::pure_color;
};

/// pure_color: constant image of the primary color (red, green, blue)
/// farthest in L2 from the per-channel mean of x, ties broken in that order.
/// inverted: 1 - x.
BackdoorTarget make_target(const ImageTensor& x, TargetMode mode);

struct ProtectionSpec {
    BinaryMask trigger;
    double epsilon = 6.0 / 255.0;
    int iterations = 20;
    double hide_weight = 2.0;
    int kernel_side = 7;
    double fraction = 0.5;  // incomplete-trigger retention
    TargetMode target_mode = TargetMode::pure_color;
    std::uint64_t seed = 0;
    bool use_incomplete = true;  // ablation switches; both on by default
    bool use_hide = true;

    void validate() const {
        if (epsilon <= 0.0 || epsilon > 1.0) throw ParamError("ProtectionSpec: bad epsilon");
        if (iterations < 0) throw ParamError("ProtectionSpec: negative iterations");
        if (hide_weight < 0.0) throw ParamError("ProtectionSpec: negative hide_weight");
        if (fraction < 0.0 || fraction > 1.0)
            throw ParamError("ProtectionSpec: fraction outside [0,1]");
        if (trigger.empty()) throw ParamError("ProtectionSpec: empty trigger");
    }
};

/// Additive noise with max|delta| <= epsilon; clamp(x + delta) stays in [0,1].
struct Perturbation {
    int channels = 3, height = 0, width = 0;
    Array delta;
    double epsilon = 0.0;
};

struct LossComponents {
    double implant = 0.0;
    double incomplete = 0.0;
    double hide = 0.0;
    double total = 0.0;
    bool hide_empty = false;  // expansion added nothing; hide term defined as 0
};

template <class S>
struct LossGraph {
    ad::NodePtr<S> total;
    ad::NodePtr<S> implant;
    ad::NodePtr<S> incomplete;  // null when disabled or the draw came up empty
    ad::NodePtr<S> hide;        // null when disabled or E' is empty
    bool hide_empty = false;
    bool incomplete_empty = false;
};

/// Builds the Eq.-style three-part objective over a protected-image node:
/// implant drives the trigger edit toward the target, incomplete does the
/// same for a random partial trigger, hide pins non-trigger edits to the
/// clean-image result. All terms are restricted to their edit masks.
/// hide_ref, when given, is the precomputed clean-image edit on E'
/// (it does not depend on the perturbation).
template <class S>
LossGraph<S> build_loss_graph(const ModelT<S>& model, const ad::NodePtr<S>& x_prot,
                              const ImageTensor& x_clean, const ProtectionSpec& spec,
                              const BackdoorTarget& target, std::uint64_t iter_seed,
                              const ad::Arr<S>* hide_ref = nullptr) {
    const BinaryMask& trig = spec.trigger;
    const BinaryMask expanded = expand_mask(trig, spec.kernel_side);
    auto target_node = image_node<S>(target.image, false);

    LossGraph<S> g;
    auto r_trig = forward(model, x_prot, trig).composited;
    g.implant = ad::masked_mse(r_trig, target_node, mask_array<S>(trig));
    g.total = g.implant;

    if (spec.use_incomplete) {
        const BinaryMask inc = sample_incomplete(expanded, spec.fraction, iter_seed);
        if (inc.empty()) {
            g.incomplete_empty = true;
        } else {
            auto r_inc = forward(model, x_prot, inc).composited;
            g.incomplete = ad::masked_mse(r_inc, target_node, mask_array<S>(inc));
            g.total = ad::add(g.total, g.incomplete);
        }
    }

    if (spec.use_hide) {
        const BinaryMask hide_mask = subtract_trigger(expanded, trig);
        if (hide_mask.empty()) {
            g.hide_empty = true;
        } else {
            ad::Arr<S> ref;
            if (hide_ref) {
                ref = *hide_ref;
            } else {
                auto clean = image_node<S>(x_clean, false);
                ref = forward(model, clean, hide_mask).composited->value;
            }
            auto ref_node = ad::make_constant<S>(x_prot->shape, std::move(ref));
            auto r_hide = forward(model, x_prot, hide_mask).composited;
            g.hide = ad::masked_mse(r_hide, ref_node, mask_array<S>(hide_mask));
            g.total = ad::add(g.total, ad::scale(g.hide, static_cast<S>(spec.hide_weight)));
        }
    }
    return g;
}

/// Evaluates the three-part objective at a fixed protected image (no
/// gradient). iter_seed drives the incomplete-trigger draw.
LossComponents total_loss(const InpaintModel& model, const ImageTensor& x_clean,
                          const ImageTensor& x_prot, const ProtectionSpec& spec,
                          const BackdoorTarget& target, std::uint64_t iter_seed);

struct ProtectResult {
    Perturbation perturbation;
    std::vector<LossComponents> trace;  // loss at the start of each iteration
    bool untrained_model = false;
    bool hide_region_empty = false;
};

/// Optimizes delta from zero with Adam (learning rate epsilon/4), projecting
/// to the L-inf ball and the valid image range every step. The incomplete
/// trigger is resampled each iteration from (spec.seed, iteration). Model
/// parameters are not modified.
ProtectResult optimize(const InpaintModel& model, const ImageTensor& x,
                       const ProtectionSpec& spec);

/// clamp(x + delta, 0, 1).
ImageTensor apply(const ImageTensor& x, const Perturbation& p);

// Sidecar format for the unquantized perturbation: 16-byte header
// ("MGDL", u32 version, u32 H, u32 W, little-endian) then 3*H*W float32.
inline constexpr std::uint32_t kDeltaVersion = 1;
void save_delta(const Perturbation& p, const std::string& path);
Perturbation load_delta(const std::string& path);

}  // namespace mg
