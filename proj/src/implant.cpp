#include "mg/implant.hpp"

#include "mg/optim.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace mg {

BackdoorTarget make_target(const ImageTensor& x, TargetMode mode) {
    BackdoorTarget t;
    t.mode = mode;
    if (mode == TargetMode::inverted) {
        t.image = ImageTensor(x.channels(), x.height(), x.width());
        t.image.data() = 1.0f - x.data();
        return t;
    }
    const Eigen::Index plane = static_cast<Eigen::Index>(x.height()) * x.width();
    double mu[3];
    for (int c = 0; c < 3; ++c) mu[c] = x.data().segment(c * plane, plane).mean();
    constexpr float primaries[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    int best = 0;
    double best_d = -1.0;
    for (int k = 0; k < 3; ++k) {
        double d = 0.0;
        for (int c = 0; c < 3; ++c) d += (mu[c] - primaries[k][c]) * (mu[c] - primaries[k][c]);
        if (d > best_d + 1e-12) {  // strict improvement keeps (r,g,b) tie order
            best_d = d;
            best = k;
        }
    }
    t.image = ImageTensor(3, x.height(), x.width());
    for (int c = 0; c < 3; ++c)
        t.image.data().segment(c * plane, plane).setConstant(primaries[best][c]);
    return t;
}

LossComponents total_loss(const InpaintModel& model, const ImageTensor& x_clean,
                          const ImageTensor& x_prot, const ProtectionSpec& spec,
                          const BackdoorTarget& target, std::uint64_t iter_seed) {
    spec.validate();
    auto xp = image_node<float>(x_prot, false);
    auto g = build_loss_graph<float>(model, xp, x_clean, spec, target, iter_seed);
    LossComponents c;
    c.implant = g.implant->value[0];
    c.incomplete = g.incomplete ? g.incomplete->value[0] : 0.0;
    c.hide = g.hide ? g.hide->value[0] : 0.0;
    c.total = g.total->value[0];
    c.hide_empty = g.hide_empty;
    return c;
}

ProtectResult optimize(const InpaintModel& model, const ImageTensor& x,
                       const ProtectionSpec& spec) {
    spec.validate();
    if (spec.trigger.height() != x.height() || spec.trigger.width() != x.width())
        throw ShapeError("optimize: trigger/image dimension mismatch");

    ProtectResult result;
    result.untrained_model = !model.trained;

    // The model is frozen: backward never reaches parameter gradients.
    std::vector<bool> saved_flags;
    for (const auto& [name, p] : model.params) saved_flags.push_back(p->requires_grad);
    for (const auto& [name, p] : model.params) p->requires_grad = false;

    const BackdoorTarget target = make_target(x, spec.target_mode);
    const float eps = static_cast<float>(spec.epsilon);

    // Clean-image hide reference, computed once; it does not depend on delta.
    const BinaryMask expanded = expand_mask(spec.trigger, spec.kernel_side);
    const BinaryMask hide_mask = subtract_trigger(expanded, spec.trigger);
    result.hide_region_empty = hide_mask.empty();
    ad::Arr<float> hide_ref;
    if (spec.use_hide && !hide_mask.empty()) {
        auto clean = image_node<float>(x, false);
        hide_ref = forward(model, clean, hide_mask).composited->value;
    }

    auto delta = ad::make_leaf<float>({3, x.height(), x.width()},
                                      ad::Arr<float>::Zero(x.size()), true);
    auto x_const = image_node<float>(x, false);
    Adam<float> opt({delta}, eps / 4.0f);

    for (int k = 1; k <= spec.iterations; ++k) {
        const std::uint64_t iter_seed = Rng::derive(spec.seed, static_cast<std::uint64_t>(k));
        auto x_prot = ad::clamp01(ad::add(x_const, delta));
        auto g = build_loss_graph<float>(model, x_prot, x, spec, target, iter_seed,
                                         hide_ref.size() ? &hide_ref : nullptr);
        LossComponents c;
        c.implant = g.implant->value[0];
        c.incomplete = g.incomplete ? g.incomplete->value[0] : 0.0;
        c.hide = g.hide ? g.hide->value[0] : 0.0;
        c.total = g.total->value[0];
        c.hide_empty = g.hide_empty;
        if (!std::isfinite(c.total))
            throw OptimizeError("optimize: non-finite loss at iteration " + std::to_string(k));
        result.trace.push_back(c);

        ad::backward(g.total);
        opt.step();
        // Project onto the L-inf ball, then keep x + delta inside [0,1].
        delta->value = delta->value.max(-eps).min(eps);
        delta->value = delta->value.max(-x.data()).min(1.0f - x.data());
    }

    std::size_t i = 0;
    for (const auto& [name, p] : model.params) p->requires_grad = saved_flags[i++];

    result.perturbation.channels = 3;
    result.perturbation.height = x.height();
    result.perturbation.width = x.width();
    result.perturbation.delta = delta->value;
    result.perturbation.epsilon = spec.epsilon;
    return result;
}

ImageTensor apply(const ImageTensor& x, const Perturbation& p) {
    if (x.channels() != p.channels || x.height() != p.height || x.width() != p.width)
        throw ShapeError("apply: shape mismatch");
    ImageTensor out(x.channels(), x.height(), x.width());
    out.data() = (x.data() + p.delta).max(0.0f).min(1.0f);
    return out;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("delta: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_delta(const Perturbation& p, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_delta: cannot open '" + path + "'");
    os.write("MGDL", 4);
    put_u32(os, kDeltaVersion);
    put_u32(os, static_cast<std::uint32_t>(p.height));
    put_u32(os, static_cast<std::uint32_t>(p.width));
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(p.delta.data()),
             static_cast<std::streamsize>(p.delta.size() * sizeof(float)));
    if (!os) throw IoError("save_delta: write failed for '" + path + "'");
}

Perturbation load_delta(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_delta: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "MGDL", 4) != 0)
        throw IoError("load_delta: bad magic in '" + path + "'");
    const std::uint32_t version = get_u32(is);
    if (version != kDeltaVersion)
        throw IoError("load_delta: unsupported version " + std::to_string(version));
    Perturbation p;
    p.height = static_cast<int>(get_u32(is));
    p.width = static_cast<int>(get_u32(is));
    p.channels = 3;
    const Eigen::Index n = static_cast<Eigen::Index>(3) * p.height * p.width;
    p.delta.resize(n);
    is.read(reinterpret_cast<char*>(p.delta.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (static_cast<Eigen::Index>(is.gcount()) != n * static_cast<Eigen::Index>(sizeof(float)))
        throw IoError("load_delta: truncated payload");
    p.epsilon = static_cast<double>(p.delta.abs().maxCoeff());
    return p;
}

}  // namespace mg
