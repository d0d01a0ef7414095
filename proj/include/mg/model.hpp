#pragma once

#include "mg/autodiff.hpp"
#include "mg/image.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mg {

/// One convolution in the fixed topology.
struct LayerSpec {
    std::string name;
    int in_c, out_c, kernel, stride, pad;
};

/// The editing model: mask-conditioned encoder-decoder. Input is
/// concat(x*(1-m), m); two stride-2 encoder convs, two bottleneck convs,
/// two nearest-upsample+conv decoder blocks, terminal sigmoid. Output is
/// composited so out-of-mask pixels equal the input exactly.
template <class S>
struct ModelT {
    int width_mult = 1;
    bool trained = false;
    std::vector<std::pair<std::string, ad::NodePtr<S>>> params;  // stable order

    ad::NodePtr<S> param(const std::string& name) const {
        for (const auto& [n, p] : params)
            if (n == name) return p;
        throw ParamError("model: unknown parameter '" + name + "'");
    }

    std::vector<ad::NodePtr<S>> param_nodes() const {
        std::vector<ad::NodePtr<S>> out;
        out.reserve(params.size());
        for (const auto& [n, p] : params) out.push_back(p);
        return out;
    }

    Eigen::Index param_count() const {
        Eigen::Index n = 0;
        for (const auto& [name, p] : params) n += p->numel();
        return n;
    }

    void set_requires_grad(bool v) {
        for (auto& [name, p] : params) p->requires_grad = v;
    }
};

using InpaintModel = ModelT<float>;

inline std::vector<LayerSpec> model_layers(int width_mult) {
    const int w16 = 16 * width_mult, w32 = 32 * width_mult;
    return {
        {"enc1", 4, w16, 3, 2, 1},  {"enc2", w16, w32, 3, 2, 1},
        {"mid1", w32, w32, 3, 1, 1}, {"mid2", w32, w32, 3, 1, 1},
        {"dec1", w32, w16, 3, 1, 1}, {"dec2", w16, 3, 3, 1, 1},
    };
}

/// Fan-in-scaled uniform init, deterministic per seed. Biases start at zero.
template <class S>
ModelT<S> init_model(std::uint64_t seed, int width_mult = 1) {
    if (width_mult < 1) throw ParamError("init_model: width_mult must be >= 1");
    ModelT<S> model;
    model.width_mult = width_mult;
    Rng rng(seed);
    for (const auto& l : model_layers(width_mult)) {
        const Eigen::Index wn =
            static_cast<Eigen::Index>(l.out_c) * l.in_c * l.kernel * l.kernel;
        // Kaiming-style uniform bound for the leaky-relu (0.2) chain
        const double bound = std::sqrt(6.0 / ((1.0 + 0.2 * 0.2) * l.in_c * l.kernel * l.kernel));
        ad::Arr<S> w(wn);
        for (Eigen::Index i = 0; i < wn; ++i)
            w[i] = static_cast<S>(rng.next_range(-bound, bound));
        model.params.emplace_back(
            l.name + ".w",
            ad::make_leaf<S>({l.out_c, l.in_c, l.kernel, l.kernel}, std::move(w)));
        model.params.emplace_back(l.name + ".b",
                                  ad::make_leaf<S>({l.out_c}, ad::Arr<S>::Zero(l.out_c)));
    }
    return model;
}

template <class To, class From>
ModelT<To> model_cast(const ModelT<From>& m) {
    ModelT<To> out;
    out.width_mult = m.width_mult;
    out.trained = m.trained;
    for (const auto& [name, p] : m.params)
        out.params.emplace_back(name,
                                ad::make_leaf<To>(p->shape, p->value.template cast<To>()));
    return out;
}

template <class S>
ad::Arr<S> mask_array(const BinaryMask& m) {
    return m.data().template cast<S>();
}

template <class S>
ad::NodePtr<S> image_node(const ImageTensor& img, bool requires_grad = false) {
    return ad::make_leaf<S>({img.channels(), img.height(), img.width()},
                            img.data().template cast<S>(), requires_grad);
}

template <class S>
struct ForwardResult {
    ad::NodePtr<S> raw;         // G(x): the network prediction
    ad::NodePtr<S> composited;  // r = m*G(x) + (1-m)*x
    ad::NodePtr<S> bottleneck;  // activations after the second bottleneck block
};

/// Builds the forward graph for one image node. x must be {3,H,W} with H, W
/// divisible by 4 (two stride-2 levels).
template <class S>
ForwardResult<S> forward(const ModelT<S>& model, const ad::NodePtr<S>& x,
                         const BinaryMask& m) {
    if (x->shape.size() != 3 || x->shape[0] != 3)
        throw ShapeError("forward: expected {3,H,W} input");
    const int H = x->shape[1], W = x->shape[2];
    if (H != m.height() || W != m.width()) throw ShapeError("forward: mask/image mismatch");
    if (H % 4 != 0 || W % 4 != 0)
        throw ShapeError("forward: dimensions must be divisible by 4");

    const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
    ad::Arr<S> keep3(3 * plane);
    ad::Arr<S> mflat = mask_array<S>(m);
    for (int c = 0; c < 3; ++c) keep3.segment(c * plane, plane) = S(1) - mflat;
    auto masked_x = ad::mul_elementwise(x, ad::make_constant<S>(x->shape, std::move(keep3)));
    auto net_in = ad::concat_channels(masked_x, ad::make_constant<S>({1, H, W}, mflat));

    const S slope = S(0.2);
    auto conv = [&](const ad::NodePtr<S>& in, const char* name, int stride) {
        return ad::conv2d(in, model.param(std::string(name) + ".w"),
                          model.param(std::string(name) + ".b"), stride, 1);
    };
    auto h1 = ad::leaky_relu(conv(net_in, "enc1", 2), slope);
    auto h2 = ad::leaky_relu(conv(h1, "enc2", 2), slope);
    auto h3 = ad::leaky_relu(conv(h2, "mid1", 1), slope);
    auto h4 = ad::leaky_relu(conv(h3, "mid2", 1), slope);
    auto h5 = ad::leaky_relu(conv(ad::nearest_upsample2x(h4), "dec1", 1), slope);
    auto raw = ad::sigmoid(conv(ad::nearest_upsample2x(h5), "dec2", 1));

    ad::Arr<S> cover3(3 * plane);
    for (int c = 0; c < 3; ++c) cover3.segment(c * plane, plane) = mflat;
    auto masked_pred =
        ad::mul_elementwise(raw, ad::make_constant<S>(x->shape, std::move(cover3)));
    ad::Arr<S> keep3b(3 * plane);
    for (int c = 0; c < 3; ++c) keep3b.segment(c * plane, plane) = S(1) - mflat;
    auto kept_x = ad::mul_elementwise(x, ad::make_constant<S>(x->shape, std::move(keep3b)));
    ForwardResult<S> res;
    res.raw = raw;
    res.composited = ad::add(masked_pred, kept_x);
    res.bottleneck = h4;
    return res;
}

/// Inference-only prediction: r = composite(G(x,m), x, m).
ImageTensor predict(const InpaintModel& model, const ImageTensor& x, const BinaryMask& m);

/// Bottleneck activations for an image/mask pair, forward only.
Array bottleneck_features(const InpaintModel& model, const ImageTensor& x,
                          const BinaryMask& m);

}  // namespace mg
