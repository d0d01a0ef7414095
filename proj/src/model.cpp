#include "mg/model.hpp"

namespace mg {

ImageTensor predict(const InpaintModel& model, const ImageTensor& x, const BinaryMask& m) {
    auto xn = image_node<float>(x, false);
    auto res = forward(model, xn, m);
    ImageTensor out(3, x.height(), x.width());
    out.data() = res.composited->value;
    return out;
}

Array bottleneck_features(const InpaintModel& model, const ImageTensor& x,
                          const BinaryMask& m) {
    auto xn = image_node<float>(x, false);
    auto res = forward(model, xn, m);
    return res.bottleneck->value;
}

}  // namespace mg
