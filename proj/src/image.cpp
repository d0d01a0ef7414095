#include "mg/image.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mg {

ImageTensor composite(const ImageTensor& pred, const ImageTensor& x, const BinaryMask& m) {
    if (!pred.same_shape(x) || pred.height() != m.height() || pred.width() != m.width())
        throw ShapeError("composite: dimension mismatch");
    ImageTensor r(pred.channels(), pred.height(), pred.width());
    const Eigen::Index plane = static_cast<Eigen::Index>(pred.height()) * pred.width();
    for (int c = 0; c < pred.channels(); ++c) {
        r.data().segment(c * plane, plane) =
            m.data() * pred.data().segment(c * plane, plane) +
            (1.0f - m.data()) * x.data().segment(c * plane, plane);
    }
    return r;
}

BinaryMask expand_mask(const BinaryMask& m, int kernel_side) {
    if (kernel_side < 1 || kernel_side % 2 == 0)
        throw ParamError("expand_mask: kernel_side must be odd and >= 1");
    const int pad = (kernel_side - 1) / 2;
    BinaryMask out(m.height(), m.width());
    for (int i = 0; i < m.height(); ++i) {
        for (int j = 0; j < m.width(); ++j) {
            float acc = 0.0f;
            const int i0 = std::max(0, i - pad), i1 = std::min(m.height() - 1, i + pad);
            const int j0 = std::max(0, j - pad), j1 = std::min(m.width() - 1, j + pad);
            for (int ii = i0; ii <= i1 && acc == 0.0f; ++ii)
                for (int jj = j0; jj <= j1; ++jj) acc += m.at(ii, jj);
            out.at(i, j) = acc > 0.0f ? 1.0f : 0.0f;
        }
    }
    return out;
}

BinaryMask subtract_trigger(const BinaryMask& e, const BinaryMask& t) {
    if (!e.same_shape(t)) throw ShapeError("subtract_trigger: dimension mismatch");
    BinaryMask out(e.height(), e.width());
    out.data() = (e.data() - t.data()).max(0.0f).min(1.0f);
    return out;
}

BinaryMask sample_incomplete(const BinaryMask& e, double fraction, std::uint64_t seed,
                             SampleMode mode) {
    if (fraction < 0.0 || fraction > 1.0)
        throw ParamError("sample_incomplete: fraction outside [0,1]");
    BinaryMask out(e.height(), e.width());
    Rng rng(seed);
    if (mode == SampleMode::bernoulli) {
        for (Eigen::Index k = 0; k < e.size(); ++k) {
            if (e.data()[k] != 0.0f && rng.next_double() < fraction) out.data()[k] = 1.0f;
        }
        return out;
    }
    // half_plane: keep pixels on one side of a random line through the centroid.
    double ci = 0.0, cj = 0.0, n = 0.0;
    for (int i = 0; i < e.height(); ++i)
        for (int j = 0; j < e.width(); ++j)
            if (e.at(i, j) != 0.0f) { ci += i; cj += j; n += 1.0; }
    if (n == 0.0) return out;
    ci /= n;
    cj /= n;
    const double theta = rng.next_double() * 2.0 * M_PI;
    const double ni = std::cos(theta), nj = std::sin(theta);
    for (int i = 0; i < e.height(); ++i)
        for (int j = 0; j < e.width(); ++j)
            if (e.at(i, j) != 0.0f && (i - ci) * ni + (j - cj) * nj >= 0.0) out.at(i, j) = 1.0f;
    if (fraction == 0.0) out.data().setZero();
    if (fraction == 1.0) out.data() = e.data();
    return out;
}

BinaryMask rect_mask(int height, int width, int i0, int j0, int rect_h, int rect_w) {
    if (i0 < 0 || j0 < 0 || rect_h <= 0 || rect_w <= 0 || i0 + rect_h > height ||
        j0 + rect_w > width)
        throw ParamError("rect_mask: rectangle out of bounds");
    BinaryMask out(height, width);
    for (int i = i0; i < i0 + rect_h; ++i)
        for (int j = j0; j < j0 + rect_w; ++j) out.at(i, j) = 1.0f;
    return out;
}

}  // namespace mg
