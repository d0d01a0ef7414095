#include "mg/gradcheck.hpp"
#include "mg/harness.hpp"
#include "mg/implant.hpp"
#include "mg/synth.hpp"
#include "mg/train.hpp"

#include <doctest.h>

#include <array>
#include <filesystem>
#include <fstream>

using namespace mg;

namespace {

ImageTensor constant_image(int size, float r, float g, float b) {
    ImageTensor img(3, size, size);
    const Eigen::Index plane = static_cast<Eigen::Index>(size) * size;
    img.data().segment(0, plane).setConstant(r);
    img.data().segment(plane, plane).setConstant(g);
    img.data().segment(2 * plane, plane).setConstant(b);
    return img;
}

// small model trained just enough to give the optimizer real gradients
const InpaintModel& toy_model() {
    static InpaintModel model = [] {
        const auto data = generate_dataset(make_manifest(31, 16, 32));
        auto m = init_model<float>(1);
        TrainConfig cfg;
        cfg.epochs = 6;
        cfg.batch_size = 4;
        cfg.seed = 17;
        train(m, data, cfg);
        return m;
    }();
    return model;
}

ProtectionSpec toy_spec(std::uint64_t seed = 0) {
    ProtectionSpec spec;
    spec.trigger = default_trigger(32);
    spec.seed = seed;
    return spec;
}

ImageTensor toy_scene(std::uint64_t seed) {
    SceneSpec s;
    s.size = 32;
    s.seed = seed;
    return generate_scene(s);
}

}  // namespace

TEST_CASE("pure-color target picks the primary farthest from the mean color") {
    // mean (0.5, 0.5, 0.0): blue is farthest
    auto t = make_target(constant_image(8, 0.5f, 0.5f, 0.0f), TargetMode::pure_color);
    CHECK(t.image.at(0, 0, 0) == 0.0f);
    CHECK(t.image.at(1, 0, 0) == 0.0f);
    CHECK(t.image.at(2, 0, 0) == 1.0f);
    // mean (1, 0, 0): green and blue tie at sqrt(2); order breaks toward green
    t = make_target(constant_image(8, 1.0f, 0.0f, 0.0f), TargetMode::pure_color);
    CHECK(t.image.at(1, 0, 0) == 1.0f);
    CHECK(t.image.at(0, 0, 0) == 0.0f);
    CHECK(t.image.at(2, 0, 0) == 0.0f);
    // gray: all three tie; red wins
    t = make_target(constant_image(8, 0.5f, 0.5f, 0.5f), TargetMode::pure_color);
    CHECK(t.image.at(0, 0, 0) == 1.0f);
}

TEST_CASE("pure-color target agrees with a brute-force search over random means") {
    Rng rng(50);
    for (int trial = 0; trial < 100; ++trial) {
        const float r = rng.next_float(), g = rng.next_float(), b = rng.next_float();
        const ImageTensor x = constant_image(4, r, g, b);
        const auto t = make_target(x, TargetMode::pure_color);
        const std::array<std::array<float, 3>, 3> prim{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
        int best = 0;
        double best_d = -1.0;
        for (int p = 0; p < 3; ++p) {
            const double d = (prim[p][0] - r) * (prim[p][0] - r) +
                             (prim[p][1] - g) * (prim[p][1] - g) +
                             (prim[p][2] - b) * (prim[p][2] - b);
            if (d > best_d + 1e-12) {
                best_d = d;
                best = p;
            }
        }
        for (int c = 0; c < 3; ++c) CHECK(t.image.at(c, 0, 0) == prim[best][c]);
    }
}

TEST_CASE("inverted target is the photographic negative") {
    const ImageTensor x = constant_image(8, 0.2f, 0.7f, 1.0f);
    const auto t = make_target(x, TargetMode::inverted);
    CHECK(t.image.at(0, 0, 0) == doctest::Approx(0.8f));
    CHECK(t.image.at(1, 0, 0) == doctest::Approx(0.3f));
    CHECK(t.image.at(2, 0, 0) == doctest::Approx(0.0f));
}

TEST_CASE("hide term vanishes on the clean image; components recombine to the total") {
    const auto& model = toy_model();
    const ImageTensor x = toy_scene(1);
    const auto spec = toy_spec();
    const auto target = make_target(x, TargetMode::pure_color);
    const LossComponents lc = total_loss(model, x, x, spec, target, 3);
    CHECK(lc.hide == 0.0);
    CHECK(lc.implant > 0.0);
    CHECK(lc.total ==
          doctest::Approx(lc.implant + lc.incomplete + spec.hide_weight * lc.hide)
              .epsilon(1e-6));

    // and on a genuinely perturbed image the hide term engages
    ImageTensor shifted = x;
    shifted.data() = (shifted.data() + 0.02f).min(1.0f);
    const LossComponents lc2 = total_loss(model, x, shifted, spec, target, 3);
    CHECK(lc2.hide > 0.0);
}

TEST_CASE("implant term only sees the trigger region") {
    const auto& model = toy_model();
    const ImageTensor x = toy_scene(2);
    auto spec = toy_spec();
    spec.use_incomplete = false;
    spec.use_hide = false;
    auto target = make_target(x, TargetMode::pure_color);
    const double before = total_loss(model, x, x, spec, target, 0).implant;
    // rewrite the target outside the trigger; the loss must not move
    const Eigen::Index plane = 32 * 32;
    for (int c = 0; c < 3; ++c)
        for (Eigen::Index k = 0; k < plane; ++k)
            if (spec.trigger.data()[k] == 0.0f) target.image.data()[c * plane + k] = 0.123f;
    const double after = total_loss(model, x, x, spec, target, 0).implant;
    CHECK(before == after);
}

TEST_CASE("objective gradient w.r.t. the perturbation passes finite differences") {
    const auto dmodel = model_cast<double>(init_model<float>(12));
    SceneSpec s;
    s.size = 8;
    s.seed = 5;
    const ImageTensor x = generate_scene(s);
    ProtectionSpec spec;
    spec.trigger = BinaryMask(8, 8);
    for (int i = 3; i < 5; ++i)
        for (int j = 3; j < 5; ++j) spec.trigger.at(i, j) = 1.0f;
    spec.kernel_side = 3;
    const auto target = make_target(x, TargetMode::pure_color);

    ad::Arr<double> d0 = ad::Arr<double>::Zero(3 * 64);
    Rng rng(6);
    for (Eigen::Index k = 0; k < d0.size(); ++k)
        d0[k] = 0.01 * (rng.next_double() - 0.5);
    auto delta = ad::make_leaf<double>({3, 8, 8}, std::move(d0), true);
    ad::Arr<double> xv = x.data().cast<double>();
    // keep clamp01 away from its kinks so the finite differences are clean
    xv = xv.min(0.9).max(0.1);
    ImageTensor x_interior = x;
    x_interior.data() = xv.cast<float>();
    auto x_node = ad::make_constant<double>({3, 8, 8}, std::move(xv));

    const auto rep = ad::grad_check(
        [&](const ad::NodePtr<double>& d) {
            auto x_prot = ad::clamp01(ad::add(x_node, d));
            return build_loss_graph<double>(dmodel, x_prot, x_interior, spec, target, 7).total;
        },
        delta, 1e-4, 1e-3);
    CHECK(rep.pass);
}

TEST_CASE("zero iterations yield a zero perturbation") {
    auto spec = toy_spec();
    spec.iterations = 0;
    const auto res = optimize(toy_model(), toy_scene(3), spec);
    CHECK((res.perturbation.delta == 0.0f).all());
    CHECK(res.trace.empty());
}

TEST_CASE("optimize respects the bound, descends, and leaves the model alone") {
    const auto& model = toy_model();
    std::vector<Eigen::ArrayXf> before;
    for (const auto& [name, p] : model.params) before.push_back(p->value);

    const ImageTensor x = toy_scene(4);
    const auto spec = toy_spec(9);
    const auto res = optimize(model, x, spec);
    CHECK_FALSE(res.untrained_model);
    CHECK(res.perturbation.delta.abs().maxCoeff() <= spec.epsilon + 1e-6);
    REQUIRE(res.trace.size() == 20);
    CHECK(res.trace.back().implant < res.trace.front().implant);
    const ImageTensor xp = apply(x, res.perturbation);
    CHECK(xp.data().minCoeff() >= 0.0f);
    CHECK(xp.data().maxCoeff() <= 1.0f);

    for (std::size_t i = 0; i < model.params.size(); ++i) {
        CHECK((model.params[i].second->value == before[i]).all());
    }
}

TEST_CASE("optimize is deterministic in the protection seed") {
    const ImageTensor x = toy_scene(5);
    const auto r1 = optimize(toy_model(), x, toy_spec(11));
    const auto r2 = optimize(toy_model(), x, toy_spec(11));
    CHECK((r1.perturbation.delta == r2.perturbation.delta).all());
    const auto r3 = optimize(toy_model(), x, toy_spec(12));
    CHECK((r1.perturbation.delta != r3.perturbation.delta).any());
}

TEST_CASE("apply clamps to the valid range") {
    ImageTensor x = constant_image(8, 0.99f, 0.5f, 0.01f);
    Perturbation p;
    p.height = p.width = 8;
    p.delta = Eigen::ArrayXf::Constant(3 * 64, 0.02f);
    p.epsilon = 0.02;
    const ImageTensor y = apply(x, p);
    CHECK(y.at(0, 0, 0) == 1.0f);
    CHECK(y.at(1, 0, 0) == doctest::Approx(0.52f));
    Perturbation zero;
    zero.height = zero.width = 8;
    zero.delta = Eigen::ArrayXf::Zero(3 * 64);
    CHECK((apply(x, zero).data() == x.data()).all());
}

TEST_CASE("perturbation sidecar round trips bit-exactly and rejects bad magic") {
    Perturbation p;
    p.height = 16;
    p.width = 16;
    p.epsilon = 6.0 / 255.0;
    p.delta = Eigen::ArrayXf(3 * 256);
    Rng rng(64);
    for (Eigen::Index k = 0; k < p.delta.size(); ++k)
        p.delta[k] = static_cast<float>((rng.next_double() - 0.5) * 0.04);
    const auto path = (std::filesystem::temp_directory_path() / "mg_delta.bin").string();
    save_delta(p, path);
    const Perturbation back = load_delta(path);
    CHECK(back.height == 16);
    CHECK(back.width == 16);
    CHECK((back.delta == p.delta).all());
    CHECK(back.epsilon == doctest::Approx(p.delta.abs().maxCoeff()));

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("NOPE", 4);
    }
    CHECK_THROWS_AS(load_delta(path), IoError);
    std::filesystem::remove(path);
}

TEST_CASE("spec validation rejects out-of-range parameters") {
    auto spec = toy_spec();
    spec.epsilon = 0.0;
    CHECK_THROWS_AS(spec.validate(), ParamError);
    spec = toy_spec();
    spec.fraction = 1.5;
    CHECK_THROWS_AS(spec.validate(), ParamError);
    spec = toy_spec();
    spec.trigger = BinaryMask(8, 8);
    CHECK_THROWS_AS(spec.validate(), ParamError);
}
