#include "mg/synth.hpp"
#include "mg/train.hpp"

#include <doctest.h>

#include <filesystem>

using namespace mg;

TEST_CASE("generate_scene is deterministic and in range") {
    SceneSpec spec;
    spec.seed = 42;
    const ImageTensor a = generate_scene(spec);
    const ImageTensor b = generate_scene(spec);
    CHECK((a.data() == b.data()).all());
    CHECK(a.data().minCoeff() >= 0.0f);
    CHECK(a.data().maxCoeff() <= 1.0f);
    CHECK(a.channels() == 3);
    CHECK(a.height() == 64);
    CHECK(a.width() == 64);
}

TEST_CASE("different seeds give visibly different scenes") {
    SceneSpec s1, s2;
    s1.seed = 1;
    s2.seed = 2;
    const ImageTensor a = generate_scene(s1);
    const ImageTensor b = generate_scene(s2);
    Eigen::Index differing = 0;
    for (Eigen::Index k = 0; k < a.size(); ++k)
        if (a.data()[k] != b.data()[k]) ++differing;
    CHECK(differing > a.size() / 100);
}

TEST_CASE("random_rect_mask hits the requested coverage window") {
    // 10% of a 64x64 frame is 409.6 pixels, so an exact rectangle is impossible;
    // the generator must land on the closest achievable area.
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const BinaryMask m = random_rect_mask(seed, 64, 0.1, 0.1);
        const float c = m.count();
        CHECK(c >= 409.0f);
        CHECK(c <= 410.0f);
    }
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const BinaryMask m = random_rect_mask(seed ^ 0xabc, 64, 0.05, 0.2);
        const float c = m.count();
        CHECK(c >= 0.05f * 4096 - 32);
        CHECK(c <= 0.2f * 4096 + 32);
    }
}

TEST_CASE("random_rect_mask draws a single solid rectangle") {
    const BinaryMask m = random_rect_mask(77, 64, 0.05, 0.2);
    int top = 64, bottom = -1, left = 64, right = -1;
    for (int i = 0; i < 64; ++i)
        for (int j = 0; j < 64; ++j)
            if (m.at(i, j) != 0.0f) {
                top = std::min(top, i);
                bottom = std::max(bottom, i);
                left = std::min(left, j);
                right = std::max(right, j);
            }
    REQUIRE(bottom >= 0);
    CHECK(static_cast<float>((bottom - top + 1) * (right - left + 1)) == m.count());
}

TEST_CASE("manifest round trip and dataset regeneration") {
    const DatasetManifest mf = make_manifest(123, 6, 32);
    const auto path = (std::filesystem::temp_directory_path() / "mg_manifest.json").string();
    save_manifest(mf, path);
    const DatasetManifest back = load_manifest(path);
    CHECK(back.seeds == mf.seeds);
    CHECK(back.base.size == 32);
    const auto d1 = generate_dataset(mf);
    const auto d2 = generate_dataset(back);
    REQUIRE(d1.size() == 6);
    for (std::size_t i = 0; i < d1.size(); ++i)
        CHECK((d1[i].data() == d2[i].data()).all());
    std::filesystem::remove(path);
}

TEST_CASE("training reduces reconstruction loss and is deterministic") {
    const auto data = generate_dataset(make_manifest(9, 12, 32));
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 4;
    cfg.seed = 3;
    auto m1 = init_model<float>(1);
    const auto trace = train(m1, data, cfg);
    REQUIRE(trace.size() == 5);
    for (float v : trace) CHECK(std::isfinite(v));
    CHECK(trace.back() < trace.front());
    CHECK(m1.trained);

    auto m2 = init_model<float>(1);
    train(m2, data, cfg);
    for (std::size_t i = 0; i < m1.params.size(); ++i)
        CHECK((m1.params[i].second->value == m2.params[i].second->value).all());
}

TEST_CASE("zero-epoch training leaves the model untouched") {
    const auto data = generate_dataset(make_manifest(9, 4, 32));
    TrainConfig cfg;
    cfg.epochs = 0;
    auto model = init_model<float>(4);
    const auto ref = init_model<float>(4);
    train(model, data, cfg);
    CHECK_FALSE(model.trained);
    for (std::size_t i = 0; i < model.params.size(); ++i)
        CHECK((model.params[i].second->value == ref.params[i].second->value).all());
}

TEST_CASE("train and evaluate_recon reject bad inputs") {
    auto model = init_model<float>(0);
    TrainConfig cfg;
    CHECK_THROWS_AS(train(model, {}, cfg), ParamError);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ParamError);
    CHECK_THROWS_AS(evaluate_recon(model, {}, 0), ParamError);
}
