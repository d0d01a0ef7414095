// End-to-end acceptance suite. Each numbered check prints one PASS/FAIL line
// with its measured values and pinned thresholds; the process exits nonzero
// if any check fails. Budgets assume a single core.

#include "mg/gradcheck.hpp"
#include "mg/harness.hpp"
#include "mg/train.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

using namespace mg;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int idx, bool pass, const std::string& what) {
    std::printf("C%d %s %s\n", idx, pass ? "PASS" : "FAIL", what.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

ad::NodePtr<double> rand_leaf(Rng& rng, std::vector<int> shape, double lo, double hi,
                              bool grad = true) {
    Eigen::Index n = 1;
    for (auto d : shape) n *= d;
    ad::Arr<double> v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.next_range(lo, hi);
    return ad::make_leaf<double>(std::move(shape), std::move(v), grad);
}

// --- C1: finite-difference checks for every differentiable op + the full loss ---

void criterion1() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    bool ok = true;
    auto run = [&](auto&& fn, const ad::NodePtr<double>& in) {
        const auto rep = ad::grad_check(fn, in, 1e-4, 1e-3);
        worst = std::max(worst, rep.max_rel_err);
        ok = ok && rep.pass;
    };

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        auto a = rand_leaf(rng, {3, 8, 8}, 0.1, 0.9);
        auto b = rand_leaf(rng, {3, 8, 8}, 0.1, 0.9, false);
        auto sum_all = [](const ad::NodePtr<double>& n) {
            const int h = n->shape[n->shape.size() - 2];
            const int w = n->shape[n->shape.size() - 1];
            ad::Arr<double> ones = ad::Arr<double>::Ones(h * w);
            auto zero = ad::make_constant<double>(n->shape, ad::Arr<double>::Zero(n->value.size()));
            return ad::masked_mse(n, zero, ones);  // mean of squares: smooth reducer
        };
        run([&](const ad::NodePtr<double>& x) { return sum_all(ad::add(x, b)); }, a);
        run([&](const ad::NodePtr<double>& x) { return sum_all(ad::mul_elementwise(x, b)); }, a);
        run([&](const ad::NodePtr<double>& x) { return sum_all(ad::scale(x, -1.7)); }, a);
        run([&](const ad::NodePtr<double>& x) { return sum_all(ad::sigmoid(x)); }, a);
        run([&](const ad::NodePtr<double>& x) { return sum_all(ad::clamp01(x)); }, a);
        auto shifted = rand_leaf(rng, {3, 8, 8}, 0.2, 0.9);
        run([&](const ad::NodePtr<double>& x) {
            return sum_all(ad::leaky_relu(x, 0.2));  // inputs kept off the kink
        }, shifted);
        run([&](const ad::NodePtr<double>& x) {
            return sum_all(ad::nearest_upsample2x(ad::concat_channels(x, b)));
        }, a);
        run([&](const ad::NodePtr<double>& x) { return ad::mse(x, b); }, a);
        ad::Arr<double> half = ad::Arr<double>::Zero(64);
        for (int k = 0; k < 32; ++k) half[k * 2] = 1.0;
        run([&](const ad::NodePtr<double>& x) { return ad::masked_mse(x, b, half); }, a);

        auto w = rand_leaf(rng, {4, 3, 3, 3}, -0.3, 0.3);
        auto bias = rand_leaf(rng, {4}, -0.2, 0.2);
        auto x_fixed = rand_leaf(rng, {3, 8, 8}, 0.1, 0.9, false);
        auto reduce4 = [](const ad::NodePtr<double>& n) {
            ad::Arr<double> ones = ad::Arr<double>::Ones(8 * 8);
            auto zero = ad::make_constant<double>(n->shape, ad::Arr<double>::Zero(n->value.size()));
            return ad::masked_mse(n, zero, ones);
        };
        run([&](const ad::NodePtr<double>& x) {
            auto wc = ad::make_constant<double>(w->shape, ad::Arr<double>(w->value));
            auto bc = ad::make_constant<double>(bias->shape, ad::Arr<double>(bias->value));
            return reduce4(ad::conv2d(x, wc, bc, 1, 1));
        }, a);
        run([&](const ad::NodePtr<double>& wv) {
            auto bc = ad::make_constant<double>(bias->shape, ad::Arr<double>(bias->value));
            return reduce4(ad::conv2d(x_fixed, wv, bc, 1, 1));
        }, w);
        run([&](const ad::NodePtr<double>& bv) {
            auto wc = ad::make_constant<double>(w->shape, ad::Arr<double>(w->value));
            return reduce4(ad::conv2d(x_fixed, wc, bv, 1, 1));
        }, bias);

        // full objective on an 8x8 instance
        const auto dmodel = model_cast<double>(init_model<float>(seed + 100));
        SceneSpec s;
        s.size = 8;
        s.seed = seed;
        ImageTensor x_img = generate_scene(s);
        x_img.data() = x_img.data().min(0.9f).max(0.1f);
        ProtectionSpec spec;
        spec.trigger = BinaryMask(8, 8);
        for (int i = 3; i < 5; ++i)
            for (int j = 3; j < 5; ++j) spec.trigger.at(i, j) = 1.0f;
        spec.kernel_side = 3;
        spec.seed = seed;
        const auto target = make_target(x_img, TargetMode::pure_color);
        auto delta = rand_leaf(rng, {3, 8, 8}, -0.01, 0.01);
        ad::Arr<double> xv = x_img.data().cast<double>();
        auto x_node = ad::make_constant<double>({3, 8, 8}, std::move(xv));
        run([&](const ad::NodePtr<double>& d) {
            auto x_prot = ad::clamp01(ad::add(x_node, d));
            return build_loss_graph<double>(dmodel, x_prot, x_img, spec, target, seed).total;
        }, delta);
    }
    const double secs = seconds_since(t0);
    report(1, ok && secs < 120.0,
           fmt("gradient suite: max rel err %.2e (tol 1e-03), %.0f s (budget 120 s)",
               worst, secs));
}

// --- helpers for the trained-model criteria ---

std::map<int, double> per_image_mean(const Report& rep, ScenarioTag scen,
                                     const std::string& kind, const char* metric) {
    std::map<int, double> sums;
    std::map<int, int> counts;
    for (const auto& r : rep.records)
        if (r.scenario == scen && r.kind == kind) {
            sums[r.image_index] += (std::string(metric) == "ssim" ? r.ssim : r.psnr);
            ++counts[r.image_index];
        }
    for (auto& [k, v] : sums) v /= counts[k];
    return sums;
}

double mean_cell(const Report& rep, ScenarioTag scen, const std::string& kind,
                 const char* metric) {
    const auto per = per_image_mean(rep, scen, kind, metric);
    double s = 0.0;
    for (const auto& [k, v] : per) s += v;
    return s / static_cast<double>(per.size());
}

double ssim_drop(const Report& rep, ScenarioTag scen) {
    return mean_cell(rep, scen, "Ben", "ssim") - mean_cell(rep, scen, "Imp", "ssim");
}

}  // namespace

int main() {
    criterion1();

    // C2: train at defaults, compare against the untrained init on held-out scenes.
    const auto train_data = generate_dataset(make_manifest(1001, 200, 64));
    const auto held_out = generate_dataset(make_manifest(2002, 50, 64));
    auto model = init_model<float>(0, 2);
    const double untrained_psnr = evaluate_recon(model, held_out, 77).psnr_mean;
    TrainConfig tc;  // defaults: 120 epochs, batch 8, lr 1e-3
    const auto t_train = Clock::now();
    const auto trace = train(model, train_data, tc);
    const double train_secs = seconds_since(t_train);
    const double trained_psnr = evaluate_recon(model, held_out, 77).psnr_mean;
    const double gain = trained_psnr - untrained_psnr;
    report(2, gain >= 6.0 && train_secs < 900.0,
           fmt("training: %.2f dB over untrained (need >= 6), %.1f -> %.1f dB, "
               "%.0f s (budget 900 s)",
               gain, untrained_psnr, trained_psnr, train_secs));

    // C3/C4/C5 share one default evaluation over 20 scenes.
    const DatasetManifest eval_mf = make_manifest(3003, 20, 64);
    EvalParams params;  // defaults: eps 6/255, 20 iters, 4 repeats
    params.seed = 5;
    const Report rep = run_protection_eval(model, eval_mf, params);

    const double trig_ben_ssim = mean_cell(rep, ScenarioTag::trigger, "Ben", "ssim");
    const double trig_imp_ssim = mean_cell(rep, ScenarioTag::trigger, "Imp", "ssim");
    const double trig_ben_psnr = mean_cell(rep, ScenarioTag::trigger, "Ben", "psnr");
    const double trig_imp_psnr = mean_cell(rep, ScenarioTag::trigger, "Imp", "psnr");
    report(3,
           trig_imp_ssim <= 0.6 * trig_ben_ssim && trig_ben_psnr - trig_imp_psnr >= 3.0,
           fmt("backdoor efficacy: trigger SSIM %.3f vs benign %.3f (need <= 0.6x = %.3f), "
               "PSNR drop %.2f dB (need >= 3)",
               trig_imp_ssim, trig_ben_ssim, 0.6 * trig_ben_ssim,
               trig_ben_psnr - trig_imp_psnr));

    const double wo_dssim = std::abs(ssim_drop(rep, ScenarioTag::without));
    const double wo_dpsnr = std::abs(mean_cell(rep, ScenarioTag::without, "Ben", "psnr") -
                                     mean_cell(rep, ScenarioTag::without, "Imp", "psnr"));
    report(4, wo_dssim <= 0.15 && wo_dpsnr <= 3.0,
           fmt("hide property: without-scenario |dSSIM| %.3f (tol 0.15), "
               "|dPSNR| %.2f dB (tol 3)",
               wo_dssim, wo_dpsnr));

    const double d_trig = ssim_drop(rep, ScenarioTag::trigger);
    const double d_inc = ssim_drop(rep, ScenarioTag::incomplete);
    const double d_wo = ssim_drop(rep, ScenarioTag::without);
    report(5, d_trig >= d_inc && d_inc >= d_wo,
           fmt("scenario ordering: SSIM drop trigger %.3f >= incomplete %.3f >= "
               "without %.3f",
               d_trig, d_inc, d_wo));

    // C6: loss ablation, per-scene majority vote over 10 protection seeds.
    {
        const DatasetManifest ab_mf = make_manifest(4004, 10, 64);
        EvalParams ap = params;
        ap.repeats = 2;
        const LossAblation ab = ablate_losses(model, ab_mf, ap);
        const auto full_wo = per_image_mean(ab.full, ScenarioTag::without, "Imp", "ssim");
        const auto nohide_wo =
            per_image_mean(ab.implant_incomplete, ScenarioTag::without, "Imp", "ssim");
        int hide_votes = 0;
        for (const auto& [img, v] : full_wo)
            if (nohide_wo.at(img) < v) ++hide_votes;  // dropping L_hide hurts hiding

        auto drop_per_image = [](const Report& r) {
            auto ben = per_image_mean(r, ScenarioTag::incomplete, "Ben", "ssim");
            auto imp = per_image_mean(r, ScenarioTag::incomplete, "Imp", "ssim");
            for (auto& [k, v] : ben) v -= imp.at(k);
            return ben;
        };
        const auto full_drop = drop_per_image(ab.full);
        const auto noinc_drop = drop_per_image(ab.implant_only);
        int inc_votes = 0;
        for (const auto& [img, v] : full_drop)
            if (noinc_drop.at(img) < v) ++inc_votes;  // dropping L_incomplete weakens it
        report(6, hide_votes >= 6 && inc_votes >= 6,
               fmt("loss ablation: hide-term votes %d/10, incomplete-term votes %d/10 "
                   "(need majority)",
                   hide_votes, inc_votes));
    }

    // C7: perturbation-bound ablation on the trigger scenario.
    {
        const DatasetManifest ab_mf = make_manifest(5005, 10, 64);
        EvalParams ap = params;
        ap.repeats = 2;
        const auto runs = ablate_bounds(model, ab_mf, ap);
        std::map<int, double> drop;  // keyed by numerator of eps*255
        for (const auto& [eps, r] : runs)
            drop[static_cast<int>(std::lround(eps * 255.0))] =
                ssim_drop(r, ScenarioTag::trigger);
        const bool grows = drop.at(2) < drop.at(6);
        const bool plateau = std::abs(drop.at(13) - drop.at(6)) <= 0.25 * std::abs(drop.at(6));
        report(7, grows && plateau,
               fmt("bound ablation: SSIM drop 2/255 %.3f < 6/255 %.3f, 13/255 %.3f "
                   "within 25%% of 6/255",
                   drop.at(2), drop.at(6), drop.at(13)));
    }

    // C8: exhaustive mask algebra + target color brute force.
    {
        bool ok = true;
        for (int bits = 0; bits < 512 && ok; ++bits) {
            BinaryMask m(3, 3);
            for (int k = 0; k < 9; ++k) m.data()[k] = (bits >> k) & 1 ? 1.0f : 0.0f;
            const BinaryMask e = expand_mask(m, 3);
            for (int i = 0; i < 3 && ok; ++i)
                for (int j = 0; j < 3 && ok; ++j) {
                    bool hit = false;  // independent dilation oracle
                    for (int di = -1; di <= 1; ++di)
                        for (int dj = -1; dj <= 1; ++dj) {
                            const int ii = i + di, jj = j + dj;
                            if (ii >= 0 && ii < 3 && jj >= 0 && jj < 3 && m.at(ii, jj) != 0.0f)
                                hit = true;
                        }
                    ok = ok && (e.at(i, j) == (hit ? 1.0f : 0.0f));
                }
            const BinaryMask d = subtract_trigger(e, m);
            for (int k = 0; k < 9 && ok; ++k)
                ok = d.data()[k] == std::max(0.0f, e.data()[k] - m.data()[k]);
            // composite stitches exactly by the mask
            ImageTensor a(3, 3, 3), b(3, 3, 3);
            a.data().setConstant(0.25f);
            b.data().setConstant(0.75f);
            const ImageTensor r = composite(b, a, m);  // b stitched in where the mask is set
            for (int c = 0; c < 3 && ok; ++c)
                for (int k = 0; k < 9 && ok; ++k)
                    ok = r.data()[c * 9 + k] == (m.data()[k] != 0.0f ? 0.75f : 0.25f);
        }
        Rng rng(808);
        const std::array<std::array<float, 3>, 3> prim{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
        for (int trial = 0; trial < 100 && ok; ++trial) {
            ImageTensor x(3, 2, 2);
            for (int c = 0; c < 3; ++c) {
                const float v = rng.next_float();
                for (int k = 0; k < 4; ++k) x.data()[c * 4 + k] = v;
            }
            const auto t = make_target(x, TargetMode::pure_color);
            int best = 0;
            double best_d = -1.0;
            for (int p = 0; p < 3; ++p) {
                double d = 0.0;
                for (int c = 0; c < 3; ++c)
                    d += (prim[p][c] - x.data()[c * 4]) * (prim[p][c] - x.data()[c * 4]);
                if (d > best_d + 1e-12) {
                    best_d = d;
                    best = p;
                }
            }
            for (int c = 0; c < 3; ++c) ok = ok && t.image.data()[c * 4] == prim[best][c];
        }
        report(8, ok, "mask algebra and target color agree with exhaustive oracles");
    }

    // C9: wall-clock budget for one protection, plus bit-level determinism.
    {
        SceneSpec s;
        s.seed = 909;
        const ImageTensor x = generate_scene(s);
        ProtectionSpec spec;
        spec.trigger = default_trigger(64);
        spec.seed = 13;
        const auto t0 = Clock::now();
        const auto r1 = optimize(model, x, spec);
        const double secs = seconds_since(t0);
        const auto r2 = optimize(model, x, spec);
        const bool same_delta = (r1.perturbation.delta == r2.perturbation.delta).all();

        const DatasetManifest mf = make_manifest(6006, 2, 64);
        EvalParams p2 = params;
        p2.repeats = 2;
        p2.iterations = 5;
        const Report ra = run_protection_eval(model, mf, p2);
        const Report rb = run_protection_eval(model, mf, p2);
        bool same_report = ra.records.size() == rb.records.size();
        for (std::size_t i = 0; same_report && i < ra.records.size(); ++i)
            same_report = ra.records[i].psnr == rb.records[i].psnr &&
                          ra.records[i].ssim == rb.records[i].ssim &&
                          ra.records[i].featdist == rb.records[i].featdist;
        report(9, secs < 60.0 && same_delta && same_report,
               fmt("determinism and budget: protect %.1f s (budget 60 s), delta %s, "
                   "reports %s",
                   secs, same_delta ? "bit-identical" : "DIFFERS",
                   same_report ? "bit-identical" : "DIFFER"));
    }

    std::printf("%s: %d/9 criteria passed\n", failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
                9 - failures);
    return failures == 0 ? 0 : 1;
}
