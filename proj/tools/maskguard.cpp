// maskguard: protect images from inpainting edits by implanting a run-time
// backdoor perturbation, then measure how edits degrade. Subcommands cover
// the whole pipeline: synth -> train -> protect/edit -> eval/ablate-*.

#include "mg/checkpoint.hpp"
#include "mg/harness.hpp"
#include "mg/png_io.hpp"
#include "mg/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

using namespace mg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Values from --config seed the option defaults; explicit flags then override
// them during the regular parse.
void apply_config(CLI::App& app, int argc, char** argv) {
    std::string cfg_path;
    for (int i = 1; i < argc - 1; ++i)
        if (std::string(argv[i]) == "--config") cfg_path = argv[i + 1];
    if (cfg_path.empty()) return;
    std::ifstream f(cfg_path);
    if (!f) throw CLI::ValidationError("--config", "cannot open '" + cfg_path + "'");
    json doc = json::parse(f);
    std::vector<CLI::App*> apps{&app};
    for (auto* sub : app.get_subcommands({})) apps.push_back(sub);
    for (auto* a : apps)
        for (auto* opt : a->get_options())
            for (auto& [key, val] : doc.items()) {
                if (opt->get_name() != "--" + key) continue;
                const std::string s = val.is_string() ? val.get<std::string>() : val.dump();
                opt->default_val(s);
            }
}

TargetMode parse_target(const std::string& s) {
    if (s == "pure-color") return TargetMode::pure_color;
    if (s == "inverted") return TargetMode::inverted;
    throw CLI::ValidationError("--target", "expected pure-color or inverted");
}

BinaryMask load_trigger(const std::string& path, int size) {
    if (path.empty()) return default_trigger(size);
    return load_mask(path);
}

void write_reports(const Report& rep, const std::string& stem) {
    emit_report(rep, ReportFormat::csv, stem + ".csv");
    emit_report(rep, ReportFormat::json, stem + ".json");
    std::printf("wrote %s.csv and %s.json (%zu records)\n", stem.c_str(), stem.c_str(),
                rep.records.size());
    for (const auto& [cell, s] : summarize(rep))
        std::printf("  %-16s psnr %7.3f  ssim %6.3f  featdist %8.3f  (n=%d)\n",
                    cell.c_str(), s.psnr, s.ssim, s.featdist, s.count);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"inpainting-protection toolkit"};
    app.require_subcommand(1);
    std::string config_file;
    app.add_option("--config", config_file, "JSON config; flags take precedence");

    // shared options, bound per subcommand below
    std::string model_path, dataset_path, out_path, image_path, mask_path, trigger_path;
    std::string target_str = "pure-color";
    double epsilon = 6.0 / 255.0, hide_weight = 2.0, fraction = 0.5;
    int iters = 20, kernel = 7, repeats = 4, max_images = -1;
    std::uint64_t seed = 0;

    auto add_protect_opts = [&](CLI::App* c) {
        c->add_option("--epsilon", epsilon, "L-inf perturbation bound")
            ->capture_default_str();
        c->add_option("--iters", iters, "optimization iterations")->capture_default_str();
        c->add_option("--hide-weight", hide_weight, "weight of the hide term")
            ->capture_default_str();
        c->add_option("--kernel", kernel, "mask expansion window side")->capture_default_str();
        c->add_option("--fraction", fraction, "incomplete-trigger retention fraction")
            ->capture_default_str();
        c->add_option("--target", target_str, "backdoor target: pure-color | inverted")
            ->capture_default_str();
        c->add_option("--trigger", trigger_path, "trigger mask PNG (default: centered square)");
        c->add_option("--seed", seed, "RNG seed")->capture_default_str();
    };

    auto* synth = app.add_subcommand("synth", "generate a scene dataset + manifest");
    int count = 200, size = 64;
    synth->add_option("--out", out_path, "output directory")->required();
    synth->add_option("--count", count, "number of scenes")->capture_default_str();
    synth->add_option("--size", size, "scene side in pixels")->capture_default_str();
    synth->add_option("--seed", seed, "RNG seed")->capture_default_str();

    auto* train_cmd = app.add_subcommand("train", "train the toy inpainting model");
    TrainConfig tc;
    int width_mult = 2;
    train_cmd->add_option("--dataset", dataset_path, "dataset manifest path")->required();
    train_cmd->add_option("--out", out_path, "checkpoint output path")->required();
    train_cmd->add_option("--epochs", tc.epochs)->capture_default_str();
    train_cmd->add_option("--batch", tc.batch_size)->capture_default_str();
    train_cmd->add_option("--lr", tc.learning_rate)->capture_default_str();
    train_cmd->add_option("--width", width_mult, "channel width multiplier")
        ->capture_default_str();
    train_cmd->add_option("--seed", seed, "RNG seed")->capture_default_str();

    auto* protect = app.add_subcommand("protect", "optimize a protective perturbation");
    protect->add_option("--model", model_path, "model checkpoint")->required();
    protect->add_option("--image", image_path, "input PNG")->required();
    protect->add_option("--out", out_path, "output stem (.png + .delta)")->required();
    add_protect_opts(protect);

    auto* edit = app.add_subcommand("edit", "inpaint an image region with the model");
    edit->add_option("--model", model_path, "model checkpoint")->required();
    edit->add_option("--image", image_path, "input PNG")->required();
    edit->add_option("--mask", mask_path, "edit-region mask PNG")->required();
    edit->add_option("--out", out_path, "output PNG")->required();

    auto* eval = app.add_subcommand("eval", "scenario grid over a dataset");
    auto* abl_loss = app.add_subcommand("ablate-loss", "loss-term ablation grids");
    auto* abl_bound = app.add_subcommand("ablate-bound", "perturbation-bound ablation grids");
    for (auto* c : {eval, abl_loss, abl_bound}) {
        c->add_option("--model", model_path, "model checkpoint")->required();
        c->add_option("--dataset", dataset_path, "dataset manifest path")->required();
        c->add_option("--out", out_path, "report stem (.csv/.json)")->required();
        c->add_option("--repeats", repeats, "scenario redraws per image")
            ->capture_default_str();
        c->add_option("--max-images", max_images, "limit scenes (-1 = all)")
            ->capture_default_str();
        add_protect_opts(c);
    }

    try {
        app.preparse_callback([&](std::size_t) { apply_config(app, argc, argv); });
        app.parse(argc, argv);

        if (*synth) {
            fs::create_directories(out_path);
            const DatasetManifest mf = make_manifest(seed, count, size);
            save_manifest(mf, (fs::path(out_path) / "manifest.json").string());
            const auto scenes = generate_dataset(mf);
            for (std::size_t i = 0; i < scenes.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof(name), "scene_%04zu.png", i);
                save_image(scenes[i], (fs::path(out_path) / name).string());
            }
            std::printf("wrote %zu scenes + manifest to %s\n", scenes.size(),
                        out_path.c_str());
        } else if (*train_cmd) {
            tc.seed = seed;
            const auto data = generate_dataset(load_manifest(dataset_path));
            auto model = init_model<float>(seed, width_mult);
            const auto trace = train(model, data, tc);
            save_model(model, out_path);
            std::printf("trained %d epochs; final mean loss %.6f; saved %s\n", tc.epochs,
                        trace.empty() ? 0.0 : trace.back(), out_path.c_str());
        } else if (*protect) {
            const auto model = load_model(model_path);
            const ImageTensor x = load_image(image_path);
            ProtectionSpec spec;
            spec.trigger = load_trigger(trigger_path, x.height());
            spec.epsilon = epsilon;
            spec.iterations = iters;
            spec.hide_weight = hide_weight;
            spec.kernel_side = kernel;
            spec.fraction = fraction;
            spec.target_mode = parse_target(target_str);
            spec.seed = seed;
            const auto res = optimize(model, x, spec);
            save_image(apply(x, res.perturbation), out_path + ".png");
            save_delta(res.perturbation, out_path + ".delta");
            std::printf("implant loss %.6f -> %.6f over %d iters; wrote %s.png/.delta\n",
                        res.trace.front().implant, res.trace.back().implant, iters,
                        out_path.c_str());
            if (res.untrained_model)
                std::printf("warning: model checkpoint is untrained\n");
        } else if (*edit) {
            const auto model = load_model(model_path);
            const ImageTensor x = load_image(image_path);
            const BinaryMask m = load_mask(mask_path);
            save_image(predict(model, x, m), out_path);
            std::printf("wrote %s\n", out_path.c_str());
        } else {
            const auto model = load_model(model_path);
            const DatasetManifest mf = load_manifest(dataset_path);
            EvalParams params;
            params.epsilon = epsilon;
            params.iterations = iters;
            params.hide_weight = hide_weight;
            params.kernel_side = kernel;
            params.fraction = fraction;
            params.target_mode = parse_target(target_str);
            params.repeats = repeats;
            params.seed = seed;
            params.max_images = max_images;
            if (*eval) {
                write_reports(run_protection_eval(model, mf, params), out_path);
            } else if (*abl_loss) {
                const LossAblation ab = ablate_losses(model, mf, params);
                write_reports(ab.implant_only, out_path + "_implant_only");
                write_reports(ab.implant_incomplete, out_path + "_implant_incomplete");
                write_reports(ab.full, out_path + "_full");
            } else {
                for (const auto& [bound, rep] : ablate_bounds(model, mf, params)) {
                    char tag[32];
                    std::snprintf(tag, sizeof(tag), "_eps_%d_255",
                                  static_cast<int>(std::lround(bound * 255.0)));
                    write_reports(rep, out_path + tag);
                }
            }
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
