#include "mg/harness.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mg {

const char* scenario_name(ScenarioTag tag) {
    switch (tag) {
        case ScenarioTag::trigger: return "Trigger";
        case ScenarioTag::incomplete: return "Incomplete";
        case ScenarioTag::without: return "Without";
    }
    throw ParamError("scenario_name: bad tag");
}

ScenarioTag scenario_from_name(const std::string& name) {
    if (name == "Trigger") return ScenarioTag::trigger;
    if (name == "Incomplete") return ScenarioTag::incomplete;
    if (name == "Without") return ScenarioTag::without;
    throw ParamError("scenario_from_name: unknown scenario '" + name + "'");
}

RegionScenario realize_scenario(ScenarioTag tag, const BinaryMask& trigger, int kernel_side,
                                std::uint64_t seed) {
    if (trigger.empty()) throw ScenarioError("realize_scenario: empty trigger");
    switch (tag) {
        case ScenarioTag::trigger:
            return {tag, trigger};
        case ScenarioTag::without: {
            BinaryMask mask = subtract_trigger(expand_mask(trigger, kernel_side), trigger);
            if (mask.empty())
                throw ScenarioError("realize_scenario: expansion adds no ring pixels");
            return {tag, mask};
        }
        case ScenarioTag::incomplete: {
            const BinaryMask expanded = expand_mask(trigger, kernel_side);
            for (int attempt = 0; attempt < 16; ++attempt) {
                BinaryMask mask = sample_incomplete(
                    expanded, 0.5, Rng::derive(seed, static_cast<std::uint64_t>(attempt)));
                const float overlap = (mask.data() * trigger.data()).sum();
                const float outside = (mask.data() * (1.0f - trigger.data())).sum();
                if (overlap > 0.0f && outside > 0.0f) return {tag, mask};
            }
            throw ScenarioError("realize_scenario: no intersecting incomplete mask in 16 draws");
        }
    }
    throw ParamError("realize_scenario: bad tag");
}

BinaryMask default_trigger(int size) {
    const int side = size / 4;
    return rect_mask(size, size, (size - side) / 2, (size - side) / 2, side, side);
}

Report run_protection_eval(const InpaintModel& model, const DatasetManifest& manifest,
                           const EvalParams& params) {
    params.validate();
    Report report;
    const std::size_t n_images =
        params.max_images < 0
            ? manifest.seeds.size()
            : std::min<std::size_t>(manifest.seeds.size(),
                                    static_cast<std::size_t>(params.max_images));
    constexpr ScenarioTag kTags[] = {ScenarioTag::trigger, ScenarioTag::incomplete,
                                     ScenarioTag::without};
    for (std::size_t i = 0; i < n_images; ++i) {
        const ImageTensor x = generate_scene(manifest.scene_spec(i));
        const BinaryMask trigger = default_trigger(x.height());

        ProtectionSpec spec;
        spec.trigger = trigger;
        spec.epsilon = params.epsilon;
        spec.iterations = params.iterations;
        spec.hide_weight = params.hide_weight;
        spec.kernel_side = params.kernel_side;
        spec.fraction = params.fraction;
        spec.target_mode = params.target_mode;
        spec.use_incomplete = params.use_incomplete;
        spec.use_hide = params.use_hide;
        spec.seed = Rng::derive(params.seed, 0xA0000000ULL + i);

        ImageTensor x_imp = x;
        try {
            const ProtectResult res = optimize(model, x, spec);
            x_imp = apply(x, res.perturbation);
        } catch (const std::exception& e) {
            throw OptimizeError("image " + std::to_string(i) + ": " + e.what());
        }

        for (int s = 0; s < 3; ++s) {
            for (int rep = 0; rep < params.repeats; ++rep) {
                const std::uint64_t scen_seed = Rng::derive(
                    params.seed, 0xB0000000ULL + (i * 3 + static_cast<std::size_t>(s)) * 64 +
                                     static_cast<std::size_t>(rep));
                RegionScenario scen;
                try {
                    scen = realize_scenario(kTags[s], trigger, params.kernel_side, scen_seed);
                } catch (const std::exception& e) {
                    throw ScenarioError("image " + std::to_string(i) + ": " + e.what());
                }
                const ImageTensor edits[2] = {predict(model, x, scen.mask),
                                              predict(model, x_imp, scen.mask)};
                const char* kinds[2] = {"Ben", "Imp"};
                for (int k = 0; k < 2; ++k) {
                    EvalRecord rec;
                    rec.image_index = static_cast<int>(i);
                    rec.scenario = kTags[s];
                    rec.kind = kinds[k];
                    rec.repeat = rep;
                    rec.psnr = psnr(edits[k], x, &scen.mask).value;
                    rec.ssim = ssim(edits[k], x, &scen.mask).value;
                    rec.featdist = featdist(model, edits[k], x, &scen.mask).value;
                    rec.featdist_full = featdist(model, edits[k], x, nullptr).value;
                    rec.scene_seed = manifest.seeds[i];
                    rec.protect_seed = spec.seed;
                    rec.scenario_seed = scen_seed;
                    report.records.push_back(rec);
                }
            }
        }
    }
    return report;
}

LossAblation ablate_losses(const InpaintModel& model, const DatasetManifest& manifest,
                           const EvalParams& params) {
    LossAblation ab;
    EvalParams p = params;
    p.use_incomplete = false;
    p.use_hide = false;
    ab.implant_only = run_protection_eval(model, manifest, p);
    p.use_incomplete = true;
    ab.implant_incomplete = run_protection_eval(model, manifest, p);
    p.use_hide = true;
    ab.full = run_protection_eval(model, manifest, p);
    return ab;
}

std::vector<std::pair<double, Report>> ablate_bounds(const InpaintModel& model,
                                                     const DatasetManifest& manifest,
                                                     const EvalParams& params,
                                                     std::vector<double> bounds) {
    std::vector<std::pair<double, Report>> out;
    for (double b : bounds) {
        if (!(b > 0.0 && b <= 1.0)) throw ParamError("ablate_bounds: bound outside (0,1]");
        EvalParams p = params;
        p.epsilon = b;
        out.emplace_back(b, run_protection_eval(model, manifest, p));
    }
    return out;
}

std::map<std::string, CellSummary> summarize(const Report& report) {
    std::map<std::string, CellSummary> out;
    for (const auto& r : report.records) {
        auto& cell = out[std::string(scenario_name(r.scenario)) + "/" + r.kind];
        cell.psnr += r.psnr;
        cell.ssim += r.ssim;
        cell.featdist += r.featdist;
        cell.featdist_full += r.featdist_full;
        ++cell.count;
    }
    for (auto& [key, cell] : out) {
        cell.psnr /= cell.count;
        cell.ssim /= cell.count;
        cell.featdist /= cell.count;
        cell.featdist_full /= cell.count;
    }
    return out;
}

double scenario_diff(const Report& report, ScenarioTag tag, const std::string& metric) {
    double sum[2] = {0.0, 0.0};
    int count[2] = {0, 0};
    for (const auto& r : report.records) {
        if (r.scenario != tag) continue;
        const int k = r.kind == "Imp" ? 1 : 0;
        double v = 0.0;
        if (metric == "psnr") v = r.psnr;
        else if (metric == "ssim") v = r.ssim;
        else if (metric == "featdist") v = r.featdist;
        else if (metric == "featdist_full") v = r.featdist_full;
        else throw ParamError("scenario_diff: unknown metric '" + metric + "'");
        sum[k] += v;
        ++count[k];
    }
    if (count[0] == 0 || count[1] == 0)
        throw ParamError("scenario_diff: missing Ben or Imp records");
    return sum[1] / count[1] - sum[0] / count[0];
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

constexpr const char* kCsvHeader =
    "image,scenario,kind,repeat,metric,region,value,scene_seed,protect_seed,scenario_seed";

}  // namespace

void emit_report(const Report& report, ReportFormat format, const std::string& path) {
    if (report.records.empty()) throw ParamError("emit_report: no records");
    std::ofstream os(path);
    if (!os) throw IoError("emit_report: cannot open '" + path + "'");
    if (format == ReportFormat::csv) {
        os << kCsvHeader << "\n";
        for (const auto& r : report.records) {
            const std::pair<const char*, std::pair<const char*, double>> rows[4] = {
                {"psnr", {"mask", r.psnr}},
                {"ssim", {"mask", r.ssim}},
                {"featdist", {"mask", r.featdist}},
                {"featdist", {"full", r.featdist_full}},
            };
            for (const auto& [metric, rv] : rows) {
                os << r.image_index << ',' << scenario_name(r.scenario) << ',' << r.kind << ','
                   << r.repeat << ',' << metric << ',' << rv.first << ','
                   << fmt_double(rv.second) << ',' << r.scene_seed << ',' << r.protect_seed
                   << ',' << r.scenario_seed << "\n";
            }
        }
    } else {
        nlohmann::json j;
        j["schema_version"] = report.schema_version;
        auto& arr = j["records"] = nlohmann::json::array();
        for (const auto& r : report.records) {
            arr.push_back({{"image", r.image_index},
                           {"scenario", scenario_name(r.scenario)},
                           {"kind", r.kind},
                           {"repeat", r.repeat},
                           {"psnr", r.psnr},
                           {"ssim", r.ssim},
                           {"featdist", r.featdist},
                           {"featdist_full", r.featdist_full},
                           {"scene_seed", r.scene_seed},
                           {"protect_seed", r.protect_seed},
                           {"scenario_seed", r.scenario_seed}});
        }
        os << j.dump(2) << "\n";
    }
    if (!os) throw IoError("emit_report: write failed for '" + path + "'");
}

Report load_report(ReportFormat format, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("load_report: cannot open '" + path + "'");
    Report report;
    if (format == ReportFormat::json) {
        nlohmann::json j;
        is >> j;
        report.schema_version = j.at("schema_version").get<int>();
        for (const auto& e : j.at("records")) {
            EvalRecord r;
            r.image_index = e.at("image").get<int>();
            r.scenario = scenario_from_name(e.at("scenario").get<std::string>());
            r.kind = e.at("kind").get<std::string>();
            r.repeat = e.at("repeat").get<int>();
            r.psnr = e.at("psnr").get<double>();
            r.ssim = e.at("ssim").get<double>();
            r.featdist = e.at("featdist").get<double>();
            r.featdist_full = e.at("featdist_full").get<double>();
            r.scene_seed = e.at("scene_seed").get<std::uint64_t>();
            r.protect_seed = e.at("protect_seed").get<std::uint64_t>();
            r.scenario_seed = e.at("scenario_seed").get<std::uint64_t>();
            report.records.push_back(r);
        }
        return report;
    }
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader)
        throw IoError("load_report: bad CSV header");
    EvalRecord cur;
    int fields_seen = 0;  // psnr, ssim, featdist/mask, featdist/full per record
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        if (cols.size() != 10) throw IoError("load_report: malformed CSV row");
        EvalRecord r;
        r.image_index = std::stoi(cols[0]);
        r.scenario = scenario_from_name(cols[1]);
        r.kind = cols[2];
        r.repeat = std::stoi(cols[3]);
        const double value = std::stod(cols[6]);
        r.scene_seed = std::stoull(cols[7]);
        r.protect_seed = std::stoull(cols[8]);
        r.scenario_seed = std::stoull(cols[9]);
        if (fields_seen == 0) cur = r;
        if (cols[4] == "psnr") cur.psnr = value;
        else if (cols[4] == "ssim") cur.ssim = value;
        else if (cols[4] == "featdist" && cols[5] == "mask") cur.featdist = value;
        else if (cols[4] == "featdist" && cols[5] == "full") cur.featdist_full = value;
        else throw IoError("load_report: unknown metric row");
        if (++fields_seen == 4) {
            report.records.push_back(cur);
            fields_seen = 0;
        }
    }
    if (fields_seen != 0) throw IoError("load_report: truncated record group");
    return report;
}

}  // namespace mg
