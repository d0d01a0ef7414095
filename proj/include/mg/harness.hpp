#pragma once

#include "mg/implant.hpp"
#include "mg/metrics.hpp"
#include "mg/synth.hpp"

#include <map>
#include <string>
#include <vector>

namespace mg {

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ScenarioTag { trigger, incomplete, without };

const char* scenario_name(ScenarioTag tag);
ScenarioTag scenario_from_name(const std::string& name);

struct RegionScenario {
    ScenarioTag tag;
    BinaryMask mask;
};

/// Trigger: the trigger itself. Incomplete: a random half of the expanded
/// trigger that overlaps the trigger both ways (resampled up to 16 times).
/// Without: the expanded ring minus the trigger, disjoint by construction.
RegionScenario realize_scenario(ScenarioTag tag, const BinaryMask& trigger, int kernel_side,
                                std::uint64_t seed);

/// One scenario/kind/repeat cell of the evaluation grid, with every seed
/// needed to regenerate it.
struct EvalRecord {
    int image_index = 0;
    ScenarioTag scenario = ScenarioTag::trigger;
    std::string kind;  // "Ben" | "Imp"
    int repeat = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double featdist = 0.0;       // mask-restricted
    double featdist_full = 0.0;  // whole image (global-distortion column)
    std::uint64_t scene_seed = 0;
    std::uint64_t protect_seed = 0;
    std::uint64_t scenario_seed = 0;
};

struct Report {
    int schema_version = 1;
    std::vector<EvalRecord> records;
};

struct EvalParams {
    double epsilon = 6.0 / 255.0;
    int iterations = 20;
    double hide_weight = 2.0;
    int kernel_side = 7;
    double fraction = 0.5;
    TargetMode target_mode = TargetMode::pure_color;
    int repeats = 4;
    std::uint64_t seed = 0;
    bool use_incomplete = true;
    bool use_hide = true;
    int max_images = -1;  // <0 = all manifest scenes

    void validate() const {
        if (repeats < 1) throw ParamError("EvalParams: repeats must be >= 1");
    }
};

/// Centered square trigger of side size/4 (the protected-content region).
BinaryMask default_trigger(int size);

/// Protects every scene, edits it under each scenario x repeat, and records
/// metrics for the benign and implanted inputs. All metrics compare the edit
/// against the scene ground truth over the edited region.
Report run_protection_eval(const InpaintModel& model, const DatasetManifest& manifest,
                           const EvalParams& params);

struct LossAblation {
    Report implant_only;
    Report implant_incomplete;
    Report full;
};

LossAblation ablate_losses(const InpaintModel& model, const DatasetManifest& manifest,
                           const EvalParams& params);

std::vector<std::pair<double, Report>> ablate_bounds(const InpaintModel& model,
                                                     const DatasetManifest& manifest,
                                                     const EvalParams& params,
                                                     std::vector<double> bounds = {
                                                         2.0 / 255.0, 3.0 / 255.0,
                                                         6.0 / 255.0, 13.0 / 255.0});

struct CellSummary {
    double psnr = 0.0;
    double ssim = 0.0;
    double featdist = 0.0;
    double featdist_full = 0.0;
    int count = 0;
};

/// Mean per (scenario, kind); keys like "Trigger/Ben".
std::map<std::string, CellSummary> summarize(const Report& report);

/// Signed Imp - Ben per scenario for a metric ("ssim", "psnr", ...).
double scenario_diff(const Report& report, ScenarioTag tag, const std::string& metric);

enum class ReportFormat { csv, json };

void emit_report(const Report& report, ReportFormat format, const std::string& path);
Report load_report(ReportFormat format, const std::string& path);

}  // namespace mg
