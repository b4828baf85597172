#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "zsas/backend.hpp"
#include "zsas/cli/backend_spec.hpp"
#include "zsas/cli/dataset.hpp"
#include "zsas/metrics.hpp"

namespace zsas::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitImageFailures = 1;
inline constexpr int kExitFatal = 2;

std::string version();

/// Per-field overrides; unset fields keep the config file / default value.
struct ConfigOverrides
{
    std::optional<double> extreme_threshold;
    std::optional<int> k_positive;
    std::optional<int> k_negative;
    std::optional<double> min_spacing;
    std::optional<std::string> kernel_shape;
    std::vector<int> kernel_size;  ///< empty, {n} or {w, h}
    std::optional<int> cascade_depth;
    std::optional<std::string> output_map;
    std::optional<double> blend_weight;
    std::optional<int> working_resolution;
};

/// Defaults <- config file <- overrides. When neither file nor flag sets
/// working_resolution, the segmenter's value is adopted.
PipelineConfig resolve_config(const std::optional<fs::path>& config_file, const ConfigOverrides& overrides,
                              std::optional<int> segmenter_resolution);

/// Dataset index plus opened backends.
struct Workspace
{
    DatasetIndex index;
    BackendSpec spec;
    BackendPair backends;
};

Workspace open_workspace(const fs::path& dataset, const std::string& backend_spec);

struct RunOptions
{
    fs::path dataset;
    std::string backend = "synthetic";
    fs::path out;
    std::optional<fs::path> config;
    ConfigOverrides overrides;
    std::optional<fs::path> replay;  ///< take backend and config from a run manifest
    int workers = 0;                 ///< 0 = hardware concurrency
    bool overlays = true;
    bool debug_dumps = false;
};

/// Writes masks/<id>.png, maps/<id>.f32, overlays/<id>.png, optional
/// debug/<id>/..., and run_manifest.json. Returns kExitImageFailures when
/// any image failed.
int cmd_run(const RunOptions& options, std::ostream& log);

struct EvalOptions
{
    fs::path predictions;
    fs::path dataset;
    std::optional<fs::path> out;  ///< defaults to predictions
};

/// Writes eval.json and eval.csv. Missing predictions throw DataError
/// listing the image ids.
metrics::EvalResult evaluate_predictions(const fs::path& predictions, const DatasetIndex& index);
int cmd_eval(const EvalOptions& options, std::ostream& log);

struct AblateOptions
{
    fs::path dataset;
    std::string backend = "synthetic";
    fs::path out;
    std::optional<fs::path> config;
    ConfigOverrides overrides;
    int workers = 0;
};

struct AblationRow
{
    std::string label;
    std::string shape;  ///< kernel shape (kernel ablation)
    int size = 0;       ///< kernel size (kernel ablation)
    int depth = 0;      ///< cascade depth (cascade ablation)
    metrics::MetricSet metrics;
};

struct AblationReport
{
    std::string kind;
    std::vector<AblationRow> rows;
    long decoder_calls = 0;
    std::size_t images = 0;
    std::vector<std::string> failures;  ///< "<id>: <message>"
};

/// {cross, rectangle, ellipse} x {20, 25, 30}, in that order.
AblationReport ablate_kernel(const Workspace& ws, const PipelineConfig& base, int workers);

/// Depths 1..3 from one depth-3 cascade per image (stage outputs reused).
AblationReport ablate_cascade(const Workspace& ws, const PipelineConfig& base, int workers);

void write_report(const fs::path& out_dir, const AblationReport& report);
std::string report_table(const AblationReport& report);

int cmd_ablate_kernel(const AblateOptions& options, std::ostream& log);
int cmd_ablate_cascade(const AblateOptions& options, std::ostream& log);

struct SynthOptions
{
    fs::path out;
    int good = 2;
    int blob = 4;
    int noisy = 6;
    int resolution = 1024;
    std::uint64_t seed = 20240607;
    std::string category = "synthetic";
    bool dump_files = false;  ///< also write a file-backend manifest under files/
};

int cmd_synth(const SynthOptions& options, std::ostream& log);

/// Runs `body`, mapping library exceptions to exit codes and printing the
/// message to `err`.
int guarded(std::ostream& err, const std::function<int()>& body);

}  // namespace zsas::cli
