#include <iostream>

#include <CLI11.hpp>

#include "zsas/cli/commands.hpp"

using namespace zsas::cli;

namespace {

void add_config_flags(CLI::App* app, std::optional<std::filesystem::path>& config, ConfigOverrides& o)
{
    app->add_option("--config", config, "PipelineConfig JSON file")->check(CLI::ExistingFile);
    app->add_option("--extreme-threshold", o.extreme_threshold, "threshold on the normalized anomaly map");
    app->add_option("--k-positive", o.k_positive, "number of positive points");
    app->add_option("--k-negative", o.k_negative, "number of negative points");
    app->add_option("--min-spacing", o.min_spacing, "minimum distance between same-polarity points (px)");
    app->add_option("--kernel-shape", o.kernel_shape, "ellipse | rectangle | cross");
    app->add_option("--kernel-size", o.kernel_size, "kernel size: N or W H")->expected(1, 2);
    app->add_option("--cascade-depth", o.cascade_depth, "1, 2 or 3 decoder passes");
    app->add_option("--output-map", o.output_map, "binary | blended");
    app->add_option("--blend-weight", o.blend_weight, "mask weight for blended output");
    app->add_option("--working-resolution", o.working_resolution, "segmenter working resolution");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"zsas: zero-shot anomaly segmentation with point and cascaded prompts"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version());

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "segment every test image of a dataset");
    run_cmd->add_option("--dataset", run.dataset, "MVTec-style dataset root")->required();
    run_cmd->add_option("--backend", run.backend, "synthetic | files:<manifest> | graphs:<enc>,<dec>,<scorer>");
    run_cmd->add_option("--out", run.out, "output directory")->required();
    run_cmd->add_option("--replay", run.replay, "reuse backend and config from a run_manifest.json")
        ->check(CLI::ExistingFile);
    run_cmd->add_option("--workers", run.workers, "worker threads (0 = all cores)");
    run_cmd->add_flag("--debug-dumps", run.debug_dumps, "write intermediate maps per image");
    bool no_overlays = false;
    run_cmd->add_flag("--no-overlays", no_overlays, "skip overlay PNGs");
    add_config_flags(run_cmd, run.config, run.overrides);

    EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "pixel AUROC / F1-max / AP of a run");
    eval_cmd->add_option("--pred", eval.predictions, "output directory of `zsas run`")->required();
    eval_cmd->add_option("--dataset", eval.dataset, "dataset root")->required();
    eval_cmd->add_option("--out", eval.out, "report directory (default: --pred)");

    AblateOptions kernel;
    auto* kernel_cmd = app.add_subcommand("ablate-kernel", "dilation kernel shape x size grid");
    AblateOptions cascade;
    auto* cascade_cmd = app.add_subcommand("ablate-cascade", "cascade depth 1..3");
    for (auto [cmd, opts] : {std::pair{kernel_cmd, &kernel}, std::pair{cascade_cmd, &cascade}})
    {
        cmd->add_option("--dataset", opts->dataset, "dataset root")->required();
        cmd->add_option("--backend", opts->backend, "backend spec");
        cmd->add_option("--out", opts->out, "report directory")->required();
        cmd->add_option("--workers", opts->workers, "worker threads (0 = all cores)");
        add_config_flags(cmd, opts->config, opts->overrides);
    }

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
    synth_cmd->add_option("--out", synth.out, "dataset root")->required();
    synth_cmd->add_option("--good", synth.good, "defect-free scenes");
    synth_cmd->add_option("--blob", synth.blob, "clean anomaly scenes");
    synth_cmd->add_option("--noisy", synth.noisy, "anomaly scenes with decoder noise");
    synth_cmd->add_option("--resolution", synth.resolution, "image size in pixels");
    synth_cmd->add_option("--seed", synth.seed, "generator seed");
    synth_cmd->add_option("--category", synth.category, "category directory name");
    synth_cmd->add_flag("--dump-files", synth.dump_files, "also write a file-backend manifest");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitFatal;
    }

    return guarded(std::cerr, [&] {
        if (*run_cmd)
        {
            run.overlays = !no_overlays;
            return cmd_run(run, std::cout);
        }
        if (*eval_cmd)
            return cmd_eval(eval, std::cout);
        if (*kernel_cmd)
            return cmd_ablate_kernel(kernel, std::cout);
        if (*cascade_cmd)
            return cmd_ablate_cascade(cascade, std::cout);
        return cmd_synth(synth, std::cout);
    });
}
