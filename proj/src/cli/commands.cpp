#include "zsas/cli/commands.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "zsas/cli/overlay.hpp"
#include "zsas/file_backend.hpp"
#include "zsas/imgproc.hpp"
#include "zsas/io.hpp"
#include "zsas/pipeline.hpp"
#include "zsas/synthetic.hpp"

#ifndef ZSAS_VERSION
#define ZSAS_VERSION "0.0.0"
#endif

namespace zsas::cli {

std::string version()
{
    return ZSAS_VERSION;
}

namespace {

/// Errors that stop a whole command rather than one image.
bool is_fatal(const std::exception_ptr& error)
{
    try
    {
        std::rethrow_exception(error);
    }
    catch (const ConfigError&)
    {
        return true;
    }
    catch (const ContractError&)
    {
        return true;
    }
    catch (...)
    {
        return false;
    }
}

std::string message_of(const std::exception_ptr& error)
{
    try
    {
        std::rethrow_exception(error);
    }
    catch (const std::exception& e)
    {
        return e.what();
    }
    catch (...)
    {
        return "unknown error";
    }
}

int worker_count(int requested, std::size_t jobs)
{
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    n = std::max(n, 1);
    return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), std::max<std::size_t>(jobs, 1)));
}

/// Runs job(i) for i in [0, n) on a pool; returns one error slot per job.
/// Fatal errors stop the remaining jobs and are rethrown after joining.
std::vector<std::exception_ptr> parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& job)
{
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr fatal;
    std::mutex fatal_mutex;

    auto loop = [&] {
        while (!stop)
        {
            const std::size_t i = next++;
            if (i >= n)
                return;
            try
            {
                job(i);
            }
            catch (...)
            {
                errors[i] = std::current_exception();
                if (is_fatal(errors[i]))
                {
                    std::lock_guard lock(fatal_mutex);
                    if (!fatal)
                        fatal = errors[i];
                    stop = true;
                }
            }
        }
    };

    const int count = worker_count(workers, n);
    std::vector<std::thread> threads;
    for (int t = 1; t < count; ++t)
        threads.emplace_back(loop);
    loop();
    for (auto& t : threads)
        t.join();
    if (fatal)
        std::rethrow_exception(fatal);
    return errors;
}

nlohmann::json prompts_json(const PromptSet& prompts)
{
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : prompts.points)
    {
        points.push_back({{"x", p.x},
                          {"y", p.y},
                          {"polarity", std::string(to_string(p.polarity))},
                          {"score", p.score}});
    }
    return points;
}

nlohmann::json box_json(const std::optional<Box>& box)
{
    if (!box)
        return nullptr;
    return {box->x_min, box->y_min, box->x_max, box->y_max};
}

void write_debug(const fs::path& dir, const pipeline::PreparedImage& prepared, const pipeline::ImageOutcome& out)
{
    const auto& ppg = out.ppg.intermediates;
    io::write_score_grid(dir / "anomaly.f32", prepared.anomaly);
    io::write_score_png(dir / "anomaly.png", prepared.anomaly);
    io::write_mask_png(dir / "extreme_mask.png", ppg.extreme_mask);
    io::write_mask_png(dir / "ring_mask.png", ppg.ring_mask);
    io::write_mask_png(dir / "feature_extreme.png", ppg.feature_extreme);
    io::write_mask_png(dir / "feature_ring.png", ppg.feature_ring);
    io::write_score_grid(dir / "similarity.f32", ppg.similarity);
    for (std::size_t s = 0; s < out.cascade.stage_masks.size(); ++s)
    {
        const auto stem = "stage" + std::to_string(s + 1);
        io::write_mask_png(dir / (stem + "_mask.png"), out.cascade.stage_masks[s]);
        io::write_score_grid(dir / (stem + "_logit.f32"), out.cascade.stage_logits[s]);
    }
    io::write_json(dir / "prompts.json", {{"points", prompts_json(out.ppg.prompts)},
                                          {"box", box_json(out.cascade.derived_box)},
                                          {"stage_scores", out.cascade.stage_scores}});
}

PipelineConfig apply_overrides(PipelineConfig c, const ConfigOverrides& o)
{
    if (o.extreme_threshold)
        c.extreme_threshold = *o.extreme_threshold;
    if (o.k_positive)
        c.k_positive = *o.k_positive;
    if (o.k_negative)
        c.k_negative = *o.k_negative;
    if (o.min_spacing)
        c.min_spacing = *o.min_spacing;
    if (o.kernel_shape)
        c.kernel.shape = parse_kernel_shape(*o.kernel_shape);
    if (o.kernel_size.size() == 1)
    {
        c.kernel.width = c.kernel.height = o.kernel_size[0];
    }
    else if (o.kernel_size.size() == 2)
    {
        c.kernel.width = o.kernel_size[0];
        c.kernel.height = o.kernel_size[1];
    }
    else if (!o.kernel_size.empty())
    {
        throw ConfigError("kernel.size: give one value or two (width height)");
    }
    if (o.cascade_depth)
        c.cascade_depth = *o.cascade_depth;
    if (o.output_map)
        c.output_map_mode = parse_output_map_mode(*o.output_map);
    if (o.blend_weight)
        c.blend_weight = *o.blend_weight;
    if (o.working_resolution)
        c.working_resolution = *o.working_resolution;
    return c;
}

/// Prediction resized to the truth grid when the sizes differ.
ScoreGrid to_truth_size(const ScoreGrid& map, int height, int width)
{
    if (map.height() == height && map.width() == width)
        return map;
    return imgproc::resize_bilinear(map, height, width);
}

struct PreparedEntry
{
    const DatasetEntry* entry = nullptr;
    std::optional<pipeline::PreparedImage> prepared;
    std::optional<BinaryMask> truth;
};

std::vector<PreparedEntry> prepare_all(const Workspace& ws, const PipelineConfig& config, int workers,
                                       std::vector<std::string>& failures)
{
    std::vector<PreparedEntry> items(ws.index.entries.size());
    const auto errors = parallel_for(items.size(), workers, [&](std::size_t i) {
        const auto& e = ws.index.entries[i];
        items[i].entry = &e;
        auto pixels = io::read_rgb_png(e.image_path);
        items[i].truth = load_truth(e, pixels.height, pixels.width);
        items[i].prepared = pipeline::prepare_image(ws.backends, ImageInput{e.id(), e.image_path, std::move(pixels)}, config);
    });
    for (std::size_t i = 0; i < errors.size(); ++i)
    {
        if (errors[i])
        {
            failures.push_back(ws.index.entries[i].id() + ": " + message_of(errors[i]));
            items[i].prepared.reset();
        }
    }
    return items;
}

metrics::MetricSet evaluate_maps(const std::vector<PreparedEntry>& items, std::vector<std::optional<ScoreGrid>>& maps)
{
    std::vector<metrics::EvalItem> eval;
    for (std::size_t i = 0; i < items.size(); ++i)
    {
        if (!maps[i])
            continue;
        const auto& truth = *items[i].truth;
        eval.push_back({items[i].entry->id(), items[i].entry->category,
                        to_truth_size(*maps[i], truth.height(), truth.width()), truth});
        maps[i].reset();
    }
    if (eval.empty())
        throw DataError("no image could be processed");
    return metrics::evaluate(eval).pooled;
}

}  // namespace

PipelineConfig resolve_config(const std::optional<fs::path>& config_file, const ConfigOverrides& overrides,
                              std::optional<int> segmenter_resolution)
{
    PipelineConfig c;
    bool resolution_set = overrides.working_resolution.has_value();
    if (config_file)
    {
        nlohmann::json doc;
        try
        {
            doc = io::read_json(*config_file);
        }
        catch (const std::exception& e)
        {
            throw ConfigError("config " + config_file->string() + ": " + e.what());
        }
        c = io::config_from_json(doc, c);
        resolution_set = resolution_set || (doc.is_object() && doc.contains("working_resolution"));
    }
    c = apply_overrides(c, overrides);
    if (!resolution_set && segmenter_resolution)
        c.working_resolution = *segmenter_resolution;
    return validate_config(c);
}

Workspace open_workspace(const fs::path& dataset, const std::string& backend_spec)
{
    Workspace ws;
    ws.index = index_dataset(dataset);
    ws.spec = parse_backend_spec(backend_spec);
    ws.backends = open_backend(ws.spec, dataset);
    return ws;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

int cmd_run(const RunOptions& options, std::ostream& log)
{
    std::string backend = options.backend;
    std::optional<PipelineConfig> replayed;
    if (options.replay)
    {
        const auto manifest = io::read_json(*options.replay);
        backend = manifest.at("backend").get<std::string>();
        replayed = validate_config(io::config_from_json(manifest.at("config")));
    }

    const auto ws = open_workspace(options.dataset, backend);
    const auto config = replayed ? *replayed
                                 : resolve_config(options.config, options.overrides,
                                                  ws.backends.segmenter->working_resolution());
    pipeline::check_compatible(ws.backends, config);

    const auto& entries = ws.index.entries;
    std::vector<nlohmann::json> records(entries.size());
    const auto errors = parallel_for(entries.size(), options.workers, [&](std::size_t i) {
        const auto& e = entries[i];
        const auto id = e.id();
        auto pixels = io::read_rgb_png(e.image_path);
        const ImageInput input{id, e.image_path, pixels};
        const auto prepared = pipeline::prepare_image(ws.backends, input, config);
        const auto out = pipeline::run_prepared(*ws.backends.segmenter, prepared, config);

        const auto& final_mask = out.cascade.stage_masks.back();
        const auto mask = imgproc::resize_nearest(final_mask, pixels.height, pixels.width);
        io::write_mask_png(options.out / "masks" / (id + ".png"), mask);
        io::write_score_grid(options.out / "maps" / (id + ".f32"), out.cascade.final_map);
        if (options.overlays)
            io::write_rgb_png(options.out / "overlays" / (id + ".png"), render_overlay(pixels, mask));
        if (options.debug_dumps)
            write_debug(options.out / "debug" / id, prepared, out);

        records[i] = {{"id", id},
                      {"status", "ok"},
                      {"prompts", prompts_json(out.ppg.prompts)},
                      {"prompt_fallback", out.ppg.intermediates.degraded},
                      {"box", box_json(out.cascade.derived_box)},
                      {"cascade_fallback", out.cascade.degraded},
                      {"decoder_calls", out.cascade.decoder_calls},
                      {"stage_scores", out.cascade.stage_scores},
                      {"foreground_pixels", final_mask.foreground_count()}};
    });

    int failures = 0;
    for (std::size_t i = 0; i < entries.size(); ++i)
    {
        if (!errors[i])
            continue;
        ++failures;
        const auto msg = message_of(errors[i]);
        log << "failed: " << entries[i].id() << ": " << msg << "\n";
        records[i] = {{"id", entries[i].id()}, {"status", "failed"}, {"error", msg}};
    }

    nlohmann::json manifest;
    manifest["tool"] = "zsas";
    manifest["version"] = version();
    manifest["command"] = "run";
    manifest["backend"] = ws.spec.to_string();
    manifest["config"] = io::config_to_json(config);
    manifest["images"] = records;
    manifest["failures"] = failures;
    io::write_json(options.out / "run_manifest.json", manifest);

    log << "processed " << entries.size() - failures << "/" << entries.size() << " images into "
        << options.out.string() << "\n";
    return failures > 0 ? kExitImageFailures : kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

metrics::EvalResult evaluate_predictions(const fs::path& predictions, const DatasetIndex& index)
{
    std::vector<std::string> missing;
    std::vector<metrics::EvalItem> items;
    for (const auto& e : index.entries)
    {
        const auto id = e.id();
        const auto map_path = predictions / "maps" / (id + ".f32");
        const auto mask_path = predictions / "masks" / (id + ".png");
        std::optional<ScoreGrid> pred;
        if (fs::exists(map_path))
            pred = io::read_score_grid(map_path);
        else if (fs::exists(mask_path))
            pred = io::read_mask_png(mask_path).to_scores();
        if (!pred)
        {
            missing.push_back(id);
            continue;
        }

        std::optional<BinaryMask> truth;
        if (e.truth_path)
        {
            truth = io::read_mask_png(*e.truth_path);
        }
        else
        {
            const auto image = io::read_rgb_png(e.image_path);
            truth = BinaryMask::empty(image.height, image.width);
        }
        items.push_back({id, e.category, to_truth_size(*pred, truth->height(), truth->width()), *truth});
    }
    if (!missing.empty())
    {
        std::string list;
        for (const auto& id : missing)
            list += (list.empty() ? "" : ", ") + id;
        throw DataError("missing predictions for " + std::to_string(missing.size()) + " image(s): " + list);
    }
    return metrics::evaluate(items);
}

int cmd_eval(const EvalOptions& options, std::ostream& log)
{
    const auto index = index_dataset(options.dataset);
    const auto result = evaluate_predictions(options.predictions, index);
    const auto out = options.out.value_or(options.predictions);
    io::write_json(out / "eval.json", metrics::to_json(result));
    io::write_text(out / "eval.csv", metrics::to_csv(result));
    char line[160];
    std::snprintf(line, sizeof line, "pooled AUROC %.4f  F1-max %.4f  AP %.4f  (%zu images)\n",
                  result.pooled.auroc.value_or(0.0), result.pooled.f1_max.value_or(0.0),
                  result.pooled.ap.value_or(0.0), result.per_image.size());
    log << line;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// ablations
// ---------------------------------------------------------------------------

AblationReport ablate_kernel(const Workspace& ws, const PipelineConfig& base, int workers)
{
    AblationReport report;
    report.kind = "kernel";
    std::vector<std::string> failures;
    const auto items = prepare_all(ws, base, workers, failures);

    for (auto shape : {KernelShape::cross, KernelShape::rectangle, KernelShape::ellipse})
    {
        for (int size : {20, 25, 30})
        {
            auto config = base;
            config.kernel = StructuringElement{shape, size, size};
            config = validate_config(config);

            std::vector<std::optional<ScoreGrid>> maps(items.size());
            std::atomic<long> calls{0};
            const auto errors = parallel_for(items.size(), workers, [&](std::size_t i) {
                if (!items[i].prepared)
                    return;
                auto out = pipeline::run_prepared(*ws.backends.segmenter, *items[i].prepared, config);
                calls += out.cascade.decoder_calls;
                maps[i] = std::move(out.cascade.final_map);
            });
            for (std::size_t i = 0; i < errors.size(); ++i)
            {
                if (errors[i])
                    failures.push_back(items[i].entry->id() + ": " + message_of(errors[i]));
            }
            AblationRow row;
            row.shape = std::string(to_string(shape));
            row.size = size;
            row.depth = config.cascade_depth;
            row.label = row.shape + " (" + std::to_string(size) + "," + std::to_string(size) + ")";
            row.metrics = evaluate_maps(items, maps);
            report.rows.push_back(row);
            report.decoder_calls += calls;
        }
    }
    report.images = items.size() - std::count_if(items.begin(), items.end(), [](const auto& it) { return !it.prepared; });
    report.failures = std::move(failures);
    return report;
}

AblationReport ablate_cascade(const Workspace& ws, const PipelineConfig& base, int workers)
{
    AblationReport report;
    report.kind = "cascade";
    auto config = base;
    config.cascade_depth = 3;
    config = validate_config(config);

    std::vector<std::string> failures;
    const auto items = prepare_all(ws, config, workers, failures);
    auto counting = std::make_shared<CountingSegmenter>(ws.backends.segmenter);

    std::vector<std::array<std::optional<ScoreGrid>, 3>> per_depth(items.size());
    const auto errors = parallel_for(items.size(), workers, [&](std::size_t i) {
        if (!items[i].prepared)
            return;
        const auto& prepared = *items[i].prepared;
        const auto out = pipeline::run_prepared(*counting, prepared, config);
        for (int d = 0; d < 3; ++d)
            per_depth[i][d] = cps::assemble_final_map(out.cascade.stage_masks[d], config, &prepared.anomaly);
    });
    for (std::size_t i = 0; i < errors.size(); ++i)
    {
        if (errors[i])
            failures.push_back(items[i].entry->id() + ": " + message_of(errors[i]));
    }

    const char* labels[3] = {"only points", "points+logit1", "points+box+logit2"};
    for (int d = 0; d < 3; ++d)
    {
        std::vector<std::optional<ScoreGrid>> maps(items.size());
        for (std::size_t i = 0; i < items.size(); ++i)
            maps[i] = std::move(per_depth[i][d]);
        AblationRow row;
        row.label = labels[d];
        row.depth = d + 1;
        row.shape = std::string(to_string(config.kernel.shape));
        row.size = config.kernel.width;
        row.metrics = evaluate_maps(items, maps);
        report.rows.push_back(row);
    }
    report.decoder_calls = counting->decode_calls();
    report.images = items.size() - failures.size();
    report.failures = std::move(failures);
    return report;
}

namespace {

std::string fmt(const std::optional<double>& v)
{
    if (!v)
        return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v * 100.0);
    return buf;
}

nlohmann::json optional_value(const std::optional<double>& v)
{
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string report_table(const AblationReport& report)
{
    std::ostringstream out;
    if (report.kind == "kernel")
        out << "shape,size,AUROC,F1-max,AP\n";
    else
        out << "prompts,AUROC,F1-max,AP\n";
    for (const auto& r : report.rows)
    {
        if (report.kind == "kernel")
            out << r.shape << "," << r.size;
        else
            out << r.label;
        out << "," << fmt(r.metrics.auroc) << "," << fmt(r.metrics.f1_max) << "," << fmt(r.metrics.ap) << "\n";
    }
    return out.str();
}

void write_report(const fs::path& out_dir, const AblationReport& report)
{
    nlohmann::json doc;
    doc["ablation"] = report.kind;
    doc["images"] = report.images;
    doc["decoder_calls"] = report.decoder_calls;
    doc["failures"] = report.failures;
    doc["rows"] = nlohmann::json::array();
    for (const auto& r : report.rows)
    {
        nlohmann::json row{{"label", r.label},
                           {"auroc", optional_value(r.metrics.auroc)},
                           {"f1_max", optional_value(r.metrics.f1_max)},
                           {"ap", optional_value(r.metrics.ap)}};
        if (report.kind == "kernel")
        {
            row["shape"] = r.shape;
            row["size"] = r.size;
        }
        else
        {
            row["depth"] = r.depth;
        }
        doc["rows"].push_back(row);
    }
    const auto stem = "ablate_" + report.kind;
    io::write_json(out_dir / (stem + ".json"), doc);
    io::write_text(out_dir / (stem + ".csv"), report_table(report));
}

namespace {

int run_ablation(const AblateOptions& options, std::ostream& log, bool kernel)
{
    const auto ws = open_workspace(options.dataset, options.backend);
    const auto config = resolve_config(options.config, options.overrides, ws.backends.segmenter->working_resolution());
    pipeline::check_compatible(ws.backends, config);
    const auto report = kernel ? ablate_kernel(ws, config, options.workers) : ablate_cascade(ws, config, options.workers);
    write_report(options.out, report);
    for (const auto& f : report.failures)
        log << "failed: " << f << "\n";
    log << report_table(report);
    return report.failures.empty() ? kExitOk : kExitImageFailures;
}

}  // namespace

int cmd_ablate_kernel(const AblateOptions& options, std::ostream& log)
{
    return run_ablation(options, log, true);
}

int cmd_ablate_cascade(const AblateOptions& options, std::ostream& log)
{
    return run_ablation(options, log, false);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const SynthOptions& options, std::ostream& log)
{
    if (options.good < 0 || options.blob < 0 || options.noisy < 0 || options.good + options.blob + options.noisy == 0)
        throw ConfigError("synth: scene counts must be non-negative and not all zero");
    const auto suite = synthetic::make_suite(options.good, options.blob, options.noisy, options.resolution,
                                             options.seed, options.category);
    synthetic::write_dataset(options.out, suite);

    if (options.dump_files)
    {
        const auto backend = synthetic::make_backend(suite);
        std::vector<FileBackendImage> images;
        for (const auto& s : suite.scenes)
        {
            const ImageInput input{s.id, {}, {}};
            images.push_back({s.id, backend->score(input), backend->encode(input).features});
        }
        write_file_backend(options.out / "files" / "manifest.json", backend->working_resolution(),
                           backend->logit_resolution(), backend->feature_dims(), images,
                           {{"kind", "synthetic"}, {"suite", std::string("../") + synthetic::kSuiteFileName}});
    }
    log << "wrote " << suite.scenes.size() << " scenes to " << options.out.string() << "\n";
    return kExitOk;
}

int guarded(std::ostream& err, const std::function<int()>& body)
{
    try
    {
        return body();
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << "\n";
        return kExitFatal;
    }
}

}  // namespace zsas::cli
