#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kkl/error.hpp"
#include "kkl/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

// Precedence, lowest first: built-in defaults, KKL_OUTPUT_DIR (output
// directory only), the --config document, command-line flags.
struct Common {
    std::string config_path;
    std::string output_dir;
    bool timestamp = false;
    bool no_plots = false;
};

struct Overrides {
    std::optional<std::string> source, input, truth;
    std::optional<double> horizon, dt, noise, frame_interval, trim, fit_fraction, threshold;
    std::optional<std::size_t> output_dim, order, target_dim, width, height;
    std::optional<std::uint64_t> output_seed, observer_seed, render_seed;
    std::vector<double> rates;
    std::vector<std::size_t> roi;
    std::optional<std::string> output_kind;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config_path, "JSON config file");
    cmd->add_option("-o,--output-dir", c.output_dir, "Artifact directory (overrides config and KKL_OUTPUT_DIR)");
    cmd->add_flag("--timestamp", c.timestamp, "Record the wall-clock time in the run metadata");
    cmd->add_flag("--no-plots", c.no_plots, "Skip SVG plots");
}

kkl::PipelineConfig resolve(const Common& c, const Overrides& o) {
    kkl::PipelineConfig cfg = c.config_path.empty() ? kkl::PipelineConfig{} : kkl::load_config(c.config_path);
    if (!c.output_dir.empty()) cfg.output_dir = c.output_dir;
    if (c.timestamp) cfg.timestamp = true;
    if (c.no_plots) cfg.plots = false;
    if (o.input) cfg.input_path = *o.input;
    if (o.truth) cfg.truth_path = *o.truth;
    if (o.source) cfg = kkl::config_from_json([&] {
        auto doc = kkl::config_to_json(cfg);
        doc["source"] = *o.source;
        return doc;
    }());
    if (o.output_kind) cfg = kkl::config_from_json([&] {
        auto doc = kkl::config_to_json(cfg);
        doc["output"]["kind"] = *o.output_kind;
        return doc;
    }());
    if (o.horizon) cfg.horizon = *o.horizon;
    if (o.dt) cfg.sampling_interval = *o.dt;
    if (o.noise) cfg.render_noise = *o.noise;
    if (o.frame_interval) cfg.frame_interval = *o.frame_interval;
    if (o.trim) cfg.trim_time = *o.trim;
    if (o.fit_fraction) cfg.fit_fraction = *o.fit_fraction;
    if (o.threshold) cfg.rmse_threshold = *o.threshold;
    if (o.output_dim) cfg.output_dim = *o.output_dim;
    if (o.order) cfg.observer_order = *o.order;
    if (o.target_dim) cfg.state_dim = *o.target_dim;
    if (o.width) cfg.frame_width = *o.width;
    if (o.height) cfg.frame_height = *o.height;
    if (o.output_seed) cfg.output_seed = *o.output_seed;
    if (o.observer_seed) cfg.observer_seed = *o.observer_seed;
    if (o.render_seed) cfg.render_seed = *o.render_seed;
    if (!o.rates.empty()) {
        cfg.rate_min = o.rates[0];
        cfg.rate_max = o.rates[1];
    }
    if (!o.roi.empty()) cfg.roi = {o.roi[0], o.roi[1], o.roi[2], o.roi[3]};
    cfg.validate();
    return cfg;
}

void print_files(const kkl::RunMetadata& meta, const fs::path& dir) {
    std::printf("%s: wrote %zu files to %s\n", meta.command.c_str(), meta.files.size() + 1, dir.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-driven KKL observer: simulate, lift, reduce and diagnose"};
    app.require_subcommand(1);
    app.set_version_flag("--version", KKL_VERSION_STRING);

    Common common;
    Overrides o;
    kkl::StageInputs in;
    std::string trajectory, outputs, lifted, observer, components, pca_path;
    bool verify = false;
    kkl::PlotRequest plot;
    std::string plot_kind = "time", plot_input, plot_output;

    auto* simulate = app.add_subcommand("simulate", "Integrate the Oregonator and write the sampled trajectory");
    auto* render = app.add_subcommand("render-frames", "Render a trajectory to PPM frames");
    auto* ingest = app.add_subcommand("ingest", "Build the output series from the configured source");
    auto* lift = app.add_subcommand("lift", "Pass the output series through the observer filter bank");
    auto* pca = app.add_subcommand("pca", "Whiten and reduce the lifted states");
    auto* align = app.add_subcommand("align", "Fit principal components to the true states and report");
    auto* pipeline = app.add_subcommand("pipeline", "Run every stage and write all artifacts");
    auto* plotcmd = app.add_subcommand("plot", "Plot a series CSV as SVG");

    for (auto* cmd : {simulate, render, ingest, lift, pca, align, pipeline}) add_common(cmd, common);

    for (auto* cmd : {simulate, render, ingest, pipeline}) {
        cmd->add_option("--horizon", o.horizon, "Simulated time span");
        cmd->add_option("--dt", o.dt, "Sampling interval");
    }
    for (auto* cmd : {render, ingest, align}) cmd->add_option("--trajectory", trajectory, "Trajectory CSV");
    for (auto* cmd : {render, ingest, pipeline}) {
        cmd->add_option("--noise", o.noise, "Per-pixel uniform noise level in [0, 1]");
        cmd->add_option("--render-seed", o.render_seed, "Pixel noise seed");
        cmd->add_option("--width", o.width, "Rendered frame width");
        cmd->add_option("--height", o.height, "Rendered frame height");
    }
    for (auto* cmd : {ingest, pipeline}) {
        cmd->add_option("--source", o.source, "oregonator-synthetic, csv or ppm-sequence");
        cmd->add_option("--input", o.input, "Output CSV, or PPM directory / glob pattern");
        cmd->add_option("--roi", o.roi, "x0 y0 width height")->expected(4);
        cmd->add_option("--frame-interval", o.frame_interval, "Seconds per frame");
        cmd->add_option("--output-kind", o.output_kind, "random-smooth, rendered-frames or identity");
        cmd->add_option("--output-dim", o.output_dim, "Number of random smooth outputs");
        cmd->add_option("--output-seed", o.output_seed, "Random output map seed");
    }
    for (auto* cmd : {lift, pipeline}) {
        cmd->add_option("--rates", o.rates, "Observer rate range: min max")->expected(2);
        cmd->add_option("--order", o.order, "Observer order (default p*(n+1))");
        cmd->add_option("--observer-seed", o.observer_seed, "Observer rates and input matrix seed");
    }
    lift->add_option("--outputs", outputs, "Output series CSV");
    for (auto* cmd : {lift, pca, pipeline}) cmd->add_option("--target-dim", o.target_dim, "State dimension n");
    for (auto* cmd : {pca, pipeline}) {
        cmd->add_option("--trim", o.trim, "Discard samples with t < trim before fitting");
        cmd->add_option("--fit-fraction", o.fit_fraction, "Fraction of samples in the fit window");
    }
    pca->add_option("--lifted", lifted, "Lifted series CSV");
    pca->add_option("--observer", observer, "Observer JSON");
    align->add_option("--components", components, "Component series CSV");
    align->add_option("--pca", pca_path, "PCA model JSON");
    for (auto* cmd : {align, pipeline}) {
        cmd->add_option("--truth", o.truth, "True-state CSV");
        cmd->add_option("--threshold", o.threshold, "Normalized RMSE threshold for recovery");
    }
    pipeline->add_flag("--verify", verify, "Re-run and compare artifact hashes with the stored manifest");

    plotcmd->add_option("input", plot_input, "Series CSV with header t,<name>1,...")->required();
    plotcmd->add_option("-o,--output", plot_output, "SVG path")->required();
    plotcmd->add_option("--kind", plot_kind, "time, pair or 3d")->check(CLI::IsMember({"time", "pair", "3d"}));
    plotcmd->add_option("--columns", plot.columns, "1-based value columns");
    plotcmd->add_option("--title", plot.title);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (!trajectory.empty()) in.trajectory = trajectory;
        if (!outputs.empty()) in.outputs = outputs;
        if (!lifted.empty()) in.lifted = lifted;
        if (!observer.empty()) in.observer = observer;
        if (!components.empty()) in.components = components;
        if (!pca_path.empty()) in.pca = pca_path;

        if (*plotcmd) {
            plot.input = plot_input;
            plot.output = plot_output;
            plot.kind = plot_kind == "time" ? kkl::PlotKind::Time
                        : plot_kind == "pair" ? kkl::PlotKind::Pair
                                              : kkl::PlotKind::Axonometric;
            kkl::cmd_plot(plot);
            std::printf("plot: wrote %s\n", plot_output.c_str());
            return 0;
        }

        const kkl::PipelineConfig cfg = resolve(common, o);
        const fs::path dir = kkl::resolve_output_dir(cfg);
        if (*simulate) print_files(kkl::cmd_simulate(cfg, dir), dir);
        else if (*render) print_files(kkl::cmd_render_frames(cfg, dir, in), dir);
        else if (*ingest) print_files(kkl::cmd_ingest(cfg, dir, in), dir);
        else if (*lift) print_files(kkl::cmd_lift(cfg, dir, in), dir);
        else if (*pca) print_files(kkl::cmd_pca(cfg, dir, in), dir);
        else if (*align) print_files(kkl::cmd_align(cfg, dir, in), dir);
        else if (*pipeline && verify) {
            const kkl::VerifyReport rep = kkl::verify_pipeline(cfg, dir);
            for (const auto& m : rep.mismatches) std::printf("MISMATCH %s\n", m.c_str());
            std::printf("verify: %zu files checked, %zu mismatches\n", rep.checked, rep.mismatches.size());
            return rep.ok() ? 0 : 3;
        } else if (*pipeline) {
            const kkl::PipelineResult r = kkl::run_pipeline(cfg, dir);
            print_files(r.metadata, dir);
            if (r.report.explained_ratio) std::printf("explained variance ratio: %.6f\n", *r.report.explained_ratio);
            if (r.alignment)
                for (std::size_t i = 0; i < r.alignment->r2.size(); ++i)
                    std::printf("x%zu: R2 %.4f  nrmse %.4f\n", i + 1, r.alignment->r2[i], r.alignment->nrmse[i]);
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kkl::exit_code_for(e);
    }
}
