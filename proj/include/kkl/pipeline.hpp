#pragma once

#include <array>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kkl/diagnostics.hpp"
#include "kkl/dynamics.hpp"
#include "kkl/ingest.hpp"
#include "kkl/lifting.hpp"
#include "kkl/reduction.hpp"
#include "kkl/series.hpp"

namespace kkl {

/// Environment variable consulted for the output directory when neither the
/// config file nor a command-line flag sets one.
inline constexpr const char* kOutputDirEnv = "KKL_OUTPUT_DIR";
inline constexpr const char* kDefaultOutputDir = "kkl-output";

enum class Source { OregonatorSynthetic, Csv, PpmSequence };
enum class OutputKind { RandomSmooth, RenderedFrames, Identity };

std::string to_string(Source source);
std::string to_string(OutputKind kind);

struct PipelineConfig {
    Source source = Source::OregonatorSynthetic;

    // system
    OregonatorParams system;
    std::array<double, 3> x0{0.5, 0.5, 0.5};
    double horizon = 34.0;
    double sampling_interval = 0.075;
    IntegratorConfig integrator;

    // synthetic outputs
    OutputKind output_kind = OutputKind::RandomSmooth;
    std::size_t output_dim = 50;
    std::uint64_t output_seed = 1;
    std::size_t frame_width = 10;
    std::size_t frame_height = 10;
    double render_noise = 0.0;
    std::uint64_t render_seed = 2;

    // external inputs
    std::string input_path;  // CSV file, or PPM directory / glob pattern
    std::string truth_path;  // optional trajectory CSV for csv / ppm sources
    std::optional<double> frame_interval;
    Roi roi{0, 0, 10, 10};

    // observer
    std::size_t state_dim = 3;
    std::optional<std::size_t> observer_order;  // default p·(n+1)
    double rate_min = 1.0;
    double rate_max = 50.0;
    std::uint64_t observer_seed = 3;

    // reduction
    std::optional<double> trim_time;  // default 5 / slowest rate
    double fit_fraction = 1.0;

    // diagnostics
    bool align = true;
    bool period = true;
    bool plots = true;
    double rmse_threshold = 0.15;

    // artifacts
    std::optional<std::string> output_dir;
    bool persist_intermediate = true;
    bool timestamp = false;

    void validate() const;
};

/// Parses a config document. Unknown keys and wrong types are validation errors.
PipelineConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

/// Output directory after applying config, environment and default, in that order.
std::filesystem::path resolve_output_dir(const PipelineConfig& config);

/// Hash of the canonical config document without the output directory.
std::string config_hash(const PipelineConfig& config);

struct ArtifactRecord {
    std::string path;  // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunMetadata {
    std::string command;
    nlohmann::json config;
    std::string config_sha256;
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, std::string> versions;
    std::optional<Vector> spectrum;
    std::optional<double> trim_time;
    std::vector<ArtifactRecord> files;
    std::optional<std::string> timestamp;
};

nlohmann::json metadata_to_json(const RunMetadata& meta);
RunMetadata metadata_from_json(const nlohmann::json& doc);
std::string metadata_file_name(const std::string& command);

/// Integrates the configured system and samples it on the uniform grid.
Trajectory simulate_trajectory(const PipelineConfig& config);

/// Outputs for the synthetic source, derived from a sampled trajectory.
OutputSeries synthesize_outputs(const PipelineConfig& config, const Trajectory& truth);

/// Renders frames for a sampled trajectory using the standard colour map.
FrameSequence render_frames(const PipelineConfig& config, const Trajectory& truth);

/// Outputs from the configured csv or ppm-sequence input.
OutputSeries load_outputs(const PipelineConfig& config);

std::shared_ptr<const ObserverConfig> observer_for(const PipelineConfig& config, std::size_t output_dim);

struct PipelineResult {
    std::optional<Trajectory> truth;
    OutputSeries outputs;
    std::shared_ptr<const ObserverConfig> observer;
    LiftedSeries lifted;
    Reduction reduction;
    std::optional<AffineAlignment> alignment;
    Report report;
    RunMetadata metadata;
};

/// Runs every stage in memory. Stage failures are rethrown with the stage name.
PipelineResult run_pipeline_in_memory(const PipelineConfig& config);

/// Runs the full chain and writes artifacts plus metadata under `directory`.
PipelineResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& directory);

struct StageInputs {
    std::optional<std::filesystem::path> trajectory;
    std::optional<std::filesystem::path> outputs;
    std::optional<std::filesystem::path> lifted;
    std::optional<std::filesystem::path> observer;
    std::optional<std::filesystem::path> components;
    std::optional<std::filesystem::path> pca;
};

RunMetadata cmd_simulate(const PipelineConfig& config, const std::filesystem::path& directory);
RunMetadata cmd_render_frames(const PipelineConfig& config, const std::filesystem::path& directory,
                              const StageInputs& inputs = {});
RunMetadata cmd_ingest(const PipelineConfig& config, const std::filesystem::path& directory,
                       const StageInputs& inputs = {});
RunMetadata cmd_lift(const PipelineConfig& config, const std::filesystem::path& directory,
                     const StageInputs& inputs = {});
RunMetadata cmd_pca(const PipelineConfig& config, const std::filesystem::path& directory,
                    const StageInputs& inputs = {});
RunMetadata cmd_align(const PipelineConfig& config, const std::filesystem::path& directory,
                      const StageInputs& inputs = {});

enum class PlotKind { Time, Pair, Axonometric };

struct PlotRequest {
    std::filesystem::path input;
    std::filesystem::path output;
    PlotKind kind = PlotKind::Time;
    std::vector<std::size_t> columns;  // 1-based value columns; empty means all (time) or 1,2(,3)
    std::string title;
};

/// Plots any `t,<prefix>1..m` table.
void cmd_plot(const PlotRequest& request);

struct VerifyReport {
    std::size_t checked = 0;
    std::vector<std::string> mismatches;
    bool ok() const noexcept { return mismatches.empty(); }
};

/// Re-runs the pipeline in a scratch directory and compares every artifact hash
/// against the manifest stored in `directory`, and the files on disk as well.
VerifyReport verify_pipeline(const PipelineConfig& config, const std::filesystem::path& directory);

/// 0 success, 2 validation, 3 numerical, 4 IO, 1 anything else.
int exit_code_for(const std::exception& error) noexcept;

}  // namespace kkl
