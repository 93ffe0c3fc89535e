#include "kkl/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <set>
#include <utility>

#include "kkl/error.hpp"
#include "kkl/hash.hpp"
#include "kkl/io.hpp"
#include "kkl/svg.hpp"

#ifndef KKL_VERSION
#define KKL_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace kkl {

std::string to_string(Source source) {
    switch (source) {
        case Source::OregonatorSynthetic: return "oregonator-synthetic";
        case Source::Csv: return "csv";
        case Source::PpmSequence: return "ppm-sequence";
    }
    return "unknown";
}

std::string to_string(OutputKind kind) {
    switch (kind) {
        case OutputKind::RandomSmooth: return "random-smooth";
        case OutputKind::RenderedFrames: return "rendered-frames";
        case OutputKind::Identity: return "identity";
    }
    return "unknown";
}

namespace {

Source parse_source(const std::string& s) {
    if (s == "oregonator-synthetic") return Source::OregonatorSynthetic;
    if (s == "csv") return Source::Csv;
    if (s == "ppm-sequence") return Source::PpmSequence;
    throw ValidationError("config: unknown source '" + s + "' (oregonator-synthetic, csv, ppm-sequence)");
}

OutputKind parse_output_kind(const std::string& s) {
    if (s == "random-smooth") return OutputKind::RandomSmooth;
    if (s == "rendered-frames") return OutputKind::RenderedFrames;
    if (s == "identity") return OutputKind::Identity;
    throw ValidationError("config: unknown output kind '" + s + "' (random-smooth, rendered-frames, identity)");
}

// Reads one JSON object and rejects keys nobody asked for.
class Section {
public:
    Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) throw ValidationError("config: " + where() + " must be an object");
    }

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!doc_.contains(key)) return;
        try {
            out = doc_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ValidationError("config: " + name(key) + " has the wrong type");
        }
    }

    template <class T>
    void read(const char* key, std::optional<T>& out) {
        seen_.insert(key);
        if (!doc_.contains(key) || doc_.at(key).is_null()) return;
        T value{};
        read(key, value);
        out = value;
    }

    bool has(const char* key) {
        seen_.insert(key);
        return doc_.contains(key);
    }

    Section child(const char* key) {
        seen_.insert(key);
        return Section(doc_.at(key), name(key));
    }

    void finish() const {
        for (const auto& [key, _] : doc_.items())
            if (!seen_.count(key)) throw ValidationError("config: unknown key " + name(key.c_str()));
    }

private:
    std::string where() const { return path_.empty() ? "document" : "'" + path_ + "'"; }
    std::string name(const char* key) const { return "'" + (path_.empty() ? "" : path_ + ".") + key + "'"; }

    const json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError("config: " + what);
}

}  // namespace

void PipelineConfig::validate() const {
    system.validate();
    integrator.validate();
    for (double v : x0) require(std::isfinite(v), "x0 must be finite");
    require(std::isfinite(horizon) && horizon > 0.0, "system.horizon must be positive");
    require(std::isfinite(sampling_interval) && sampling_interval > 0.0, "sampling_interval must be positive");
    require(sampling_interval <= horizon, "sampling_interval exceeds the horizon");
    require(output_dim >= 1, "output.dim must be at least 1");
    require(frame_width >= 1 && frame_height >= 1, "output frame size must be at least 1x1");
    require(render_noise >= 0.0 && render_noise <= 1.0, "output.noise must lie in [0, 1]");
    if (frame_interval) require(*frame_interval > 0.0, "input.frame_interval must be positive");
    require(roi.width >= 1 && roi.height >= 1, "input.roi must cover at least one pixel");
    require(state_dim >= 1, "observer.state_dim must be at least 1");
    if (observer_order) require(*observer_order >= 1, "observer.order must be at least 1");
    require(rate_min > 0.0 && rate_max > rate_min && std::isfinite(rate_max), "observer.rate_range must satisfy 0 < min < max");
    if (trim_time) require(*trim_time >= 0.0, "reduction.trim_time must be non-negative");
    require(fit_fraction > 0.0 && fit_fraction <= 1.0, "reduction.fit_fraction must lie in (0, 1]");
    require(rmse_threshold > 0.0, "diagnostics.rmse_threshold must be positive");
    if (source != Source::OregonatorSynthetic) require(!input_path.empty(), "input.path is required for source " + to_string(source));
}

PipelineConfig config_from_json(const json& doc) {
    PipelineConfig c;
    Section root(doc, "");
    std::string source = to_string(c.source);
    root.read("source", source);
    c.source = parse_source(source);
    root.read("sampling_interval", c.sampling_interval);
    root.read("output_dir", c.output_dir);
    root.read("persist_intermediate", c.persist_intermediate);
    root.read("timestamp", c.timestamp);

    if (root.has("system")) {
        auto s = root.child("system");
        s.read("epsilon", c.system.epsilon);
        s.read("delta", c.system.delta);
        s.read("f", c.system.f);
        s.read("q", c.system.q);
        s.read("x0", c.x0);
        s.read("horizon", c.horizon);
        s.read("rtol", c.integrator.rtol);
        s.read("atol", c.integrator.atol);
        s.read("max_step", c.integrator.h_max);
        s.finish();
    }
    if (root.has("output")) {
        auto s = root.child("output");
        std::string kind = to_string(c.output_kind);
        s.read("kind", kind);
        c.output_kind = parse_output_kind(kind);
        s.read("dim", c.output_dim);
        s.read("seed", c.output_seed);
        s.read("frame_width", c.frame_width);
        s.read("frame_height", c.frame_height);
        s.read("noise", c.render_noise);
        s.read("render_seed", c.render_seed);
        s.finish();
    }
    if (root.has("input")) {
        auto s = root.child("input");
        s.read("path", c.input_path);
        s.read("truth", c.truth_path);
        s.read("frame_interval", c.frame_interval);
        if (s.has("roi")) {
            auto r = s.child("roi");
            r.read("x0", c.roi.x0);
            r.read("y0", c.roi.y0);
            r.read("width", c.roi.width);
            r.read("height", c.roi.height);
            r.finish();
        }
        s.finish();
    }
    if (root.has("observer")) {
        auto s = root.child("observer");
        s.read("state_dim", c.state_dim);
        s.read("order", c.observer_order);
        std::array<double, 2> range{c.rate_min, c.rate_max};
        s.read("rate_range", range);
        c.rate_min = range[0];
        c.rate_max = range[1];
        s.read("seed", c.observer_seed);
        s.finish();
    }
    if (root.has("reduction")) {
        auto s = root.child("reduction");
        s.read("trim_time", c.trim_time);
        s.read("fit_fraction", c.fit_fraction);
        s.finish();
    }
    if (root.has("diagnostics")) {
        auto s = root.child("diagnostics");
        s.read("align", c.align);
        s.read("period", c.period);
        s.read("plots", c.plots);
        s.read("rmse_threshold", c.rmse_threshold);
        s.finish();
    }
    root.finish();
    c.validate();
    return c;
}

json config_to_json(const PipelineConfig& c) {
    json doc;
    doc["source"] = to_string(c.source);
    doc["sampling_interval"] = c.sampling_interval;
    doc["output_dir"] = c.output_dir ? json(*c.output_dir) : json(nullptr);
    doc["persist_intermediate"] = c.persist_intermediate;
    doc["timestamp"] = c.timestamp;
    doc["system"] = {{"epsilon", c.system.epsilon}, {"delta", c.system.delta}, {"f", c.system.f},
                     {"q", c.system.q},             {"x0", c.x0},               {"horizon", c.horizon},
                     {"rtol", c.integrator.rtol},   {"atol", c.integrator.atol}, {"max_step", c.integrator.h_max}};
    doc["output"] = {{"kind", to_string(c.output_kind)}, {"dim", c.output_dim},
                     {"seed", c.output_seed},            {"frame_width", c.frame_width},
                     {"frame_height", c.frame_height},   {"noise", c.render_noise},
                     {"render_seed", c.render_seed}};
    doc["input"] = {{"path", c.input_path},
                    {"truth", c.truth_path},
                    {"frame_interval", c.frame_interval ? json(*c.frame_interval) : json(nullptr)},
                    {"roi", {{"x0", c.roi.x0}, {"y0", c.roi.y0}, {"width", c.roi.width}, {"height", c.roi.height}}}};
    doc["observer"] = {{"state_dim", c.state_dim},
                       {"order", c.observer_order ? json(*c.observer_order) : json(nullptr)},
                       {"rate_range", {c.rate_min, c.rate_max}},
                       {"seed", c.observer_seed}};
    doc["reduction"] = {{"trim_time", c.trim_time ? json(*c.trim_time) : json(nullptr)},
                        {"fit_fraction", c.fit_fraction}};
    doc["diagnostics"] = {{"align", c.align}, {"period", c.period}, {"plots", c.plots},
                          {"rmse_threshold", c.rmse_threshold}};
    return doc;
}

PipelineConfig load_config(const fs::path& path) {
    const std::string text = io::read_text(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": byte " + std::to_string(e.byte) + ": invalid JSON");
    }
    return config_from_json(doc);
}

fs::path resolve_output_dir(const PipelineConfig& config) {
    if (config.output_dir && !config.output_dir->empty()) return *config.output_dir;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return kDefaultOutputDir;
}

std::string config_hash(const PipelineConfig& config) {
    json doc = config_to_json(config);
    doc.erase("output_dir");
    return sha256_hex(doc.dump());
}

// ---------------------------------------------------------------- metadata

namespace {

std::map<std::string, std::string> versions() {
    return {{"kkl", KKL_VERSION},
            {"compiler", __VERSION__},
            {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                         "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

// Writes files under one directory and keeps the manifest.
class ArtifactSink {
public:
    explicit ArtifactSink(fs::path dir) : dir_(std::move(dir)) {}

    const fs::path& dir() const { return dir_; }
    fs::path path(const std::string& name) const { return dir_ / name; }

    void text(const std::string& name, const std::string& content) {
        io::write_text_atomic(dir_ / name, content);
        files_.push_back({name, sha256_hex(content), content.size()});
    }

    // For files written by a module-level writer.
    void record(const std::string& name) {
        const fs::path p = dir_ / name;
        files_.push_back({name, sha256_file(p), fs::file_size(p)});
    }

    std::vector<ArtifactRecord> take() {
        std::sort(files_.begin(), files_.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
        return std::move(files_);
    }

private:
    fs::path dir_;
    std::vector<ArtifactRecord> files_;
};

RunMetadata begin_metadata(const std::string& command, const PipelineConfig& config) {
    RunMetadata m;
    m.command = command;
    m.config = config_to_json(config);
    m.config.erase("output_dir");
    m.config_sha256 = config_hash(config);
    m.seeds = {{"output", config.output_seed}, {"observer", config.observer_seed}, {"render", config.render_seed}};
    m.versions = versions();
    if (config.timestamp) m.timestamp = utc_now();
    return m;
}

void finish_metadata(RunMetadata& meta, ArtifactSink& sink) {
    meta.files = sink.take();
    io::write_text_atomic(sink.path(metadata_file_name(meta.command)), dump(metadata_to_json(meta)));
}

template <class F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
    const std::string prefix = std::string("stage '") + name + "': ";
    try {
        return fn();
    } catch (const ParseError& e) {
        throw ParseError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(prefix + e.what());
    } catch (const DegenerateDataError& e) {
        throw DegenerateDataError(prefix + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(prefix + e.what());
    } catch (const json::exception& e) {
        throw ParseError(prefix + e.what());
    }
}

}  // namespace

std::string metadata_file_name(const std::string& command) { return command + ".metadata.json"; }

json metadata_to_json(const RunMetadata& m) {
    json doc;
    doc["command"] = m.command;
    doc["config"] = m.config;
    doc["config_sha256"] = m.config_sha256;
    doc["seeds"] = m.seeds;
    doc["versions"] = m.versions;
    if (m.spectrum) doc["spectrum"] = *m.spectrum;
    if (m.trim_time) doc["trim_time"] = *m.trim_time;
    if (m.timestamp) doc["timestamp"] = *m.timestamp;
    json files = json::array();
    for (const auto& f : m.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    doc["files"] = std::move(files);
    return doc;
}

RunMetadata metadata_from_json(const json& doc) {
    try {
        RunMetadata m;
        m.command = doc.at("command").get<std::string>();
        m.config = doc.at("config");
        m.config_sha256 = doc.at("config_sha256").get<std::string>();
        m.seeds = doc.at("seeds").get<std::map<std::string, std::uint64_t>>();
        m.versions = doc.at("versions").get<std::map<std::string, std::string>>();
        if (doc.contains("spectrum")) m.spectrum = doc.at("spectrum").get<Vector>();
        if (doc.contains("trim_time")) m.trim_time = doc.at("trim_time").get<double>();
        if (doc.contains("timestamp")) m.timestamp = doc.at("timestamp").get<std::string>();
        for (const auto& f : doc.at("files"))
            m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                               f.at("bytes").get<std::uintmax_t>()});
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("metadata document: ") + e.what());
    }
}

// ---------------------------------------------------------------- stages

Trajectory simulate_trajectory(const PipelineConfig& config) {
    config.validate();
    const Trajectory dense = integrate(oregonator_field(config.system), config.x0, 0.0, config.horizon, config.integrator);
    const Trajectory sampled = sample_uniform(dense, config.sampling_interval);
    // Keep whole frames only: the grid covers [0, horizon).
    std::size_t count = sampled.size();
    while (count > 1 && sampled.times()[count - 1] >= config.horizon - 1e-9 * config.sampling_interval) --count;
    return sampled.truncated(count);
}

FrameSequence render_frames(const PipelineConfig& config, const Trajectory& truth) {
    return render_synthetic_frames(truth, config.frame_width, config.frame_height, ColorMap::standard(),
                                   config.render_noise, config.render_seed);
}

OutputSeries synthesize_outputs(const PipelineConfig& config, const Trajectory& truth) {
    switch (config.output_kind) {
        case OutputKind::RandomSmooth:
            return apply_output_map(truth, OutputMap::random_smooth(truth, config.output_dim, config.output_seed));
        case OutputKind::Identity:
            return apply_output_map(truth, OutputMap::pass_through(truth.dimension()));
        case OutputKind::RenderedFrames:
            return extract_roi(render_frames(config, truth), Roi{0, 0, config.frame_width, config.frame_height});
    }
    throw ValidationError("unknown output kind");
}

OutputSeries load_outputs(const PipelineConfig& config) {
    switch (config.source) {
        case Source::Csv:
            return read_csv_series(config.input_path);
        case Source::PpmSequence:
            return extract_roi(read_ppm_sequence(config.input_path, config.frame_interval.value_or(config.sampling_interval)),
                               config.roi);
        case Source::OregonatorSynthetic:
            return synthesize_outputs(config, simulate_trajectory(config));
    }
    throw ValidationError("unknown source");
}

std::shared_ptr<const ObserverConfig> observer_for(const PipelineConfig& config, std::size_t output_dim) {
    const std::size_t order = config.observer_order.value_or(output_dim * (config.state_dim + 1));
    return std::make_shared<const ObserverConfig>(
        make_observer(config.state_dim, output_dim, config.rate_min, config.rate_max, config.observer_seed, order));
}

namespace {

std::optional<Trajectory> load_truth(const PipelineConfig& config) {
    if (config.truth_path.empty()) return std::nullopt;
    return read_trajectory_csv(config.truth_path);
}

void check_same_grid(const Vector& a, const Vector& b, const char* what) {
    if (a.size() != b.size())
        throw ValidationError(std::string(what) + ": " + std::to_string(a.size()) + " component samples vs " +
                              std::to_string(b.size()) + " truth samples; resample first");
    for (std::size_t k = 0; k < a.size(); ++k)
        if (std::abs(a[k] - b[k]) > 1e-9 * std::max(1.0, std::abs(b[k])))
            throw ValidationError(std::string(what) + ": time grids differ at sample " + std::to_string(k) +
                                  "; resample first");
}

PeriodEstimate period_of(const Matrix& values, std::size_t column, std::size_t first, double dt) {
    const Vector col = values.column(column);
    return estimate_period(std::span(col).subspan(first), dt);
}

struct Diagnosis {
    std::optional<AffineAlignment> alignment;
    Report report;
};

// Alignment weights come from the fit window; metrics cover every post-transient sample.
Diagnosis diagnose(const PipelineConfig& config, const Reduction& red, const std::optional<Trajectory>& truth) {
    Diagnosis d;
    const Matrix& pcs = red.series.components;
    const std::size_t n = red.series.times.size();
    const double dt = n > 1 ? (red.series.times.back() - red.series.times.front()) / static_cast<double>(n - 1) : 0.0;
    std::optional<PeriodEstimate> truth_period, recovered_period;
    if (truth) {
        check_same_grid(red.series.times, truth->times(), "align");
        if (config.align) {
            const AffineAlignment fit = align_affine(pcs.row_slice(red.fit_begin, red.fit_end),
                                                     truth->states().row_slice(red.fit_begin, red.fit_end));
            d.alignment = evaluate_alignment(fit, pcs.row_slice(red.fit_begin, n),
                                             truth->states().row_slice(red.fit_begin, n));
        }
        if (config.period) truth_period = period_of(truth->states(), 0, red.fit_begin, dt);
    }
    if (config.period && pcs.cols() > 0) recovered_period = period_of(pcs, 0, red.fit_begin, dt);
    d.report = report(red.model, d.alignment, truth_period, recovered_period, config.rmse_threshold);
    d.report.trim_time = red.trim_time;
    d.report.seeds = {{"output", config.output_seed}, {"observer", config.observer_seed}, {"render", config.render_seed}};
    d.report.hashes = {{"config", config_hash(config)}};
    return d;
}

json pca_document(const Reduction& red, const PipelineConfig& config) {
    json doc = pca_to_json(red.model);
    doc["trim_time"] = red.trim_time;
    doc["fit_window"] = {red.fit_begin, red.fit_end};
    doc["fit_fraction"] = config.fit_fraction;
    doc["seeds"] = {{"output", config.output_seed}, {"observer", config.observer_seed}, {"render", config.render_seed}};
    return doc;
}

std::vector<std::string> labels(const std::string& prefix, std::size_t m) {
    std::vector<std::string> out;
    for (std::size_t j = 1; j <= m; ++j) out.push_back(prefix + std::to_string(j));
    return out;
}

void write_plots(ArtifactSink& sink, const Vector& times, const Matrix& values, const std::string& prefix,
                 const std::string& title) {
    const std::size_t m = values.cols();
    std::vector<std::size_t> cols(m);
    for (std::size_t j = 0; j < m; ++j) cols[j] = j;
    const auto names = labels(prefix, m);
    svg::PlotOptions opt;
    opt.title = title;
    opt.x_label = "t";
    sink.text("plots/" + prefix + "_time.svg", svg::time_plot(times, values, cols, names, opt));
    if (m < 2) return;
    const std::size_t pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (const auto& pr : pairs) {
        if (pr[1] >= m) continue;
        svg::PlotOptions p;
        p.title = title;
        p.x_label = names[pr[0]];
        p.y_label = names[pr[1]];
        sink.text("plots/" + names[pr[0]] + "_" + names[pr[1]] + ".svg", svg::pair_plot(values, pr[0], pr[1], p));
    }
    if (m < 3) return;
    svg::PlotOptions p;
    p.title = title;
    p.x_label = names[0];
    p.y_label = names[1];
    p.z_label = names[2];
    sink.text("plots/" + prefix + "_3d.svg", svg::axonometric_plot(values, 0, 1, 2, p));
}

std::string table_text(const Vector& times, const Matrix& values, const char* prefix) {
    return io::format_table(times, values, prefix);
}

}  // namespace

PipelineResult run_pipeline_in_memory(const PipelineConfig& config) {
    config.validate();
    PipelineResult r;
    if (config.source == Source::OregonatorSynthetic) {
        r.truth = stage("simulate", [&] { return simulate_trajectory(config); });
        r.outputs = stage("output", [&] { return synthesize_outputs(config, *r.truth); });
    } else {
        r.outputs = stage("ingest", [&] { return load_outputs(config); });
        r.truth = stage("truth", [&] { return load_truth(config); });
    }
    r.observer = stage("observer", [&] { return observer_for(config, r.outputs.dimension()); });
    r.lifted = stage("lift", [&] { return lift(r.outputs, r.observer); });
    r.reduction = stage("pca", [&] {
        return reduce_series(r.lifted, config.state_dim, ReduceOptions{config.trim_time, config.fit_fraction});
    });
    auto diag = stage("diagnose", [&] { return diagnose(config, r.reduction, r.truth); });
    r.alignment = diag.alignment;
    r.report = std::move(diag.report);
    r.metadata = begin_metadata("pipeline", config);
    r.metadata.spectrum = r.reduction.model.spectrum;
    r.metadata.trim_time = r.reduction.trim_time;
    return r;
}

PipelineResult run_pipeline(const PipelineConfig& config, const fs::path& directory) {
    PipelineResult r = run_pipeline_in_memory(config);
    stage("write", [&] {
        ArtifactSink sink(directory);
        if (config.persist_intermediate) {
            if (r.truth) sink.text("trajectory.csv", table_text(r.truth->times(), r.truth->states(), "x"));
            sink.text("outputs.csv", table_text(r.outputs.times(), r.outputs.values(), "y"));
            sink.text("lifted.csv", table_text(r.lifted.times, r.lifted.states, "z"));
        }
        sink.text("observer.json", dump(observer_to_json(*r.observer)));
        sink.text("components.csv", table_text(r.reduction.series.times, r.reduction.series.components, "pi"));
        sink.text("pca.json", dump(pca_document(r.reduction, config)));
        sink.text("report.json", dump(report_to_json(r.report)));
        if (config.plots) {
            write_plots(sink, r.reduction.series.times, r.reduction.series.components, "pi", "principal components");
            if (r.truth) write_plots(sink, r.truth->times(), r.truth->states(), "x", "true states");
            if (r.outputs.layout()) {
                svg::PlotOptions opt;
                opt.title = "ROI channel means";
                opt.x_label = "t";
                const std::size_t cols[3] = {0, 1, 2};
                const std::string names[3] = {"R", "G", "B"};
                sink.text("plots/channel_means.svg",
                          svg::time_plot(r.outputs.times(), channel_means(r.outputs), cols, names, opt));
            }
        }
        finish_metadata(r.metadata, sink);
        return 0;
    });
    return r;
}

namespace {

fs::path input_or(const std::optional<fs::path>& given, const fs::path& dir, const char* name) {
    return given ? *given : dir / name;
}

Trajectory trajectory_input(const PipelineConfig& config, const fs::path& dir, const StageInputs& in) {
    if (in.trajectory) return read_trajectory_csv(*in.trajectory);
    if (fs::exists(dir / "trajectory.csv")) return read_trajectory_csv(dir / "trajectory.csv");
    return simulate_trajectory(config);
}

}  // namespace

RunMetadata cmd_simulate(const PipelineConfig& config, const fs::path& directory) {
    const Trajectory traj = stage("simulate", [&] { return simulate_trajectory(config); });
    ArtifactSink sink(directory);
    RunMetadata meta = begin_metadata("simulate", config);
    sink.text("trajectory.csv", table_text(traj.times(), traj.states(), "x"));
    if (config.plots) write_plots(sink, traj.times(), traj.states(), "x", "true states");
    finish_metadata(meta, sink);
    return meta;
}

RunMetadata cmd_render_frames(const PipelineConfig& config, const fs::path& directory, const StageInputs& in) {
    const bool simulated = !in.trajectory && !fs::exists(directory / "trajectory.csv");
    const Trajectory traj = stage("render-frames", [&] { return trajectory_input(config, directory, in); });
    const FrameSequence frames = stage("render-frames", [&] { return render_frames(config, traj); });
    ArtifactSink sink(directory);
    RunMetadata meta = begin_metadata("render-frames", config);
    if (simulated) sink.text("trajectory.csv", table_text(traj.times(), traj.states(), "x"));
    stage("render-frames", [&] {
        write_ppm_sequence(directory / "frames", frames);
        for (std::size_t k = 0; k < frames.frames.size(); ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "frames/frame_%06zu.ppm", k);
            sink.record(name);
        }
        return 0;
    });
    finish_metadata(meta, sink);
    return meta;
}

RunMetadata cmd_ingest(const PipelineConfig& config, const fs::path& directory, const StageInputs& in) {
    const OutputSeries y = stage("ingest", [&] {
        if (config.source == Source::OregonatorSynthetic)
            return synthesize_outputs(config, trajectory_input(config, directory, in));
        return load_outputs(config);
    });
    ArtifactSink sink(directory);
    RunMetadata meta = begin_metadata("ingest", config);
    sink.text("outputs.csv", table_text(y.times(), y.values(), "y"));
    if (config.plots && y.layout()) {
        svg::PlotOptions opt;
        opt.title = "ROI channel means";
        opt.x_label = "t";
        const std::size_t cols[3] = {0, 1, 2};
        const std::string names[3] = {"R", "G", "B"};
        sink.text("plots/channel_means.svg", svg::time_plot(y.times(), channel_means(y), cols, names, opt));
    }
    finish_metadata(meta, sink);
    return meta;
}

RunMetadata cmd_lift(const PipelineConfig& config, const fs::path& directory, const StageInputs& in) {
    const OutputSeries y = stage("lift", [&] { return read_csv_series(input_or(in.outputs, directory, "outputs.csv")); });
    const auto observer = stage("lift", [&] { return observer_for(config, y.dimension()); });
    const LiftedSeries lifted = stage("lift", [&] { return lift(y, observer); });
    ArtifactSink sink(directory);
    RunMetadata meta = begin_metadata("lift", config);
    sink.text("lifted.csv", table_text(lifted.times, lifted.states, "z"));
    sink.text("observer.json", dump(observer_to_json(*observer)));
    finish_metadata(meta, sink);
    return meta;
}

RunMetadata cmd_pca(const PipelineConfig& config, const fs::path& directory, const StageInputs& in) {
    const Reduction red = stage("pca", [&] {
        auto observer = std::make_shared<const ObserverConfig>(
            observer_from_json(json::parse(io::read_text(input_or(in.observer, directory, "observer.json")))));
        io::Table z = io::read_table(input_or(in.lifted, directory, "lifted.csv"), "z");
        if (z.values.cols() != observer->order())
            throw ValidationError("lifted series has " + std::to_string(z.values.cols()) + " columns, observer order is " +
                                  std::to_string(observer->order()));
        LiftedSeries lifted{std::move(z.times), std::move(z.values), observer};
        return reduce_series(lifted, config.state_dim, ReduceOptions{config.trim_time, config.fit_fraction});
    });
    ArtifactSink sink(directory);
    RunMetadata meta = begin_metadata("pca", config);
    meta.spectrum = red.model.spectrum;
    meta.trim_time = red.trim_time;
    sink.text("components.csv", table_text(red.series.times, red.series.components, "pi"));
    sink.text("pca.json", dump(pca_document(red, config)));
    if (config.plots) write_plots(sink, red.series.times, red.series.components, "pi", "principal components");
    finish_metadata(meta, sink);
    return meta;
}

RunMetadata cmd_align(const PipelineConfig& config, const fs::path& directory, const StageInputs& in) {
    const Report rep = stage("align", [&] {
        const json doc = json::parse(io::read_text(input_or(in.pca, directory, "pca.json")));
        Reduction red;
        red.model = pca_from_json(doc);
        red.trim_time = doc.at("trim_time").get<double>();
        const auto window = doc.at("fit_window").get<std::array<std::size_t, 2>>();
        io::Table pcs = io::read_table(input_or(in.components, directory, "components.csv"), "pi");
        if (window[0] >= window[1] || window[1] > pcs.times.size())
            throw ValidationError("fit window in the PCA document does not match the component series");
        red.fit_begin = window[0];
        red.fit_end = window[1];
        red.series.times = std::move(pcs.times);
        red.series.components = std::move(pcs.values);
        std::optional<Trajectory> truth;
        if (in.trajectory) truth = read_trajectory_csv(*in.trajectory);
        else if (!config.truth_path.empty()) truth = read_trajectory_csv(config.truth_path);
        else if (fs::exists(directory / "trajectory.csv")) truth = read_trajectory_csv(directory / "trajectory.csv");
        return diagnose(config, red, truth).report;
    });
    ArtifactSink sink(directory);
    RunMetadata meta = begin_metadata("align", config);
    sink.text("report.json", dump(report_to_json(rep)));
    finish_metadata(meta, sink);
    return meta;
}

void cmd_plot(const PlotRequest& req) {
    const std::string text = io::read_text(req.input);
    const auto eol = text.find('\n');
    const std::string header = text.substr(0, eol == std::string::npos ? text.size() : eol);
    // Header is t,<prefix>1,...; recover the prefix from the first value column.
    const auto comma = header.find(',');
    if (header.rfind("t,", 0) != 0 || comma == std::string::npos)
        throw ParseError(req.input.string() + ":1: expected header 't,<name>1,...'");
    std::string first = header.substr(comma + 1, header.find(',', comma + 1) - comma - 1);
    if (!first.empty() && first.back() == '\r') first.pop_back();
    while (!first.empty() && std::isdigit(static_cast<unsigned char>(first.back()))) first.pop_back();
    const io::Table table = io::parse_table(text, first, req.input.string());
    const std::size_t m = table.values.cols();

    std::vector<std::size_t> cols;
    for (std::size_t c : req.columns) {
        if (c == 0 || c > m)
            throw ValidationError("plot: unknown column " + std::to_string(c) + " (table has " + first + "1.." + first +
                                  std::to_string(m) + ")");
        cols.push_back(c - 1);
    }
    svg::PlotOptions opt;
    opt.title = req.title;
    std::string out;
    switch (req.kind) {
        case PlotKind::Time: {
            if (cols.empty())
                for (std::size_t j = 0; j < m; ++j) cols.push_back(j);
            std::vector<std::string> names;
            for (auto c : cols) names.push_back(first + std::to_string(c + 1));
            opt.x_label = "t";
            out = svg::time_plot(table.times, table.values, cols, names, opt);
            break;
        }
        case PlotKind::Pair:
            if (cols.empty()) cols = {0, 1};
            if (cols.size() != 2) throw ValidationError("plot: a pair plot needs exactly two columns");
            if (std::max(cols[0], cols[1]) >= m) throw ValidationError("plot: table has fewer than two columns");
            opt.x_label = first + std::to_string(cols[0] + 1);
            opt.y_label = first + std::to_string(cols[1] + 1);
            out = svg::pair_plot(table.values, cols[0], cols[1], opt);
            break;
        case PlotKind::Axonometric:
            if (cols.empty()) cols = {0, 1, 2};
            if (cols.size() != 3) throw ValidationError("plot: a 3D plot needs exactly three columns");
            if (*std::max_element(cols.begin(), cols.end()) >= m)
                throw ValidationError("plot: table has fewer than three columns");
            opt.x_label = first + std::to_string(cols[0] + 1);
            opt.y_label = first + std::to_string(cols[1] + 1);
            opt.z_label = first + std::to_string(cols[2] + 1);
            out = svg::axonometric_plot(table.values, cols[0], cols[1], cols[2], opt);
            break;
    }
    io::write_text_atomic(req.output, out);
}

VerifyReport verify_pipeline(const PipelineConfig& config, const fs::path& directory) {
    const fs::path meta_path = directory / metadata_file_name("pipeline");
    const RunMetadata stored = metadata_from_json([&] {
        try {
            return json::parse(io::read_text(meta_path));
        } catch (const json::parse_error&) {
            throw ParseError(meta_path.string() + ": invalid JSON");
        }
    }());

    VerifyReport rep;
    if (stored.config_sha256 != config_hash(config))
        rep.mismatches.push_back("config hash differs from the recorded run");

    const fs::path scratch = fs::temp_directory_path() / ("kkl-verify-" + config_hash(config).substr(0, 16));
    std::error_code ec;
    fs::remove_all(scratch, ec);
    const PipelineResult fresh = run_pipeline(config, scratch);
    std::map<std::string, std::string> rerun;
    for (const auto& f : fresh.metadata.files) rerun[f.path] = f.sha256;
    fs::remove_all(scratch, ec);

    std::set<std::string> listed;
    for (const auto& f : stored.files) {
        ++rep.checked;
        listed.insert(f.path);
        const fs::path on_disk = directory / f.path;
        if (!fs::exists(on_disk)) rep.mismatches.push_back(f.path + ": missing on disk");
        else if (sha256_file(on_disk) != f.sha256) rep.mismatches.push_back(f.path + ": file differs from manifest");
        const auto it = rerun.find(f.path);
        if (it == rerun.end()) rep.mismatches.push_back(f.path + ": not produced by the re-run");
        else if (it->second != f.sha256) rep.mismatches.push_back(f.path + ": re-run produced different bytes");
    }
    for (const auto& [path, _] : rerun)
        if (!listed.count(path)) rep.mismatches.push_back(path + ": produced by the re-run but absent from manifest");
    return rep;
}

int exit_code_for(const std::exception& error) noexcept {
    if (dynamic_cast<const ValidationError*>(&error)) return 2;
    if (dynamic_cast<const NumericalError*>(&error)) return 3;
    if (dynamic_cast<const IoError*>(&error)) return 4;
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&error)) return 4;
    return 1;
}

}  // namespace kkl
