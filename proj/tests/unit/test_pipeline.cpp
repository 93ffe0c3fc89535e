#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "kkl/error.hpp"
#include "kkl/hash.hpp"
#include "kkl/io.hpp"
#include "kkl/pipeline.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

kkl::PipelineConfig small_config() {
    kkl::PipelineConfig c;
    c.output_dim = 8;
    c.horizon = 20.0;
    c.plots = false;
    return c;
}

std::map<std::string, std::string> tree_hashes(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = kkl::sha256_file(e.path());
    return out;
}

std::string stage_error(const kkl::PipelineConfig& c) {
    try {
        kkl::run_pipeline_in_memory(c);
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("config: defaults, round trip and strictness") {
    const auto c = kkl::config_from_json(json::object());
    CHECK(c.sampling_interval == 0.075);
    CHECK(c.output_dim == 50);
    const auto doc = kkl::config_to_json(c);
    CHECK(kkl::config_to_json(kkl::config_from_json(doc)) == doc);

    CHECK_THROWS_AS(kkl::config_from_json({{"unknown", 1}}), kkl::ValidationError);
    CHECK_THROWS_AS(kkl::config_from_json({{"system", {{"epsilon", "small"}}}}), kkl::ValidationError);
    CHECK_THROWS_AS(kkl::config_from_json({{"system", {{"horizon", 0.0}}}}), kkl::ValidationError);
    CHECK_THROWS_AS(kkl::config_from_json({{"observer", {{"rate_range", {5.0, 1.0}}}}}), kkl::ValidationError);
    CHECK_THROWS_AS(kkl::config_from_json({{"source", "video"}}), kkl::ValidationError);
    CHECK_THROWS_AS(kkl::config_from_json({{"reduction", {{"fit_fraction", 1.5}}}}), kkl::ValidationError);
    CHECK_THROWS_AS(kkl::config_from_json({{"source", "csv"}}), kkl::ValidationError);

    const auto dir = test::scratch_dir("config");
    kkl::io::write_text_atomic(dir / "bad.json", "{ not json");
    CHECK_THROWS_AS(kkl::load_config(dir / "bad.json"), kkl::ParseError);
    CHECK_THROWS_AS(kkl::load_config(dir / "missing.json"), kkl::IoError);
}

TEST_CASE("config: output directory precedence and hash") {
    kkl::PipelineConfig c;
    ::unsetenv(kkl::kOutputDirEnv);
    CHECK(kkl::resolve_output_dir(c) == fs::path(kkl::kDefaultOutputDir));
    ::setenv(kkl::kOutputDirEnv, "/tmp/from-env", 1);
    CHECK(kkl::resolve_output_dir(c) == fs::path("/tmp/from-env"));
    const auto before = kkl::config_hash(c);
    c.output_dir = "/tmp/from-config";
    CHECK(kkl::resolve_output_dir(c) == fs::path("/tmp/from-config"));
    ::unsetenv(kkl::kOutputDirEnv);
    CHECK(kkl::config_hash(c) == before);
    c.observer_seed = 9;
    CHECK(kkl::config_hash(c) != before);
}

TEST_CASE("pipeline: identical configs give byte-identical artifacts") {
    const auto a = test::scratch_dir("det-a");
    const auto b = test::scratch_dir("det-b");
    auto c = small_config();
    c.plots = true;
    const auto ra = kkl::run_pipeline(c, a);
    kkl::run_pipeline(c, b);
    const auto ha = tree_hashes(a);
    CHECK(ha == tree_hashes(b));
    for (const char* f : {"trajectory.csv", "outputs.csv", "lifted.csv", "observer.json", "components.csv", "pca.json",
                          "report.json", "pipeline.metadata.json", "plots/pi_3d.svg", "plots/x1_x2.svg"})
        CHECK_MESSAGE(ha.count(f) == 1, f);

    const json meta = json::parse(kkl::io::read_text(a / "pipeline.metadata.json"));
    CHECK_FALSE(meta.contains("timestamp"));
    CHECK(meta.at("config_sha256") == kkl::config_hash(c));
    CHECK(meta.at("seeds").at("observer") == c.observer_seed);
    for (const auto& f : meta.at("files")) CHECK(ha.at(f.at("path").get<std::string>()) == f.at("sha256"));
    CHECK(ra.metadata.files.size() == meta.at("files").size());

    c.timestamp = true;
    const auto t = test::scratch_dir("det-ts");
    kkl::run_pipeline(c, t);
    CHECK(json::parse(kkl::io::read_text(t / "pipeline.metadata.json")).contains("timestamp"));
}

TEST_CASE("pipeline: verify detects tampering") {
    const auto dir = test::scratch_dir("verify");
    const auto c = small_config();
    kkl::run_pipeline(c, dir);
    const auto ok = kkl::verify_pipeline(c, dir);
    CHECK(ok.ok());
    CHECK(ok.checked > 5);
    std::ofstream(dir / "components.csv", std::ios::app) << "\n";
    const auto bad = kkl::verify_pipeline(c, dir);
    REQUIRE_FALSE(bad.ok());
    CHECK(bad.mismatches.front().find("components.csv") != std::string::npos);
}

TEST_CASE("pipeline: report contents") {
    const auto r = kkl::run_pipeline_in_memory(small_config());
    CHECK(r.lifted.states.cols() == 8 * 4);
    CHECK(r.report.alignment.has_value());
    REQUIRE(r.report.trim_time.has_value());
    CHECK(*r.report.trim_time == doctest::Approx(5.0 / r.observer->slowest_rate()));
    CHECK(r.report.seeds.count("output") == 1);
    CHECK(r.report.hashes.count("config") == 1);
    CHECK(r.reduction.series.components.cols() == 3);
}

TEST_CASE("pipeline: frame source records its dimensions") {
    const auto dir = test::scratch_dir("ppm-source");
    auto c = small_config();
    c.output_kind = kkl::OutputKind::RenderedFrames;
    c.frame_width = 4;
    c.frame_height = 3;
    kkl::cmd_render_frames(c, dir);
    CHECK(fs::exists(dir / "frames" / "frame_000000.ppm"));
    CHECK(fs::exists(dir / "trajectory.csv"));

    auto p = small_config();
    p.source = kkl::Source::PpmSequence;
    p.input_path = (dir / "frames").string();
    p.truth_path = (dir / "trajectory.csv").string();
    p.roi = {0, 0, 4, 3};
    const auto r = kkl::run_pipeline_in_memory(p);
    CHECK(r.outputs.dimension() == 36);
    CHECK(r.lifted.states.cols() == 36 * 4);
    CHECK(r.outputs.times()[1] == doctest::Approx(0.075));

    p.input_path = (dir / "nowhere").string();
    const auto msg = stage_error(p);
    CHECK(msg.find("stage 'ingest'") != std::string::npos);
}

TEST_CASE("pipeline: stage commands chain through the output directory") {
    const auto dir = test::scratch_dir("stages");
    const auto c = small_config();
    kkl::cmd_simulate(c, dir);
    kkl::cmd_ingest(c, dir);
    kkl::cmd_lift(c, dir);
    kkl::cmd_pca(c, dir);
    kkl::cmd_align(c, dir);
    for (const char* f : {"simulate", "ingest", "lift", "pca", "align"})
        CHECK(fs::exists(dir / kkl::metadata_file_name(f)));
    const auto full = test::scratch_dir("stages-full");
    kkl::run_pipeline(c, full);
    CHECK(kkl::sha256_file(dir / "components.csv") == kkl::sha256_file(full / "components.csv"));

    kkl::cmd_plot({dir / "components.csv", dir / "pi.svg", kkl::PlotKind::Axonometric, {}, "pi"});
    CHECK(kkl::io::read_text(dir / "pi.svg").find("<polyline") != std::string::npos);
    CHECK_THROWS_AS(kkl::cmd_plot({dir / "components.csv", dir / "x.svg", kkl::PlotKind::Pair, {1, 9}, ""}),
                    kkl::ValidationError);
}

TEST_CASE("exit codes") {
    CHECK(kkl::exit_code_for(kkl::ValidationError("v")) == 2);
    CHECK(kkl::exit_code_for(kkl::NumericalError("n")) == 3);
    CHECK(kkl::exit_code_for(kkl::IoError("i")) == 4);
    CHECK(kkl::exit_code_for(kkl::ParseError("p")) == 4);
    CHECK(kkl::exit_code_for(std::runtime_error("x")) == 1);
}

#ifdef KKL_CLI
namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + KKL_CLI + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli: exit codes and verify") {
    const auto dir = test::scratch_dir("cli");
    kkl::io::write_text_atomic(dir / "cfg.json", R"({"system": {"horizon": 20}, "output": {"dim": 8}})");
    const std::string out = " -o \"" + (dir / "out").string() + "\"";
    CHECK(run_cli("pipeline -c \"" + (dir / "cfg.json").string() + "\"" + out + " --no-plots") == 0);
    CHECK(run_cli("pipeline -c \"" + (dir / "cfg.json").string() + "\"" + out + " --no-plots --verify") == 0);
    CHECK(run_cli("simulate --horizon 0" + out) == 2);
    CHECK(run_cli("pipeline --bogus-flag" + out) == 2);
    CHECK(run_cli("ingest --source ppm-sequence --input \"" + (dir / "none").string() + "\"" + out) == 4);
    CHECK(run_cli("pipeline -c \"" + (dir / "missing.json").string() + "\"" + out) == 4);
    kkl::io::write_text_atomic(dir / "bad.json", R"({"system": {"epsilon": "x"}})");
    CHECK(run_cli("pipeline -c \"" + (dir / "bad.json").string() + "\"" + out) == 2);
}
#endif
