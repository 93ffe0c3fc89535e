#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "kkl/error.hpp"
#include "kkl/ingest.hpp"
#include "kkl/io.hpp"
#include "support.hpp"

using kkl::Matrix;
using kkl::Vector;

namespace {

kkl::Image solid(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    kkl::Image img(w, h);
    for (std::size_t i = 0; i < w * h; ++i) {
        img.rgb[3 * i] = r;
        img.rgb[3 * i + 1] = g;
        img.rgb[3 * i + 2] = b;
    }
    return img;
}

kkl::FrameSequence sequence_of(std::vector<kkl::Image> frames, double dt = 0.075) {
    kkl::FrameSequence s;
    s.width = frames.front().width;
    s.height = frames.front().height;
    s.frame_interval = dt;
    s.frames = std::move(frames);
    return s;
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

template <class F>
std::string error_of(F&& f) {
    try {
        f();
    } catch (const kkl::ParseError& e) {
        return e.what();
    }
    return "";
}

kkl::Trajectory wave(std::size_t n, double dt) {
    Vector t(n);
    Matrix x(n, 3);
    for (std::size_t k = 0; k < n; ++k) {
        t[k] = dt * static_cast<double>(k);
        x(k, 0) = std::sin(t[k]);
        x(k, 1) = 3.0 + std::cos(2.0 * t[k]);
        x(k, 2) = 0.1 * std::sin(0.5 * t[k] + 1.0);
    }
    return {t, x};
}

}  // namespace

TEST_CASE("decode_ppm: single white pixel") {
    const std::string bytes = std::string("P6\n1 1\n255\n") + "\xff\xff\xff";
    const auto img = kkl::decode_ppm(bytes, "white.ppm");
    CHECK(img.width == 1);
    CHECK(img.height == 1);
    CHECK(img.rgb == std::vector<std::uint8_t>{255, 255, 255});
}

TEST_CASE("PPM round trip is byte exact") {
    kkl::Image img(4, 3);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>((i * 37 + 11) % 256);
    const auto dir = test::scratch_dir("ppm");
    kkl::write_ppm(dir / "a.ppm", img);
    const auto back = kkl::read_ppm(dir / "a.ppm");
    CHECK(back.rgb == img.rgb);
    CHECK(kkl::encode_ppm(back) == kkl::io::read_text(dir / "a.ppm"));
}

TEST_CASE("decode_ppm: header comments and odd whitespace") {
    const std::string bytes = std::string("P6 # made by hand\n2\t1 # size\n255\n") + std::string(6, '\x07');
    const auto img = kkl::decode_ppm(bytes, "c.ppm");
    CHECK(img.width == 2);
    CHECK(img.rgb[5] == 7);
}

TEST_CASE("decode_ppm: malformed input names source and offset") {
    CHECK(error_of([] { kkl::decode_ppm("P3\n1 1\n255\n0 0 0", "p3.ppm"); }).find("p3.ppm: byte 0") != std::string::npos);
    CHECK(error_of([] { kkl::decode_ppm("P6\n1 x\n255\n", "h.ppm"); }).find("h.ppm: byte 5: expected height") !=
          std::string::npos);
    CHECK(error_of([] { kkl::decode_ppm("P6\n1 1\n65535\n\0\0\0\0\0\0", "m.ppm"); }).find("maxval") != std::string::npos);
    const std::string truncated = error_of([] { kkl::decode_ppm(std::string("P6\n2 1\n255\n") + "abc", "t.ppm"); });
    CHECK(truncated.find("t.ppm: byte 14: truncated") != std::string::npos);
    const std::string trailing = error_of([] { kkl::decode_ppm(std::string("P6\n1 1\n255\n") + "abcd", "x.ppm"); });
    CHECK(trailing.find("x.ppm: byte 14: unexpected trailing") != std::string::npos);
    CHECK(!error_of([] { kkl::decode_ppm("", "e.ppm"); }).empty());
}

TEST_CASE("read_ppm_sequence: order, timing and mismatches") {
    const auto dir = test::scratch_dir("sequence");
    kkl::write_ppm_sequence(dir, sequence_of({solid(2, 2, 10, 0, 0), solid(2, 2, 20, 0, 0), solid(2, 2, 30, 0, 0)}));
    const auto seq = kkl::read_ppm_sequence(dir, 0.075);
    REQUIRE(seq.frames.size() == 3);
    CHECK(seq.frames[0].rgb[0] == 10);
    CHECK(seq.frames[2].rgb[0] == 30);
    const auto y = kkl::extract_roi(seq, {0, 0, 2, 2});
    CHECK(y.times() == Vector{0.0, 0.075, 0.15});

    const auto by_glob = kkl::read_ppm_sequence(dir / "frame_*.ppm", 0.075);
    CHECK(by_glob.frames.size() == 3);

    kkl::write_ppm(dir / "frame_000003.ppm", solid(3, 2, 0, 0, 0));
    const std::string msg = error_of([&] { kkl::read_ppm_sequence(dir, 0.075); });
    CHECK(msg.find("frame_000003.ppm") != std::string::npos);
    CHECK_THROWS_AS(kkl::read_ppm_sequence(dir / "missing", 0.075), kkl::IoError);
    write_bytes(dir / "frame_000003.ppm", "P6\n2 2\n255\nxy");
    CHECK(error_of([&] { kkl::read_ppm_sequence(dir, 0.075); }).find("frame_000003.ppm: byte") != std::string::npos);
}

TEST_CASE("extract_roi: sizes, scaling and bounds") {
    const auto seq = sequence_of({solid(12, 11, 1, 2, 3), solid(12, 11, 4, 5, 6)});
    const auto y = kkl::extract_roi(seq, {1, 1, 10, 10});
    CHECK(y.dimension() == 300);
    CHECK(y.layout() == kkl::PlanarLayout{10, 10});

    kkl::Image px(3, 3);
    px.pixel(2, 1)[0] = 255;
    px.pixel(2, 1)[1] = 0;
    px.pixel(2, 1)[2] = 127;
    const auto one = kkl::extract_roi(sequence_of({px}), {2, 1, 1, 1});
    CHECK(one.values().row(0)[0] == 1.0);
    CHECK(one.values().row(0)[1] == 0.0);
    CHECK(one.values().row(0)[2] == 127.0 / 255.0);

    const auto black = kkl::extract_roi(sequence_of({solid(4, 4, 0, 0, 0), solid(4, 4, 0, 0, 0)}), {0, 0, 4, 4});
    CHECK(black.values() == Matrix(2, 48));

    CHECK_THROWS_AS(kkl::extract_roi(seq, {5, 5, 10, 10}), kkl::ValidationError);
    CHECK_THROWS_AS(kkl::extract_roi(seq, {0, 0, 0, 1}), kkl::ValidationError);
}

TEST_CASE("extract_roi: channel-planar layout") {
    kkl::Image img(3, 2);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 10);
    const auto y = kkl::extract_roi(sequence_of({img}), {0, 0, 3, 2});
    const auto row = y.values().row(0);
    for (std::size_t pix = 0; pix < 6; ++pix)
        for (std::size_t c = 0; c < 3; ++c) CHECK(row[c * 6 + pix] == static_cast<double>((3 * pix + c) * 10) / 255.0);

    // Swapping two pixels swaps entries inside each channel block only.
    kkl::Image swapped = img;
    std::swap_ranges(swapped.pixel(0, 0), swapped.pixel(0, 0) + 3, swapped.pixel(2, 1));
    const auto ys = kkl::extract_roi(sequence_of({swapped}), {0, 0, 3, 2});
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(ys.values().row(0)[c * 6 + 0] == row[c * 6 + 5]);
        CHECK(ys.values().row(0)[c * 6 + 5] == row[c * 6 + 0]);
        for (std::size_t pix = 1; pix < 5; ++pix) CHECK(ys.values().row(0)[c * 6 + pix] == row[c * 6 + pix]);
    }
}

TEST_CASE("channel_means") {
    const auto uniform = kkl::extract_roi(sequence_of({solid(4, 4, 51, 102, 255)}), {0, 0, 4, 4});
    const Matrix m = kkl::channel_means(uniform);
    CHECK(std::abs(m(0, 0) - 0.2) <= 1e-15);
    CHECK(std::abs(m(0, 1) - 0.4) <= 1e-15);
    CHECK(m(0, 2) == 1.0);

    kkl::Image board(4, 4);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x)
            if ((x + y) % 2 == 0) std::fill(board.pixel(x, y), board.pixel(x, y) + 3, std::uint8_t{255});
    const Matrix b = kkl::channel_means(kkl::extract_roi(sequence_of({board}), {0, 0, 4, 4}));
    for (std::size_t c = 0; c < 3; ++c) CHECK(b(0, c) == 0.5);

    CHECK_THROWS_AS(kkl::channel_means(kkl::OutputSeries(Vector{0.0, 1.0}, Matrix(2, 3))), kkl::ValidationError);
}

TEST_CASE("render_synthetic_frames: constant state gives identical frames") {
    Matrix x(5, 3);
    for (std::size_t k = 0; k < 5; ++k) x(k, 0) = x(k, 1) = x(k, 2) = 0.3;
    const kkl::Trajectory traj(Vector{0, 0.1, 0.2, 0.3, 0.4}, x);
    const auto seq = kkl::render_synthetic_frames(traj, 3, 3, kkl::ColorMap::standard(), 0.0, 1);
    for (const auto& f : seq.frames) CHECK(f.rgb == seq.frames[0].rgb);
    CHECK(seq.frame_interval == doctest::Approx(0.1));
}

TEST_CASE("render_synthetic_frames: noiseless render inverts to the colour map") {
    const auto traj = wave(200, 0.05);
    const auto seq = kkl::render_synthetic_frames(traj, 1, 1, kkl::ColorMap::standard(), 0.0, 1);
    const auto y = kkl::extract_roi(seq, {0, 0, 1, 1});
    // Independent evaluation of the documented map: per-state z-score, affine mix, logistic.
    const double coef[3][3] = {{1.6, -0.6, 0.4}, {-0.5, 1.2, 0.7}, {0.6, 0.5, -1.4}};
    const double off[3] = {0.2, -0.1, 0.1};
    double mu[3] = {}, sd[3] = {};
    for (int j = 0; j < 3; ++j) {
        for (std::size_t k = 0; k < 200; ++k) mu[j] += traj.states()(k, j) / 200.0;
        for (std::size_t k = 0; k < 200; ++k) sd[j] += std::pow(traj.states()(k, j) - mu[j], 2) / 199.0;
        sd[j] = std::sqrt(sd[j]);
    }
    for (std::size_t k = 0; k < 200; ++k)
        for (int c = 0; c < 3; ++c) {
            double s = off[c];
            for (int j = 0; j < 3; ++j) s += coef[c][j] * (traj.states()(k, j) - mu[j]) / sd[j];
            const double expected = 1.0 / (1.0 + std::exp(-s));
            CHECK(std::abs(y.values()(k, static_cast<std::size_t>(c)) - expected) <= 0.5 / 255.0 + 1e-12);
        }
}

TEST_CASE("render_synthetic_frames: pixel noise averages out over a 10x10 roi") {
    const auto traj = wave(100, 0.05);
    const auto clean = kkl::channel_means(kkl::extract_roi(
        kkl::render_synthetic_frames(traj, 10, 10, kkl::ColorMap::standard(), 0.0, 1), {0, 0, 10, 10}));
    const auto noisy = kkl::channel_means(kkl::extract_roi(
        kkl::render_synthetic_frames(traj, 10, 10, kkl::ColorMap::standard(), 0.02, 99), {0, 0, 10, 10}));
    CHECK(test::max_diff(clean, noisy) <= 0.005);
    const auto again = kkl::render_synthetic_frames(traj, 10, 10, kkl::ColorMap::standard(), 0.02, 99);
    CHECK(again.frames[7].rgb == kkl::render_synthetic_frames(traj, 10, 10, kkl::ColorMap::standard(), 0.02, 99).frames[7].rgb);
}

TEST_CASE("render_synthetic_frames: non-uniform trajectory") {
    const kkl::Trajectory traj(Vector{0, 0.1, 0.3}, Matrix(3, 3));
    CHECK_THROWS_AS(kkl::render_synthetic_frames(traj, 2, 2, kkl::ColorMap::standard(), 0.0, 1), kkl::ValidationError);
}

TEST_CASE("output CSV series") {
    const auto dir = test::scratch_dir("csv-series");
    const kkl::OutputSeries s(Vector{0.0, 0.5, 1.0}, Matrix{{0.1, 1e-17}, {-3.25, 2.0 / 3.0}, {1e10, -0.0}});
    kkl::write_csv_series(dir / "y.csv", s);
    const auto back = kkl::read_csv_series(dir / "y.csv");
    CHECK(back.times() == s.times());
    for (std::size_t i = 0; i < s.values().size(); ++i) {
        const double a = s.values().data()[i], b = back.values().data()[i];
        CHECK(std::abs(a - b) <= 1e-15 * std::abs(a));
    }

    write_bytes(dir / "hand.csv", "t,y1,y2\n0,1,2\n0.5,3,4\n");
    const auto hand = kkl::read_csv_series(dir / "hand.csv");
    CHECK(hand.values() == Matrix{{1, 2}, {3, 4}});
    CHECK(hand.times() == Vector{0.0, 0.5});

    write_bytes(dir / "empty.csv", "");
    CHECK_THROWS_AS(kkl::read_csv_series(dir / "empty.csv"), kkl::ParseError);
    write_bytes(dir / "ragged.csv", "t,y1,y2\n0,1,2\n0.5,3\n");
    CHECK(error_of([&] { kkl::read_csv_series(dir / "ragged.csv"); }).find("ragged.csv:3:") != std::string::npos);
    write_bytes(dir / "back.csv", "t,y1\n0,1\n1,2\n0.5,3\n");
    CHECK(error_of([&] { kkl::read_csv_series(dir / "back.csv"); }).find("back.csv:4:") != std::string::npos);
    write_bytes(dir / "nan.csv", "t,y1\n0,abc\n");
    CHECK(error_of([&] { kkl::read_csv_series(dir / "nan.csv"); }).find("nan.csv:2:") != std::string::npos);
}
