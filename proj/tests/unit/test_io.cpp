#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "kkl/error.hpp"
#include "kkl/hash.hpp"
#include "kkl/io.hpp"
#include "support.hpp"

using kkl::Matrix;
using kkl::Vector;

namespace {

std::string parse_error(std::string_view text) {
    try {
        kkl::io::parse_table(text, "x", "in.csv");
    } catch (const kkl::ParseError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("format_double round trips exactly") {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const double v = u(gen) * std::pow(10.0, static_cast<int>(gen() % 40) - 20);
        CHECK(std::stod(kkl::io::format_double(v)) == v);
    }
    CHECK(kkl::io::format_double(0.075) == "0.075");
    CHECK(kkl::io::format_double(1.0) == "1");
}

TEST_CASE("table round trip") {
    const auto dir = test::scratch_dir("io-table");
    const Vector t{0.0, 0.1, 0.2};
    const Matrix x{{1.0 / 3.0, -2e-300}, {5e300, 0.5}, {-7.25, 1e-17}};
    kkl::io::write_table(dir / "a.csv", t, x, "x");
    CHECK(kkl::io::read_text(dir / "a.csv").rfind("t,x1,x2\n", 0) == 0);
    const auto back = kkl::io::read_table(dir / "a.csv", "x");
    CHECK(back.times == t);
    CHECK(back.values == x);
    CHECK(kkl::io::format_table(back.times, back.values, "x") == kkl::io::read_text(dir / "a.csv"));
}

TEST_CASE("table parse errors carry the line number") {
    CHECK(parse_error("").find("in.csv") != std::string::npos);
    CHECK(parse_error("t,y1\n0,1\n").find("in.csv:1:") != std::string::npos);
    CHECK(parse_error("t,x1,x2\n0,1,2\n1,2\n").find("in.csv:3:") != std::string::npos);
    CHECK(parse_error("t,x1\n0,1\n1,nope\n").find("in.csv:3:") != std::string::npos);
    CHECK(parse_error("t,x1\n0,1\n0,2\n").find("in.csv:3:") != std::string::npos);
    CHECK(parse_error("t,x1\n0,1\n1,inf\n").find("in.csv:3:") != std::string::npos);
    CHECK(parse_error("t,x1\n0,1\n1,2\n").empty());
    CHECK(parse_error("t,x1\r\n0,1\r\n1,2\r\n").empty());
}

TEST_CASE("atomic writes replace content and leave no temporaries") {
    const auto dir = test::scratch_dir("io-atomic");
    kkl::io::write_text_atomic(dir / "f.txt", "first");
    kkl::io::write_text_atomic(dir / "f.txt", "second");
    CHECK(kkl::io::read_text(dir / "f.txt") == "second");
    std::size_t count = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++count;
    CHECK(count == 1);
    CHECK_THROWS_AS(kkl::io::read_text(dir / "missing.txt"), kkl::IoError);
}

TEST_CASE("sha256 known vectors") {
    CHECK(kkl::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(kkl::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const auto dir = test::scratch_dir("io-hash");
    kkl::io::write_text_atomic(dir / "abc", "abc");
    CHECK(kkl::sha256_file(dir / "abc") == kkl::sha256_hex("abc"));
    const Vector a{1.0, 2.0}, b{1.0, std::nextafter(2.0, 3.0)};
    CHECK(kkl::sha256_hex(std::span<const double>(a)) != kkl::sha256_hex(std::span<const double>(b)));
}
