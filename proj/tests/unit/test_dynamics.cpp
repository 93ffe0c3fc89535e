#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kkl/dynamics.hpp"
#include "kkl/error.hpp"
#include "support.hpp"

using kkl::Matrix;
using kkl::Vector;

namespace {

double norm3(const std::array<double, 3>& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

kkl::VectorField decay() {
    return [](std::span<const double> x, std::span<double> d) { d[0] = -x[0]; };
}

kkl::VectorField harmonic() {
    return [](std::span<const double> x, std::span<double> d) {
        d[0] = x[1];
        d[1] = -x[0];
    };
}

kkl::Trajectory uniform_line(std::size_t n, double dt) {
    Vector t(n);
    Matrix s(n, 2);
    for (std::size_t k = 0; k < n; ++k) {
        t[k] = dt * static_cast<double>(k);
        s(k, 0) = std::sin(t[k]);
        s(k, 1) = 2.0 * t[k] - 1.0;
    }
    return {t, s};
}

}  // namespace

TEST_CASE("oregonator_rhs: equilibrium from the quadratic formula") {
    const kkl::OregonatorParams p;
    const double x1 = (-p.q + std::sqrt(p.q * p.q + 8.0 * p.q)) / 2.0;
    const double x2 = x1 / (p.q + x1);
    const double xs[3] = {x1, x2, x1};
    CHECK(std::abs(x1 - 0.021789) < 1e-6);
    CHECK(std::abs(x2 - 0.98910) < 1e-5);
    CHECK(norm3(kkl::oregonator_rhs(xs, p)) <= 1e-9);

    const auto eq = kkl::oregonator_equilibrium(p);
    CHECK(std::abs(eq[0] - x1) <= 1e-15);
    CHECK(std::abs(eq[1] - x2) <= 1e-15);
    CHECK(std::abs(eq[2] - x1) <= 1e-15);
}

TEST_CASE("oregonator_equilibrium: other stoichiometric factors") {
    for (double f : {0.5, 0.75, 1.5, 2.0}) {
        kkl::OregonatorParams p;
        p.f = f;
        const auto eq = kkl::oregonator_equilibrium(p);
        CHECK(eq[0] > 0.0);
        CHECK(norm3(kkl::oregonator_rhs(eq, p)) <= 1e-9);
    }
}

TEST_CASE("oregonator_rhs: direct substitution") {
    const kkl::OregonatorParams p;
    const double a[3] = {1, 0, 1};
    const auto d = kkl::oregonator_rhs(a, p);
    CHECK(d[0] == 0.0);
    CHECK(d[1] == doctest::Approx(1.0 / 1.2e-4).epsilon(1e-14));
    CHECK(std::abs(d[1] - 8333.33) < 0.01);
    CHECK(d[2] == 0.0);
    const double o[3] = {0, 0, 0};
    const auto z = kkl::oregonator_rhs(o, p);
    CHECK(z == std::array<double, 3>{0, 0, 0});
}

TEST_CASE("OregonatorParams: validation") {
    kkl::OregonatorParams p;
    p.delta = 0.0;
    CHECK_THROWS_AS(p.validate(), kkl::ValidationError);
    p = {};
    p.q = -1.0;
    CHECK_THROWS_AS(p.validate(), kkl::ValidationError);
    CHECK_NOTHROW(kkl::OregonatorParams{}.validate());
}

TEST_CASE("integrate: scalar decay") {
    const double x0[1] = {1.0};
    const auto traj = kkl::integrate(decay(), x0, 0.0, 1.0);
    CHECK(traj.end() == 1.0);
    CHECK(std::abs(traj.states()(traj.size() - 1, 0) - std::exp(-1.0)) <= 1e-6);
    for (std::size_t k = 1; k < traj.size(); ++k) CHECK(traj.times()[k] > traj.times()[k - 1]);
}

TEST_CASE("integrate: harmonic oscillator closes its orbit") {
    const double x0[2] = {1.0, 0.0};
    kkl::IntegrationStats stats;
    const auto traj = kkl::integrate(harmonic(), x0, 0.0, 2.0 * std::numbers::pi, {}, &stats);
    const auto last = traj.states().row(traj.size() - 1);
    CHECK(std::abs(last[0] - 1.0) <= 1e-5);
    CHECK(std::abs(last[1]) <= 1e-5);
    CHECK(stats.accepted + 1 == traj.size());
    CHECK(stats.evaluations > stats.accepted);
}

TEST_CASE("integrate: tightening tolerances converges") {
    const double x0[2] = {1.0, 0.0};
    kkl::IntegratorConfig loose;
    loose.rtol = 1e-6;
    loose.atol = 1e-9;
    kkl::IntegratorConfig tight = loose;
    tight.rtol /= 10.0;
    tight.atol /= 10.0;
    const auto a = kkl::integrate(harmonic(), x0, 0.0, 10.0, loose);
    const auto b = kkl::integrate(harmonic(), x0, 0.0, 10.0, tight);
    const auto ra = a.states().row(a.size() - 1);
    const auto rb = b.states().row(b.size() - 1);
    const double diff = std::hypot(ra[0] - rb[0], ra[1] - rb[1]);
    CHECK(diff < 10.0 * loose.rtol * std::hypot(rb[0], rb[1]));
}

TEST_CASE("integrate: failures") {
    const double x0[1] = {1.0};
    const kkl::VectorField blowup = [](std::span<const double> x, std::span<double> d) { d[0] = x[0] * x[0]; };
    try {
        kkl::integrate(blowup, x0, 0.0, 2.0);
        FAIL("expected IntegrationError");
    } catch (const kkl::IntegrationError& e) {
        CHECK(e.last_time() < 1.1);
        CHECK(e.last_time() > 0.9);
    }
    kkl::IntegratorConfig few;
    few.max_steps = 5;
    CHECK_THROWS_AS(kkl::integrate(decay(), x0, 0.0, 10.0, few), kkl::IntegrationError);
    CHECK_THROWS_AS(kkl::integrate(decay(), x0, 1.0, 1.0), kkl::ValidationError);
    kkl::IntegratorConfig bad;
    bad.h_min = 1.0;
    bad.h_init = 0.1;
    CHECK_THROWS_AS(kkl::integrate(decay(), x0, 0.0, 1.0, bad), kkl::ValidationError);
    const double nan0[1] = {std::nan("")};
    CHECK_THROWS_AS(kkl::integrate(decay(), nan0, 0.0, 1.0), kkl::ValidationError);
}

TEST_CASE("integrate: Oregonator stays positive") {
    const kkl::OregonatorParams p;
    const double x0[3] = {0.5, 0.5, 0.5};
    kkl::IntegratorConfig cfg;
    const auto traj = kkl::integrate(kkl::oregonator_field(p), x0, 0.0, 20.0, cfg);
    for (double v : traj.states().data()) CHECK(v >= -cfg.atol);
}

TEST_CASE("sample_uniform") {
    SUBCASE("identity on a matching grid") {
        const auto traj = uniform_line(11, 0.1);
        const auto s = kkl::sample_uniform(traj, 0.1);
        REQUIRE(s.size() == 11);
        CHECK(test::max_diff(s.states(), traj.states()) <= 1e-15);
    }
    SUBCASE("midpoint of a linear segment") {
        const kkl::Trajectory t(Vector{0.0, 1.0}, Matrix{{2.0}, {4.0}});
        const auto s = kkl::sample_uniform(t, 0.5);
        REQUIRE(s.size() == 3);
        CHECK(s.states()(1, 0) == 3.0);
    }
    SUBCASE("sine within the interpolation bound") {
        const double x0[2] = {0.0, 1.0};  // x1 = sin t, x2 = cos t
        kkl::IntegratorConfig cfg;
        cfg.rtol = 1e-10;
        cfg.atol = 1e-12;
        const auto dense = kkl::integrate(harmonic(), x0, 0.0, 6.0, cfg);
        const auto s = kkl::sample_uniform(dense, 0.05);
        double hmax = 0.0;
        for (std::size_t k = 1; k < dense.size(); ++k) hmax = std::max(hmax, dense.times()[k] - dense.times()[k - 1]);
        for (std::size_t k = 0; k < s.size(); ++k)
            CHECK(std::abs(s.states()(k, 0) - std::sin(s.times()[k])) <= hmax * hmax / 8.0 + 1e-8);
    }
    SUBCASE("interval longer than the span") {
        const auto traj = uniform_line(3, 0.1);
        CHECK_THROWS_AS(kkl::sample_uniform(traj, 1.0), kkl::ValidationError);
        CHECK_THROWS_AS(kkl::sample_uniform(traj, 0.0), kkl::ValidationError);
    }
}

TEST_CASE("apply_output_map: pass-through and linear") {
    const auto traj = uniform_line(5, 0.1);
    const auto y = kkl::apply_output_map(traj, kkl::OutputMap::pass_through(2));
    CHECK(y.values() == traj.states());
    const auto z = kkl::apply_output_map(traj, kkl::OutputMap::linear(Matrix(4, 2)));
    CHECK(z.values() == Matrix(5, 4));
    CHECK_THROWS_AS(kkl::apply_output_map(traj, kkl::OutputMap::pass_through(3)), kkl::ValidationError);
}

TEST_CASE("apply_output_map: random-smooth matches scalar tanh evaluation") {
    const kkl::Trajectory traj(Vector{0.0, 0.5, 1.0}, Matrix{{0.2, 1.0, -0.3}, {0.5, 3.0, 0.1}, {0.9, 0.4, 0.2}});
    const std::size_t p = 4;
    const std::uint64_t seed = 42;
    const auto map = kkl::OutputMap::random_smooth(traj, p, seed);
    const auto y = kkl::apply_output_map(traj, map);

    // Draw order: p·n weights in [−2, 2] row by row, then p offsets in [−1, 1].
    std::mt19937_64 gen(seed);
    auto unit = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
    double w[4][3], c[4];
    for (auto& row : w)
        for (double& v : row) v = -2.0 + 4.0 * unit();
    for (double& v : c) v = -1.0 + 2.0 * unit();
    double mu[3] = {}, sd[3] = {};
    for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) mu[j] += traj.states()(k, j) / 3.0;
        for (int k = 0; k < 3; ++k) sd[j] += std::pow(traj.states()(k, j) - mu[j], 2) / 2.0;
        sd[j] = std::sqrt(sd[j]);
    }
    for (int k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < p; ++i) {
            double a = c[i];
            for (int j = 0; j < 3; ++j) a += w[i][j] * (traj.states()(k, j) - mu[j]) / sd[j];
            CHECK(std::abs(y.values()(k, i) - std::tanh(a)) <= 1e-14);
        }
}

TEST_CASE("apply_output_map: deterministic and commutes with truncation") {
    const auto traj = uniform_line(30, 0.1);
    const auto a = kkl::OutputMap::random_smooth(traj, 7, 5);
    const auto b = kkl::OutputMap::random_smooth(traj, 7, 5);
    CHECK(a.weights() == b.weights());
    CHECK(a.offsets() == b.offsets());
    const auto full = kkl::apply_output_map(traj, a);
    const auto part = kkl::apply_output_map(traj.truncated(12), a);
    CHECK(part.values() == full.values().row_slice(0, 12));
    const auto other = kkl::OutputMap::random_smooth(traj, 7, 6);
    CHECK(other.weights() != a.weights());
}

TEST_CASE("trajectory CSV round trip") {
    const auto dir = test::scratch_dir("dynamics");
    const double x0[3] = {0.5, 0.5, 0.5};
    const auto traj = kkl::sample_uniform(kkl::integrate(kkl::oregonator_field({}), x0, 0.0, 2.0), 0.075);
    kkl::write_trajectory_csv(dir / "x.csv", traj);
    const auto back = kkl::read_trajectory_csv(dir / "x.csv");
    CHECK(back.times() == traj.times());
    CHECK(back.states() == traj.states());
}
