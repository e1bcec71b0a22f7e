#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "vortexlab/profile.hpp"

using namespace vortexlab;

TEST_CASE("boundary and centering conditions hold by construction") {
    const ProfileSolution sol = solve_profile(2.0, 1e-10);
    REQUIRE(sol.phi.back() == 0.0);
    REQUIRE(sol.dphi.front() == 0.0);
    REQUIRE(sol.phi.front() > 0.0);
    REQUIRE(sol.phi_prime_1 < 0.0);
    for (std::size_t k = 0; k + 1 < sol.phi.size(); ++k) REQUIRE(sol.phi[k] > 0.0);
}

TEST_CASE("Pohozaev identities hold to 1e-6 relative") {
    for (double p : {1.5, 2.0, 3.0, 5.0}) {
        const ProfileSolution sol = solve_profile(p);
        INFO("p = " << p);
        REQUIRE(sol.pohozaev_res_p < 1e-6);
        REQUIRE(sol.pohozaev_res_p1 < 1e-6);
        REQUIRE(sol.I_p / (two_pi * std::abs(sol.phi_prime_1)) ==
                Catch::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("boundary slope matches an independent shooting oracle") {
    const ProfileSolution sol = solve_profile(3.0);
    const double oracle_slope = oracles::shooting_phi_prime(3.0);
    REQUIRE(std::abs(sol.phi_prime_1 - oracle_slope) < 1e-6);
}

TEST_CASE("doubling the step count leaves the slope unchanged to 1e-8") {
    const ProfileSolution a = solve_profile(2.0, 1e-12, 2.5e-4);
    const ProfileSolution b = solve_profile(2.0, 1e-12, 1.25e-4);
    REQUIRE(std::abs(a.phi_prime_1 - b.phi_prime_1) < 1e-8);
}

TEST_CASE("equation residual of the interpolant is small at interior nodes") {
    const ProfileSolution sol = solve_profile(2.0);
    double worst = 0.0;
    const double h = 1e-4;
    for (int k = 1; k < 200; ++k) {
        const double r = 0.004 * k + 0.1;
        if (r >= 0.999) break;
        // second derivative by Richardson-extrapolated central differences
        auto v = [&](double rr) { return sol.eval(rr).first; };
        const double d2_h = (v(r + h) - 2 * v(r) + v(r - h)) / (h * h);
        const double d2_2h = (v(r + 2 * h) - 2 * v(r) + v(r - 2 * h)) / (4 * h * h);
        const double d2 = (4 * d2_h - d2_2h) / 3.0;
        const double resid = d2 + sol.eval(r).second / r + std::pow(v(r), sol.p);
        worst = std::max(worst, std::abs(resid));
    }
    REQUIRE(worst < 1e-6);
}

TEST_CASE("evaluation matches the stored slope and log extension") {
    const ProfileSolution sol = solve_profile(2.0);
    const auto [v1, d1] = eval_profile(sol, 1.0);
    REQUIRE(v1 == Catch::Approx(0.0).margin(1e-14));
    REQUIRE(d1 == Catch::Approx(sol.phi_prime_1));

    const auto [ve, de] = eval_profile(sol, std::exp(1.0));
    REQUIRE(ve == Catch::Approx(sol.phi_prime_1));
    REQUIRE(de == Catch::Approx(sol.phi_prime_1 / std::exp(1.0)));

    // C1 match across r = 1: one-sided limits agree
    const auto inside = eval_profile(sol, 1.0 - 1e-12);
    const auto outside = eval_profile(sol, 1.0 + 1e-12);
    REQUIRE(std::abs(inside.first - outside.first) < 1e-8);
    REQUIRE(std::abs(inside.second - outside.second) < 1e-8);
}

TEST_CASE("preconditions are enforced") {
    REQUIRE_THROWS_AS(solve_profile(1.0), Error);
    REQUIRE_THROWS_AS(solve_profile(11.0), Error);
    REQUIRE_THROWS_AS(solve_profile(2.0, 1e-3), Error);
    const ProfileSolution sol = solve_profile(2.0);
    REQUIRE_THROWS_AS(eval_profile(sol, -0.1), Error);
}
