#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "attractor/detmax.hpp"

using namespace attractor;

namespace {

std::pair<DynamicalSystem, Domain> toy_system() {
    DynamicalSystem sys;
    sys.name = "decay";
    sys.n = 1;
    sys.f = {-Polynomial::variable(1, 0)};
    Domain dom;
    dom.g = Polynomial::constant(1, 4.0) - Polynomial::variable(1, 0).pow(2);
    dom.bounding_box = {{-2.0, 2.0}};
    return {sys, dom};
}

}  // namespace

TEST_CASE("linearize_logdet") {
    CHECK((linearize_logdet(Eigen::MatrixXd::Identity(3, 3)) -
           Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-14);

    Eigen::MatrixXd D = Eigen::Vector2d(2.0, 4.0).asDiagonal();
    Eigen::MatrixXd G = linearize_logdet(D);
    CHECK(G(0, 0) == Catch::Approx(0.5));
    CHECK(G(1, 1) == Catch::Approx(0.25));
    CHECK(G(0, 1) == Catch::Approx(0.0).margin(1e-15));

    Eigen::MatrixXd M(2, 2);
    M << 2, 1, 1, 2;  // inverse is (1/3) [[2,-1],[-1,2]]
    Eigen::MatrixXd Gi = linearize_logdet(M);
    CHECK(Gi(0, 0) == Catch::Approx(2.0 / 3.0));
    CHECK(Gi(0, 1) == Catch::Approx(-1.0 / 3.0));

    Eigen::MatrixXd bad(2, 2);
    bad << 1, 0, 0, -1;
    CHECK_THROWS_AS(linearize_logdet(bad), std::invalid_argument);
    CHECK_THROWS_AS(linearize_logdet(Eigen::MatrixXd::Zero(2, 2)), std::invalid_argument);
}

TEST_CASE("toy point attractor: objective grows until the trace cap binds") {
    auto [sys, dom] = toy_system();
    DetMaxOptions opts;
    opts.include_k1 = true;
    opts.trace_cap = 50.0;
    opts.max_outer = 25;
    auto res = run_detmax(sys, dom, 2, opts);

    // ascent: accepted objectives never decrease
    const auto& h = res.state.objective_history;
    REQUIRE(h.size() >= 2);
    for (size_t i = 1; i < h.size(); ++i) CHECK(h[i] >= h[i - 1] - 1e-9);
    CHECK(h.back() > 10.0 * h.front());

    // the point attractor {0} has zero volume; only the cap stops the growth
    CHECK(res.state.iterate.trace() >= 0.6 * opts.trace_cap);

    // the final certificate is still a certificate
    CHECK(res.certificate.identity_residual_k0 < 1e-6);
    CHECK(min_eigenvalue(res.certificate.J.gram) > 0.0);
    CHECK(min_eigenvalue(res.certificate.k0.gram) >= -1e-9);
}

TEST_CASE("max_outer = 0 returns the phase-1 certificate unchanged") {
    auto [sys, dom] = toy_system();
    DetMaxOptions opts;
    opts.max_outer = 0;
    auto res = run_detmax(sys, dom, 2, opts);
    CHECK(res.state.step == 0);
    CHECK(res.state.objective_history.size() == 1);
    CHECK(res.certificate.identity_residual_k0 < 1e-6);
}

TEST_CASE("infeasible program reports no certificate") {
    // flow pushing outward: x' = +x on [-2,2]; no Lyapunov certificate exists
    DynamicalSystem sys;
    sys.name = "expand";
    sys.n = 1;
    sys.f = {Polynomial::variable(1, 0)};
    Domain dom;
    dom.g = Polynomial::constant(1, 4.0) - Polynomial::variable(1, 0).pow(2);
    dom.bounding_box = {{-2.0, 2.0}};
    DetMaxOptions opts;
    opts.max_outer = 2;
    CHECK_THROWS_AS(run_detmax(sys, dom, 2, opts), DetMaxError);
}

TEST_CASE("Van der Pol d=4 det-max tightens the certificate") {
    auto [sys, dom] = builtin_system("vanderpol");
    auto scaled = apply_scaling(sys);
    DetMaxOptions opts;
    opts.include_k1 = false;
    opts.max_outer = 6;
    opts.step_solver.max_iter = 40000;
    auto res = run_detmax(scaled, dom, 4, opts);
    const auto& h = res.state.objective_history;
    REQUIRE(h.size() >= 2);
    CHECK(h.back() > h.front());
    for (size_t i = 1; i < h.size(); ++i) CHECK(h[i] >= h[i - 1] - 1e-9);
    CHECK(res.certificate.identity_residual_k0 < 1e-7);

    // history CSV has the documented columns
    std::ostringstream os;
    write_detmax_history(res.state, os);
    CHECK(os.str().find("step,logdet,detroot,solver_iterations,primal_residual,dual_residual") == 0);
}
