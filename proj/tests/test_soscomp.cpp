#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "attractor/soscomp.hpp"

using namespace attractor;

namespace {

Polynomial x(int n, int i) { return Polynomial::variable(n, i); }

Polynomial random_poly(std::mt19937_64& rng, int n, int max_deg, int n_terms) {
    std::uniform_real_distribution<double> coef(-1.5, 1.5);
    std::uniform_int_distribution<int> deg(0, max_deg);
    Polynomial p(n);
    for (int t = 0; t < n_terms; ++t) {
        std::vector<int> e(n, 0);
        int budget = deg(rng);
        for (int k = 0; k < n && budget > 0; ++k) {
            std::uniform_int_distribution<int> part(0, budget);
            e[k] = part(rng);
            budget -= e[k];
        }
        p.add_term(Monomial(e), coef(rng));
    }
    return p;
}

/// decaying scalar system on Omega = [-2, 2]
std::pair<DynamicalSystem, Domain> toy_system() {
    DynamicalSystem sys;
    sys.name = "decay";
    sys.n = 1;
    sys.f = {-x(1, 0)};
    Domain dom;
    dom.g = Polynomial::constant(1, 4.0) - x(1, 0).pow(2);
    dom.bounding_box = {{-2.0, 2.0}};
    return {sys, dom};
}

SolverOptions tight_opts() {
    SolverOptions o;
    o.tol_p = 1e-10;
    o.tol_d = 1e-10;
    o.max_iter = 100000;
    return o;
}

SolverOptions default_opts() {
    SolverOptions o;
    o.max_iter = 100000;
    o.tol_psd = 1e-6;
    return o;
}

}  // namespace

TEST_CASE("gram_parametrize positions") {
    auto gi = gram_parametrize(2, 1);
    REQUIRE(gi.basis.size() == 2);  // [1, x]
    Monomial x2(std::vector<int>{2}), x1(std::vector<int>{1}), c0(std::vector<int>{0});
    REQUIRE(gi.positions.at(x2) == std::vector<std::pair<int, int>>{{1, 1}});
    REQUIRE(gi.positions.at(x1) == std::vector<std::pair<int, int>>{{0, 1}});
    REQUIRE(gi.positions.at(c0) == std::vector<std::pair<int, int>>{{0, 0}});

    auto gi2 = gram_parametrize(2, 2);
    CHECK(gi2.basis.size() == 3);
    CHECK(gi2.positions.at(Monomial::constant(2)) ==
          std::vector<std::pair<int, int>>{{0, 0}});

    CHECK(gram_parametrize(4, 2).basis.size() == 6);  // C(4,2)
    CHECK_THROWS_AS(gram_parametrize(3, 2), std::invalid_argument);
}

TEST_CASE("equate_coefficients pins the Gram of x^2") {
    auto gi = gram_parametrize(2, 1);
    auto rows = equate_coefficients(x(1, 0).pow(2), gi);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        if (r.monomial.degree() == 2) {
            CHECK(r.rhs == 1.0);
            REQUIRE(r.entries.size() == 1);
            CHECK(std::get<2>(r.entries[0]) == 1.0);
        } else if (r.monomial.degree() == 1) {
            CHECK(r.rhs == 0.0);
            CHECK(std::get<2>(r.entries[0]) == 2.0);
        } else {
            CHECK(r.rhs == 0.0);
        }
    }
    CHECK_THROWS_AS(equate_coefficients(x(1, 0).pow(4), gi), std::invalid_argument);
}

TEST_CASE("SOS membership: 1 + x^2 feasible, -x^2 and -x^2-1 infeasible") {
    auto [prob, gi] = make_sos_feasibility(Polynomial::constant(1, 1.0) + x(1, 0).pow(2));
    auto sol = solve_sdp(prob, tight_opts());
    REQUIRE(sol.status == SDPStatus::solved);
    CHECK(sol.blocks[0](0, 0) == Catch::Approx(1.0).margin(1e-6));
    CHECK(sol.blocks[0](1, 1) == Catch::Approx(1.0).margin(1e-6));
    CHECK(sol.blocks[0](0, 1) == Catch::Approx(0.0).margin(1e-8));

    auto [prob2, gi2] = make_sos_feasibility(-1.0 * x(1, 0).pow(2));
    CHECK(solve_sdp(prob2, tight_opts()).status == SDPStatus::infeasible);

    auto [prob3, gi3] =
        make_sos_feasibility(-1.0 * x(1, 0).pow(2) - Polynomial::constant(1, 1.0));
    CHECK(solve_sdp(prob3, tight_opts()).status == SDPStatus::infeasible);
}

TEST_CASE("SOS round-trip on explicit sums of squares") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 3);
        Polynomial p(n);
        const int k = 1 + static_cast<int>(rng() % 3);
        for (int i = 0; i < k; ++i) {
            Polynomial q = random_poly(rng, n, 3, 5);
            p = p + q * q;
        }
        auto [prob, gi] = make_sos_feasibility(p);
        auto sol = solve_sdp(prob, default_opts());
        // boundary Grams converge with the usual first-order tail; the
        // feasibility verdict plus the reconstruction are what matter
        REQUIRE((sol.status == SDPStatus::solved || sol.status == SDPStatus::inaccurate));
        Polynomial back = expand_gram(gi.basis, sol.blocks[0], n);
        Polynomial diff = back - p;
        double maxc = 0.0;
        for (const auto& [m, c] : diff.terms()) maxc = std::max(maxc, std::abs(c));
        CHECK(maxc < 1e-7);
        CHECK(min_eigenvalue(sol.blocks[0]) >= -1e-6);
    }
}

TEST_CASE("toy attractor program: assemble, solve, extract") {
    auto [sys, dom] = toy_system();
    AttractorSDPOptions aopts;
    aopts.phase1_max_slack = true;
    aopts.trace_cap = 100.0;
    auto comp = assemble_attractor_sdp(sys, dom, 2, 1e-4, std::nullopt, true, aopts);
    auto sol = solve_sdp(comp.problem, tight_opts());
    REQUIRE(sol.status == SDPStatus::solved);

    auto cert = extract_certificate(comp, sol);
    CHECK(cert.identity_residual_k0 < 1e-6);
    CHECK(cert.identity_residual_k1 < 1e-6);
    CHECK(min_eigenvalue(cert.J.gram) >= 0.5 * comp.eps_pd);
    CHECK(min_eigenvalue(cert.k0.gram) >= -1e-8);

    // soundness by sampling: grad(J)'f + (J-1) <= 1e-6 on Omega, k0 >= -1e-6
    Polynomial resid = lie_derivative(cert.J.poly, sys.f) + cert.J.poly -
                       Polynomial::constant(1, 1.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int t = 0; t < 10000; ++t) {
        std::vector<double> pt{u(rng)};
        if (dom.g.evaluate(pt) < 0.0) continue;
        CHECK(resid.evaluate(pt) <= 1e-6);
        CHECK(cert.k0.poly.evaluate(pt) >= -1e-6);
    }

    // re-extracting from an unsolved result is an error
    SDPSolution unsolved;
    unsolved.status = SDPStatus::iteration_limit;
    CHECK_THROWS_AS(extract_certificate(comp, unsolved), CertificateError);
}

TEST_CASE("boundary block is dropped when include_k1 is false") {
    auto [sys, dom] = toy_system();
    auto with = assemble_attractor_sdp(sys, dom, 2, 1e-4, std::nullopt, true);
    auto without = assemble_attractor_sdp(sys, dom, 2, 1e-4, std::nullopt, false);
    CHECK(with.problem.block_dims.size() == without.problem.block_dims.size() + 1);
    CHECK(with.problem.rows.size() > without.problem.rows.size());
    CHECK(without.n_p0 == 0);
    CHECK(without.k1_block == -1);
}

TEST_CASE("Van der Pol degree-4 program has a 6-dimensional J block") {
    auto [sys, dom] = builtin_system("vanderpol");
    auto scaled = apply_scaling(sys);
    auto comp = assemble_attractor_sdp(scaled, dom, 4, 1e-4, std::nullopt, false);
    CHECK(comp.problem.block_dims[comp.j_block] == 6);  // C(4,2)
}

TEST_CASE("feasibility solve reproduces a known Gram expansion") {
    // assemble p from a known PSD Gram, solve membership, compare expansions
    std::mt19937_64 rng(23);
    auto basis = monomial_basis(2, 2);
    const int N = static_cast<int>(basis.size());
    Eigen::MatrixXd A(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) A(i, j) = std::uniform_real_distribution<double>(-1, 1)(rng);
    Eigen::MatrixXd P0 = A * A.transpose();
    Polynomial p = expand_gram(basis, P0, 2);
    auto [prob, gi] = make_sos_feasibility(p);
    auto sol = solve_sdp(prob, tight_opts());
    REQUIRE(sol.status == SDPStatus::solved);
    Polynomial back = expand_gram(gi.basis, sol.blocks[0], 2);
    Polynomial diff = back - p;
    for (const auto& [m, c] : diff.terms()) CHECK(std::abs(c) < 1e-9);
}

TEST_CASE("degree too small for the boundary multiplier") {
    auto [sys, dom] = builtin_system("vanderpol");  // quartic g
    auto scaled = apply_scaling(sys);
    CHECK_THROWS_AS(assemble_attractor_sdp(scaled, dom, 2, 1e-4, std::nullopt, true),
                    std::invalid_argument);
    // without k1 the degree-2 program assembles (constant s0 multiplier)
    auto comp = assemble_attractor_sdp(scaled, dom, 2, 1e-4, std::nullopt, false);
    CHECK(comp.ds0 == 0);
}
