#pragma once

// Compiles SOS membership constraints and the attractor program
//
//   sup (det P)^(1/N)  s.t.  J = z_d' P z_d,  P > 0,
//   k0 = -grad(J)'f - (J - 1) - s0*g,   k1 = (J - 1 - alpha) - p0*g,
//   J, s0, k0, k1 SOS,  p0 free-sign,
//
// into one standard-form SDP.  Gram matrices are indexed in the fixed
// graded-lex monomial order, so the emitted program is byte-reproducible
// for a given configuration.
//
// Internally the state is normalized by the bounding-box radius before
// compilation and certificates are mapped back afterwards; this keeps the
// monomial scales balanced for the first-order solver and tightens the
// pointwise meaning of Gram eigenvalue tolerances.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "attractor/dynsys.hpp"
#include "attractor/poly.hpp"
#include "attractor/sdp.hpp"

namespace attractor {

struct CertificateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Deterministic map from each monomial of degree <= d to the Gram positions
/// (i, j), i <= j, whose basis product equals it.
struct GramIndexing {
    int n = 0;
    int sos_degree = 0;  // even d; basis spans degree <= d/2
    std::vector<Monomial> basis;
    std::map<Monomial, std::vector<std::pair<int, int>>, GrlexLess> positions;
};

inline GramIndexing gram_parametrize(int d, int n) {
    if (d < 0 || d % 2 != 0) throw std::invalid_argument("gram_parametrize: degree must be even");
    GramIndexing gi;
    gi.n = n;
    gi.sos_degree = d;
    gi.basis = monomial_basis(n, d / 2);
    const int N = static_cast<int>(gi.basis.size());
    for (int j = 0; j < N; ++j)
        for (int i = 0; i <= j; ++i)
            gi.positions[gi.basis[i].times(gi.basis[j])].emplace_back(i, j);
    return gi;
}

/// One equality row of a Gram parametrization:
///   sum over positions of (2 if i != j else 1) * P_ij  =  rhs.
struct GramEqualityRow {
    Monomial monomial;
    std::vector<std::tuple<int, int, double>> entries;  // (i, j, coef)
    double rhs = 0.0;
};

inline std::vector<GramEqualityRow> equate_coefficients(const Polynomial& p,
                                                        const GramIndexing& gi) {
    if (p.degree() > gi.sos_degree)
        throw std::invalid_argument("equate_coefficients: monomial outside reachable set");
    std::vector<GramEqualityRow> rows;
    rows.reserve(gi.positions.size());
    for (const auto& [m, pos] : gi.positions) {
        GramEqualityRow row;
        row.monomial = m;
        for (const auto& [i, j] : pos) row.entries.emplace_back(i, j, i == j ? 1.0 : 2.0);
        row.rhs = p.coefficient(m);
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Plain SOS-membership feasibility program for p (block 0 holds the Gram).
inline std::pair<SDPProblem, GramIndexing> make_sos_feasibility(const Polynomial& p) {
    int d = p.degree();
    if (d % 2 != 0) ++d;
    GramIndexing gi = gram_parametrize(d, p.dimension());
    SDPProblem prob;
    prob.block_dims = {static_cast<int>(gi.basis.size())};
    for (const auto& row : equate_coefficients(p, gi)) {
        LinearExpr e;
        for (const auto& [i, j, c] : row.entries) e.mat.push_back({0, i, j, c});
        prob.rows.push_back(std::move(e));
        prob.b.push_back(row.rhs);
    }
    return {std::move(prob), std::move(gi)};
}

struct SOSCertificate {
    std::vector<Monomial> basis;
    Eigen::MatrixXd gram;
    Polynomial poly{1};

    bool empty() const { return basis.empty(); }
};

inline Polynomial expand_gram(const std::vector<Monomial>& basis, const Eigen::MatrixXd& gram,
                              int n) {
    Polynomial p(n);
    const int N = static_cast<int>(basis.size());
    for (int j = 0; j < N; ++j)
        for (int i = 0; i <= j; ++i) {
            const double c = (i == j) ? gram(i, i) : 2.0 * gram(i, j);
            if (c != 0.0) p.add_term(basis[i].times(basis[j]), c);
        }
    return p;
}

struct PutinarCertificate {
    SOSCertificate J;
    SOSCertificate s0;  // empty when the multiplier degree collapses to nothing
    SOSCertificate k0;
    std::optional<SOSCertificate> k1;
    Polynomial p0{1};
    double alpha = 0.0;
    double eps_pd = 0.0;
    int degree = 0;
    double identity_residual_k0 = 0.0;
    double identity_residual_k1 = 0.0;
};

struct AttractorSDPOptions {
    double eps_pd = 1e-6;   // realizes the strict P > 0 as P >= eps I
    double trace_cap = 0.0; // adds trace(P_J) <= cap when positive
    bool phase1_max_slack = false;  // maximize t in P_J >= (eps + t) I
};

/// The assembled program plus everything needed to reconstruct certificates.
struct AttractorSDP {
    SDPProblem problem;

    int n = 0, d = 0, dk0 = 0, dk1 = 0, ds0 = -1, dp0 = -1;
    double alpha = 0.0, eps_pd = 0.0, trace_cap = 0.0;
    double coord_scale = 1.0;  // state normalization applied before compiling
    bool include_k1 = false, phase1 = false;

    int j_block = -1, s0_block = -1, k0_block = -1, k1_block = -1, slack_block = -1;
    int p0_offset = -1, n_p0 = 0, t_index = -1;

    std::vector<Monomial> j_basis, s0_basis, k0_basis, k1_basis, p0_basis;
    std::vector<Polynomial> f_w;
    Polynomial g_w{1};
};

namespace detail {

inline int even_floor(int v) { return v - (v % 2 + 2) % 2; }
inline int even_ceil(int v) { return v % 2 == 0 ? v : v + 1; }

/// Accumulates one polynomial-identity coefficient row across several Gram
/// blocks and free variables.
struct RowBuilder {
    std::map<Monomial, LinearExpr, GrlexLess> rows;
    std::map<Monomial, double, GrlexLess> rhs;

    void touch(const Monomial& m) {
        rows.try_emplace(m);
        rhs.try_emplace(m, 0.0);
    }
    void add_gram(int block, int i, int j, const Polynomial& basis_poly, double scale) {
        for (const auto& [m, c] : basis_poly.terms()) {
            touch(m);
            rows[m].mat.push_back({block, i, j, scale * c});
        }
    }
    void add_free(int index, const Polynomial& multiplier) {
        for (const auto& [m, c] : multiplier.terms()) {
            touch(m);
            rows[m].free_terms.push_back({index, c});
        }
    }
    void add_rhs(const Polynomial& p) {
        for (const auto& [m, c] : p.terms()) {
            touch(m);
            rhs[m] += c;
        }
    }
};

}  // namespace detail

/// Compiles the degree-d attractor program for the dynamics f (used exactly
/// as given) on Omega = {g >= 0}.  Multiplier degrees follow the shared cap:
/// deg(s0) <= d - deg(g) rounded down to even (clamped at zero), and p0 has
/// plain degree cap d - deg(g).
inline AttractorSDP assemble_attractor_sdp(
    const DynamicalSystem& sys, const Domain& dom, int d, double alpha,
    const std::optional<Eigen::MatrixXd>& objective_gradient, bool include_k1,
    AttractorSDPOptions opts = {}) {
    sys.validate();
    dom.validate();
    if (d < 2 || d % 2 != 0) throw std::invalid_argument("assemble_attractor_sdp: d must be even, >= 2");
    if (dom.dimension() != sys.n)
        throw std::invalid_argument("assemble_attractor_sdp: domain/system dimension mismatch");
    if (dom.g.is_zero()) throw std::invalid_argument("assemble_attractor_sdp: empty domain polynomial");

    AttractorSDP out;
    out.n = sys.n;
    out.d = d;
    out.alpha = alpha;
    out.eps_pd = opts.eps_pd;
    out.trace_cap = opts.trace_cap;
    out.include_k1 = include_k1;
    out.phase1 = opts.phase1_max_slack;

    // normalize coordinates by the box radius
    double L = 0.0;
    for (const auto& [lo, hi] : dom.bounding_box) L = std::max({L, std::abs(lo), std::abs(hi)});
    if (L <= 0.0) throw std::invalid_argument("assemble_attractor_sdp: degenerate bounding box");
    out.coord_scale = L;
    for (const auto& fi : sys.f) out.f_w.push_back(substitute_scaling(fi, L) * (1.0 / L));
    out.g_w = substitute_scaling(dom.g, L);

    const int deg_g = out.g_w.degree();
    int deg_f = 0;
    for (const auto& fi : out.f_w) deg_f = std::max(deg_f, fi.degree());

    out.ds0 = std::max(0, detail::even_floor(d - deg_g));
    out.dp0 = d - deg_g;
    if (include_k1 && out.dp0 < 0)
        throw std::invalid_argument(
            "assemble_attractor_sdp: d too small for the boundary multiplier with this g; "
            "use include_k1=false or raise d");
    out.dk0 = detail::even_ceil(std::max({d - 1 + deg_f, d, out.ds0 + deg_g}));
    out.dk1 = d;

    out.j_basis = monomial_basis(out.n, d / 2);
    out.s0_basis = monomial_basis(out.n, out.ds0 / 2);
    out.k0_basis = monomial_basis(out.n, out.dk0 / 2);
    if (include_k1) {
        out.k1_basis = monomial_basis(out.n, out.dk1 / 2);
        out.p0_basis = monomial_basis(out.n, out.dp0);
    }

    SDPProblem& prob = out.problem;
    auto add_block = [&prob](const std::vector<Monomial>& basis) {
        prob.block_dims.push_back(static_cast<int>(basis.size()));
        return static_cast<int>(prob.block_dims.size()) - 1;
    };
    out.j_block = add_block(out.j_basis);
    out.s0_block = add_block(out.s0_basis);
    out.k0_block = add_block(out.k0_basis);
    if (include_k1) out.k1_block = add_block(out.k1_basis);
    if (opts.trace_cap > 0.0) {
        prob.block_dims.push_back(1);
        out.slack_block = static_cast<int>(prob.block_dims.size()) - 1;
    }
    if (include_k1) {
        out.p0_offset = 0;
        out.n_p0 = static_cast<int>(out.p0_basis.size());
        prob.n_free = out.n_p0;
    }
    if (opts.phase1_max_slack) {
        out.t_index = prob.n_free;
        prob.n_free += 1;
    }

    const Polynomial one = Polynomial::constant(out.n, 1.0);
    const int NJ = static_cast<int>(out.j_basis.size());

    // identity 1:  k0 + grad(J)'f + J + s0*g = 1
    detail::RowBuilder id0;
    for (int j = 0; j < NJ; ++j)
        for (int i = 0; i <= j; ++i) {
            const double w = (i == j) ? 1.0 : 2.0;
            Polynomial zz(out.n);
            zz.add_term(out.j_basis[i].times(out.j_basis[j]), 1.0);
            id0.add_gram(out.j_block, i, j, lie_derivative(zz, out.f_w) + zz, w);
        }
    for (int j = 0; j < static_cast<int>(out.s0_basis.size()); ++j)
        for (int i = 0; i <= j; ++i) {
            const double w = (i == j) ? 1.0 : 2.0;
            Polynomial zz(out.n);
            zz.add_term(out.s0_basis[i].times(out.s0_basis[j]), 1.0);
            id0.add_gram(out.s0_block, i, j, zz * out.g_w, w);
        }
    for (int j = 0; j < static_cast<int>(out.k0_basis.size()); ++j)
        for (int i = 0; i <= j; ++i) {
            const double w = (i == j) ? 1.0 : 2.0;
            Polynomial zz(out.n);
            zz.add_term(out.k0_basis[i].times(out.k0_basis[j]), 1.0);
            id0.add_gram(out.k0_block, i, j, zz, w);
        }
    id0.add_rhs(one);
    // make sure every reachable monomial up to dk0 has a row
    for (const auto& m : monomial_basis(out.n, out.dk0)) id0.touch(m);

    // identity 2:  k1 - J + p0*g = -(1 + alpha)
    detail::RowBuilder id1;
    if (include_k1) {
        for (int j = 0; j < static_cast<int>(out.k1_basis.size()); ++j)
            for (int i = 0; i <= j; ++i) {
                const double w = (i == j) ? 1.0 : 2.0;
                Polynomial zz(out.n);
                zz.add_term(out.k1_basis[i].times(out.k1_basis[j]), 1.0);
                id1.add_gram(out.k1_block, i, j, zz, w);
            }
        for (int j = 0; j < NJ; ++j)
            for (int i = 0; i <= j; ++i) {
                const double w = (i == j) ? 1.0 : 2.0;
                Polynomial zz(out.n);
                zz.add_term(out.j_basis[i].times(out.j_basis[j]), -1.0);
                id1.add_gram(out.j_block, i, j, zz, w);
            }
        for (int q = 0; q < out.n_p0; ++q) {
            Polynomial mono(out.n);
            mono.add_term(out.p0_basis[q], 1.0);
            id1.add_free(out.p0_offset + q, mono * out.g_w);
        }
        id1.add_rhs(-(1.0 + alpha) * one);
        for (const auto& m : monomial_basis(out.n, out.dk1)) id1.touch(m);
    }

    // materialize rows; the J block variable is shifted, P_J = Z + (eps + t) I
    auto emit = [&](detail::RowBuilder& rb) {
        for (auto& [m, expr] : rb.rows) {
            double b = rb.rhs[m];
            LinearExpr row;
            double t_coef = 0.0;
            for (const auto& term : expr.mat) {
                row.mat.push_back(term);
                if (term.block == out.j_block && term.i == term.j) {
                    b -= term.coef * opts.eps_pd;
                    t_coef += term.coef;
                }
            }
            row.free_terms = expr.free_terms;
            if (out.t_index >= 0 && t_coef != 0.0) row.free_terms.push_back({out.t_index, t_coef});
            prob.rows.push_back(std::move(row));
            prob.b.push_back(b);
        }
    };
    emit(id0);
    if (include_k1) emit(id1);

    if (opts.trace_cap > 0.0) {
        // trace(P_J)/cap + slack = 1, written at unit scale so the slack
        // variable does not pollute the solver's residual normalization
        const double inv_cap = 1.0 / opts.trace_cap;
        LinearExpr row;
        double b = 1.0 - NJ * opts.eps_pd * inv_cap;
        for (int i = 0; i < NJ; ++i) row.mat.push_back({out.j_block, i, i, inv_cap});
        if (out.t_index >= 0) row.free_terms.push_back({out.t_index, NJ * inv_cap});
        row.mat.push_back({out.slack_block, 0, 0, 1.0});
        prob.rows.push_back(std::move(row));
        prob.b.push_back(b);
    }
    if (opts.phase1_max_slack) {
        // t + t_slack = 1 keeps the maximized eigenvalue slack bounded
        prob.block_dims.push_back(1);
        LinearExpr row;
        row.free_terms.push_back({out.t_index, 1.0});
        row.mat.push_back({static_cast<int>(prob.block_dims.size()) - 1, 0, 0, 1.0});
        prob.rows.push_back(std::move(row));
        prob.b.push_back(1.0);
    }

    // objective (minimization form)
    if (opts.phase1_max_slack) {
        prob.objective.free_terms.push_back({out.t_index, -1.0});
    } else if (objective_gradient) {
        const Eigen::MatrixXd& G = *objective_gradient;
        if (G.rows() != NJ || G.cols() != NJ)
            throw std::invalid_argument("assemble_attractor_sdp: objective gradient size mismatch");
        const double scale = std::max(G.norm(), 1e-12);
        for (int j = 0; j < NJ; ++j)
            for (int i = 0; i <= j; ++i) {
                const double w = (i == j) ? 1.0 : 2.0;
                prob.objective.mat.push_back({out.j_block, i, j, -w * G(i, j) / scale});
            }
    }

    prob.validate();
    return out;
}

namespace detail {

inline Eigen::MatrixXd rescale_gram(const Eigen::MatrixXd& P, const std::vector<Monomial>& basis,
                                    double L) {
    if (L == 1.0) return P;
    Eigen::VectorXd D(P.rows());
    for (int i = 0; i < P.rows(); ++i) D[i] = std::pow(L, -basis[i].degree());
    return D.asDiagonal() * P * D.asDiagonal();
}

inline double max_abs_coeff(const Polynomial& p) {
    double m = 0.0;
    for (const auto& [mono, c] : p.terms()) m = std::max(m, std::abs(c));
    return m;
}

}  // namespace detail

/// Rebuilds the certificate polynomials from a solved program, asserts both
/// Putinar identities coefficient-wise, and maps everything back to the
/// caller's coordinates.
inline PutinarCertificate extract_certificate(const AttractorSDP& comp, const SDPSolution& sol,
                                              double identity_tol = 1e-6) {
    if (sol.status != SDPStatus::solved)
        throw CertificateError(std::string("extract_certificate: solver status is ") +
                               to_string(sol.status));

    const int n = comp.n;
    auto symm = [](Eigen::MatrixXd M) { return (0.5 * (M + M.transpose())).eval(); };

    Eigen::MatrixXd PJ = symm(sol.blocks[comp.j_block]);
    double shift = comp.eps_pd;
    if (comp.t_index >= 0) shift += sol.free_vars[comp.t_index];
    PJ.diagonal().array() += shift;

    Eigen::MatrixXd Ps0 = symm(sol.blocks[comp.s0_block]);
    Eigen::MatrixXd Pk0 = symm(sol.blocks[comp.k0_block]);

    Polynomial Jw = expand_gram(comp.j_basis, PJ, n);
    Polynomial s0w = expand_gram(comp.s0_basis, Ps0, n);
    Polynomial k0w = expand_gram(comp.k0_basis, Pk0, n);

    PutinarCertificate cert;
    cert.alpha = comp.alpha;
    cert.eps_pd = comp.eps_pd;
    cert.degree = comp.d;

    const Polynomial one = Polynomial::constant(n, 1.0);
    Polynomial resid0 = k0w + lie_derivative(Jw, comp.f_w) + Jw - one + s0w * comp.g_w;
    cert.identity_residual_k0 = detail::max_abs_coeff(resid0);
    if (cert.identity_residual_k0 > identity_tol)
        throw CertificateError("extract_certificate: k0 identity residual " +
                               std::to_string(cert.identity_residual_k0) +
                               " exceeds tolerance (solver inaccuracy)");

    Polynomial p0w(n);
    if (comp.include_k1) {
        Eigen::MatrixXd Pk1 = symm(sol.blocks[comp.k1_block]);
        Polynomial k1w = expand_gram(comp.k1_basis, Pk1, n);
        for (int q = 0; q < comp.n_p0; ++q) {
            const double c = sol.free_vars[comp.p0_offset + q];
            if (c != 0.0) p0w.add_term(comp.p0_basis[q], c);
        }
        Polynomial resid1 =
            k1w - (Jw - one * (1.0 + comp.alpha)) + p0w * comp.g_w;
        cert.identity_residual_k1 = detail::max_abs_coeff(resid1);
        if (cert.identity_residual_k1 > identity_tol)
            throw CertificateError("extract_certificate: k1 identity residual " +
                                   std::to_string(cert.identity_residual_k1) +
                                   " exceeds tolerance (solver inaccuracy)");
        const double L = comp.coord_scale;
        SOSCertificate k1c;
        k1c.basis = comp.k1_basis;
        k1c.gram = detail::rescale_gram(Pk1, comp.k1_basis, L);
        k1c.poly = substitute_scaling(k1w, 1.0 / L);
        cert.k1 = std::move(k1c);
    }

    const double L = comp.coord_scale;
    cert.J.basis = comp.j_basis;
    cert.J.gram = detail::rescale_gram(PJ, comp.j_basis, L);
    cert.J.poly = substitute_scaling(Jw, 1.0 / L);
    cert.s0.basis = comp.s0_basis;
    cert.s0.gram = detail::rescale_gram(Ps0, comp.s0_basis, L);
    cert.s0.poly = substitute_scaling(s0w, 1.0 / L);
    cert.k0.basis = comp.k0_basis;
    cert.k0.gram = detail::rescale_gram(Pk0, comp.k0_basis, L);
    cert.k0.poly = substitute_scaling(k0w, 1.0 / L);
    cert.p0 = substitute_scaling(p0w, 1.0 / L);
    return cert;
}

}  // namespace attractor
