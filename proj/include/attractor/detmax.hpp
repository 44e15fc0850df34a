#pragma once

// Outer loop maximizing (det P)^(1/N) over the feasible set of the attractor
// program by successive linearization of log det.  Each step solves the
// compiled SDP with the linearized objective <inv(P_k), P>, then takes an
// exact line search on log det along the segment joining the current and
// candidate solutions; the segment is feasible because the constraint set is
// convex, so accepted iterates ascend monotonically.

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "attractor/soscomp.hpp"

namespace attractor {

struct DetMaxError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Gradient of log det at P_k, i.e. inverse(P_k); requires P_k > 0.
inline Eigen::MatrixXd linearize_logdet(const Eigen::MatrixXd& P) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (P + P.transpose()));
    if (es.info() != Eigen::Success) throw std::runtime_error("linearize_logdet: eigensolver failed");
    if (es.eigenvalues()(0) <= 0.0)
        throw std::invalid_argument("linearize_logdet: matrix is singular or indefinite");
    Eigen::VectorXd inv = es.eigenvalues().cwiseInverse();
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

inline double log_det_psd(const Eigen::MatrixXd& P) {
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (P + P.transpose()));
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (int i = 0; i < P.rows(); ++i) s += std::log(llt.matrixL()(i, i));
    return 2.0 * s;
}

inline double det_root(const Eigen::MatrixXd& P) {
    return std::exp(log_det_psd(P) / P.rows());
}

struct DetMaxRecord {
    int step = 0;
    double logdet = 0.0;
    double detroot = 0.0;
    int solver_iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    bool accepted = false;
    double theta = 0.0;  // line-search blend toward the candidate
};

struct DetMaxState {
    Eigen::MatrixXd iterate;               // current Gram of J, caller coordinates
    std::vector<double> objective_history;  // accepted (det P)^(1/N) values
    int step = 0;
    double trust_radius = 0.0;  // trace cap in effect
    bool trace_cap_active = false;
    std::string stop_reason;
    std::vector<DetMaxRecord> records;
};

struct DetMaxOptions {
    int max_outer = 30;
    double stall_tol = 1e-6;
    double trace_cap = 0.0;  // <= 0 picks the default 1e4 * N_d
    double alpha = 1e-4;
    double eps_pd = 1e-6;
    bool include_k1 = true;
    SolverOptions phase1_solver = default_phase1_solver();
    SolverOptions step_solver = default_step_solver();

    static SolverOptions default_phase1_solver() {
        SolverOptions o;
        o.tol_p = 1e-7;
        o.tol_d = 1e-7;
        o.tol_psd = 1e-5;  // PSD slack is repaired by refinement
        o.max_iter = 150000;
        return o;
    }
    static SolverOptions default_step_solver() {
        SolverOptions o;
        o.tol_p = 5e-9;
        o.tol_d = 5e-9;
        o.tol_psd = 1e-5;
        o.max_iter = 250000;
        return o;
    }
};

struct DetMaxResult {
    PutinarCertificate certificate;
    DetMaxState state;
};

namespace detail {

/// log det of the J Gram along the blend, reported in caller coordinates.
struct BlendObjective {
    const Eigen::MatrixXd& P_cur;
    const Eigen::MatrixXd& P_cand;
    double operator()(double theta) const {
        return log_det_psd((1.0 - theta) * P_cur + theta * P_cand);
    }
};

inline double golden_max(const BlendObjective& f, double lo, double hi, int iters = 90) {
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int k = 0; k < iters; ++k) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

/// Phase-1 feasibility (maximum eigenvalue slack), then det-max ascent.
/// `sys` is used exactly as given; apply state scalings beforehand.
inline DetMaxResult run_detmax(const DynamicalSystem& sys, const Domain& dom, int d,
                               DetMaxOptions opts = {}) {
    const std::uint64_t NJ64 = binomial(sys.n + d / 2, d / 2);
    const int NJ = static_cast<int>(NJ64);
    const double cap = opts.trace_cap > 0.0 ? opts.trace_cap : 1e4 * static_cast<double>(NJ64);

    // the step program: fixed rows, objective swapped per iteration
    AttractorSDPOptions step_opts;
    step_opts.eps_pd = opts.eps_pd;
    step_opts.trace_cap = cap;
    auto step_comp = assemble_attractor_sdp(sys, dom, d, opts.alpha, std::nullopt,
                                            opts.include_k1, step_opts);

    // phase 1: maximize the eigenvalue slack to get a strictly feasible start
    AttractorSDPOptions p1_opts;
    p1_opts.eps_pd = opts.eps_pd;
    p1_opts.trace_cap = cap;
    p1_opts.phase1_max_slack = true;
    auto p1_comp = assemble_attractor_sdp(sys, dom, d, opts.alpha, std::nullopt,
                                          opts.include_k1, p1_opts);
    auto p1_sol = solve_sdp(p1_comp.problem, opts.phase1_solver);
    if (p1_sol.status == SDPStatus::infeasible)
        throw DetMaxError("no degree-" + std::to_string(d) + " certificate found (phase-1 infeasible)");
    if (p1_sol.status != SDPStatus::solved && p1_sol.status != SDPStatus::inaccurate)
        throw DetMaxError(std::string("phase-1 did not converge: ") + to_string(p1_sol.status));
    const double slack = p1_sol.free_vars[p1_comp.t_index];
    if (slack < -opts.eps_pd)
        throw DetMaxError("no degree-" + std::to_string(d) +
                          " certificate found (no strictly feasible Gram)");

    // fold the slack into the step-program layout: Z_step = Z_1 + t I, and
    // the trace-cap slack completes its row
    std::vector<Eigen::MatrixXd> cur(step_comp.problem.block_dims.size());
    for (size_t bk = 0; bk < cur.size(); ++bk)
        cur[bk] = Eigen::MatrixXd::Zero(step_comp.problem.block_dims[bk],
                                        step_comp.problem.block_dims[bk]);
    cur[step_comp.j_block] = p1_sol.blocks[p1_comp.j_block];
    cur[step_comp.j_block].diagonal().array() += std::max(slack, 0.0);
    cur[step_comp.s0_block] = p1_sol.blocks[p1_comp.s0_block];
    cur[step_comp.k0_block] = p1_sol.blocks[p1_comp.k0_block];
    if (step_comp.k1_block >= 0) cur[step_comp.k1_block] = p1_sol.blocks[p1_comp.k1_block];
    Eigen::VectorXd cur_free = Eigen::VectorXd::Zero(step_comp.problem.n_free);
    for (int q = 0; q < step_comp.n_p0; ++q)
        cur_free[step_comp.p0_offset + q] = p1_sol.free_vars[p1_comp.p0_offset + q];
    {
        const double trace = cur[step_comp.j_block].trace() + NJ * opts.eps_pd;
        cur[step_comp.slack_block](0, 0) = std::max(1.0 - trace / cap, 0.0);
    }
    refine_feasibility(step_comp.problem, cur, cur_free);

    auto gram_of = [&](const std::vector<Eigen::MatrixXd>& blocks) {
        Eigen::MatrixXd P = 0.5 * (blocks[step_comp.j_block] +
                                   blocks[step_comp.j_block].transpose());
        P.diagonal().array() += opts.eps_pd;
        return P;
    };
    // caller-coordinate determinant normalization (certificates are reported
    // in caller coordinates while the program is compiled in normalized ones)
    double deg_sum = 0.0;
    for (const auto& m : step_comp.j_basis) deg_sum += m.degree();
    const double logdet_offset = -2.0 * std::log(step_comp.coord_scale) * deg_sum;

    DetMaxState state;
    state.trust_radius = cap;
    Eigen::MatrixXd P_cur = gram_of(cur);
    double logdet_cur = log_det_psd(P_cur) + logdet_offset;
    double detroot_cur = std::exp(logdet_cur / NJ);
    state.objective_history.push_back(detroot_cur);
    state.records.push_back({0, logdet_cur, detroot_cur, p1_sol.iterations,
                             p1_sol.primal_residual, p1_sol.dual_residual, true, 0.0});

    int big_growth_streak = 0;
    state.stop_reason = "max_outer";
    for (int step = 1; step <= opts.max_outer; ++step) {
        Eigen::MatrixXd G = linearize_logdet(P_cur);
        SDPProblem prob = step_comp.problem;
        prob.objective = LinearExpr{};
        const double gscale = std::max(G.norm(), 1e-12);
        for (int j = 0; j < NJ; ++j)
            for (int i = 0; i <= j; ++i) {
                const double w = (i == j) ? 1.0 : 2.0;
                prob.objective.mat.push_back({step_comp.j_block, i, j, -w * G(i, j) / gscale});
            }
        auto sol = solve_sdp(prob, opts.step_solver);
        // an exactly-infeasible or diverging subproblem ends the loop; an
        // inexact but equality-clean candidate is still a usable direction
        if (sol.status == SDPStatus::infeasible || sol.status == SDPStatus::unbounded ||
            sol.eq_residual > 1e-6) {
            state.stop_reason = std::string("subproblem_") + to_string(sol.status);
            break;
        }
        Eigen::MatrixXd P_cand = gram_of(sol.blocks);
        detail::BlendObjective obj{P_cur, P_cand};
        double theta = detail::golden_max(obj, 0.0, 1.0);
        if (obj(1.0) >= obj(theta)) theta = 1.0;

        // judge acceptance on the refined blend so accepted iterates are
        // always working-precision feasible
        std::vector<Eigen::MatrixXd> trial(cur.size());
        for (size_t bk = 0; bk < cur.size(); ++bk)
            trial[bk] = (1.0 - theta) * cur[bk] + theta * sol.blocks[bk];
        Eigen::VectorXd trial_free = (1.0 - theta) * cur_free + theta * sol.free_vars;
        refine_feasibility(step_comp.problem, trial, trial_free);
        Eigen::MatrixXd P_trial = gram_of(trial);
        const double logdet_new = log_det_psd(P_trial) + logdet_offset;
        const double detroot_new = std::exp(logdet_new / NJ);

        DetMaxRecord rec{step, logdet_new, detroot_new, sol.iterations,
                         sol.primal_residual, sol.dual_residual, false, theta};
        if (!(detroot_new > detroot_cur * (1.0 + opts.stall_tol))) {
            state.records.push_back(rec);
            state.stop_reason = "stalled";
            break;
        }
        const double growth = detroot_new / std::max(detroot_cur, 1e-300);
        rec.accepted = true;
        state.records.push_back(rec);
        cur = std::move(trial);
        cur_free = std::move(trial_free);
        P_cur = P_trial;
        logdet_cur = logdet_new;
        detroot_cur = detroot_new;
        state.objective_history.push_back(detroot_cur);
        state.step = step;

        const double trace_frac = (P_cur.trace()) / cap;
        state.trace_cap_active = trace_frac >= 0.99;
        big_growth_streak = growth > 10.0 ? big_growth_streak + 1 : 0;
        if (big_growth_streak >= 5 && state.trace_cap_active) {
            state.stop_reason = "volume_zero_suspected";
            break;
        }
    }

    auto ref = refine_feasibility(step_comp.problem, cur, cur_free);
    SDPSolution final_sol;
    final_sol.status = SDPStatus::solved;
    final_sol.blocks = cur;
    final_sol.free_vars = cur_free;
    final_sol.eq_residual = ref.eq_residual;
    final_sol.min_block_eig = ref.min_block_eig;
    final_sol.primal_residual = 0.0;
    final_sol.dual_residual = 0.0;

    DetMaxResult result{extract_certificate(step_comp, final_sol), std::move(state)};
    result.state.iterate = result.certificate.J.gram;
    result.state.trace_cap_active = P_cur.trace() / cap >= 0.99;
    return result;
}

/// History CSV: step, logdet, detroot, solver iterations, residuals.
inline void write_detmax_history(const DetMaxState& state, std::ostream& os) {
    os.precision(17);
    os << "step,logdet,detroot,solver_iterations,primal_residual,dual_residual\n";
    for (const auto& r : state.records)
        os << r.step << "," << r.logdet << "," << r.detroot << "," << r.solver_iterations << ","
           << r.primal_residual << "," << r.dual_residual << "\n";
}

}  // namespace attractor
