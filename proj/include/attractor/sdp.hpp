#pragma once

// Standard-form semidefinite programs and a deterministic first-order solver.
//
//   minimize    <C, X> + c_y' y
//   subject to  A_k(X, y) = b_k      k = 1..m
//               X = (X_1, ..., X_B)  each block PSD,  y free
//
// The solver is an ADMM splitting: a cached factorization projects onto the
// affine subspace, an eigendecomposition projects each block onto the PSD
// cone, then the scaled dual is updated.  Iterates start at zero and the
// update order is fixed, so runs are bitwise reproducible.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace attractor {

/// Coefficient on entry (i,j), i <= j, of symmetric block `block`; the
/// coefficient applies once to the entry value (not doubled across the
/// symmetric pair).
struct LinearTerm {
    int block;
    int i;
    int j;
    double coef;
};

struct FreeTerm {
    int index;
    double coef;
};

struct LinearExpr {
    std::vector<LinearTerm> mat;
    std::vector<FreeTerm> free_terms;
};

struct SDPProblem {
    std::vector<int> block_dims;
    int n_free = 0;
    std::vector<LinearExpr> rows;
    std::vector<double> b;
    LinearExpr objective;

    void validate() const {
        if (rows.size() != b.size()) throw std::invalid_argument("SDPProblem: rows/b mismatch");
        for (int d : block_dims)
            if (d < 1) throw std::invalid_argument("SDPProblem: block dimension < 1");
        auto check_expr = [&](const LinearExpr& e) {
            for (const auto& t : e.mat) {
                if (t.block < 0 || t.block >= static_cast<int>(block_dims.size()))
                    throw std::invalid_argument("SDPProblem: block index out of range");
                if (t.i < 0 || t.j < t.i || t.j >= block_dims[t.block])
                    throw std::invalid_argument("SDPProblem: entry index out of range");
                if (!std::isfinite(t.coef)) throw std::invalid_argument("SDPProblem: non-finite coef");
            }
            for (const auto& t : e.free_terms) {
                if (t.index < 0 || t.index >= n_free)
                    throw std::invalid_argument("SDPProblem: free index out of range");
                if (!std::isfinite(t.coef)) throw std::invalid_argument("SDPProblem: non-finite coef");
            }
        };
        for (const auto& r : rows) check_expr(r);
        check_expr(objective);
        for (double v : b)
            if (!std::isfinite(v)) throw std::invalid_argument("SDPProblem: non-finite b");
    }
};

enum class SDPStatus { solved, inaccurate, infeasible, unbounded, iteration_limit };

inline const char* to_string(SDPStatus s) {
    switch (s) {
        case SDPStatus::solved: return "solved";
        case SDPStatus::inaccurate: return "inaccurate";
        case SDPStatus::infeasible: return "infeasible";
        case SDPStatus::unbounded: return "unbounded";
        case SDPStatus::iteration_limit: return "iteration_limit";
    }
    return "?";
}

struct SDPSolution {
    SDPStatus status = SDPStatus::iteration_limit;
    std::vector<Eigen::MatrixXd> blocks;
    Eigen::VectorXd free_vars;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double dual_objective = std::numeric_limits<double>::quiet_NaN();
    double primal_residual = std::numeric_limits<double>::infinity();
    double dual_residual = std::numeric_limits<double>::infinity();
    double eq_residual = std::numeric_limits<double>::infinity();
    double min_block_eig = std::numeric_limits<double>::quiet_NaN();
    double infeas_measure = 0.0;
    int iterations = 0;

    bool ok() const { return status == SDPStatus::solved; }
};

struct SolverOptions {
    double tol_p = 1e-7;
    double tol_d = 1e-7;
    double tol_psd = 1e-8;
    int max_iter = 200000;
    double rho = 1.0;
    double over_relax = 1.5;  // over-relaxation factor
    bool adapt_rho = true;    // residual-balancing penalty adaptation
    int check_every = 25;
    bool polish = true;  // project the cone point back onto the affine subspace
};

/// Frobenius-nearest PSD matrix: negative eigenvalues clipped to zero.
inline Eigen::MatrixXd project_psd(const Eigen::MatrixXd& M) {
    if (!M.allFinite()) throw std::invalid_argument("project_psd: non-finite input");
    Eigen::MatrixXd S = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success) throw std::runtime_error("project_psd: eigensolver failed");
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

inline double min_eigenvalue(const Eigen::MatrixXd& M) {
    if (!M.allFinite()) throw std::invalid_argument("min_eigenvalue: non-finite input");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()),
                                                      Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("min_eigenvalue: eigensolver failed");
    return es.eigenvalues()(0);
}

namespace detail {

/// Scaled upper-triangle vectorization (off-diagonals carry sqrt(2)) so the
/// Frobenius inner product becomes a plain dot product.
struct SvecLayout {
    std::vector<int> block_offset;
    std::vector<int> dims;
    int free_offset = 0;
    int total = 0;

    SvecLayout() = default;
    SvecLayout(const std::vector<int>& block_dims, int n_free) : dims(block_dims) {
        int off = 0;
        for (int d : block_dims) {
            block_offset.push_back(off);
            off += d * (d + 1) / 2;
        }
        free_offset = off;
        total = off + n_free;
    }

    int index(int block, int i, int j) const {  // i <= j
        return block_offset[block] + j * (j + 1) / 2 + i;
    }

    void to_matrix(const Eigen::VectorXd& x, int block, Eigen::MatrixXd& M) const {
        const int d = dims[block];
        M.resize(d, d);
        static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i <= j; ++i) {
                const double v = x[index(block, i, j)];
                if (i == j)
                    M(i, i) = v;
                else {
                    M(i, j) = v * inv_sqrt2;
                    M(j, i) = v * inv_sqrt2;
                }
            }
    }

    void from_matrix(const Eigen::MatrixXd& M, int block, Eigen::VectorXd& x) const {
        const int d = dims[block];
        static const double sqrt2 = std::sqrt(2.0);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i <= j; ++i)
                x[index(block, i, j)] = (i == j) ? M(i, i) : M(i, j) * sqrt2;
    }

    /// svec coefficient corresponding to a LinearTerm coefficient.
    static double term_coef(int i, int j, double coef) {
        static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        return i == j ? coef : coef * inv_sqrt2;
    }
};

}  // namespace detail

namespace detail {

/// Row-equilibrated problem data shared by the solver and the feasibility
/// refiner.
struct ProblemData {
    SvecLayout lay;
    Eigen::SparseMatrix<double, Eigen::RowMajor> A;
    Eigen::SparseMatrix<double> At;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    Eigen::LLT<Eigen::MatrixXd> llt;
    int m = 0;

    explicit ProblemData(const SDPProblem& prob)
        : lay(prob.block_dims, prob.n_free), m(static_cast<int>(prob.rows.size())) {
        const int K = lay.total;
        A.resize(m, K);
        b.resize(m);
        std::vector<Eigen::Triplet<double>> trips;
        for (int r = 0; r < m; ++r) {
            for (const auto& t : prob.rows[r].mat)
                trips.emplace_back(r, lay.index(t.block, t.i, t.j),
                                   SvecLayout::term_coef(t.i, t.j, t.coef));
            for (const auto& t : prob.rows[r].free_terms)
                trips.emplace_back(r, lay.free_offset + t.index, t.coef);
            b[r] = prob.b[r];
        }
        A.setFromTriplets(trips.begin(), trips.end());
        Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(m);
        for (int r = 0; r < m; ++r) {
            double nrm = A.row(r).norm();
            if (nrm > 1e-12) row_scale[r] = 1.0 / nrm;
        }
        A = row_scale.asDiagonal() * A;
        b = row_scale.asDiagonal() * b;

        c = Eigen::VectorXd::Zero(K);
        for (const auto& t : prob.objective.mat)
            c[lay.index(t.block, t.i, t.j)] += SvecLayout::term_coef(t.i, t.j, t.coef);
        for (const auto& t : prob.objective.free_terms) c[lay.free_offset + t.index] += t.coef;

        if (m > 0) {
            Eigen::MatrixXd AAt = (A * At_init()).toDense();
            llt.compute(AAt);
            if (llt.info() != Eigen::Success) {
                // nearly dependent rows; a tiny ridge keeps the subspace solve stable
                AAt.diagonal().array() += 1e-12;
                llt.compute(AAt);
                if (llt.info() != Eigen::Success)
                    throw std::runtime_error("SDP: cannot factor AA'");
            }
        }
    }

    const Eigen::SparseMatrix<double>& At_init() {
        if (At.rows() == 0 && A.rows() > 0) At = A.transpose();
        return At;
    }

    Eigen::VectorXd pack(const std::vector<Eigen::MatrixXd>& blocks,
                         const Eigen::VectorXd& free_vars) const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(lay.total);
        for (size_t bk = 0; bk < blocks.size(); ++bk)
            lay.from_matrix(blocks[bk], static_cast<int>(bk), x);
        if (free_vars.size() > 0) x.tail(lay.total - lay.free_offset) = free_vars;
        return x;
    }
};

}  // namespace detail

class AdmmSolver {
  public:
    explicit AdmmSolver(SolverOptions opts = {}) : opts_(opts) {}

    SDPSolution solve(const SDPProblem& prob) const {
        prob.validate();
        detail::ProblemData pd(prob);
        const detail::SvecLayout& lay = pd.lay;
        const int K = lay.total;
        const int m = pd.m;
        const int B = static_cast<int>(prob.block_dims.size());
        const Eigen::SparseMatrix<double, Eigen::RowMajor>& A = pd.A;
        const Eigen::SparseMatrix<double>& At = pd.At_init();
        const Eigen::VectorXd& b = pd.b;
        const Eigen::VectorXd& c = pd.c;
        const Eigen::LLT<Eigen::MatrixXd>& llt = pd.llt;
        const Eigen::VectorXd Ac = m > 0 ? Eigen::VectorXd(A * c) : Eigen::VectorXd();

        Eigen::VectorXd x = Eigen::VectorXd::Zero(K), z = Eigen::VectorXd::Zero(K),
                        u = Eigen::VectorXd::Zero(K);
        Eigen::VectorXd lam = Eigen::VectorXd::Zero(m);
        double rho = opts_.rho;

        const double b_norm = m > 0 ? b.norm() : 0.0;
        SDPSolution sol;
        sol.blocks.resize(B);
        Eigen::MatrixXd scratch;

        double r_norm = 0.0, s_norm = 0.0;
        double prev_delta_norm = -1.0;
        int stable_checks = 0;
        int next_adapt = 100;
        bool converged = false;
        int it = 0;

        auto project_cone = [&](Eigen::VectorXd& v) {
            for (int bk = 0; bk < B; ++bk) {
                lay.to_matrix(v, bk, scratch);
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scratch);
                Eigen::VectorXd lamv = es.eigenvalues().cwiseMax(0.0);
                scratch.noalias() =
                    es.eigenvectors() * lamv.asDiagonal() * es.eigenvectors().transpose();
                lay.from_matrix(scratch, bk, v);
            }
        };

        for (it = 1; it <= opts_.max_iter; ++it) {
            // affine step
            Eigen::VectorXd v = z - u;
            if (m > 0) {
                Eigen::VectorXd rhs = rho * (A * v - b) - Ac;
                lam = llt.solve(rhs);
                x = v - (c + At * lam) / rho;
            } else {
                x = v - c / rho;
            }
            // cone step with over-relaxation
            Eigen::VectorXd xh = opts_.over_relax * x + (1.0 - opts_.over_relax) * z;
            Eigen::VectorXd z_new = xh + u;
            project_cone(z_new);
            u += xh - z_new;

            r_norm = (x - z_new).norm();
            s_norm = rho * (z_new - z).norm();
            z = z_new;

            if (it % opts_.check_every == 0 || it == opts_.max_iter) {
                const double xz_scale = 1.0 + std::max(x.norm(), z.norm());
                const double u_scale = 1.0 + rho * u.norm();
                sol.primal_residual = r_norm / xz_scale;
                sol.dual_residual = s_norm / u_scale;
                if (sol.primal_residual <= opts_.tol_p && sol.dual_residual <= opts_.tol_d) {
                    converged = true;
                    break;
                }
                // divergence of the objective signals an unbounded direction
                const double cx = c.dot(x);
                if (cx < -1e12 * (1.0 + b_norm)) {
                    sol.status = SDPStatus::unbounded;
                    sol.iterations = it;
                    finalize(sol, lay, z, b, A, At, llt, lam, c, m, B);
                    return sol;
                }
                // a stabilized nonzero displacement x - z indicates infeasibility
                const double delta_norm = r_norm;
                if (it > 500 && delta_norm > 1e-6 * xz_scale &&
                    sol.dual_residual < 1e3 * opts_.tol_d) {
                    if (prev_delta_norm > 0.0 &&
                        std::abs(delta_norm - prev_delta_norm) < 1e-6 * delta_norm)
                        ++stable_checks;
                    else
                        stable_checks = 0;
                    prev_delta_norm = delta_norm;
                    if (stable_checks >= 20 && m > 0 &&
                        certifies_infeasibility(lam, b, At, lay, B)) {
                        sol.status = SDPStatus::infeasible;
                        sol.iterations = it;
                        sol.infeas_measure = delta_norm;
                        finalize(sol, lay, z, b, A, At, llt, lam, c, m, B);
                        return sol;
                    }
                } else {
                    stable_checks = 0;
                    prev_delta_norm = delta_norm;
                }
                // residual balancing on a doubling interval: early scale
                // finding without perturbing the convergent tail
                if (opts_.adapt_rho && it >= next_adapt) {
                    next_adapt *= 2;
                    const double ratio = sol.primal_residual / std::max(sol.dual_residual, 1e-300);
                    if (ratio > 10.0 || ratio < 0.1) {
                        double factor = std::clamp(std::sqrt(ratio), 0.2, 5.0);
                        factor = std::clamp(factor, 1e-6 / rho, 1e6 / rho);
                        rho *= factor;
                        u /= factor;
                    }
                }
            }
        }

        sol.iterations = std::min(it, opts_.max_iter);
        finalize(sol, lay, z, b, A, At, llt, lam, c, m, B);

        if (converged) {
            sol.status = sol.min_block_eig >= -opts_.tol_psd ? SDPStatus::solved
                                                             : SDPStatus::inaccurate;
        } else {
            const bool nearly = sol.primal_residual <= 100.0 * opts_.tol_p &&
                                sol.dual_residual <= 100.0 * opts_.tol_d;
            sol.status = nearly ? SDPStatus::inaccurate : SDPStatus::iteration_limit;
        }
        return sol;
    }

  private:
    void finalize(SDPSolution& sol, const detail::SvecLayout& lay,
                  const Eigen::VectorXd& z, const Eigen::VectorXd& b,
                  const Eigen::SparseMatrix<double, Eigen::RowMajor>& A,
                  const Eigen::SparseMatrix<double>& At, const Eigen::LLT<Eigen::MatrixXd>& llt,
                  const Eigen::VectorXd& lam, const Eigen::VectorXd& c, int m, int B) const {
        auto block_min_eig = [&](const Eigen::VectorXd& v) {
            Eigen::MatrixXd M;
            double min_eig = std::numeric_limits<double>::infinity();
            for (int bk = 0; bk < B; ++bk) {
                lay.to_matrix(v, bk, M);
                min_eig = std::min(min_eig, min_eigenvalue(M));
            }
            return B == 0 ? 0.0 : min_eig;
        };
        // polishing restores the equality rows exactly but can nudge block
        // eigenvalues slightly negative; keep the cone-exact point instead
        // when that nudge exceeds the PSD tolerance
        Eigen::VectorXd zp = z;
        double min_eig = block_min_eig(z);
        if (opts_.polish && m > 0) {
            Eigen::VectorXd candidate = z - At * llt.solve((A * z - b).eval());
            const double cand_eig = block_min_eig(candidate);
            if (cand_eig >= -opts_.tol_psd) {
                zp = std::move(candidate);
                min_eig = cand_eig;
            }
        }
        sol.eq_residual = m > 0 ? (A * zp - b).norm() / (1.0 + b.norm()) : 0.0;
        sol.blocks.resize(B);
        for (int bk = 0; bk < B; ++bk) lay.to_matrix(zp, bk, sol.blocks[bk]);
        sol.min_block_eig = min_eig;
        sol.free_vars = zp.tail(lay.total - lay.free_offset);
        sol.objective = c.dot(zp);
        sol.dual_objective = m > 0 ? -b.dot(lam) : 0.0;
    }

    /// Farkas-style check: y with A'y PSD on every block, ~0 on free
    /// components, and b'y < 0 proves primal infeasibility.
    bool certifies_infeasibility(const Eigen::VectorXd& lam, const Eigen::VectorXd& b,
                                 const Eigen::SparseMatrix<double>& At,
                                 const detail::SvecLayout& lay, int B) const {
        if (lam.norm() < 1e-12) return false;
        Eigen::MatrixXd M;
        for (double sign : {1.0, -1.0}) {
            Eigen::VectorXd y = sign * lam / lam.norm();
            if (b.dot(y) >= -1e-9 * (1.0 + b.norm())) continue;
            Eigen::VectorXd q = At * y;
            const double q_scale = 1.0 + q.norm();
            bool psd_ok = true;
            for (int bk = 0; bk < B && psd_ok; ++bk) {
                lay.to_matrix(q, bk, M);
                if (min_eigenvalue(M) < -1e-6 * q_scale) psd_ok = false;
            }
            if (!psd_ok) continue;
            if (lay.total > lay.free_offset &&
                q.tail(lay.total - lay.free_offset).lpNorm<Eigen::Infinity>() > 1e-6 * q_scale)
                continue;
            return true;
        }
        return false;
    }

    SolverOptions opts_;
};

inline SDPSolution solve_sdp(const SDPProblem& prob, SolverOptions opts = {}) {
    return AdmmSolver(opts).solve(prob);
}

struct RefineResult {
    double eq_residual = 0.0;
    double min_block_eig = 0.0;
    int rounds = 0;
};

/// Alternating projections between the PSD cone and the affine subspace.
/// Starting from a nearly feasible point this converges to working-precision
/// feasibility while moving the point only O(initial violation).
inline RefineResult refine_feasibility(const SDPProblem& prob,
                                       std::vector<Eigen::MatrixXd>& blocks,
                                       Eigen::VectorXd& free_vars, int max_rounds = 60,
                                       double target_eq = 1e-13, double target_eig = -1e-12) {
    prob.validate();
    detail::ProblemData pd(prob);
    const int B = static_cast<int>(prob.block_dims.size());
    Eigen::VectorXd x = pd.pack(blocks, free_vars);
    RefineResult res;
    Eigen::MatrixXd M;
    for (res.rounds = 0; res.rounds < max_rounds; ++res.rounds) {
        double min_eig = 0.0;
        for (int bk = 0; bk < B; ++bk) {
            pd.lay.to_matrix(x, bk, M);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
            min_eig = std::min(min_eig, es.eigenvalues()(0));
            if (es.eigenvalues()(0) < 0.0) {
                Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
                M.noalias() = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
                pd.lay.from_matrix(M, bk, x);
            }
        }
        double eq = 0.0;
        if (pd.m > 0) {
            Eigen::VectorXd resid = pd.A * x - pd.b;
            eq = resid.norm() / (1.0 + pd.b.norm());
            x -= pd.At_init() * pd.llt.solve(resid);
        }
        res.eq_residual = pd.m > 0 ? (pd.A * x - pd.b).norm() / (1.0 + pd.b.norm()) : 0.0;
        res.min_block_eig = min_eig;
        if (eq <= target_eq && min_eig >= target_eig) break;
    }
    // report the final state
    double min_eig = std::numeric_limits<double>::infinity();
    for (int bk = 0; bk < B; ++bk) {
        pd.lay.to_matrix(x, bk, blocks[bk]);
        min_eig = std::min(min_eig, min_eigenvalue(blocks[bk]));
    }
    if (B == 0) min_eig = 0.0;
    res.min_block_eig = min_eig;
    free_vars = x.tail(pd.lay.total - pd.lay.free_offset);
    return res;
}

/// Sparse text export for external-solver interoperability.  Layout:
///   line 1:  "sdp <n_blocks> <n_free> <n_rows>"
///   line 2:  "blocks <dim_1> ... <dim_B>"
///   line 3:  "rhs <b_1> ... <b_m>"
///   then one line per nonzero: "<constraint-id> <block> <row> <col> <value>"
/// with constraint-id 0 for the objective and 1..m for the equality rows,
/// block -1 addressing free variables (row = variable index, col = 0).
inline void write_sdp_text(const SDPProblem& prob, std::ostream& os) {
    os.precision(17);
    os << "sdp " << prob.block_dims.size() << " " << prob.n_free << " " << prob.rows.size()
       << "\n";
    os << "blocks";
    for (int d : prob.block_dims) os << " " << d;
    os << "\nrhs";
    for (double v : prob.b) os << " " << v;
    os << "\n";
    auto dump = [&os](int id, const LinearExpr& e) {
        for (const auto& t : e.mat)
            os << id << " " << t.block << " " << t.i << " " << t.j << " " << t.coef << "\n";
        for (const auto& t : e.free_terms) os << id << " -1 " << t.index << " 0 " << t.coef << "\n";
    };
    dump(0, prob.objective);
    for (size_t r = 0; r < prob.rows.size(); ++r) dump(static_cast<int>(r) + 1, prob.rows[r]);
}

}  // namespace attractor
