#pragma once

#include <chrono>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "asfem/dofmap.hpp"

namespace asfem {

struct SolveReport {
    double block1_residual = 0.0; // relative, recomputed from the blocks
    double block2_residual = 0.0;
    double factor_ms = 0.0;
    double solve_ms = 0.0;
};

struct PrimalSolution {
    Vector eps_h; // residual representative in V_h
    Vector u_h;   // conforming solution in U_h
    SolveReport report;
};

struct AdjointSolution {
    Vector v_star; // discrete adjoint in V_h
    Vector w_star; // multiplier in U_h
    SolveReport report;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

} // namespace detail

/// The residual-minimization saddle point
///   [ G   B*C ] [eps]   [rhs_V]
///   [ (B*C)^T 0 ] [u ] = [rhs_U]
/// shared by the primal load and the adjoint QoI right-hand sides. One
/// factorization serves both solves.
class SaddleSystem {
public:
    SaddleSystem(SparseMatrix G, SparseMatrix B, SparseMatrix C)
        : G_(std::move(G)), B_(std::move(B)), C_(std::move(C)) {
        n_V_ = static_cast<int>(G_.rows());
        n_U_ = static_cast<int>(C_.cols());
        if (B_.rows() != n_V_ || B_.cols() != n_V_ || C_.rows() != n_V_)
            throw std::invalid_argument("SaddleSystem: block dimensions mismatch");
        if (n_U_ >= n_V_)
            throw std::invalid_argument(
                "SaddleSystem: trial space must be strictly contained in the test space");
        BC_ = B_ * C_;
        BC_.makeCompressed();
    }

    int n_V() const { return n_V_; }
    int n_U() const { return n_U_; }
    int n_total() const { return n_V_ + n_U_; }
    const SparseMatrix& gram() const { return G_; }
    const SparseMatrix& dg_operator() const { return B_; }
    const SparseMatrix& embedding() const { return C_; }
    const SparseMatrix& constraint() const { return BC_; }
    int factorization_count() const { return factorization_count_; }

    PrimalSolution solve_primal(const Vector& L) {
        auto [x, report] = solve(L, Vector::Zero(n_U_));
        PrimalSolution sol;
        sol.eps_h = x.head(n_V_);
        sol.u_h = x.tail(n_U_);
        sol.report = report;
        return sol;
    }

    AdjointSolution solve_adjoint(const Vector& q_U) {
        auto [x, report] = solve(Vector::Zero(n_V_), q_U);
        AdjointSolution sol;
        sol.v_star = x.head(n_V_);
        sol.w_star = x.tail(n_U_);
        sol.report = report;
        return sol;
    }

private:
    void ensure_factorized() {
        if (factorized_) return;
        auto t0 = std::chrono::steady_clock::now();
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(G_.nonZeros() + 2 * BC_.nonZeros());
        for (int k = 0; k < G_.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(G_, k); it; ++it)
                trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                   it.value());
        for (int k = 0; k < BC_.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(BC_, k); it; ++it) {
                int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
                trips.emplace_back(r, n_V_ + c, it.value());
                trips.emplace_back(n_V_ + c, r, it.value());
            }
        K_.resize(n_total(), n_total());
        K_.setFromTriplets(trips.begin(), trips.end());
        K_.makeCompressed();
        lu_.compute(K_);
        if (lu_.info() != Eigen::Success)
            throw std::runtime_error("SaddleSystem: factorization failed (singular block matrix)");
        factorized_ = true;
        ++factorization_count_;
        factor_ms_ = detail::elapsed_ms(t0);
    }

    std::pair<Vector, SolveReport> solve(const Vector& rhs_V, const Vector& rhs_U) {
        if (rhs_V.size() != n_V_ || rhs_U.size() != n_U_)
            throw std::invalid_argument("SaddleSystem: right-hand side size mismatch");
        ensure_factorized();
        auto t0 = std::chrono::steady_clock::now();
        Vector rhs(n_total());
        rhs.head(n_V_) = rhs_V;
        rhs.tail(n_U_) = rhs_U;
        Vector x = lu_.solve(rhs);
        double scale = std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-300);
        for (int it = 0; it < 2; ++it) {
            Vector r = rhs - K_ * x;
            if (r.lpNorm<Eigen::Infinity>() <= 1e-13 * scale) break;
            x += lu_.solve(r);
        }
        if (!x.allFinite())
            throw std::runtime_error("SaddleSystem: solve produced non-finite values");

        SolveReport report;
        Vector eps = x.head(n_V_), u = x.tail(n_U_);
        report.block1_residual =
            (rhs_V - G_ * eps - BC_ * u).lpNorm<Eigen::Infinity>() / scale;
        report.block2_residual =
            (rhs_U - BC_.transpose() * eps).lpNorm<Eigen::Infinity>() / scale;
        report.factor_ms = factor_ms_;
        report.solve_ms = detail::elapsed_ms(t0);
        return {std::move(x), report};
    }

    SparseMatrix G_, B_, C_, BC_, K_;
    Eigen::SparseLU<SparseMatrix> lu_;
    int n_V_ = 0, n_U_ = 0;
    bool factorized_ = false;
    int factorization_count_ = 0;
    double factor_ms_ = 0.0;
};

/// One LU of the dG operator, serving the plain and the transposed systems.
class DgSolver {
public:
    explicit DgSolver(SparseMatrix B) : B_(std::move(B)) {
        lu_.compute(B_);
        if (lu_.info() != Eigen::Success)
            throw std::runtime_error("DgSolver: dG operator factorization failed");
    }

    Vector solve(const Vector& rhs) { return polish(lu_.solve(rhs), rhs, false); }
    Vector solve_transposed(const Vector& rhs) {
        return polish(lu_.transpose().solve(rhs), rhs, true);
    }

private:
    Vector polish(Vector x, const Vector& rhs, bool transposed) {
        double scale = std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-300);
        for (int it = 0; it < 2; ++it) {
            Vector r = transposed ? Vector(rhs - B_.transpose() * x) : Vector(rhs - B_ * x);
            if (r.lpNorm<Eigen::Infinity>() <= 1e-13 * scale) break;
            x += transposed ? Vector(lu_.transpose().solve(r)) : Vector(lu_.solve(r));
        }
        if (!x.allFinite()) throw std::runtime_error("DgSolver: non-finite solution");
        return x;
    }

    SparseMatrix B_;
    Eigen::SparseLU<SparseMatrix> lu_;
};

inline Vector solve_dg_primal(const SparseMatrix& B, const Vector& L) {
    return DgSolver(B).solve(L);
}

inline Vector solve_dg_adjoint(const SparseMatrix& B, const Vector& q_V) {
    return DgSolver(B).solve_transposed(q_V);
}

/// Cholesky solver for the SPD Gram matrix (the discrete Riesz map).
class GramSolver {
public:
    explicit GramSolver(SparseMatrix G) : G_(std::move(G)) {
        llt_.compute(G_);
        if (llt_.info() != Eigen::Success)
            throw std::runtime_error("GramSolver: Gram matrix is not positive definite");
    }

    Vector solve(const Vector& rhs) const {
        Vector x = llt_.solve(rhs);
        double scale = std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-300);
        for (int it = 0; it < 2; ++it) {
            Vector r = rhs - G_ * x;
            if (r.lpNorm<Eigen::Infinity>() <= 1e-14 * scale) break;
            x += llt_.solve(r);
        }
        return x;
    }

    const SparseMatrix& matrix() const { return G_; }

private:
    SparseMatrix G_;
    Eigen::SimplicialLLT<SparseMatrix> llt_;
};

inline Vector solve_gram(const SparseMatrix& G, const Vector& r) {
    return GramSolver(G).solve(r);
}

} // namespace asfem
