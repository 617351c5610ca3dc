#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "iuzawa/field.hpp"
#include "iuzawa/pde.hpp"
#include "iuzawa/prox.hpp"

namespace iuzawa {

/// One control problem: PDE operator, regularizer, N = lambda*I (lambda is
/// the tracking weight alpha in the benchmark problems), desired state, source.
struct ProblemInstance {
    std::shared_ptr<const PdeOperator> op;
    RegularizerSpec reg;
    MultiplierSpec mult;  // lambda = alpha; tau supplied per solver call
    GridField y_d, f;

    const Domain& domain() const { return op->domain(); }
};

struct SaddleState {
    GridField u, p;
};

struct SolveReport {
    int iterations = 0;
    bool converged = false;
    std::vector<double> residual_history;
    /// Successive Q-seminorm error ratios ||w^{k+1}-w*||_Q / ||w^k-w*||_Q,
    /// entry j for step j -> j+1 (only filled when a reference is supplied).
    std::vector<double> contraction_estimates;
    double wall_time = 0.0;
};

/// Dual preconditioner: sigma*I (admissible for sigma >= 1 + ||S||^2/alpha)
/// or the exact Schur complement (I + S N^{-1} S*)^{-1}, elliptic only.
struct PreconditionerChoice {
    enum class Kind { ScalarSigma, ExactSchur };
    Kind kind = Kind::ScalarSigma;
    double sigma = 1.0;

    static PreconditionerChoice scalar(double sigma) { return {Kind::ScalarSigma, sigma}; }
    static PreconditionerChoice exact_schur() { return {Kind::ExactSchur, 0.0}; }
};

/// sigma = 1 + ||S||^2/alpha from a power-iteration bound, with a safety
/// factor since the estimate approaches ||S|| from below.
double admissible_sigma(const ProblemInstance& prob, int iters = 50);

/// Natural residual of the optimality system: ||u - (I + d theta)^{-1}(u -
/// (Nu + S*p))|| + ||Su - p + Sf - y_d||; zero iff (u, p) is the solution.
double kkt_residual(const ProblemInstance& prob, const SaddleState& s);

std::pair<SaddleState, SolveReport> uzawa_solve(const ProblemInstance& prob,
                                                const PreconditionerChoice& qs, double tau,
                                                double tol, int max_iter,
                                                const std::optional<GridField>& reference = {});

std::pair<SaddleState, SolveReport> pd_solve(const ProblemInstance& prob, double step_primal,
                                             double step_dual, double tol, int max_iter,
                                             const std::optional<GridField>& reference = {});

std::pair<SaddleState, SolveReport> ssn_solve(const ProblemInstance& prob, double tol,
                                              int max_iter);

/// Tracking objective 1/2||y - y_d||^2 + 1/2<u, Nu> + theta(u) with
/// y = S(u + f); +inf when u violates the bounds.
double objective(const ProblemInstance& prob, const GridField& u);

/// Smallest delta such that every consecutive pair of states satisfies the
/// one-step inexact-iterate inclusion for the exact Uzawa update.
double tracking_check(const ProblemInstance& prob, const std::vector<SaddleState>& states,
                      const PreconditionerChoice& qs, double tau);

}  // namespace iuzawa
