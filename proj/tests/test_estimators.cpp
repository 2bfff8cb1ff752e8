#include <catch2/catch_amalgamated.hpp>

#include "asfem/adaptivity.hpp"
#include "asfem/estimators.hpp"
#include "helpers.hpp"

using namespace asfem;
using namespace asfem::testing;

namespace {

struct SolveRound {
    Mesh mesh;
    Skeleton skel;
    DofMap cg, dg;
    SparseMatrix C, B, G;
    Vector L, q_V, q_U;
    Vector eps_h, u_h, v_star, w_star, u_dg, v_dg_star;

    SolveRound(Mesh m, const ProblemDef& prob, int p, int delta_p) : mesh(std::move(m)) {
        skel = skeleton(mesh);
        cg = build_space(mesh, p, Continuity::Continuous);
        dg = build_space(mesh, p + delta_p, Continuity::Broken);
        C = embedding_matrix(cg, dg);
        B = assemble_bh(mesh, skel, dg, prob);
        G = assemble_gram(mesh, skel, dg, prob);
        L = assemble_lh(mesh, skel, dg, prob);
        q_V = assemble_qoi(mesh, dg, prob.omega0);
        q_U = assemble_qoi(mesh, cg, prob.omega0);
        SaddleSystem sys(G, B, C);
        auto primal = sys.solve_primal(L);
        auto adjoint = sys.solve_adjoint(q_U);
        eps_h = primal.eps_h;
        u_h = primal.u_h;
        v_star = adjoint.v_star;
        w_star = adjoint.w_star;
        DgSolver dgs(B);
        u_dg = dgs.solve(L);
        v_dg_star = dgs.solve_transposed(q_V);
    }
};

} // namespace

TEST_CASE("adjoint residual representative") {
    ProblemDef prob = make_cross_diffusion_problem(-1);
    SolveRound r(build_cross_mesh(), prob, 1, 0);
    GramSolver gram(r.G);

    SECTION("exact dG adjoint nullifies the residual") {
        Vector eps = adjoint_residual(gram, r.B, r.v_dg_star, r.q_V);
        double norm = std::sqrt(std::abs(eps.dot(r.G * eps)));
        double scale = std::sqrt(std::abs(r.v_dg_star.dot(r.G * r.v_dg_star)));
        REQUIRE(norm <= 1e-9 * scale);
    }

    SECTION("orthogonal to the embedded trial space") {
        Vector eps = adjoint_residual(gram, r.B, r.v_star, r.q_V);
        for (unsigned seed = 0; seed < 10; ++seed) {
            Vector w = random_vector(r.cg.n_dofs, 500 + seed);
            Vector cw = r.C * w;
            double ip = eps.dot(r.G * cw);
            double scale = std::sqrt(std::abs(eps.dot(r.G * eps))) *
                           std::sqrt(std::abs(cw.dot(r.G * cw)));
            REQUIRE(std::abs(ip) <= 1e-10 * std::max(scale, 1e-30));
        }
    }

    SECTION("matches the dG-gap representation") {
        Vector eps1 = adjoint_residual(gram, r.B, r.v_star, r.q_V);
        Vector gap = r.v_dg_star - r.v_star;
        Vector eps2 = gram.solve(r.B.transpose() * gap);
        double scale = std::sqrt(std::abs(eps1.dot(r.G * eps1)));
        Vector d = eps1 - eps2;
        REQUIRE(std::sqrt(std::abs(d.dot(r.G * d))) <= 1e-9 * scale);
    }
}

TEST_CASE("element indicators") {
    ProblemDef prob = make_advection_reaction_problem(-1, 0.0);
    SolveRound r(build_square_mesh(3, prob.omega0), prob, 1, 0);
    GramSolver gram(r.G);
    Vector eps_star = adjoint_residual(gram, r.B, r.v_star, r.q_V);

    SECTION("zero residual gives zero indicators") {
        Vector zero = Vector::Zero(r.dg.n_dofs);
        auto field = element_indicators(EstimatorKind::Energy, r.mesh, r.skel, r.dg, prob, zero);
        for (double e : field.eta) REQUIRE(e == 0.0);
    }

    SECTION("energy indicators sum to the squared V_h norm") {
        auto field =
            element_indicators(EstimatorKind::Energy, r.mesh, r.skel, r.dg, prob, r.eps_h);
        double expect = r.eps_h.dot(r.G * r.eps_h);
        REQUIRE(field.total() == Catch::Approx(expect).epsilon(1e-11));
        REQUIRE(field.global == Catch::Approx(expect).epsilon(1e-11));
    }

    SECTION("goal-oriented indicators upper-bound the inner product") {
        for (auto kind : {EstimatorKind::GoaAdjointDg, EstimatorKind::GoaAdjointResidual}) {
            Vector aux = kind == EstimatorKind::GoaAdjointDg
                             ? Vector(r.v_dg_star - r.v_star)
                             : eps_star;
            auto field = element_indicators(kind, r.mesh, r.skel, r.dg, prob, r.eps_h, &aux);
            double inner = std::abs(r.eps_h.dot(r.G * aux));
            REQUIRE(field.total() >= inner * (1.0 - 1e-11));
            REQUIRE(field.global == Catch::Approx(inner).epsilon(1e-10));
            for (double e : field.eta) REQUIRE(e >= 0.0);
        }
    }

    SECTION("Cauchy-Schwarz for random vectors") {
        for (unsigned seed = 0; seed < 10; ++seed) {
            Vector w = random_vector(r.dg.n_dofs, 700 + seed);
            Vector v = random_vector(r.dg.n_dofs, 800 + seed);
            auto field =
                element_indicators(EstimatorKind::GoaAdjointDg, r.mesh, r.skel, r.dg, prob, w, &v);
            double inner = std::abs(w.dot(r.G * v));
            REQUIRE(field.total() >= inner * (1.0 - 1e-11));
        }
    }

    SECTION("missing auxiliary vector is rejected") {
        REQUIRE_THROWS_AS(element_indicators(EstimatorKind::GoaAdjointResidual, r.mesh,
                                             r.skel, r.dg, prob, r.eps_h),
                          std::invalid_argument);
    }

    SECTION("squared products knob") {
        Vector aux = eps_star;
        auto plain = element_indicators(EstimatorKind::GoaAdjointResidual, r.mesh, r.skel,
                                        r.dg, prob, r.eps_h, &aux, false);
        auto squared = element_indicators(EstimatorKind::GoaAdjointResidual, r.mesh, r.skel,
                                          r.dg, prob, r.eps_h, &aux, true);
        for (size_t t = 0; t < plain.eta.size(); ++t)
            REQUIRE(squared.eta[t] == Catch::Approx(plain.eta[t] * plain.eta[t]).margin(1e-18));
    }
}

TEST_CASE("global estimate and QoI identity chain") {
    for (int eps_switch : {-1, 1}) {
        ProblemDef prob = make_cross_diffusion_problem(eps_switch);
        SolveRound r(bisect(build_cross_mesh(), {0, 7, 13}), prob, 1, 0);
        Vector gap = r.v_dg_star - r.v_star;

        SECTION("zero auxiliary gives zero, switch " + std::to_string(eps_switch)) {
            Vector zero = Vector::Zero(r.dg.n_dofs);
            REQUIRE(global_estimate(EstimatorKind::GoaAdjointDg, r.G, r.eps_h, zero) == 0.0);
        }

        SECTION("QoI error identity, switch " + std::to_string(eps_switch)) {
            double x1 = r.q_V.dot(r.u_dg) - r.q_U.dot(r.u_h);
            double x2 = r.eps_h.dot(r.G * gap);
            double x3 = r.L.dot(gap);
            double scale = std::max({std::abs(r.q_V.dot(r.u_dg)), std::abs(r.q_U.dot(r.u_h)),
                                     std::abs(x2), std::abs(x3)});
            REQUIRE(std::abs(x1 - x2) <= 1e-9 * scale);
            REQUIRE(std::abs(x2 - x3) <= 1e-9 * scale);
        }
    }
}

TEST_CASE("discrete orthogonality identities") {
    ProblemDef prob = make_advection_reaction_problem(-1, 1000.0);
    SolveRound r(build_square_mesh(3, prob.omega0), prob, 1, 0);
    Vector gap = r.v_dg_star - r.v_star;

    // a) b_h(u_h, v_dg* - v*) = 0
    Vector bcu = r.B * (r.C * r.u_h);
    double a_val = gap.dot(bcu);
    REQUIRE(std::abs(a_val) <= 1e-9 * gap.norm() * bcu.norm());
    // b) (v*, eps_h)_{V_h} = 0
    double b_val = r.v_star.dot(r.G * r.eps_h);
    double b_scale = std::sqrt(r.v_star.dot(r.G * r.v_star)) *
                     std::sqrt(r.eps_h.dot(r.G * r.eps_h));
    REQUIRE(std::abs(b_val) <= 1e-9 * b_scale);
    // c) q(u_h) = l_h(v*)
    double qu = r.q_U.dot(r.u_h), lv = r.L.dot(r.v_star);
    REQUIRE(std::abs(qu - lv) <= 1e-9 * std::max(std::abs(qu), std::abs(lv)));
    // d) b_h(u_dg - u_h, v*) = 0
    Vector bgap = r.B * (r.u_dg - r.C * r.u_h);
    double d_val = r.v_star.dot(bgap);
    REQUIRE(std::abs(d_val) <= 1e-9 * r.v_star.norm() * bgap.norm());
}

TEST_CASE("scaling covariance of the adjoint quantities") {
    ProblemDef prob = make_cross_diffusion_problem(-1);
    SolveRound r(build_cross_mesh(), prob, 1, 0);
    GramSolver gram(r.G);
    const double s = 10.0;

    SaddleSystem sys(r.G, r.B, r.C);
    auto adj1 = sys.solve_adjoint(r.q_U);
    auto adj2 = sys.solve_adjoint(s * r.q_U);
    Vector eps1 = adjoint_residual(gram, r.B, adj1.v_star, r.q_V);
    Vector eps2 = adjoint_residual(gram, r.B, adj2.v_star, s * r.q_V);
    Vector vdg2 = solve_dg_adjoint(r.B, s * r.q_V);

    REQUIRE((adj2.v_star - s * adj1.v_star).lpNorm<Eigen::Infinity>() <=
            1e-12 * adj2.v_star.lpNorm<Eigen::Infinity>());
    REQUIRE((adj2.w_star - s * adj1.w_star).lpNorm<Eigen::Infinity>() <=
            1e-12 * std::max(adj2.w_star.lpNorm<Eigen::Infinity>(), 1e-30));
    REQUIRE((eps2 - s * eps1).lpNorm<Eigen::Infinity>() <=
            1e-11 * std::max(eps2.lpNorm<Eigen::Infinity>(), 1e-30));

    double e1 = global_estimate(EstimatorKind::GoaAdjointResidual, r.G, r.eps_h, eps1);
    double e2 = global_estimate(EstimatorKind::GoaAdjointResidual, r.G, r.eps_h, eps2);
    REQUIRE(e2 == Catch::Approx(s * e1).epsilon(1e-11));
    Vector gap1 = r.v_dg_star - adj1.v_star;
    Vector gap2 = vdg2 - adj2.v_star;
    double g1 = global_estimate(EstimatorKind::GoaAdjointDg, r.G, r.eps_h, gap1);
    double g2 = global_estimate(EstimatorKind::GoaAdjointDg, r.G, r.eps_h, gap2);
    REQUIRE(g2 == Catch::Approx(s * g1).epsilon(1e-11));
}

TEST_CASE("efficiency sandwich ratios stay positive and bounded") {
    ProblemDef prob = make_cross_diffusion_problem(-1);
    Mesh mesh = build_cross_mesh();
    std::vector<double> primal_ratios, adjoint_ratios;
    for (int level = 0; level < 3; ++level) {
        SolveRound r(mesh, prob, 1, 0);
        GramSolver gram(r.G);
        Vector eps_star = adjoint_residual(gram, r.B, r.v_star, r.q_V);
        Vector gap_u = r.u_dg - r.C * r.u_h;
        Vector gap_v = r.v_dg_star - r.v_star;
        double eps_norm = std::sqrt(r.eps_h.dot(r.G * r.eps_h));
        double gap_u_norm = std::sqrt(gap_u.dot(r.G * gap_u));
        double eps_star_norm = std::sqrt(eps_star.dot(r.G * eps_star));
        double gap_v_norm = std::sqrt(gap_v.dot(r.G * gap_v));
        primal_ratios.push_back(eps_norm / gap_u_norm);
        adjoint_ratios.push_back(eps_star_norm / gap_v_norm);

        auto field =
            element_indicators(EstimatorKind::Energy, r.mesh, r.skel, r.dg, prob, r.eps_h);
        mesh = bisect(mesh, dorfler_mark(field, 0.3).elements);
    }
    for (auto& ratios : {primal_ratios, adjoint_ratios}) {
        double lo = *std::min_element(ratios.begin(), ratios.end());
        double hi = *std::max_element(ratios.begin(), ratios.end());
        REQUIRE(lo > 0.0);
        REQUIRE(hi / lo < 100.0);
    }
}
