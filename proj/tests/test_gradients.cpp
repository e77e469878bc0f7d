#include <doctest.h>

#include <cmath>

#include "coagent/gradients.hpp"
#include "coagent/verification.hpp"

using namespace coagent;
using namespace coagent::oracle;

namespace {

FiniteMdpSpec bandit(double r0, double r1) {
    FiniteMdpSpec mdp;
    mdp.n_states = 1;
    mdp.n_actions = 2;
    mdp.transition = {{{1.0}, {1.0}}};
    mdp.reward = {{{r0}, {r1}}};
    mdp.gamma = 0.0;
    mdp.init_dist = {1.0};
    return mdp;
}

}  // namespace

TEST_CASE("flat softmax bandit: all routes give the closed-form gradient") {
    const auto mdp = bandit(1.0, 0.0);
    Network net({Topology::fon, {1}, 2}, 1, 1.0, 1.0);
    ParamLayout layout(net);
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(layout.dim());

    const auto full = path_gradient(net, layout, theta, mdp);
    const auto csum = coagent_sum_gradient(net, layout, theta, mdp);
    const auto fd = finite_difference_gradient(net, layout, theta, mdp, 1e-5);

    // pi(a0) (r(a0) - J) = 0.5 (1 - 0.5) = 0.25
    CHECK(full(layout.policy_pos(0, 0, 0)) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(full(layout.policy_pos(0, 0, 1)) == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK((full - csum).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((full - fd).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("the three exact routes and finite differences agree on deep nets") {
    Rng rng(4242);
    for (auto topology : {Topology::hoc, Topology::fon}) {
        for (double gamma : {0.0, 0.5, 0.9}) {
            auto mdp = fixture_3state();
            mdp.gamma = gamma;
            Network net({topology, {1, 2, 2}, 2}, 3, 1.0, 1.0);
            ParamLayout layout(net);
            const Eigen::VectorXd theta = layout.random_theta(rng);
            const auto full = path_gradient(net, layout, theta, mdp);
            const auto csum = coagent_sum_gradient(net, layout, theta, mdp);
            CHECK((full - csum).cwiseAbs().maxCoeff() <= 1e-9);
            if (topology == Topology::hoc) {
                const auto h = hierarchical_gradient(net, layout, theta, mdp);
                CHECK((full - h).cwiseAbs().maxCoeff() <= 1e-8);
            }
            const auto fd =
                finite_difference_gradient(net, layout, theta, mdp, 1e-5);
            const double scale = std::max(1.0, full.cwiseAbs().maxCoeff());
            CHECK((full - fd).cwiseAbs().maxCoeff() / scale <= 1e-5);
        }
    }
}

TEST_CASE("tied tables accumulate both options' contributions") {
    const auto mdp = fixture_3state();
    const Network net({Topology::hoc, {1, 2}, 2}, 3, 1.0, 1.0);
    Rng rng(5);

    ParamLayout untied(net);
    Eigen::VectorXd theta = untied.random_theta(rng);
    // give both children identical tables so the tied run sees the same nets
    const auto& level1 = net.level_options(1);
    for (int s = 0; s < 3; ++s) {
        for (int a = 0; a < 2; ++a)
            theta(untied.policy_pos(level1[1], s, a)) =
                theta(untied.policy_pos(level1[0], s, a));
        theta(untied.termination_pos(level1[1], s)) =
            theta(untied.termination_pos(level1[0], s));
    }
    const auto grad_untied = path_gradient(net, untied, theta, mdp);

    ParamLayout tied(net);
    tied.tie_policies({level1[0], level1[1]});
    tied.tie_terminations({level1[0], level1[1]});
    Network filled = net;
    untied.materialize(theta, filled);
    const Eigen::VectorXd theta_tied = tied.extract(filled);
    const auto grad_tied = path_gradient(net, tied, theta_tied, mdp);
    const auto csum_tied = coagent_sum_gradient(net, tied, theta_tied, mdp);
    const auto hoc_tied = hierarchical_gradient(net, tied, theta_tied, mdp);
    CHECK((grad_tied - csum_tied).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((grad_tied - hoc_tied).cwiseAbs().maxCoeff() <= 1e-8);

    for (int s = 0; s < 3; ++s) {
        for (int a = 0; a < 2; ++a) {
            const double sum = grad_untied(untied.policy_pos(level1[0], s, a)) +
                               grad_untied(untied.policy_pos(level1[1], s, a));
            CHECK(grad_tied(tied.policy_pos(level1[0], s, a)) ==
                  doctest::Approx(sum).epsilon(1e-10));
        }
        const double sum = grad_untied(untied.termination_pos(level1[0], s)) +
                           grad_untied(untied.termination_pos(level1[1], s));
        CHECK(grad_tied(tied.termination_pos(level1[0], s)) ==
              doctest::Approx(sum).epsilon(1e-10));
    }
}

TEST_CASE("an unreachable option has an exactly zero gradient block") {
    const auto mdp = fixture_3state();
    Network net({Topology::hoc, {1, 2}, 2}, 3, 1.0, 1.0);
    ParamLayout layout(net);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(layout.dim());
    const auto& level1 = net.level_options(1);
    // the root always picks its first child
    for (int s = 0; s < 3; ++s) {
        theta(layout.policy_pos(0, s, 0)) = 500.0;
        theta(layout.policy_pos(0, s, 1)) = -500.0;
    }
    for (const auto& grad :
         {path_gradient(net, layout, theta, mdp),
          coagent_sum_gradient(net, layout, theta, mdp),
          hierarchical_gradient(net, layout, theta, mdp)}) {
        for (int s = 0; s < 3; ++s) {
            for (int a = 0; a < 2; ++a)
                CHECK(grad(layout.policy_pos(level1[1], s, a)) == 0.0);
            CHECK(grad(layout.termination_pos(level1[1], s)) == 0.0);
        }
    }
}

TEST_CASE("saturated never-terminate betas leave only policy terms") {
    auto mdp = fixture_3state();
    mdp.gamma = 0.5;
    Network net({Topology::hoc, {1, 2}, 2}, 3, 1.0, 1.0);
    ParamLayout layout(net);
    Rng rng(6);
    Eigen::VectorXd theta = layout.random_theta(rng);
    for (int opt = 1; opt < net.n_options(); ++opt)
        for (int s = 0; s < 3; ++s)
            theta(layout.termination_pos(opt, s)) = -50000.0;

    const auto full = path_gradient(net, layout, theta, mdp);
    const auto h = hierarchical_gradient(net, layout, theta, mdp);
    CHECK((full - h).cwiseAbs().maxCoeff() <= 1e-8);
    for (int opt = 1; opt < net.n_options(); ++opt)
        for (int s = 0; s < 3; ++s)
            CHECK(full(layout.termination_pos(opt, s)) == 0.0);
}

TEST_CASE("finite differences gain accuracy at the expected rate") {
    auto mdp = fixture_3state();
    mdp.gamma = 0.5;
    Network net({Topology::fon, {1, 2}, 2}, 3, 1.0, 1.0);
    ParamLayout layout(net);
    Rng rng(7);
    const Eigen::VectorXd theta = layout.random_theta(rng);
    const auto exact = path_gradient(net, layout, theta, mdp);
    const double err_coarse =
        (finite_difference_gradient(net, layout, theta, mdp, 1e-2) - exact)
            .cwiseAbs()
            .maxCoeff();
    const double err_fine =
        (finite_difference_gradient(net, layout, theta, mdp, 5e-3) - exact)
            .cwiseAbs()
            .maxCoeff();
    // halving eps divides the central-difference error by about four
    CHECK(err_coarse / err_fine > 2.5);
    CHECK(err_coarse / err_fine < 6.0);
}

TEST_CASE("finite differences warn below the noise floor") {
    const auto mdp = fixture_3state();
    Network net({Topology::fon, {1}, 2}, 3, 1.0, 1.0);
    ParamLayout layout(net);
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(layout.dim());
    std::string warning;
    finite_difference_gradient(net, layout, theta, mdp, 1e-10, &warning);
    CHECK(!warning.empty());
    warning.clear();
    finite_difference_gradient(net, layout, theta, mdp, 1e-5, &warning);
    CHECK(warning.empty());
}

TEST_CASE("the hierarchical route rejects feedforward networks") {
    const auto mdp = fixture_3state();
    Network net({Topology::fon, {1, 1}, 2}, 3, 1.0, 1.0);
    ParamLayout layout(net);
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(layout.dim());
    CHECK_THROWS_AS(hierarchical_gradient(net, layout, theta, mdp),
                    std::invalid_argument);
}

TEST_CASE("gradient reports carry labels and pairwise deviations") {
    const auto mdp = fixture_3state();
    Network net({Topology::hoc, {1, 2}, 2}, 3, 1.0, 1.0);
    ParamLayout layout(net);
    Rng rng(8);
    const auto report =
        gradient_report(net, layout, layout.random_theta(rng), mdp);
    CHECK(report.hocpgt.has_value());
    CHECK(report.dev_full_vs_coagent <= 1e-9);
    CHECK(report.dev_full_vs_hocpgt <= 1e-8);
    CHECK(report.rel_dev_full_vs_fd <= 1e-5);
    CHECK(static_cast<int>(report.labels.size()) == layout.dim());
    const std::string json = report.to_json();
    CHECK(json.find("grad_full") != std::string::npos);
    CHECK(json.find("pairwise_max_abs_dev") != std::string::npos);
}

TEST_CASE("the bundled verification suite passes") {
    VerificationOptions opts;
    opts.theta_draws = 2;
    for (const auto& result : run_verification(opts)) {
        INFO(result.name, " value ", result.value, " tol ", result.tolerance);
        CHECK(result.pass);
    }
}
