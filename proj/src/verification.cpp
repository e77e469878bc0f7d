#include "coagent/verification.hpp"

#include <algorithm>

#include "coagent/exact_values.hpp"
#include "coagent/gradients.hpp"

namespace coagent::oracle {

namespace {

struct Shape {
    NetworkSpec spec;
    bool can_share;  // two same-shape options available for tying
    std::string name;
};

std::vector<Shape> verification_shapes() {
    return {
        {{Topology::fon, {1, 1}, 2}, false, "fon<1,1>"},
        {{Topology::fon, {1, 2}, 2}, true, "fon<1,2>"},
        {{Topology::hoc, {1, 2}, 2}, true, "hoc<1,2>"},
    };
}

std::vector<FiniteMdpSpec> fixtures() {
    return {fixture_3state(), fixture_5state()};
}

ParamLayout make_layout(const Network& net, bool share) {
    ParamLayout layout(net);
    if (share) {
        // tie the two level-1 options' tables
        const auto& level1 = net.level_options(1);
        layout.tie_policies({level1[0], level1[1]});
        layout.tie_terminations({level1[0], level1[1]});
    }
    return layout;
}

template <typename Fn>
void for_each_case(const VerificationOptions& opts, bool hoc_only, Fn&& fn) {
    Rng rng(opts.seed);
    for (const auto& mdp_base : fixtures()) {
        for (const auto& shape : verification_shapes()) {
            if (hoc_only && shape.spec.topology != Topology::hoc) continue;
            for (bool share : {false, true}) {
                if (share && !shape.can_share) continue;
                const Network net(shape.spec, mdp_base.n_states, 1.0, 1.0);
                const ParamLayout layout = make_layout(net, share);
                for (double gamma : opts.gammas) {
                    FiniteMdpSpec mdp = mdp_base;
                    mdp.gamma = gamma;
                    for (int draw = 0; draw < opts.theta_draws; ++draw) {
                        const Eigen::VectorXd theta = layout.random_theta(rng);
                        fn(net, layout, theta, mdp);
                    }
                }
            }
        }
    }
}

}  // namespace

FiniteMdpSpec fixture_3state() { return make_random_mdp(3, 2, 7); }
FiniteMdpSpec fixture_5state() { return make_random_mdp(5, 2, 11); }

CheckResult check_gradient_equality(const VerificationOptions& opts) {
    CheckResult res{"gradient equality (paths vs coagent sum)", 0.0, 1e-9, false};
    for_each_case(opts, false, [&](const Network& net, const ParamLayout& layout,
                                   const Eigen::VectorXd& theta,
                                   const FiniteMdpSpec& mdp) {
        const Eigen::VectorXd a = path_gradient(net, layout, theta, mdp);
        const Eigen::VectorXd b = coagent_sum_gradient(net, layout, theta, mdp);
        res.value = std::max(res.value, (a - b).cwiseAbs().maxCoeff());
    });
    res.pass = res.value <= res.tolerance;
    return res;
}

CheckResult check_finite_difference(const VerificationOptions& opts) {
    CheckResult res{"finite-difference cross-check", 0.0, 1e-5, false};
    // one draw per case keeps this comfortably inside its time budget
    VerificationOptions fd_opts = opts;
    fd_opts.theta_draws = std::min(opts.theta_draws, 2);
    for_each_case(fd_opts, false,
                  [&](const Network& net, const ParamLayout& layout,
                      const Eigen::VectorXd& theta, const FiniteMdpSpec& mdp) {
                      const Eigen::VectorXd a =
                          path_gradient(net, layout, theta, mdp);
                      const Eigen::VectorXd fd = finite_difference_gradient(
                          net, layout, theta, mdp, fd_opts.fd_eps);
                      const double scale =
                          std::max(1.0, a.cwiseAbs().maxCoeff());
                      res.value = std::max(
                          res.value, (a - fd).cwiseAbs().maxCoeff() / scale);
                  });
    res.pass = res.value <= res.tolerance;
    return res;
}

std::vector<CheckResult> check_hierarchical(const VerificationOptions& opts) {
    CheckResult assembly{"hierarchical assembly vs path gradient", 0.0, 1e-8,
                         false};
    CheckResult rows{"cascade kernel row sums", 0.0, 1e-12, false};
    CheckResult advantage{"advantage identity", 0.0, 1e-12, false};
    for_each_case(opts, true, [&](const Network& net, const ParamLayout& layout,
                                  const Eigen::VectorXd& theta,
                                  const FiniteMdpSpec& mdp) {
        const Eigen::VectorXd a = path_gradient(net, layout, theta, mdp);
        const Eigen::VectorXd h = hierarchical_gradient(net, layout, theta, mdp);
        assembly.value = std::max(assembly.value, (a - h).cwiseAbs().maxCoeff());

        Network filled = net;
        layout.materialize(theta, filled);
        const ExactValueTables tables = exact_q(filled, mdp);
        const BellmanResiduals res = bellman_residuals(filled, mdp, tables);
        rows.value = std::max(rows.value, res.kernel_row_sum);
        advantage.value = std::max(advantage.value, res.advantage);
    });
    assembly.pass = assembly.value <= assembly.tolerance;
    rows.pass = rows.value <= rows.tolerance;
    advantage.pass = advantage.value <= advantage.tolerance;
    return {assembly, rows, advantage};
}

CheckResult check_bellman_residuals(const VerificationOptions& opts) {
    CheckResult res{"Bellman residuals", 0.0, 1e-10, false};
    for_each_case(opts, false, [&](const Network& net, const ParamLayout& layout,
                                   const Eigen::VectorXd& theta,
                                   const FiniteMdpSpec& mdp) {
        Network filled = net;
        layout.materialize(theta, filled);
        const ExactValueTables tables = exact_q(filled, mdp);
        const BellmanResiduals r = bellman_residuals(filled, mdp, tables);
        res.value = std::max(res.value, r.max());
    });
    res.pass = res.value <= res.tolerance;
    return res;
}

std::vector<CheckResult> run_verification(const VerificationOptions& opts) {
    std::vector<CheckResult> out;
    out.push_back(check_gradient_equality(opts));
    out.push_back(check_finite_difference(opts));
    for (auto& r : check_hierarchical(opts)) out.push_back(r);
    out.push_back(check_bellman_residuals(opts));
    return out;
}

}  // namespace coagent::oracle
