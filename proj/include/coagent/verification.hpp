#pragma once

#include <string>
#include <vector>

#include "coagent/finite_mdp.hpp"
#include "coagent/option_net.hpp"

namespace coagent::oracle {

/// Bundled verification fixtures; also shipped as JSON under fixtures/.
FiniteMdpSpec fixture_3state();
FiniteMdpSpec fixture_5state();

struct CheckResult {
    std::string name;
    double value = 0.0;      // worst observed deviation / residual
    double tolerance = 0.0;
    bool pass = false;
};

struct VerificationOptions {
    int theta_draws = 5;
    std::vector<double> gammas = {0.0, 0.5, 0.9};
    double fd_eps = 1e-5;
    std::uint64_t seed = 2024;
};

/// Gradient-equality check across fixtures, network shapes, discount
/// factors and parameter-sharing variants: the path-enumeration gradient
/// against the coagent-sum gradient (absolute max deviation).
CheckResult check_gradient_equality(const VerificationOptions& opts = {});

/// Finite-difference cross-check against the path-enumeration gradient,
/// relative to max(1, |grad|_inf).
CheckResult check_finite_difference(const VerificationOptions& opts = {});

/// Hierarchical-decomposition checks on the HOC shapes: assembly equality,
/// cascade-kernel stochasticity, advantage identity.
std::vector<CheckResult> check_hierarchical(const VerificationOptions& opts = {});

/// Bellman residuals of the exact solver on every fixture/shape/gamma.
CheckResult check_bellman_residuals(const VerificationOptions& opts = {});

/// The full suite in order.
std::vector<CheckResult> run_verification(const VerificationOptions& opts = {});

}  // namespace coagent::oracle
