#pragma once

#include <vector>

#include <Eigen/Dense>

#include "coagent/finite_mdp.hpp"
#include "coagent/option_net.hpp"

namespace coagent::oracle {

/**
 * Mixed-radix enumeration of option stacks. A stack of length l is the chain
 * of child choices made from the root down to a level-l option; for an HOC
 * it doubles as the option's address, for a FON it additionally remembers
 * the parents waiting to be called back.
 */
class StackSpace {
public:
    explicit StackSpace(const Network& net);

    int depth() const { return depth_; }
    int branching(int level) const { return branching_[level]; }
    int n_stacks(int level) const { return n_stacks_[level]; }

    /// Stack of the child reached when stack k at `level` picks child c.
    int child(int level, int k, int c) const {
        return k * branching_[level] + c;
    }
    int parent(int level, int k) const { return k / branching_[level - 1]; }
    int last_choice(int level, int k) const {
        return k % branching_[level - 1];
    }
    /// Prefix of a level-`from` stack truncated to `to` <= from.
    int prefix(int from, int k, int to) const;

    /// Option acting at a given (level, stack).
    int option_at(int level, int k) const;

private:
    const Network* net_;
    int depth_;
    std::vector<int> branching_;
    std::vector<int> n_stacks_;
};

/**
 * Exact solution of the augmented-state Bellman system for fixed network
 * parameters on a small MDP, honoring the conventions that primitive actions
 * always terminate and the root never does.
 */
struct ExactValueTables {
    /// v_down[l](k, s): value with the level-l option at stack k about to act.
    std::vector<Eigen::MatrixXd> v_down;
    /// q_leaf[k](s, a): bottom-level action values.
    std::vector<Eigen::MatrixXd> q_leaf;
    /// v_up[l](k, s): value at a level-l termination decision point.
    std::vector<Eigen::MatrixXd> v_up;
    /// cascade_kernel[l][s](k, k'): probability that the upward phase started
    /// at (level l, stack k) resolves into downward execution at stack k' of
    /// the same level. Rows sum to 1.
    std::vector<std::vector<Eigen::MatrixXd>> cascade_kernel;
    /// Discounted occupancy of bottom-level downward states from the MDP's
    /// initial distribution, including the initial root descent.
    Eigen::MatrixXd bottom_occupancy;
};

/// Solves the Bellman system exactly (direct linear solve for small systems,
/// fixed-point iteration beyond). Throws when gamma makes the system
/// non-contractive (gamma = 1 on a non-absorbing MDP).
ExactValueTables exact_q(const Network& net, const FiniteMdpSpec& mdp);

/// Expected discounted return from the MDP's initial distribution.
double expected_return(const Network& net, const FiniteMdpSpec& mdp);

/// Max-norm residuals of the value tables against each Bellman equation,
/// each computed from an independently coded expression.
struct BellmanResiduals {
    double policy_composition = 0.0;  // value as policy-weighted child values
    double descent = 0.0;             // value as expected reward + next upward value
    double upward = 0.0;              // upward value closed form over stop levels
    double upward_kernel = 0.0;       // upward value through the cascade kernel
    double kernel_row_sum = 0.0;      // cascade kernel stochasticity
    double advantage = 0.0;           // continue/terminate action-value identity
    double coagent_relation = 0.0;    // action value vs successor coagent values

    double max() const;
};

BellmanResiduals bellman_residuals(const Network& net, const FiniteMdpSpec& mdp,
                                   const ExactValueTables& tables);

}  // namespace coagent::oracle
