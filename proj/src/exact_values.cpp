#include "coagent/exact_values.hpp"

#include <cmath>
#include <stdexcept>

namespace coagent::oracle {

namespace {

constexpr int kDirectSolveLimit = 2000;
constexpr double kIterTol = 1e-12;

/// Policy probability matrix (n_states x n_children) of one option.
Eigen::MatrixXd policy_matrix(const Network& net, int opt) {
    const OptionNode& node = net.option(opt);
    Eigen::MatrixXd probs(net.n_states(), node.n_children);
    for (int s = 0; s < net.n_states(); ++s) {
        const auto row = net.policy_distribution(opt, s);
        for (int c = 0; c < node.n_children; ++c) probs(s, c) = row[c];
    }
    return probs;
}

struct Workspace {
    const Network& net;
    const FiniteMdpSpec& mdp;
    StackSpace stacks;
    std::vector<Eigen::MatrixXd> policy;      // per option
    std::vector<Eigen::VectorXd> term;        // per option, beta(s)
    Eigen::MatrixXd rbar;                     // expected one-step reward (s, a)
    std::vector<Eigen::MatrixXd> transition;  // per action: (s, s')

    Workspace(const Network& n, const FiniteMdpSpec& m) : net(n), mdp(m), stacks(n) {
        policy.reserve(net.n_options());
        term.reserve(net.n_options());
        for (int opt = 0; opt < net.n_options(); ++opt) {
            policy.push_back(policy_matrix(net, opt));
            Eigen::VectorXd beta(net.n_states());
            for (int s = 0; s < net.n_states(); ++s)
                beta(s) = opt == 0 ? 0.0 : net.termination_prob(opt, s);
            term.push_back(std::move(beta));
        }
        rbar.resize(mdp.n_states, mdp.n_actions);
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a)
                rbar(s, a) = mdp.expected_reward(s, a);
        transition.assign(mdp.n_actions,
                          Eigen::MatrixXd(mdp.n_states, mdp.n_states));
        for (int a = 0; a < mdp.n_actions; ++a)
            for (int s = 0; s < mdp.n_states; ++s)
                for (int s2 = 0; s2 < mdp.n_states; ++s2)
                    transition[a](s, s2) = mdp.transition[s][a][s2];
    }

    double beta_at(int level, int stack, int s) const {
        return term[stacks.option_at(level, stack)](s);
    }

    /// Applies the Bellman map to bottom upward values and reports every
    /// derived table along the way.
    void apply(const Eigen::MatrixXd& up_bottom, ExactValueTables& out) const {
        const int n_levels = stacks.depth();
        const int n_leaf = stacks.n_stacks(n_levels - 1);
        const int S = mdp.n_states;
        const double gamma = mdp.gamma;

        out.q_leaf.assign(n_leaf, Eigen::MatrixXd(S, mdp.n_actions));
        for (int k = 0; k < n_leaf; ++k)
            for (int a = 0; a < mdp.n_actions; ++a)
                out.q_leaf[k].col(a) =
                    rbar.col(a) + gamma * transition[a] * up_bottom.row(k).transpose();

        out.v_down.assign(n_levels, Eigen::MatrixXd());
        out.v_down[n_levels - 1].resize(n_leaf, S);
        for (int k = 0; k < n_leaf; ++k) {
            const auto& pol = policy[stacks.option_at(n_levels - 1, k)];
            for (int s = 0; s < S; ++s)
                out.v_down[n_levels - 1](k, s) =
                    pol.row(s).dot(out.q_leaf[k].row(s));
        }
        for (int l = n_levels - 2; l >= 0; --l) {
            const int b = stacks.branching(l);
            out.v_down[l].setZero(stacks.n_stacks(l), S);
            for (int k = 0; k < stacks.n_stacks(l); ++k) {
                const auto& pol = policy[stacks.option_at(l, k)];
                for (int c = 0; c < b; ++c)
                    out.v_down[l].row(k) += pol.col(c).transpose().cwiseProduct(
                        out.v_down[l + 1].row(k * b + c));
            }
        }

        out.v_up.assign(n_levels, Eigen::MatrixXd());
        out.v_up[0] = out.v_down[0];
        for (int l = 1; l < n_levels; ++l) {
            out.v_up[l].resize(stacks.n_stacks(l), S);
            for (int k = 0; k < stacks.n_stacks(l); ++k) {
                const int p = stacks.parent(l, k);
                for (int s = 0; s < S; ++s) {
                    const double beta = beta_at(l, k, s);
                    out.v_up[l](k, s) = (1.0 - beta) * out.v_down[l](k, s) +
                                        beta * out.v_up[l - 1](p, s);
                }
            }
        }
    }
};

/// Probability of every descent completion from (level, stack) down to the
/// leaves, accumulated into `out` indexed relative to `leaf_base` (the first
/// leaf stack under the starting point).
void descent_probabilities(const Workspace& w, int level, int stack, int s,
                           double prob, Eigen::VectorXd& out, int leaf_base) {
    const int n_levels = w.stacks.depth();
    if (level == n_levels - 1) {
        out(stack - leaf_base) += prob;
        return;
    }
    const auto& pol = w.policy[w.stacks.option_at(level, stack)];
    const int b = w.stacks.branching(level);
    for (int c = 0; c < b; ++c)
        descent_probabilities(w, level + 1, stack * b + c, s, prob * pol(s, c),
                              out, leaf_base);
}

}  // namespace

StackSpace::StackSpace(const Network& net) : net_(&net), depth_(net.depth()) {
    branching_.resize(depth_);
    for (int l = 0; l + 1 < depth_; ++l)
        branching_[l] = net.spec().layers[l + 1];
    if (depth_ >= 1) branching_[depth_ - 1] = net.spec().n_primitive;
    n_stacks_.resize(depth_);
    int count = 1;
    for (int l = 0; l < depth_; ++l) {
        n_stacks_[l] = count;
        if (l + 1 < depth_) count *= branching_[l];
    }
}

int StackSpace::prefix(int from, int k, int to) const {
    int div = 1;
    for (int l = to; l < from; ++l) div *= branching_[l];
    return k / div;
}

int StackSpace::option_at(int level, int k) const {
    if (level == 0) return 0;
    if (net_->spec().topology == Topology::hoc)
        return net_->level_options(level)[k];
    return net_->level_options(level)[last_choice(level, k)];
}

ExactValueTables exact_q(const Network& net, const FiniteMdpSpec& mdp) {
    mdp_validate_or_throw(mdp);
    if (net.spec().n_primitive != mdp.n_actions)
        throw std::invalid_argument(
            "network primitive action count does not match the MDP");

    Workspace w(net, mdp);
    const int n_levels = w.stacks.depth();
    const int n_leaf = w.stacks.n_stacks(n_levels - 1);
    const int S = mdp.n_states;
    const int dim = n_leaf * S;

    // Solve U = A U + b for the bottom upward values, where the affine map
    // is one sweep of the Bellman system.
    ExactValueTables scratch;
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n_leaf, S);
    w.apply(zero, scratch);
    Eigen::VectorXd b(dim);
    for (int k = 0; k < n_leaf; ++k)
        for (int s = 0; s < S; ++s) b(k * S + s) = scratch.v_up[n_levels - 1](k, s);

    Eigen::MatrixXd up_bottom(n_leaf, S);
    if (dim <= kDirectSolveLimit) {
        Eigen::MatrixXd A(dim, dim);
        Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(n_leaf, S);
        for (int j = 0; j < dim; ++j) {
            unit(j / S, j % S) = 1.0;
            w.apply(unit, scratch);
            for (int k = 0; k < n_leaf; ++k)
                for (int s = 0; s < S; ++s)
                    A(k * S + s, j) = scratch.v_up[n_levels - 1](k, s) - b(k * S + s);
            unit(j / S, j % S) = 0.0;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(dim, dim) - A);
        if (!lu.isInvertible())
            throw std::invalid_argument(
                "Bellman system is non-contractive (gamma too close to 1 "
                "without absorption)");
        const Eigen::VectorXd u = lu.solve(b);
        for (int k = 0; k < n_leaf; ++k)
            for (int s = 0; s < S; ++s) up_bottom(k, s) = u(k * S + s);
    } else {
        if (mdp.gamma >= 1.0)
            throw std::invalid_argument(
                "fixed-point iteration requires gamma < 1");
        up_bottom.setZero();
        for (int iter = 0; iter < 200000; ++iter) {
            w.apply(up_bottom, scratch);
            const Eigen::MatrixXd& next = scratch.v_up[n_levels - 1];
            const double diff = (next - up_bottom).cwiseAbs().maxCoeff();
            up_bottom = next;
            if (diff <= kIterTol) break;
        }
    }

    ExactValueTables out;
    w.apply(up_bottom, out);

    // cascade kernels per level and state
    out.cascade_kernel.assign(n_levels, {});
    for (int l = 0; l < n_levels; ++l) {
        out.cascade_kernel[l].assign(
            S, Eigen::MatrixXd::Zero(w.stacks.n_stacks(l), w.stacks.n_stacks(l)));
        for (int s = 0; s < S; ++s) {
            auto& kernel = out.cascade_kernel[l][s];
            for (int k = 0; k < w.stacks.n_stacks(l); ++k) {
                double up_prob = 1.0;
                for (int i = l; i >= 0; --i) {
                    const int anc = w.stacks.prefix(l, k, i);
                    const double stay =
                        i == 0 ? 1.0 : 1.0 - w.beta_at(i, anc, s);
                    if (up_prob * stay > 0.0) {
                        // redistribute over all descents from level i back to l
                        std::vector<std::pair<int, double>> frontier = {
                            {anc, up_prob * stay}};
                        for (int d = i; d < l; ++d) {
                            std::vector<std::pair<int, double>> next;
                            const int bd = w.stacks.branching(d);
                            for (const auto& [stk, pr] : frontier) {
                                const auto& pol =
                                    w.policy[w.stacks.option_at(d, stk)];
                                for (int c = 0; c < bd; ++c)
                                    next.push_back({stk * bd + c, pr * pol(s, c)});
                            }
                            frontier = std::move(next);
                        }
                        for (const auto& [stk, pr] : frontier) kernel(k, stk) += pr;
                    }
                    if (i > 0) up_prob *= w.beta_at(i, anc, s);
                }
            }
        }
    }

    // occupancy of the bottom downward states: initial root descent, then the
    // one-env-step chain (leaf action, transition, upward cascade, descent)
    {
        Eigen::VectorXd rho = Eigen::VectorXd::Zero(dim);
        for (int s = 0; s < S; ++s) {
            if (mdp.init_dist[s] == 0.0) continue;
            Eigen::VectorXd leaf_probs = Eigen::VectorXd::Zero(n_leaf);
            descent_probabilities(w, 0, 0, s, 1.0, leaf_probs, 0);
            for (int k = 0; k < n_leaf; ++k)
                rho(k * S + s) = mdp.init_dist[s] * leaf_probs(k);
        }
        Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(dim, dim);
        for (int k = 0; k < n_leaf; ++k) {
            const auto& pol = w.policy[w.stacks.option_at(n_levels - 1, k)];
            for (int s = 0; s < S; ++s) {
                for (int s2 = 0; s2 < S; ++s2) {
                    double env = 0.0;
                    for (int a = 0; a < mdp.n_actions; ++a)
                        env += pol(s, a) * w.transition[a](s, s2);
                    if (env == 0.0) continue;
                    const auto& kernel = out.cascade_kernel[n_levels - 1][s2];
                    for (int k2 = 0; k2 < n_leaf; ++k2)
                        chain(k * S + s, k2 * S + s2) += env * kernel(k, k2);
                }
            }
        }
        const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(dim, dim) -
                                  mdp.gamma * chain.transpose();
        const Eigen::VectorXd occ = M.partialPivLu().solve(rho);
        out.bottom_occupancy.resize(n_leaf, S);
        for (int k = 0; k < n_leaf; ++k)
            for (int s = 0; s < S; ++s) out.bottom_occupancy(k, s) = occ(k * S + s);
    }

    return out;
}

double expected_return(const Network& net, const FiniteMdpSpec& mdp) {
    const ExactValueTables tables = exact_q(net, mdp);
    double j = 0.0;
    for (int s = 0; s < mdp.n_states; ++s)
        j += mdp.init_dist[s] * tables.v_down[0](0, s);
    return j;
}

double BellmanResiduals::max() const {
    double m = policy_composition;
    m = std::max(m, descent);
    m = std::max(m, upward);
    m = std::max(m, upward_kernel);
    m = std::max(m, kernel_row_sum);
    m = std::max(m, advantage);
    m = std::max(m, coagent_relation);
    return m;
}

BellmanResiduals bellman_residuals(const Network& net, const FiniteMdpSpec& mdp,
                                   const ExactValueTables& tables) {
    Workspace w(net, mdp);
    const int n_levels = w.stacks.depth();
    const int S = mdp.n_states;
    BellmanResiduals res;

    // value as policy-weighted child values, every level including the bottom
    for (int l = 0; l < n_levels; ++l) {
        for (int k = 0; k < w.stacks.n_stacks(l); ++k) {
            const auto& pol = w.policy[w.stacks.option_at(l, k)];
            for (int s = 0; s < S; ++s) {
                double acc = 0.0;
                if (l == n_levels - 1) {
                    for (int a = 0; a < mdp.n_actions; ++a)
                        acc += pol(s, a) * tables.q_leaf[k](s, a);
                } else {
                    const int b = w.stacks.branching(l);
                    for (int c = 0; c < b; ++c)
                        acc += pol(s, c) * tables.v_down[l + 1](k * b + c, s);
                }
                res.policy_composition = std::max(
                    res.policy_composition, std::abs(tables.v_down[l](k, s) - acc));
            }
        }
    }

    // value as expected descent reward plus discounted next upward value
    for (int l = 0; l < n_levels; ++l) {
        const int n_below = w.stacks.n_stacks(n_levels - 1) / w.stacks.n_stacks(l);
        for (int k = 0; k < w.stacks.n_stacks(l); ++k) {
            const int base = k * n_below;
            for (int s = 0; s < S; ++s) {
                Eigen::VectorXd leaf_probs = Eigen::VectorXd::Zero(n_below);
                descent_probabilities(w, l, k, s, 1.0, leaf_probs, base);
                double acc = 0.0;
                for (int i = 0; i < n_below; ++i) {
                    if (leaf_probs(i) == 0.0) continue;
                    const int leaf = base + i;
                    const auto& pol =
                        w.policy[w.stacks.option_at(n_levels - 1, leaf)];
                    for (int a = 0; a < mdp.n_actions; ++a) {
                        double tail = w.rbar(s, a);
                        for (int s2 = 0; s2 < S; ++s2)
                            tail += mdp.gamma * w.transition[a](s, s2) *
                                    tables.v_up[n_levels - 1](leaf, s2);
                        acc += leaf_probs(i) * pol(s, a) * tail;
                    }
                }
                res.descent = std::max(res.descent,
                                       std::abs(tables.v_down[l](k, s) - acc));
            }
        }
    }

    // upward value: closed form over the level where the cascade stops
    for (int l = 0; l < n_levels; ++l) {
        for (int k = 0; k < w.stacks.n_stacks(l); ++k) {
            for (int s = 0; s < S; ++s) {
                double acc = 0.0;
                double up_prob = 1.0;
                for (int i = l; i >= 0; --i) {
                    const int anc = w.stacks.prefix(l, k, i);
                    const double stay = i == 0 ? 1.0 : 1.0 - w.beta_at(i, anc, s);
                    acc += up_prob * stay * tables.v_down[i](anc, s);
                    if (i > 0) up_prob *= w.beta_at(i, anc, s);
                }
                res.upward = std::max(res.upward,
                                      std::abs(tables.v_up[l](k, s) - acc));
            }
        }
    }

    // upward value through the same-level cascade kernel, plus row sums
    for (int l = 0; l < n_levels; ++l) {
        for (int s = 0; s < S; ++s) {
            const auto& kernel = tables.cascade_kernel[l][s];
            for (int k = 0; k < w.stacks.n_stacks(l); ++k) {
                double acc = 0.0;
                for (int k2 = 0; k2 < w.stacks.n_stacks(l); ++k2)
                    acc += kernel(k, k2) * tables.v_down[l](k2, s);
                res.upward_kernel = std::max(
                    res.upward_kernel, std::abs(tables.v_up[l](k, s) - acc));
                res.kernel_row_sum = std::max(
                    res.kernel_row_sum, std::abs(kernel.row(k).sum() - 1.0));
            }
        }
    }

    // terminate/continue action values of a termination function:
    // continue = the option's own value, terminate = the parent's upward value
    for (int l = 1; l < n_levels; ++l) {
        for (int k = 0; k < w.stacks.n_stacks(l); ++k) {
            const int p = w.stacks.parent(l, k);
            for (int s = 0; s < S; ++s) {
                const double q_continue = tables.v_down[l](k, s);
                const double q_terminate = tables.v_up[l - 1](p, s);
                const double adv = q_continue - q_terminate;
                // independent route: closed-form upward value at the parent
                double acc = 0.0;
                double up_prob = 1.0;
                for (int i = l - 1; i >= 0; --i) {
                    const int anc = w.stacks.prefix(l - 1, p, i);
                    const double stay = i == 0 ? 1.0 : 1.0 - w.beta_at(i, anc, s);
                    acc += up_prob * stay * tables.v_down[i](anc, s);
                    if (i > 0) up_prob *= w.beta_at(i, anc, s);
                }
                res.advantage = std::max(
                    res.advantage, std::abs(adv - (q_continue - acc)));
                // successor relation: the value at the decision point mixes
                // the two action values with the termination probabilities
                const double beta = w.beta_at(l, k, s);
                const double mixed =
                    (1.0 - beta) * q_continue + beta * q_terminate;
                res.coagent_relation = std::max(
                    res.coagent_relation, std::abs(tables.v_up[l](k, s) - mixed));
            }
        }
    }

    return res;
}

}  // namespace coagent::oracle
