#include "coagent/gradients.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace coagent::oracle {

namespace {

struct Context {
    Network net;
    FiniteMdpSpec mdp;
    StackSpace stacks;
    ExactValueTables tables;
    std::vector<Eigen::MatrixXd> policy;  // per option (s, c)
    std::vector<Eigen::VectorXd> beta;    // per option (s); 0 for the root

    Context(const Network& base, const ParamLayout& layout,
            const Eigen::VectorXd& theta, const FiniteMdpSpec& m)
        : net(base), mdp(m), stacks(net) {
        layout.materialize(theta, net);
        tables = exact_q(net, mdp);
        for (int opt = 0; opt < net.n_options(); ++opt) {
            const OptionNode& node = net.option(opt);
            Eigen::MatrixXd pol(net.n_states(), node.n_children);
            Eigen::VectorXd b(net.n_states());
            for (int s = 0; s < net.n_states(); ++s) {
                const auto row = net.policy_distribution(opt, s);
                for (int c = 0; c < node.n_children; ++c) pol(s, c) = row[c];
                b(s) = opt == 0 ? 0.0 : net.termination_prob(opt, s);
            }
            policy.push_back(std::move(pol));
            beta.push_back(std::move(b));
        }
    }

    double beta_at(int level, int stack, int s) const {
        return beta[stacks.option_at(level, stack)](s);
    }
};

struct Factor {
    enum class Kind { policy, terminate, keep_going, root_keep };
    Kind kind;
    int option;
    int level;
    int stack;
    int state;
    int action;
    double prob;
};

/// d(factor probability)/d(theta) accumulated with a coefficient. For policy
/// factors this is the softmax gradient of the chosen action; for
/// terminations the sigmoid gradient with the action's sign.
void add_factor_gradient(const Context& ctx, const ParamLayout& layout,
                         const Factor& f, double coeff, Eigen::VectorXd& grad) {
    if (f.kind == Factor::Kind::root_keep) return;
    if (f.kind == Factor::Kind::policy) {
        const auto& pol = ctx.policy[f.option];
        const double pc = pol(f.state, f.action);
        const double inv_tau = 1.0 / ctx.net.tau_pi();
        for (int k = 0; k < pol.cols(); ++k) {
            const double indicator = k == f.action ? 1.0 : 0.0;
            grad(layout.policy_pos(f.option, f.state, k)) +=
                coeff * pc * (indicator - pol(f.state, k)) * inv_tau;
        }
        return;
    }
    const double b = ctx.beta[f.option](f.state);
    const double g = b * (1.0 - b) / ctx.net.tau_beta();
    const double sign = f.kind == Factor::Kind::terminate ? 1.0 : -1.0;
    grad(layout.termination_pos(f.option, f.state)) += coeff * sign * g;
}

/// All-action softmax gradient: sum_c dpi(c)/dtheta * value(c), which for
/// logit k collapses to pi(k) (value(k) - expected value) / tau.
template <typename ValueFn>
void add_policy_allaction(const Context& ctx, const ParamLayout& layout,
                          int opt, int state, double weight, ValueFn&& value,
                          Eigen::VectorXd& grad) {
    const auto& pol = ctx.policy[opt];
    const int width = static_cast<int>(pol.cols());
    double expected = 0.0;
    for (int c = 0; c < width; ++c) expected += pol(state, c) * value(c);
    const double scale = weight / ctx.net.tau_pi();
    for (int k = 0; k < width; ++k)
        grad(layout.policy_pos(opt, state, k)) +=
            scale * pol(state, k) * (value(k) - expected);
}

/// Enumerates descents from (level, stack) at a state, ending with a leaf
/// action; calls emit(factors, leaf_stack, action, prob).
template <typename Emit>
void enumerate_descents(const Context& ctx, int level, int stack, int s,
                        std::vector<Factor>& factors, double prob,
                        Emit&& emit) {
    const int bottom = ctx.stacks.depth() - 1;
    const int opt = ctx.stacks.option_at(level, stack);
    const auto& pol = ctx.policy[opt];
    if (level == bottom) {
        for (int a = 0; a < ctx.mdp.n_actions; ++a) {
            factors.push_back({Factor::Kind::policy, opt, level, stack, s, a,
                               pol(s, a)});
            emit(factors, stack, a, prob * pol(s, a));
            factors.pop_back();
        }
        return;
    }
    const int b = ctx.stacks.branching(level);
    for (int c = 0; c < b; ++c) {
        factors.push_back({Factor::Kind::policy, opt, level, stack, s, c,
                           pol(s, c)});
        enumerate_descents(ctx, level + 1, stack * b + c, s, factors,
                           prob * pol(s, c), emit);
        factors.pop_back();
    }
}

/// Enumerates the execution paths from an upward decision point at the
/// bottom level: cascade up to a stop level, then descend to a primitive.
template <typename Emit>
void enumerate_paths_from_up(const Context& ctx, int leaf_stack, int s,
                             Emit&& emit) {
    const int bottom = ctx.stacks.depth() - 1;
    std::vector<Factor> factors;
    double up_prob = 1.0;
    for (int stop = bottom; stop >= 0; --stop) {
        const int anc = ctx.stacks.prefix(bottom, leaf_stack, stop);
        const int opt = ctx.stacks.option_at(stop, anc);
        const std::size_t mark = factors.size();
        double prob = up_prob;
        if (stop == 0) {
            factors.push_back({Factor::Kind::root_keep, 0, 0, 0, s, 0, 1.0});
        } else {
            const double b = ctx.beta[opt](s);
            factors.push_back({Factor::Kind::keep_going, opt, stop, anc, s, 0,
                               1.0 - b});
            prob *= 1.0 - b;
        }
        enumerate_descents(ctx, stop, anc, s, factors, prob,
                           std::forward<Emit>(emit));
        factors.resize(mark);
        if (stop > 0) {
            const double b = ctx.beta[opt](s);
            factors.push_back({Factor::Kind::terminate, opt, stop, anc, s, 1, b});
            up_prob *= b;
        }
    }
}

int macro_count(const Context& ctx) {
    const int S = ctx.mdp.n_states;
    return S + ctx.stacks.n_stacks(ctx.stacks.depth() - 1) * S;
}

/// Discounted occupancy over macro states: episode starts (one per MDP
/// state) followed by the recurring upward decision points (leaf stack x
/// state). One macro transition is exactly one environment step.
Eigen::VectorXd macro_occupancy(const Context& ctx) {
    const int S = ctx.mdp.n_states;
    const int bottom = ctx.stacks.depth() - 1;
    const int n = macro_count(ctx);
    auto up_index = [&](int k, int s) { return S + k * S + s; };

    Eigen::MatrixXd trans = Eigen::MatrixXd::Zero(n, n);
    auto add_transitions = [&](int row, const std::vector<Factor>&, int leaf,
                               int a, double prob) {
        if (prob == 0.0) return;
        const int s = row < S ? row : (row - S) % S;
        for (int s2 = 0; s2 < S; ++s2) {
            const double p = ctx.mdp.transition[s][a][s2];
            if (p > 0.0) trans(row, up_index(leaf, s2)) += prob * p;
        }
    };
    std::vector<Factor> factors;
    for (int s = 0; s < S; ++s) {
        enumerate_descents(ctx, 0, 0, s, factors, 1.0,
                           [&](const auto& fs, int leaf, int a, double p) {
                               add_transitions(s, fs, leaf, a, p);
                           });
    }
    for (int k = 0; k < ctx.stacks.n_stacks(bottom); ++k)
        for (int s = 0; s < S; ++s)
            enumerate_paths_from_up(
                ctx, k, s, [&](const auto& fs, int leaf, int a, double p) {
                    add_transitions(up_index(k, s), fs, leaf, a, p);
                });

    Eigen::VectorXd rho = Eigen::VectorXd::Zero(n);
    for (int s = 0; s < S; ++s) rho(s) = ctx.mdp.init_dist[s];
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) -
                              ctx.mdp.gamma * trans.transpose();
    return M.partialPivLu().solve(rho);
}

}  // namespace

// ---------------------------------------------------------------------------
// ParamLayout

ParamLayout::ParamLayout(const Network& net) : n_states_(net.n_states()) {
    const int n = net.n_options();
    policy_block_.resize(n);
    term_block_.resize(n);
    policy_width_.resize(n);
    for (int opt = 0; opt < n; ++opt) {
        policy_block_[opt] = 2 * opt;
        term_block_[opt] = opt == 0 ? -1 : 2 * opt + 1;
        policy_width_[opt] = net.option(opt).n_children;
    }
    rebuild_offsets();
}

void ParamLayout::tie_policies(const std::vector<int>& options) {
    for (std::size_t i = 1; i < options.size(); ++i) {
        if (policy_width_[options[i]] != policy_width_[options[0]])
            throw std::invalid_argument("tied policy tables must match shapes");
        policy_block_[options[i]] = policy_block_[options[0]];
    }
    rebuild_offsets();
}

void ParamLayout::tie_terminations(const std::vector<int>& options) {
    for (std::size_t i = 0; i < options.size(); ++i)
        if (term_block_[options[i]] < 0)
            throw std::invalid_argument("the root has no termination table");
    for (std::size_t i = 1; i < options.size(); ++i)
        term_block_[options[i]] = term_block_[options[0]];
    rebuild_offsets();
}

void ParamLayout::rebuild_offsets() {
    std::map<int, int> size_of;
    const int n = static_cast<int>(policy_block_.size());
    for (int opt = 0; opt < n; ++opt) {
        size_of[policy_block_[opt]] = n_states_ * policy_width_[opt];
        if (term_block_[opt] >= 0) size_of[term_block_[opt]] = n_states_;
    }
    block_size_.assign(2 * n, 0);
    block_offset_.assign(2 * n, -1);
    dim_ = 0;
    for (const auto& [block, size] : size_of) {
        block_size_[block] = size;
        block_offset_[block] = dim_;
        dim_ += size;
    }
}

int ParamLayout::policy_pos(int opt, int state, int child) const {
    return block_offset_[policy_block_[opt]] + state * policy_width_[opt] + child;
}

int ParamLayout::termination_pos(int opt, int state) const {
    if (term_block_[opt] < 0) return -1;
    return block_offset_[term_block_[opt]] + state;
}

void ParamLayout::materialize(const Eigen::VectorXd& theta, Network& net) const {
    for (int opt = 0; opt < net.n_options(); ++opt) {
        OptionNode& node = net.option(opt);
        for (int s = 0; s < n_states_; ++s)
            for (int c = 0; c < policy_width_[opt]; ++c)
                node.policy_logits[static_cast<std::size_t>(s) *
                                       policy_width_[opt] +
                                   c] = theta(policy_pos(opt, s, c));
        if (term_block_[opt] >= 0)
            for (int s = 0; s < n_states_; ++s)
                node.termination_logits[s] = theta(termination_pos(opt, s));
    }
}

Eigen::VectorXd ParamLayout::extract(const Network& net) const {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim_);
    for (int opt = 0; opt < net.n_options(); ++opt) {
        const OptionNode& node = net.option(opt);
        for (int s = 0; s < n_states_; ++s)
            for (int c = 0; c < policy_width_[opt]; ++c)
                theta(policy_pos(opt, s, c)) =
                    node.policy_logits[static_cast<std::size_t>(s) *
                                           policy_width_[opt] +
                                       c];
        if (term_block_[opt] >= 0)
            for (int s = 0; s < n_states_; ++s)
                theta(termination_pos(opt, s)) = node.termination_logits[s];
    }
    return theta;
}

Eigen::VectorXd ParamLayout::random_theta(Rng& rng, double scale) const {
    Eigen::VectorXd theta(dim_);
    for (int i = 0; i < dim_; ++i)
        theta(i) = scale * (2.0 * rng.uniform() - 1.0);
    return theta;
}

std::vector<std::string> ParamLayout::labels(const Network& net) const {
    std::vector<std::string> out(dim_);
    const int n = net.n_options();
    std::map<int, std::vector<int>> owners;
    for (int opt = 0; opt < n; ++opt) {
        owners[policy_block_[opt]].push_back(opt);
        if (term_block_[opt] >= 0) owners[term_block_[opt]].push_back(opt);
    }
    for (int opt = 0; opt < n; ++opt) {
        for (int s = 0; s < n_states_; ++s) {
            for (int c = 0; c < policy_width_[opt]; ++c) {
                std::ostringstream label;
                label << "pi{";
                const auto& who = owners[policy_block_[opt]];
                for (std::size_t i = 0; i < who.size(); ++i)
                    label << (i ? "," : "") << who[i];
                label << "}(s=" << s << ",a=" << c << ")";
                out[policy_pos(opt, s, c)] = label.str();
            }
            if (term_block_[opt] >= 0) {
                std::ostringstream label;
                label << "beta{";
                const auto& who = owners[term_block_[opt]];
                for (std::size_t i = 0; i < who.size(); ++i)
                    label << (i ? "," : "") << who[i];
                label << "}(s=" << s << ")";
                out[termination_pos(opt, s)] = label.str();
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// gradient routes

Eigen::VectorXd path_gradient(const Network& base, const ParamLayout& layout,
                              const Eigen::VectorXd& theta,
                              const FiniteMdpSpec& mdp) {
    Context ctx(base, layout, theta, mdp);
    const int S = mdp.n_states;
    const int bottom = ctx.stacks.depth() - 1;
    const Eigen::VectorXd occ = macro_occupancy(ctx);

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.dim());
    std::vector<double> prefix, suffix;

    auto accumulate = [&](double weight, const std::vector<Factor>& factors,
                          int leaf, int a, int s) {
        if (weight == 0.0) return;
        const double q = ctx.tables.q_leaf[leaf](s, a);
        const std::size_t n = factors.size();
        prefix.assign(n + 1, 1.0);
        suffix.assign(n + 1, 1.0);
        for (std::size_t i = 0; i < n; ++i)
            prefix[i + 1] = prefix[i] * factors[i].prob;
        for (std::size_t i = n; i > 0; --i)
            suffix[i - 1] = suffix[i] * factors[i - 1].prob;
        for (std::size_t i = 0; i < n; ++i) {
            const double others = prefix[i] * suffix[i + 1];
            if (others == 0.0) continue;
            add_factor_gradient(ctx, layout, factors[i], weight * others * q,
                                grad);
        }
    };

    std::vector<Factor> factors;
    for (int s = 0; s < S; ++s) {
        const double w = occ(s);
        if (w == 0.0) continue;
        enumerate_descents(ctx, 0, 0, s, factors, 1.0,
                           [&](const auto& fs, int leaf, int a, double) {
                               accumulate(w, fs, leaf, a, s);
                           });
    }
    for (int k = 0; k < ctx.stacks.n_stacks(bottom); ++k) {
        for (int s = 0; s < S; ++s) {
            const double w = occ(S + k * S + s);
            if (w == 0.0) continue;
            enumerate_paths_from_up(ctx, k, s,
                                    [&](const auto& fs, int leaf, int a, double) {
                                        accumulate(w, fs, leaf, a, s);
                                    });
        }
    }
    return grad;
}

namespace {

void visit_down(const Context& ctx, const ParamLayout& layout, int level,
                int stack, int s, double rho, Eigen::VectorXd& grad);

void visit_up(const Context& ctx, const ParamLayout& layout, int level,
              int stack, int s, double rho, Eigen::VectorXd& grad) {
    if (rho == 0.0) return;
    if (level == 0) {  // the root keeps going with probability one
        visit_down(ctx, layout, 0, 0, s, rho, grad);
        return;
    }
    const int opt = ctx.stacks.option_at(level, stack);
    const double b = ctx.beta[opt](s);
    const double g = b * (1.0 - b) / ctx.net.tau_beta();
    const int parent = ctx.stacks.parent(level, stack);
    const double q_terminate = ctx.tables.v_up[level - 1](parent, s);
    const double q_continue = ctx.tables.v_down[level](stack, s);
    const int pos = layout.termination_pos(opt, s);
    grad(pos) += rho * g * (q_terminate - q_continue);

    visit_up(ctx, layout, level - 1, parent, s, rho * b, grad);
    visit_down(ctx, layout, level, stack, s, rho * (1.0 - b), grad);
}

void visit_down(const Context& ctx, const ParamLayout& layout, int level,
                int stack, int s, double rho, Eigen::VectorXd& grad) {
    if (rho == 0.0) return;
    const int bottom = ctx.stacks.depth() - 1;
    const int opt = ctx.stacks.option_at(level, stack);
    const int b = ctx.stacks.branching(level);
    auto child_value = [&](int c) {
        return level == bottom ? ctx.tables.q_leaf[stack](s, c)
                               : ctx.tables.v_down[level + 1](stack * b + c, s);
    };
    add_policy_allaction(ctx, layout, opt, s, rho, child_value, grad);
    if (level == bottom) return;
    const auto& pol = ctx.policy[opt];
    for (int c = 0; c < b; ++c)
        visit_down(ctx, layout, level + 1, stack * b + c, s, rho * pol(s, c),
                   grad);
}

}  // namespace

Eigen::VectorXd coagent_sum_gradient(const Network& base,
                                     const ParamLayout& layout,
                                     const Eigen::VectorXd& theta,
                                     const FiniteMdpSpec& mdp) {
    Context ctx(base, layout, theta, mdp);
    const int S = mdp.n_states;
    const int bottom = ctx.stacks.depth() - 1;
    const Eigen::VectorXd occ = macro_occupancy(ctx);

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.dim());
    for (int s = 0; s < S; ++s)
        visit_down(ctx, layout, 0, 0, s, occ(s), grad);
    for (int k = 0; k < ctx.stacks.n_stacks(bottom); ++k)
        for (int s = 0; s < S; ++s) {
            const double w = occ(S + k * S + s);
            if (w == 0.0) continue;
            if (bottom == 0)
                visit_down(ctx, layout, 0, 0, s, w, grad);
            else
                visit_up(ctx, layout, bottom, k, s, w, grad);
        }
    return grad;
}

Eigen::VectorXd hierarchical_gradient(const Network& base,
                                      const ParamLayout& layout,
                                      const Eigen::VectorXd& theta,
                                      const FiniteMdpSpec& mdp) {
    if (base.spec().topology != Topology::hoc)
        throw std::invalid_argument(
            "the hierarchical decomposition applies to HOC networks");
    Context ctx(base, layout, theta, mdp);
    const int S = mdp.n_states;
    const int bottom = ctx.stacks.depth() - 1;
    const int n_leaf = ctx.stacks.n_stacks(bottom);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.dim());

    // initial descent: the chain rule through the root-to-leaf selection that
    // places the first option stack
    {
        std::vector<Factor> factors;
        std::vector<double> prefix, suffix;
        for (int s = 0; s < S; ++s) {
            const double w0 = mdp.init_dist[s];
            if (w0 == 0.0) continue;
            // walk descents without the leaf action: emit at the bottom level
            std::function<void(int, int)> walk = [&](int level, int stack) {
                if (level == bottom) {
                    const double value = ctx.tables.v_down[bottom](stack, s);
                    const std::size_t n = factors.size();
                    prefix.assign(n + 1, 1.0);
                    suffix.assign(n + 1, 1.0);
                    for (std::size_t i = 0; i < n; ++i)
                        prefix[i + 1] = prefix[i] * factors[i].prob;
                    for (std::size_t i = n; i > 0; --i)
                        suffix[i - 1] = suffix[i] * factors[i - 1].prob;
                    for (std::size_t i = 0; i < n; ++i)
                        add_factor_gradient(ctx, layout, factors[i],
                                            w0 * prefix[i] * suffix[i + 1] * value,
                                            grad);
                    return;
                }
                const int opt = ctx.stacks.option_at(level, stack);
                const int b = ctx.stacks.branching(level);
                for (int c = 0; c < b; ++c) {
                    factors.push_back({Factor::Kind::policy, opt, level, stack,
                                       s, c, ctx.policy[opt](s, c)});
                    walk(level + 1, stack * b + c);
                    factors.pop_back();
                }
            };
            walk(0, 0);
        }
    }

    const Eigen::MatrixXd& occ = ctx.tables.bottom_occupancy;

    // bottom-policy term at the occupancy points
    for (int k = 0; k < n_leaf; ++k) {
        const int opt = ctx.stacks.option_at(bottom, k);
        for (int s = 0; s < S; ++s) {
            const double w = occ(k, s);
            if (w == 0.0) continue;
            add_policy_allaction(ctx, layout, opt, s, w,
                                 [&](int a) { return ctx.tables.q_leaf[k](s, a); },
                                 grad);
        }
    }

    // termination and reselection terms, one environment step further
    for (int k = 0; k < n_leaf; ++k) {
        const auto& pol = ctx.policy[ctx.stacks.option_at(bottom, k)];
        for (int s = 0; s < S; ++s) {
            const double w = occ(k, s);
            if (w == 0.0) continue;
            for (int s2 = 0; s2 < S; ++s2) {
                double env = 0.0;
                for (int a = 0; a < mdp.n_actions; ++a)
                    env += pol(s, a) * mdp.transition[s][a][s2];
                const double weight = w * mdp.gamma * env;
                if (weight == 0.0) continue;

                // terminations: cascade reaches level l with the product of
                // the deeper termination probabilities
                double casc = 1.0;
                for (int l = bottom; l >= 1; --l) {
                    const int kl = ctx.stacks.prefix(bottom, k, l);
                    const int opt_l = ctx.stacks.option_at(l, kl);
                    const double bl = ctx.beta[opt_l](s2);
                    const double g = bl * (1.0 - bl) / ctx.net.tau_beta();
                    const double advantage =
                        ctx.tables.v_down[l](kl, s2) -
                        ctx.tables.v_up[l - 1](ctx.stacks.parent(l, kl), s2);
                    grad(layout.termination_pos(opt_l, s2)) -=
                        weight * casc * g * advantage;
                    casc *= bl;
                }

                // reselections: the cascade clears levels j..bottom, the
                // same-level kernel finishes the upward phase and returns to
                // level j-1, where the policy picks the level-j option
                double full = 1.0;
                for (int j = bottom; j >= 1; --j) {
                    const int kj = ctx.stacks.prefix(bottom, k, j);
                    full *= ctx.beta[ctx.stacks.option_at(j, kj)](s2);
                    const int k_above = ctx.stacks.prefix(bottom, k, j - 1);
                    const auto& kernel = ctx.tables.cascade_kernel[j - 1][s2];
                    const int width = ctx.stacks.branching(j - 1);
                    for (int p = 0; p < ctx.stacks.n_stacks(j - 1); ++p) {
                        const double kp = kernel(k_above, p);
                        if (kp == 0.0) continue;
                        const int opt_p = ctx.stacks.option_at(j - 1, p);
                        add_policy_allaction(
                            ctx, layout, opt_p, s2, weight * full * kp,
                            [&](int c) {
                                return ctx.tables.v_down[j](p * width + c, s2);
                            },
                            grad);
                    }
                }
            }
        }
    }
    return grad;
}

Eigen::VectorXd finite_difference_gradient(const Network& base,
                                           const ParamLayout& layout,
                                           const Eigen::VectorXd& theta,
                                           const FiniteMdpSpec& mdp, double eps,
                                           std::string* warning) {
    if (eps <= 0.0) throw std::invalid_argument("eps must be positive");
    if (warning && eps < 1e-8)
        *warning = "eps below the numerical noise floor of the exact solve";
    Eigen::VectorXd grad(layout.dim());
    Network net = base;
    Eigen::VectorXd probe = theta;
    for (int i = 0; i < layout.dim(); ++i) {
        probe(i) = theta(i) + eps;
        layout.materialize(probe, net);
        const double plus = expected_return(net, mdp);
        probe(i) = theta(i) - eps;
        layout.materialize(probe, net);
        const double minus = expected_return(net, mdp);
        probe(i) = theta(i);
        grad(i) = (plus - minus) / (2.0 * eps);
    }
    return grad;
}

GradientReport gradient_report(const Network& base, const ParamLayout& layout,
                               const Eigen::VectorXd& theta,
                               const FiniteMdpSpec& mdp, double fd_eps) {
    GradientReport report;
    report.labels = layout.labels(base);
    report.full = path_gradient(base, layout, theta, mdp);
    report.coagent_sum = coagent_sum_gradient(base, layout, theta, mdp);
    if (base.spec().topology == Topology::hoc)
        report.hocpgt = hierarchical_gradient(base, layout, theta, mdp);
    report.fd = finite_difference_gradient(base, layout, theta, mdp, fd_eps);

    report.dev_full_vs_coagent =
        (report.full - report.coagent_sum).cwiseAbs().maxCoeff();
    if (report.hocpgt)
        report.dev_full_vs_hocpgt =
            (report.full - *report.hocpgt).cwiseAbs().maxCoeff();
    report.dev_full_vs_fd = (report.full - report.fd).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, report.full.cwiseAbs().maxCoeff());
    report.rel_dev_full_vs_fd = report.dev_full_vs_fd / scale;
    return report;
}

std::string GradientReport::to_json() const {
    nlohmann::json j;
    j["labels"] = labels;
    auto vec = [](const Eigen::VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    j["grad_full"] = vec(full);
    j["grad_coagent_sum"] = vec(coagent_sum);
    if (hocpgt) j["grad_hocpgt"] = vec(*hocpgt);
    j["grad_fd"] = vec(fd);
    j["pairwise_max_abs_dev"] = {
        {"full_vs_coagent_sum", dev_full_vs_coagent},
        {"full_vs_hocpgt", hocpgt ? nlohmann::json(dev_full_vs_hocpgt)
                                  : nlohmann::json()},
        {"full_vs_fd_abs", dev_full_vs_fd},
        {"full_vs_fd_rel", rel_dev_full_vs_fd},
    };
    return j.dump(2);
}

}  // namespace coagent::oracle
