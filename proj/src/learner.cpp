#include "coagent/learner.hpp"

#include <algorithm>
#include <cmath>

namespace coagent {

Learner::Learner(NetworkSpec spec, int n_states, Hyperparams hyper,
                 bool legacy_update_mode)
    : net_(std::move(spec), n_states, hyper.tau_pi, hyper.tau_beta),
      hyper_(hyper), legacy_(legacy_update_mode) {
    q_.resize(net_.n_options());
    for (int i = 0; i < net_.n_options(); ++i)
        q_[i].assign(static_cast<std::size_t>(n_states) *
                         net_.option(i).n_children,
                     0.0);
    target_buf_.resize(net_.depth());
    value_buf_.resize(net_.depth());
    disc_buf_.resize(net_.n_options());
}

double Learner::max_q(int opt, int state) const {
    const OptionNode& node = net_.option(opt);
    const double* row =
        q_[opt].data() + static_cast<std::size_t>(state) * node.n_children;
    double hi = row[0];
    for (int i = 1; i < node.n_children; ++i) hi = std::max(hi, row[i]);
    return hi;
}

void Learner::accumulate_rewards(double r) {
    // each option on the path collects gamma^(t - activation - 1) * r
    for (int opt : net_.active_path()) {
        net_.option(opt).reward_acc += disc_buf_[opt] * r;
        disc_buf_[opt] *= hyper_.gamma;  // becomes gamma^(t - activation)
    }
}

void Learner::update_critics(int s_next, int t, bool done,
                             const LearnHooks* hooks,
                             UpdateCounters& counters) {
    (void)t;
    const auto& path = net_.active_path();
    const int depth = static_cast<int>(path.size());

    if (!done) {
        // target values root-downward; the parent's action value plays the
        // role of a value target network for the child
        target_buf_[0] = max_q(0, s_next);
        for (int d = 1; d < depth; ++d) {
            const int opt = path[d];
            const int parent = path[d - 1];
            const double beta = net_.termination_prob(opt, s_next);
            const double parent_q =
                q_value(parent, s_next, net_.option(parent).prev_action);
            target_buf_[d] =
                (1.0 - beta) * parent_q + beta * target_buf_[d - 1];
        }
    }

    for (int d = depth - 1; d >= 0; --d) {
        const int opt = path[d];
        OptionNode& node = net_.option(opt);
        const double bootstrap = done ? 0.0 : disc_buf_[opt] * target_buf_[d];
        const double target = node.reward_acc + bootstrap;
        double& q = q_[opt][static_cast<std::size_t>(node.last_obs) *
                                node.n_children +
                            node.prev_action];
        const double before = q;
        q += hyper_.alpha_q * (target - q);
        ++counters.critic_updates;
        if (hooks && hooks->on_critic)
            hooks->on_critic({opt, node.last_obs, node.prev_action, before,
                              target, q});
        if (!node.terminated && !done && !legacy_) break;
    }
}

void Learner::update_actors(bool done, const LearnHooks* hooks,
                            UpdateCounters& counters) {
    const auto& path = net_.active_path();
    for (int d = static_cast<int>(path.size()) - 1; d >= 0; --d) {
        const int opt = path[d];
        OptionNode& node = net_.option(opt);
        const int c = node.prev_action;
        const int x = node.last_obs;
        double baseline = 0.0;  // the root has no parent
        if (d > 0) {
            const int parent = path[d - 1];
            baseline = q_value(parent, x, net_.option(parent).prev_action);
        }
        const double advantage = q_value(opt, x, c) - baseline;
        if (advantage != 0.0) {
            const auto probs = net_.policy_distribution(opt, x);
            double* row = node.policy_logits.data() +
                          static_cast<std::size_t>(x) * node.n_children;
            const double scale = hyper_.alpha_pi * advantage / hyper_.tau_pi;
            for (int k = 0; k < node.n_children; ++k) {
                const double indicator = k == c ? 1.0 : 0.0;
                row[k] += scale * probs[c] * (indicator - probs[k]);
            }
        }
        ++counters.actor_updates;
        if (hooks && hooks->on_actor)
            hooks->on_actor({opt, x, c, advantage});
        if (!node.terminated && !done && !legacy_) break;
    }
}

void Learner::update_terminations(int s_next, int omega_depth,
                                  const LearnHooks* hooks,
                                  UpdateCounters& counters) {
    const auto& path = net_.active_path();
    const int depth = static_cast<int>(path.size());

    // baselines root-downward; here the option's own max action value is
    // used, not the parent's (the parent-as-target variant suppresses the
    // growth of option lengths)
    value_buf_[0] = max_q(0, s_next);
    for (int d = 1; d < depth; ++d) {
        const int opt = path[d];
        const double beta = net_.termination_prob(opt, s_next);
        value_buf_[d] =
            (1.0 - beta) * max_q(opt, s_next) + beta * value_buf_[d - 1];
    }

    const double q_survivor = max_q(path[omega_depth], s_next);
    double probs = 1.0;
    for (int d = depth - 1; d >= 0; --d) {
        const int opt = path[d];
        OptionNode& node = net_.option(opt);
        if (node.terminated) {
            // estimate for the terminate action: the value of the option
            // that actually continues the next phase of execution
            const double beta = net_.termination_prob(opt, s_next);
            const double grad = beta * (1.0 - beta) / hyper_.tau_beta;
            double& logit = node.termination_logits[s_next];
            const double before = logit;
            logit += hyper_.alpha_beta * probs * grad *
                     (q_survivor - value_buf_[d]);
            ++counters.termination_updates;
            if (hooks && hooks->on_termination)
                hooks->on_termination({opt, s_next, true, probs, q_survivor,
                                       value_buf_[d], before, logit});
            probs *= beta;
        } else {
            // the option that kept going took the opposite action, so the
            // opposite of the gradient applies
            if (d > 0) {
                const double beta = net_.termination_prob(opt, s_next);
                const double grad = beta * (1.0 - beta) / hyper_.tau_beta;
                const double estimate = max_q(opt, s_next);
                double& logit = node.termination_logits[s_next];
                const double before = logit;
                logit -= hyper_.alpha_beta * probs * grad *
                         (estimate - value_buf_[d]);
                ++counters.termination_updates;
                if (hooks && hooks->on_termination)
                    hooks->on_termination({opt, s_next, false, probs, estimate,
                                           value_buf_[d], before, logit});
            }
            break;
        }
    }
}

EpisodeStats Learner::learn_episode(Environment& env, int t_max, Rng& rng,
                                    TraceSink* sink, const LearnHooks* hooks) {
    EpisodeStats stats;
    stats.completed_lengths.resize(net_.n_options());

    net_.begin_episode();
    std::fill(disc_buf_.begin(), disc_buf_.end(), 1.0);
    // when the option was last handed control by its parent (or last had to
    // reselect); basis of the option-length metric
    std::vector<int> selected_at(net_.n_options(), 0);

    int state = env.reset(rng);
    int t = 0;
    double episode_disc = 1.0;
    int action = net_.choose_primitive_action(state, t, rng, sink);

    while (true) {
        const StepResult out = env.step(state, action, rng);
        ++t;
        stats.discounted_return += episode_disc * out.reward;
        episode_disc *= hyper_.gamma;

        accumulate_rewards(out.reward);
        const int omega_depth = net_.termination_cascade(out.next, rng, sink);
        const bool done = out.done;

        update_critics(out.next, t, done, hooks, stats.counters);
        update_actors(done, hooks, stats.counters);
        update_terminations(out.next, omega_depth, hooks, stats.counters);

        if (hooks && hooks->on_step)
            hooks->on_step({t, state, action, out.next, out.reward, done,
                            omega_depth, &net_.active_path()});

        // close activations: terminated options were switched out; the
        // survivor closes one activation when it has to pick a new child;
        // episode end closes everything still open
        const auto& path = net_.active_path();
        const int deepest = static_cast<int>(path.size()) - 1;
        const bool episode_over = done || t >= t_max;
        for (int d = deepest; d >= 0; --d) {
            const int opt = path[d];
            OptionNode& node = net_.option(opt);
            if (node.terminated) {
                stats.completed_lengths[opt].push_back(t - selected_at[opt]);
                ++stats.counters.termination_events;
                node.terminated = false;
            } else if (episode_over) {
                stats.completed_lengths[opt].push_back(t - selected_at[opt]);
                ++stats.counters.termination_events;
            } else if (d == omega_depth && omega_depth < deepest) {
                stats.completed_lengths[opt].push_back(t - selected_at[opt]);
                selected_at[opt] = t;
            }
        }

        state = out.next;
        if (episode_over) break;
        net_.truncate_active_path(omega_depth);
        action = net_.choose_primitive_action(state, t, rng, sink);
        for (std::size_t d = omega_depth + 1; d < net_.active_path().size(); ++d) {
            const int opt = net_.active_path()[d];
            selected_at[opt] = t;
            disc_buf_[opt] = 1.0;
        }
        disc_buf_[net_.active_path()[omega_depth]] = 1.0;
    }

    stats.steps = t;
    return stats;
}

}  // namespace coagent
