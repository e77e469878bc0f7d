#pragma once

#include <functional>
#include <vector>

#include "coagent/finite_mdp.hpp"
#include "coagent/option_net.hpp"
#include "coagent/trace.hpp"

namespace coagent {

struct UpdateCounters {
    long actor_updates = 0;
    long critic_updates = 0;
    long termination_updates = 0;
    /// Terminated-flag events plus activations closed by the episode ending.
    long termination_events = 0;
};

struct EpisodeStats {
    int steps = 0;
    double discounted_return = 0.0;
    /// Completed activation durations per option (env steps between an
    /// option's activation and the step it was called back or the episode
    /// ended).
    std::vector<std::vector<int>> completed_lengths;
    UpdateCounters counters;
};

struct CriticUpdateEvent {
    int option, state, action;
    double q_before, target, q_after;
};

struct ActorUpdateEvent {
    int option, state, action;
    double advantage;
};

struct TerminationUpdateEvent {
    int option, state;
    bool terminated_branch;  // false on the option that kept going
    double probs, value_estimate, baseline;
    double logit_before, logit_after;
};

struct StepEvent {
    int t, state, action, next;
    double reward;
    bool done;
    int omega_depth;
    const std::vector<int>* path;  // option ids, root first
};

/// Optional per-event callbacks; used by tests and detailed traces.
struct LearnHooks {
    std::function<void(const StepEvent&)> on_step;
    std::function<void(const CriticUpdateEvent&)> on_critic;
    std::function<void(const ActorUpdateEvent&)> on_actor;
    std::function<void(const TerminationUpdateEvent&)> on_termination;
};

/**
 * Tabular actor-critic for HOC/FON networks.
 *
 * Rewards are accumulated per option in a discounted fashion and an option's
 * critic and actor update only when it is called back: when its terminated
 * flag is set, when it is the option that survives the cascade and reselects,
 * or when the episode ends. Critic targets bootstrap through the parent's
 * action value; termination updates use the surviving option's value as the
 * estimate for the terminate action and carry the cascade probability
 * product, with the opposite gradient sign on the option that kept going.
 *
 * legacy mode reproduces the older convention of updating every option on
 * the active path at every step, kept for the update-count comparison.
 */
class Learner {
public:
    Learner(NetworkSpec spec, int n_states, Hyperparams hyper,
            bool legacy_update_mode = false);

    Network& network() { return net_; }
    const Network& network() const { return net_; }
    std::vector<std::vector<double>>& q_tables() { return q_; }
    const std::vector<std::vector<double>>& q_tables() const { return q_; }
    const Hyperparams& hyper() const { return hyper_; }
    bool legacy_update_mode() const { return legacy_; }

    double q_value(int opt, int state, int action) const {
        return q_[opt][static_cast<std::size_t>(state) *
                           net_.option(opt).n_children +
                       action];
    }
    double max_q(int opt, int state) const;

    EpisodeStats learn_episode(Environment& env, int t_max, Rng& rng,
                               TraceSink* sink = nullptr,
                               const LearnHooks* hooks = nullptr);

private:
    void accumulate_rewards(double r);
    void update_critics(int s_next, int t, bool done, const LearnHooks* hooks,
                        UpdateCounters& counters);
    void update_actors(bool done, const LearnHooks* hooks,
                       UpdateCounters& counters);
    void update_terminations(int s_next, int omega_depth,
                             const LearnHooks* hooks, UpdateCounters& counters);

    Network net_;
    std::vector<std::vector<double>> q_;  // per option: n_states * n_children
    Hyperparams hyper_;
    bool legacy_;
    std::vector<double> target_buf_;  // per-depth critic targets
    std::vector<double> value_buf_;   // per-depth termination baselines
    std::vector<double> disc_buf_;    // per-option gamma^(t - activation - 1)
};

}  // namespace coagent
