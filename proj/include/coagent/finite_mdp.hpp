#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coagent/rng.hpp"

namespace coagent {

/**
 * Explicit finite MDP: transition tensor P(s'|s,a), reward map (s,a,s') -> r,
 * discount factor and initial state distribution. Small enough to be solved
 * exactly; used as the substrate for the gradient oracle and as test fixtures.
 */
struct FiniteMdpSpec {
    int n_states = 0;
    int n_actions = 0;
    // transition[s][a][s'], each row a distribution over s'
    std::vector<std::vector<std::vector<double>>> transition;
    // reward[s][a][s']
    std::vector<std::vector<std::vector<double>>> reward;
    double gamma = 0.0;
    std::vector<double> init_dist;

    double expected_reward(int s, int a) const;

    bool operator==(const FiniteMdpSpec&) const = default;
};

/// Returns std::nullopt when all invariants hold, otherwise a description
/// naming the first offending row or field.
std::optional<std::string> mdp_validate(const FiniteMdpSpec& spec);

/// Throwing variant of mdp_validate.
void mdp_validate_or_throw(const FiniteMdpSpec& spec);

std::string mdp_to_json(const FiniteMdpSpec& spec);
FiniteMdpSpec mdp_from_json(const std::string& text);
FiniteMdpSpec mdp_load(const std::string& path);
void mdp_save(const FiniteMdpSpec& spec, const std::string& path);

/// Dense random MDP with normalized rows and rewards in [0,1]; deterministic
/// in the seed. Used to build the bundled oracle fixtures.
FiniteMdpSpec make_random_mdp(int n_states, int n_actions, std::uint64_t seed,
                              double gamma = 0.9);

struct StepResult {
    int next = 0;
    double reward = 0.0;
    bool done = false;
};

/// Single-owner, single-threaded episodic environment.
class Environment {
public:
    virtual ~Environment() = default;
    virtual int n_states() const = 0;
    virtual int n_actions() const = 0;
    /// Starts an episode; returns the initial observation.
    virtual int reset(Rng& rng) = 0;
    virtual StepResult step(int state, int action, Rng& rng) = 0;
};

/// Environment adapter over a FiniteMdpSpec (episodes never terminate on
/// their own; callers cap them).
class FiniteMdpEnv final : public Environment {
public:
    explicit FiniteMdpEnv(FiniteMdpSpec spec);

    int n_states() const override { return spec_.n_states; }
    int n_actions() const override { return spec_.n_actions; }
    int reset(Rng& rng) override;
    StepResult step(int state, int action, Rng& rng) override;

    const FiniteMdpSpec& spec() const { return spec_; }

private:
    FiniteMdpSpec spec_;
};

}  // namespace coagent
