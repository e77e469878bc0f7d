#include "coagent/finite_mdp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace coagent {

namespace {
constexpr double kRowSumTol = 1e-12;
}

double FiniteMdpSpec::expected_reward(int s, int a) const {
    double r = 0.0;
    for (int s2 = 0; s2 < n_states; ++s2)
        r += transition[s][a][s2] * reward[s][a][s2];
    return r;
}

std::optional<std::string> mdp_validate(const FiniteMdpSpec& spec) {
    if (spec.n_states <= 0) return "n_states must be positive";
    if (spec.n_actions <= 0) return "n_actions must be positive";
    if (spec.gamma < 0.0 || spec.gamma > 1.0)
        return "gamma " + std::to_string(spec.gamma) + " outside [0,1]";
    if (static_cast<int>(spec.transition.size()) != spec.n_states)
        return "transition tensor has wrong state dimension";
    if (static_cast<int>(spec.reward.size()) != spec.n_states)
        return "reward tensor has wrong state dimension";
    for (int s = 0; s < spec.n_states; ++s) {
        if (static_cast<int>(spec.transition[s].size()) != spec.n_actions)
            return "transition row for state " + std::to_string(s) +
                   " has wrong action dimension";
        if (static_cast<int>(spec.reward[s].size()) != spec.n_actions)
            return "reward row for state " + std::to_string(s) +
                   " has wrong action dimension";
        for (int a = 0; a < spec.n_actions; ++a) {
            const auto& row = spec.transition[s][a];
            if (static_cast<int>(row.size()) != spec.n_states)
                return "transition row (s=" + std::to_string(s) +
                       ",a=" + std::to_string(a) + ") has wrong length";
            if (static_cast<int>(spec.reward[s][a].size()) != spec.n_states)
                return "reward row (s=" + std::to_string(s) +
                       ",a=" + std::to_string(a) + ") has wrong length";
            double sum = 0.0;
            for (double p : row) {
                if (p < 0.0)
                    return "negative transition probability at (s=" +
                           std::to_string(s) + ",a=" + std::to_string(a) + ")";
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTol)
                return "transition row (s=" + std::to_string(s) +
                       ",a=" + std::to_string(a) + ") sums to " +
                       std::to_string(sum);
        }
    }
    if (static_cast<int>(spec.init_dist.size()) != spec.n_states)
        return "init_dist has wrong length";
    double sum = 0.0;
    for (double p : spec.init_dist) {
        if (p < 0.0) return "negative init_dist entry";
        sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
        return "init_dist sums to " + std::to_string(sum);
    return std::nullopt;
}

void mdp_validate_or_throw(const FiniteMdpSpec& spec) {
    if (auto violation = mdp_validate(spec))
        throw std::invalid_argument("invalid MDP: " + *violation);
}

std::string mdp_to_json(const FiniteMdpSpec& spec) {
    nlohmann::json j;
    j["n_states"] = spec.n_states;
    j["n_actions"] = spec.n_actions;
    j["transition"] = spec.transition;
    j["reward"] = spec.reward;
    j["gamma"] = spec.gamma;
    j["init_dist"] = spec.init_dist;
    return j.dump(2);
}

FiniteMdpSpec mdp_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    FiniteMdpSpec spec;
    spec.n_states = j.at("n_states").get<int>();
    spec.n_actions = j.at("n_actions").get<int>();
    spec.transition =
        j.at("transition").get<std::vector<std::vector<std::vector<double>>>>();
    spec.reward =
        j.at("reward").get<std::vector<std::vector<std::vector<double>>>>();
    spec.gamma = j.at("gamma").get<double>();
    spec.init_dist = j.at("init_dist").get<std::vector<double>>();
    return spec;
}

FiniteMdpSpec mdp_load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open MDP file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return mdp_from_json(buf.str());
}

void mdp_save(const FiniteMdpSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write MDP file: " + path);
    out << mdp_to_json(spec) << '\n';
}

FiniteMdpSpec make_random_mdp(int n_states, int n_actions, std::uint64_t seed,
                              double gamma) {
    Rng rng(seed);
    FiniteMdpSpec spec;
    spec.n_states = n_states;
    spec.n_actions = n_actions;
    spec.gamma = gamma;
    spec.transition.assign(
        n_states, std::vector<std::vector<double>>(
                      n_actions, std::vector<double>(n_states, 0.0)));
    spec.reward = spec.transition;
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                // keep rows dense so every state stays reachable
                double w = 0.1 + rng.uniform();
                spec.transition[s][a][s2] = w;
                sum += w;
            }
            for (int s2 = 0; s2 < n_states; ++s2) {
                spec.transition[s][a][s2] /= sum;
                spec.reward[s][a][s2] = rng.uniform();
            }
        }
    }
    spec.init_dist.assign(n_states, 0.0);
    double sum = 0.0;
    for (int s = 0; s < n_states; ++s) {
        spec.init_dist[s] = 0.1 + rng.uniform();
        sum += spec.init_dist[s];
    }
    for (int s = 0; s < n_states; ++s) spec.init_dist[s] /= sum;
    return spec;
}

FiniteMdpEnv::FiniteMdpEnv(FiniteMdpSpec spec) : spec_(std::move(spec)) {
    mdp_validate_or_throw(spec_);
}

int FiniteMdpEnv::reset(Rng& rng) {
    return rng.categorical(spec_.init_dist);
}

StepResult FiniteMdpEnv::step(int state, int action, Rng& rng) {
    const int next = rng.categorical(spec_.transition[state][action]);
    return {next, spec_.reward[state][action][next], false};
}

}  // namespace coagent
