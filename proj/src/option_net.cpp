#include "coagent/option_net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace coagent {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

int NetworkSpec::option_count() const {
    int total = 0;
    if (topology == Topology::hoc) {
        int level = 1;
        for (int m : layers) {
            level *= m;
            total += level;
        }
    } else {
        for (int m : layers) total += m;
    }
    return total;
}

std::string topology_name(Topology t) {
    return t == Topology::hoc ? "hoc" : "fon";
}

Topology topology_from_name(const std::string& name) {
    if (name == "hoc") return Topology::hoc;
    if (name == "fon") return Topology::fon;
    throw std::invalid_argument("unknown topology: " + name);
}

Network::Network(NetworkSpec spec, int n_states, double tau_pi, double tau_beta)
    : spec_(std::move(spec)), n_states_(n_states), tau_pi_(tau_pi),
      tau_beta_(tau_beta) {
    if (spec_.layers.empty())
        throw std::invalid_argument("layer list must not be empty");
    if (spec_.layers.front() != 1)
        throw std::invalid_argument("the first layer must hold exactly one option");
    for (int m : spec_.layers)
        if (m < 1) throw std::invalid_argument("layer sizes must be positive");
    if (spec_.n_primitive < 1)
        throw std::invalid_argument("need at least one primitive action");
    if (tau_pi_ <= 0.0 || tau_beta_ <= 0.0)
        throw std::invalid_argument("temperatures must be positive");

    const int n_levels = spec_.depth();
    level_ids_.resize(n_levels);
    // children per option at each level: next layer's width, primitives at the bottom
    auto children_at = [&](int level) {
        return level == n_levels - 1 ? spec_.n_primitive : spec_.layers[level + 1];
    };

    if (spec_.topology == Topology::hoc) {
        // breadth-first over the tree; addresses are child-index sequences
        options_.push_back({});
        level_ids_[0] = {0};
        for (int level = 1; level < n_levels; ++level) {
            for (int parent : level_ids_[level - 1]) {
                for (int c = 0; c < spec_.layers[level]; ++c) {
                    OptionNode node;
                    node.address = options_[parent].address;
                    node.address.push_back(c);
                    node.level = level;
                    node.level_pos = static_cast<int>(level_ids_[level].size());
                    node.tree_parent = parent;
                    const int id = static_cast<int>(options_.size());
                    options_.push_back(std::move(node));
                    level_ids_[level].push_back(id);
                }
            }
        }
    } else {
        for (int level = 0; level < n_levels; ++level) {
            for (int i = 0; i < spec_.layers[level]; ++i) {
                OptionNode node;
                if (level > 0) node.address = {i};
                node.level = level;
                node.level_pos = i;
                const int id = static_cast<int>(options_.size());
                options_.push_back(std::move(node));
                level_ids_[level].push_back(id);
            }
        }
    }

    int max_children = 0;
    for (auto& node : options_) {
        node.leaf = node.level == n_levels - 1;
        node.n_children = children_at(node.level);
        node.policy_logits.assign(
            static_cast<std::size_t>(n_states_) * node.n_children, 0.0);
        if (node.level > 0) node.termination_logits.assign(n_states_, 0.0);
        max_children = std::max(max_children, node.n_children);
    }
    weight_buf_.resize(max_children);
    active_path_ = {0};
}

int Network::child_option(int opt, int c) const {
    const OptionNode& node = options_[opt];
    if (spec_.topology == Topology::hoc) {
        // a node's children sit contiguously in the next level's enumeration
        const int width = spec_.layers[node.level + 1];
        return level_ids_[node.level + 1][node.level_pos * width + c];
    }
    return level_ids_[node.level + 1][c];
}

std::vector<double> Network::policy_distribution(int opt, int state) const {
    const OptionNode& node = options_[opt];
    const double* logits = node.policy_logits.data() +
                           static_cast<std::size_t>(state) * node.n_children;
    std::vector<double> probs(node.n_children);
    double hi = logits[0];
    for (int i = 1; i < node.n_children; ++i) hi = std::max(hi, logits[i]);
    double total = 0.0;
    for (int i = 0; i < node.n_children; ++i) {
        probs[i] = std::exp((logits[i] - hi) / tau_pi_);
        total += probs[i];
    }
    for (double& p : probs) p /= total;
    return probs;
}

double Network::termination_prob(int opt, int state) const {
    const OptionNode& node = options_[opt];
    return stable_sigmoid(node.termination_logits[state] / tau_beta_);
}

bool Network::sample_termination(int opt, int state, Rng& rng) {
    if (opt == 0)
        throw std::logic_error("the root has no termination function");
    return rng.bernoulli(termination_prob(opt, state));
}

void Network::begin_episode() {
    for (auto& node : options_) {
        node.activation_time = 0;
        node.reward_acc = 0.0;
        node.last_obs = 0;
        node.prev_action = 0;
        node.terminated = false;
    }
    active_path_ = {0};
}

int Network::choose_primitive_action(int state, int t, Rng& rng,
                                     TraceSink* sink) {
    while (true) {
        const int opt = active_path_.back();
        OptionNode& node = options_[opt];
        node.activation_time = t;
        node.reward_acc = 0.0;
        node.last_obs = state;

        // sample softmax(logits / tau) via unnormalized weights
        const double* logits = node.policy_logits.data() +
                               static_cast<std::size_t>(state) * node.n_children;
        double hi = logits[0];
        for (int i = 1; i < node.n_children; ++i) hi = std::max(hi, logits[i]);
        for (int i = 0; i < node.n_children; ++i)
            weight_buf_[i] = std::exp((logits[i] - hi) / tau_pi_);
        const int c = rng.categorical(
            std::span<const double>(weight_buf_.data(), node.n_children));
        node.prev_action = c;

        if (sink)
            sink->record({{CoagentKind::policy, opt}, state, c}, node.leaf);
        if (node.leaf) return c;
        active_path_.push_back(child_option(opt, c));
    }
}

int Network::termination_cascade(int state, Rng& rng, TraceSink* sink) {
    for (int d = static_cast<int>(active_path_.size()) - 1; d >= 1; --d) {
        const int opt = active_path_[d];
        if (sample_termination(opt, state, rng)) {
            options_[opt].terminated = true;
            if (sink)
                sink->record({{CoagentKind::termination, opt}, state, 1}, false);
        } else {
            if (sink)
                sink->record({{CoagentKind::termination, opt}, state, 0}, false);
            return d;
        }
    }
    // the root is called back; it continues with probability one
    if (sink) sink->record({{CoagentKind::termination, 0}, state, 0}, false);
    return 0;
}

void Network::truncate_active_path(int depth) {
    active_path_.resize(depth + 1);
}

Network init_network(const NetworkSpec& spec, int n_states, double tau_pi,
                     double tau_beta) {
    return Network(spec, n_states, tau_pi, tau_beta);
}

std::string checkpoint_to_json(const Network& net,
                               const std::vector<std::vector<double>>& q_tables) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["spec"] = {{"topology", topology_name(net.spec().topology)},
                 {"layers", net.spec().layers},
                 {"n_primitive", net.spec().n_primitive}};
    j["n_states"] = net.n_states();
    j["tau_pi"] = net.tau_pi();
    j["tau_beta"] = net.tau_beta();
    auto options = nlohmann::json::array();
    for (int i = 0; i < net.n_options(); ++i) {
        const OptionNode& node = net.option(i);
        options.push_back({{"policy_logits", node.policy_logits},
                           {"termination_logits", node.termination_logits}});
    }
    j["options"] = std::move(options);
    j["q_tables"] = q_tables;
    return j.dump();
}

void checkpoint_from_json(const std::string& text, Network& net,
                          std::vector<std::vector<double>>& q_tables) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != 1)
        throw std::runtime_error("unsupported checkpoint schema version");
    NetworkSpec spec;
    spec.topology = topology_from_name(j.at("spec").at("topology").get<std::string>());
    spec.layers = j.at("spec").at("layers").get<std::vector<int>>();
    spec.n_primitive = j.at("spec").at("n_primitive").get<int>();
    net = Network(spec, j.at("n_states").get<int>(), j.at("tau_pi").get<double>(),
                  j.at("tau_beta").get<double>());
    const auto& options = j.at("options");
    if (static_cast<int>(options.size()) != net.n_options())
        throw std::runtime_error("checkpoint option count mismatch");
    for (int i = 0; i < net.n_options(); ++i) {
        net.option(i).policy_logits =
            options[i].at("policy_logits").get<std::vector<double>>();
        net.option(i).termination_logits =
            options[i].at("termination_logits").get<std::vector<double>>();
    }
    q_tables = j.at("q_tables").get<std::vector<std::vector<double>>>();
}

}  // namespace coagent
