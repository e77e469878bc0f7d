#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coagent/exact_values.hpp"
#include "coagent/finite_mdp.hpp"
#include "coagent/option_net.hpp"

namespace coagent::oracle {

/**
 * Flat parameter vector over all network logits. Options can share blocks
 * (tied tables), in which case gradient contributions from every user of a
 * block accumulate into the same positions.
 */
class ParamLayout {
public:
    explicit ParamLayout(const Network& net);

    /// Makes every listed option use the first one's policy block. Tables
    /// must have matching shapes. Call before using positions.
    void tie_policies(const std::vector<int>& options);
    void tie_terminations(const std::vector<int>& options);

    int dim() const { return dim_; }
    int policy_pos(int opt, int state, int child) const;
    /// -1 for the root, which has no termination parameters.
    int termination_pos(int opt, int state) const;

    /// Writes theta into the network's tables.
    void materialize(const Eigen::VectorXd& theta, Network& net) const;
    /// Reads the network's tables into a theta vector.
    Eigen::VectorXd extract(const Network& net) const;

    Eigen::VectorXd random_theta(Rng& rng, double scale = 1.0) const;

    /// "pi[3]@(s=2,a=0)"-style label per coordinate, for reports.
    std::vector<std::string> labels(const Network& net) const;

private:
    void rebuild_offsets();

    int n_states_;
    std::vector<int> policy_block_;       // per option
    std::vector<int> term_block_;         // per option; -1 for the root
    std::vector<int> policy_width_;       // children per option
    std::vector<int> block_size_;         // per block id
    std::vector<int> block_offset_;
    int dim_ = 0;
};

/// Exact policy gradient by enumerating execution paths at every reachable
/// decision point and applying the product rule across each path.
Eigen::VectorXd path_gradient(const Network& base, const ParamLayout& layout,
                              const Eigen::VectorXd& theta,
                              const FiniteMdpSpec& mdp);

/// Exact policy gradient as a sum over coagents: discounted reach
/// probabilities times each coagent's own all-action gradient against its
/// action values from the Bellman system.
Eigen::VectorXd coagent_sum_gradient(const Network& base,
                                     const ParamLayout& layout,
                                     const Eigen::VectorXd& theta,
                                     const FiniteMdpSpec& mdp);

/// Exact policy gradient assembled from the hierarchical decomposition:
/// bottom-policy term under the discounted bottom occupancy, termination
/// terms with cascade-probability weights and continue/terminate advantages,
/// reselection terms through the same-level cascade kernel, plus the initial
/// descent. HOC networks only.
Eigen::VectorXd hierarchical_gradient(const Network& base,
                                      const ParamLayout& layout,
                                      const Eigen::VectorXd& theta,
                                      const FiniteMdpSpec& mdp);

/// Central finite differences of the exact expected return.
Eigen::VectorXd finite_difference_gradient(const Network& base,
                                           const ParamLayout& layout,
                                           const Eigen::VectorXd& theta,
                                           const FiniteMdpSpec& mdp, double eps,
                                           std::string* warning = nullptr);

struct GradientReport {
    std::vector<std::string> labels;
    Eigen::VectorXd full;
    Eigen::VectorXd coagent_sum;
    std::optional<Eigen::VectorXd> hocpgt;  // HOC networks only
    Eigen::VectorXd fd;
    double dev_full_vs_coagent = 0.0;
    double dev_full_vs_hocpgt = 0.0;
    double dev_full_vs_fd = 0.0;      // absolute
    double rel_dev_full_vs_fd = 0.0;  // scaled by max(1, |grad|_inf)

    std::string to_json() const;
};

GradientReport gradient_report(const Network& base, const ParamLayout& layout,
                               const Eigen::VectorXd& theta,
                               const FiniteMdpSpec& mdp, double fd_eps = 1e-5);

}  // namespace coagent::oracle
