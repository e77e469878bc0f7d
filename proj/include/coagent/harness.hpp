#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coagent/learner.hpp"
#include "coagent/option_net.hpp"

namespace coagent {

struct ExperimentConfig {
    Topology topology = Topology::fon;
    std::vector<int> layers = {1, 1};
    int episodes = 50000;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    Hyperparams hyper;
    int t_max = 5000;
    bool legacy_update_mode = false;
    std::string output_dir;
    int ma_window = 500;
};

std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);
void validate_config(const ExperimentConfig& config);

struct RunRecord {
    std::uint64_t seed = 0;
    std::vector<int> steps;                          // per episode
    std::vector<double> discounted_return;           // per episode
    std::vector<std::vector<double>> option_length;  // [option][episode]
    std::vector<long> actor_updates;                 // per episode
    std::vector<long> critic_updates;
    std::vector<long> termination_updates;
};

struct ExperimentResult {
    std::vector<RunRecord> records;          // successful runs, seed order
    std::vector<std::string> failed_runs;    // "seed: what()" for the rest
};

/// One independent learner per seed, executed on a bounded worker pool
/// (COAGENT_THREADS caps it). Failures in one run do not abort siblings.
/// When output_dir is set, writes run_<seed>.csv, counters_<seed>.csv,
/// agg.csv and config.json under it.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Trailing mean over `window` entries; defined from index window-1 on,
/// earlier entries omitted (empty result when window exceeds the length).
std::vector<double> moving_average(const std::vector<double>& series,
                                   int window);

/// Per-episode mean completed activation length with empty episodes carrying
/// the previous value forward (0 before any data). Input uses NaN for
/// episodes without a completed activation.
std::vector<double> option_length_series(const std::vector<double>& raw_means);

struct CompareReport {
    std::string metric;
    int horizon = 0;
    double metric_a = 0.0;  // median over seeds at the horizon
    double metric_b = 0.0;
    double diff = 0.0;      // a - b
    double ci_low = 0.0;    // bootstrap 95% interval of the median difference
    double ci_high = 0.0;
    std::string verdict;    // "A", "B" or "tie"

    std::string to_json() const;
};

/// Compares two record sets on a metric ("steps" or "return", moving
/// averaged) at an episode horizon. Lower is better for steps, higher for
/// return. Record sets must cover the horizon.
CompareReport compare_runs(const std::vector<RunRecord>& a,
                           const std::vector<RunRecord>& b,
                           const std::string& metric, int horizon,
                           int window = 500, std::uint64_t bootstrap_seed = 99);

/// Loads all run_*.csv files from an experiment output directory.
std::vector<RunRecord> load_run_records(const std::string& dir);

double median(std::vector<double> values);
double quantile(std::vector<double> values, double p);

}  // namespace coagent
