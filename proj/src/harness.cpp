#include "coagent/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "coagent/four_rooms.hpp"

namespace coagent {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int worker_count(int n_runs) {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("COAGENT_THREADS")) {
        const int k = std::atoi(env);
        if (k > 0) n = k;
    }
    return std::min(n, n_runs);
}

void write_run_csv(const std::string& dir, const RunRecord& record) {
    const std::string path = dir + "/run_" + std::to_string(record.seed) + ".csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "episode,steps,discounted_return";
    for (std::size_t o = 0; o < record.option_length.size(); ++o)
        out << ",opt" << o << "_len";
    out << "\n";
    for (std::size_t ep = 0; ep < record.steps.size(); ++ep) {
        out << ep + 1 << "," << record.steps[ep] << ","
            << format_double(record.discounted_return[ep]);
        for (const auto& series : record.option_length)
            out << "," << format_double(series[ep]);
        out << "\n";
    }
}

void write_counters_csv(const std::string& dir, const RunRecord& record) {
    const std::string path =
        dir + "/counters_" + std::to_string(record.seed) + ".csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "episode,actor_updates,critic_updates,termination_updates\n";
    for (std::size_t ep = 0; ep < record.actor_updates.size(); ++ep)
        out << ep + 1 << "," << record.actor_updates[ep] << ","
            << record.critic_updates[ep] << ","
            << record.termination_updates[ep] << "\n";
}

void write_agg_csv(const std::string& dir,
                   const std::vector<RunRecord>& records, int window) {
    const std::string path = dir + "/agg.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "episode,median_steps_ma,mean_steps_ma,q25,q75\n";
    if (records.empty()) return;
    std::vector<std::vector<double>> mas;
    for (const auto& record : records) {
        std::vector<double> steps(record.steps.begin(), record.steps.end());
        mas.push_back(moving_average(steps, window));
    }
    const std::size_t rows = mas.front().size();
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<double> at;
        at.reserve(mas.size());
        for (const auto& ma : mas) at.push_back(ma[i]);
        double mean = 0.0;
        for (double v : at) mean += v;
        mean /= static_cast<double>(at.size());
        out << window + i << "," << format_double(median(at)) << ","
            << format_double(mean) << "," << format_double(quantile(at, 0.25))
            << "," << format_double(quantile(at, 0.75)) << "\n";
    }
}

RunRecord run_single(const ExperimentConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    FourRooms env;
    NetworkSpec spec{config.topology, config.layers, env.n_actions()};
    Learner learner(spec, env.n_states(), config.hyper,
                    config.legacy_update_mode);
    const int n_options = learner.network().n_options();

    RunRecord record;
    record.seed = seed;
    record.steps.reserve(config.episodes);
    record.discounted_return.reserve(config.episodes);
    std::vector<std::vector<double>> raw(
        n_options, std::vector<double>());
    for (auto& r : raw) r.reserve(config.episodes);
    record.actor_updates.reserve(config.episodes);

    for (int ep = 0; ep < config.episodes; ++ep) {
        const EpisodeStats stats =
            learner.learn_episode(env, config.t_max, rng);
        record.steps.push_back(stats.steps);
        record.discounted_return.push_back(stats.discounted_return);
        record.actor_updates.push_back(stats.counters.actor_updates);
        record.critic_updates.push_back(stats.counters.critic_updates);
        record.termination_updates.push_back(stats.counters.termination_updates);
        for (int o = 0; o < n_options; ++o) {
            const auto& lengths = stats.completed_lengths[o];
            if (lengths.empty()) {
                raw[o].push_back(std::nan(""));
            } else {
                double sum = 0.0;
                for (int len : lengths) sum += len;
                raw[o].push_back(sum / static_cast<double>(lengths.size()));
            }
        }
    }
    record.option_length.reserve(n_options);
    for (const auto& r : raw) record.option_length.push_back(option_length_series(r));
    return record;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) {
    nlohmann::json j;
    j["topology"] = topology_name(config.topology);
    j["layers"] = config.layers;
    j["episodes"] = config.episodes;
    j["seeds"] = config.seeds;
    j["hyper"] = {{"gamma", config.hyper.gamma},
                  {"alpha_q", config.hyper.alpha_q},
                  {"alpha_pi", config.hyper.alpha_pi},
                  {"alpha_beta", config.hyper.alpha_beta},
                  {"tau_pi", config.hyper.tau_pi},
                  {"tau_beta", config.hyper.tau_beta}};
    j["t_max"] = config.t_max;
    j["legacy_update_mode"] = config.legacy_update_mode;
    j["output_dir"] = config.output_dir;
    j["ma_window"] = config.ma_window;
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ExperimentConfig config;
    if (j.contains("topology"))
        config.topology = topology_from_name(j.at("topology").get<std::string>());
    if (j.contains("layers")) config.layers = j.at("layers").get<std::vector<int>>();
    if (j.contains("episodes")) config.episodes = j.at("episodes").get<int>();
    if (j.contains("seeds"))
        config.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("hyper")) {
        const auto& h = j.at("hyper");
        if (h.contains("gamma")) config.hyper.gamma = h.at("gamma").get<double>();
        if (h.contains("alpha_q")) config.hyper.alpha_q = h.at("alpha_q").get<double>();
        if (h.contains("alpha_pi")) config.hyper.alpha_pi = h.at("alpha_pi").get<double>();
        if (h.contains("alpha_beta"))
            config.hyper.alpha_beta = h.at("alpha_beta").get<double>();
        if (h.contains("tau_pi")) config.hyper.tau_pi = h.at("tau_pi").get<double>();
        if (h.contains("tau_beta"))
            config.hyper.tau_beta = h.at("tau_beta").get<double>();
    }
    if (j.contains("t_max")) config.t_max = j.at("t_max").get<int>();
    if (j.contains("legacy_update_mode"))
        config.legacy_update_mode = j.at("legacy_update_mode").get<bool>();
    if (j.contains("output_dir"))
        config.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("ma_window")) config.ma_window = j.at("ma_window").get<int>();
    return config;
}

void validate_config(const ExperimentConfig& config) {
    if (config.seeds.empty())
        throw std::invalid_argument("config needs at least one seed");
    if (config.episodes < config.ma_window)
        throw std::invalid_argument(
            "episodes must be at least the moving-average window");
    if (config.t_max < 1) throw std::invalid_argument("t_max must be positive");
    if (config.hyper.gamma < 0.0 || config.hyper.gamma > 1.0)
        throw std::invalid_argument("gamma outside [0,1]");
    // layer/topology constraints surface through network construction
    NetworkSpec spec{config.topology, config.layers, 4};
    (void)Network(spec, 1, config.hyper.tau_pi, config.hyper.tau_beta);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    validate_config(config);
    if (!config.output_dir.empty()) {
        std::error_code ec;
        fs::create_directories(config.output_dir, ec);
        if (ec)
            throw std::runtime_error("cannot create output directory " +
                                     config.output_dir + ": " + ec.message());
        std::ofstream cfg(config.output_dir + "/config.json");
        if (!cfg)
            throw std::runtime_error("cannot write " + config.output_dir +
                                     "/config.json");
        cfg << config_to_json(config) << "\n";
    }

    const int n_runs = static_cast<int>(config.seeds.size());
    std::vector<RunRecord> slots(n_runs);
    std::vector<std::string> errors(n_runs);
    std::atomic<int> next{0};

    auto work = [&] {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n_runs) return;
            try {
                slots[i] = run_single(config, config.seeds[i]);
                if (!config.output_dir.empty()) {
                    write_run_csv(config.output_dir, slots[i]);
                    write_counters_csv(config.output_dir, slots[i]);
                }
            } catch (const std::exception& e) {
                errors[i] = std::to_string(config.seeds[i]) + ": " + e.what();
            }
        }
    };
    const int n_workers = worker_count(n_runs);
    std::vector<std::thread> pool;
    for (int i = 1; i < n_workers; ++i) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    ExperimentResult result;
    for (int i = 0; i < n_runs; ++i) {
        if (errors[i].empty())
            result.records.push_back(std::move(slots[i]));
        else
            result.failed_runs.push_back(errors[i]);
    }
    if (!config.output_dir.empty() && !result.records.empty())
        write_agg_csv(config.output_dir, result.records, config.ma_window);
    return result;
}

std::vector<double> moving_average(const std::vector<double>& series,
                                   int window) {
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    std::vector<double> out;
    if (static_cast<int>(series.size()) < window) return out;
    out.reserve(series.size() - window + 1);
    double sum = 0.0;
    for (int i = 0; i < window; ++i) sum += series[i];
    out.push_back(sum / window);
    for (std::size_t i = window; i < series.size(); ++i) {
        sum += series[i] - series[i - window];
        out.push_back(sum / window);
    }
    return out;
}

std::vector<double> option_length_series(const std::vector<double>& raw_means) {
    std::vector<double> out;
    out.reserve(raw_means.size());
    double last = 0.0;
    for (double v : raw_means) {
        if (!std::isnan(v)) last = v;
        out.push_back(last);
    }
    return out;
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile of empty set");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - lo) * (values[lo + 1] - values[lo]);
}

CompareReport compare_runs(const std::vector<RunRecord>& a,
                           const std::vector<RunRecord>& b,
                           const std::string& metric, int horizon, int window,
                           std::uint64_t bootstrap_seed) {
    if (metric != "steps" && metric != "return")
        throw std::invalid_argument("unknown metric: " + metric);
    if (a.empty() || b.empty())
        throw std::invalid_argument("empty record set");
    if (horizon < window)
        throw std::invalid_argument("horizon shorter than the window");

    auto values_at = [&](const std::vector<RunRecord>& records) {
        std::vector<double> out;
        for (const auto& record : records) {
            if (static_cast<int>(record.steps.size()) < horizon)
                throw std::invalid_argument(
                    "record does not reach the requested horizon");
            std::vector<double> series;
            series.reserve(record.steps.size());
            if (metric == "steps")
                series.assign(record.steps.begin(), record.steps.end());
            else
                series = record.discounted_return;
            const auto ma = moving_average(series, window);
            out.push_back(ma[horizon - window]);
        }
        return out;
    };

    const std::vector<double> va = values_at(a);
    const std::vector<double> vb = values_at(b);

    CompareReport report;
    report.metric = metric;
    report.horizon = horizon;
    report.metric_a = median(va);
    report.metric_b = median(vb);
    report.diff = report.metric_a - report.metric_b;

    constexpr int kBootstrap = 10000;
    Rng rng(bootstrap_seed);
    std::vector<double> diffs;
    diffs.reserve(kBootstrap);
    std::vector<double> ra(va.size()), rb(vb.size());
    for (int i = 0; i < kBootstrap; ++i) {
        for (auto& v : ra) v = va[rng.uniform_int(static_cast<int>(va.size()))];
        for (auto& v : rb) v = vb[rng.uniform_int(static_cast<int>(vb.size()))];
        diffs.push_back(median(ra) - median(rb));
    }
    report.ci_low = quantile(diffs, 0.025);
    report.ci_high = quantile(diffs, 0.975);

    const bool lower_better = metric == "steps";
    if (report.ci_high < 0.0)
        report.verdict = lower_better ? "A" : "B";
    else if (report.ci_low > 0.0)
        report.verdict = lower_better ? "B" : "A";
    else
        report.verdict = "tie";
    return report;
}

std::string CompareReport::to_json() const {
    nlohmann::json j;
    j["metric"] = metric;
    j["horizon"] = horizon;
    j["median_a"] = metric_a;
    j["median_b"] = metric_b;
    j["diff"] = diff;
    j["ci95"] = {ci_low, ci_high};
    j["verdict"] = verdict;
    return j.dump(2);
}

std::vector<RunRecord> load_run_records(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("run_", 0) == 0 && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw std::runtime_error("no run_*.csv files under " + dir);

    std::vector<RunRecord> records;
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) throw std::runtime_error("cannot read " + file.string());
        RunRecord record;
        const std::string stem = file.stem().string();
        record.seed = std::stoull(stem.substr(4));
        std::string line;
        std::getline(in, line);  // header
        const auto n_opts =
            std::count(line.begin(), line.end(), ',') >= 2
                ? static_cast<std::size_t>(
                      std::count(line.begin(), line.end(), ',') - 2)
                : 0;
        record.option_length.resize(n_opts);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream row(line);
            std::string field;
            std::getline(row, field, ',');  // episode
            std::getline(row, field, ',');
            record.steps.push_back(std::stoi(field));
            std::getline(row, field, ',');
            record.discounted_return.push_back(std::stod(field));
            for (std::size_t o = 0; o < n_opts; ++o) {
                std::getline(row, field, ',');
                record.option_length[o].push_back(std::stod(field));
            }
        }
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace coagent
