#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "coagent/graph.hpp"
#include "coagent/harness.hpp"
#include "coagent/verification.hpp"

namespace {

std::vector<int> parse_layers(const std::string& text) {
    std::vector<int> layers;
    std::stringstream in(text);
    std::string field;
    while (std::getline(in, field, ',')) layers.push_back(std::stoi(field));
    return layers;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream in(text);
    std::string field;
    while (std::getline(in, field, ',')) seeds.push_back(std::stoull(field));
    return seeds;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular hierarchical-option reinforcement learning toolkit"};
    app.require_subcommand(1);

    // ---- run ----------------------------------------------------------------
    auto* run = app.add_subcommand("run", "Run a Four Rooms experiment");
    std::string config_path, out_dir, topology, layers_text, seeds_text;
    double temp_beta = -1, temp_pi = -1, lr_q = -1, lr_pi = -1, lr_beta = -1,
           gamma = -1;
    int episodes = -1, t_max = -1, ma_window = -1;
    bool legacy = false, long_mode = false;
    run->add_option("--config", config_path, "Experiment config JSON");
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--seeds", seeds_text, "Comma-separated seed list");
    run->add_option("--episodes", episodes, "Episodes per run");
    run->add_option("--topology", topology, "hoc or fon");
    run->add_option("--layers", layers_text, "Layer sizes, e.g. \"1,2,2\"");
    run->add_option("--temp-beta", temp_beta, "Termination temperature");
    run->add_option("--temp-pi", temp_pi, "Actor temperature");
    run->add_option("--lr-q", lr_q, "Critic learning rate");
    run->add_option("--lr-pi", lr_pi, "Actor learning rate");
    run->add_option("--lr-beta", lr_beta, "Termination learning rate");
    run->add_option("--gamma", gamma, "Discount factor");
    run->add_option("--t-max", t_max, "Episode step cap");
    run->add_option("--ma-window", ma_window, "Moving-average window");
    run->add_flag("--legacy-updates", legacy,
                  "Update every option on the path at every step");
    run->add_flag("--long-mode", long_mode,
                  "Single-seed 500000-episode stability protocol");

    // ---- verify -------------------------------------------------------------
    auto* verify = app.add_subcommand(
        "verify", "Run the exact-gradient verification suite");
    std::string report_path;
    int theta_draws = 5;
    verify->add_option("--json", report_path, "Write results as JSON");
    verify->add_option("--draws", theta_draws, "Random parameter draws per case");

    // ---- compare ------------------------------------------------------------
    auto* compare = app.add_subcommand("compare", "Compare two run directories");
    std::string dir_a, dir_b, metric = "steps";
    int horizon = 50000, window = 500;
    compare->add_option("--a", dir_a, "First run directory")->required();
    compare->add_option("--b", dir_b, "Second run directory")->required();
    compare->add_option("--metric", metric, "steps or return");
    compare->add_option("--horizon", horizon, "Episode horizon")->required();
    compare->add_option("--window", window, "Moving-average window");

    // ---- graph-dot ----------------------------------------------------------
    auto* graph = app.add_subcommand("graph-dot",
                                     "Print the coagent graph in DOT format");
    std::string g_topology = "hoc", g_layers = "1,2,2", g_out;
    graph->add_option("--topology", g_topology, "hoc or fon");
    graph->add_option("--layers", g_layers, "Layer sizes");
    graph->add_option("--out", g_out, "Output file (stdout when omitted)");

    // ---- dump-fixtures --------------------------------------------------------
    auto* dump = app.add_subcommand("dump-fixtures",
                                    "Write the bundled verification fixtures");
    std::string fixture_dir = "fixtures";
    dump->add_option("--out", fixture_dir, "Target directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            coagent::ExperimentConfig config;
            if (!config_path.empty())
                config = coagent::config_from_json(read_file(config_path));
            if (!topology.empty())
                config.topology = coagent::topology_from_name(topology);
            if (!layers_text.empty()) config.layers = parse_layers(layers_text);
            if (!seeds_text.empty()) config.seeds = parse_seeds(seeds_text);
            if (episodes > 0) config.episodes = episodes;
            if (t_max > 0) config.t_max = t_max;
            if (ma_window > 0) config.ma_window = ma_window;
            if (temp_beta > 0) config.hyper.tau_beta = temp_beta;
            if (temp_pi > 0) config.hyper.tau_pi = temp_pi;
            if (lr_q > 0) config.hyper.alpha_q = lr_q;
            if (lr_pi > 0) config.hyper.alpha_pi = lr_pi;
            if (lr_beta > 0) config.hyper.alpha_beta = lr_beta;
            if (gamma >= 0) config.hyper.gamma = gamma;
            if (legacy) config.legacy_update_mode = true;
            if (long_mode) {
                config.seeds.resize(1);
                if (episodes <= 0) config.episodes = 500000;
            }
            if (!out_dir.empty()) config.output_dir = out_dir;
            if (config.output_dir.empty())
                throw std::runtime_error("an output directory is required "
                                         "(--out or output_dir in the config)");

            const auto result = coagent::run_experiment(config);
            std::cout << "completed " << result.records.size() << "/"
                      << config.seeds.size() << " runs -> "
                      << config.output_dir << "\n";
            for (const auto& failure : result.failed_runs)
                std::cerr << "run failed: " << failure << "\n";
            return result.failed_runs.empty() ? 0 : 1;
        }

        if (*verify) {
            coagent::oracle::VerificationOptions opts;
            opts.theta_draws = theta_draws;
            const auto results = coagent::oracle::run_verification(opts);
            bool ok = true;
            for (const auto& r : results) {
                std::printf("[%s] %-45s %.3e (tol %.1e)\n",
                            r.pass ? "PASS" : "FAIL", r.name.c_str(), r.value,
                            r.tolerance);
                ok = ok && r.pass;
            }
            if (!report_path.empty()) {
                std::ofstream out(report_path);
                out << "[\n";
                for (std::size_t i = 0; i < results.size(); ++i) {
                    out << "  {\"name\": \"" << results[i].name
                        << "\", \"value\": " << results[i].value
                        << ", \"tolerance\": " << results[i].tolerance
                        << ", \"pass\": " << (results[i].pass ? "true" : "false")
                        << "}" << (i + 1 < results.size() ? "," : "") << "\n";
                }
                out << "]\n";
            }
            return ok ? 0 : 1;
        }

        if (*compare) {
            const auto records_a = coagent::load_run_records(dir_a);
            const auto records_b = coagent::load_run_records(dir_b);
            const auto report = coagent::compare_runs(records_a, records_b,
                                                      metric, horizon, window);
            std::cout << report.to_json() << "\n";
            return 0;
        }

        if (*graph) {
            coagent::NetworkSpec spec{coagent::topology_from_name(g_topology),
                                      parse_layers(g_layers), 4};
            const auto g = coagent::build_graph(spec);
            if (auto violation = coagent::validate_graph(g, spec))
                throw std::runtime_error("invalid graph: " + *violation);
            const std::string dot = coagent::graph_to_dot(g, spec);
            if (g_out.empty()) {
                std::cout << dot;
            } else {
                std::ofstream out(g_out);
                if (!out) throw std::runtime_error("cannot write " + g_out);
                out << dot;
            }
            return 0;
        }

        if (*dump) {
            std::filesystem::create_directories(fixture_dir);
            coagent::mdp_save(coagent::oracle::fixture_3state(),
                              fixture_dir + "/mdp_3state.json");
            coagent::mdp_save(coagent::oracle::fixture_5state(),
                              fixture_dir + "/mdp_5state.json");
            std::cout << "wrote fixtures to " << fixture_dir << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
