#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coagent/harness.hpp"

using namespace coagent;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

ExperimentConfig small_config(const std::string& out) {
    ExperimentConfig config;
    config.topology = Topology::fon;
    config.layers = {1, 1};
    config.episodes = 40;
    config.seeds = {0, 1};
    config.t_max = 400;
    config.ma_window = 10;
    config.output_dir = out;
    return config;
}

}  // namespace

TEST_CASE("moving average basics") {
    CHECK(moving_average({5, 5, 5, 5}, 2) ==
          std::vector<double>{5, 5, 5});
    CHECK(moving_average({1, 2, 3}, 1) == std::vector<double>{1, 2, 3});
    CHECK(moving_average({1, 2}, 5).empty());
    CHECK_THROWS_AS(moving_average({1.0}, 0), std::invalid_argument);

    std::vector<double> ramp(1000);
    for (int i = 0; i < 1000; ++i) ramp[i] = i + 1;
    const auto ma = moving_average(ramp, 500);
    REQUIRE(ma.size() == 501);
    CHECK(ma[0] == doctest::Approx(250.5));  // mean of 1..500
    CHECK(ma.back() == doctest::Approx(750.5));
}

TEST_CASE("option length series carries the last value forward") {
    const double nan = std::nan("");
    const auto series = option_length_series({nan, 3.0, nan, nan, 7.0, nan});
    CHECK(series == std::vector<double>{0.0, 3.0, 3.0, 3.0, 7.0, 7.0});
}

TEST_CASE("config JSON mirrors the struct field for field") {
    ExperimentConfig config = small_config("somewhere");
    config.topology = Topology::hoc;
    config.layers = {1, 2, 2};
    config.legacy_update_mode = true;
    config.hyper.tau_beta = 0.05;
    const auto restored = config_from_json(config_to_json(config));
    CHECK(restored.topology == config.topology);
    CHECK(restored.layers == config.layers);
    CHECK(restored.episodes == config.episodes);
    CHECK(restored.seeds == config.seeds);
    CHECK(restored.t_max == config.t_max);
    CHECK(restored.legacy_update_mode == config.legacy_update_mode);
    CHECK(restored.output_dir == config.output_dir);
    CHECK(restored.ma_window == config.ma_window);
    CHECK(restored.hyper.tau_beta == config.hyper.tau_beta);
    CHECK(restored.hyper.alpha_pi == config.hyper.alpha_pi);
}

TEST_CASE("config validation rejects inconsistent settings") {
    auto config = small_config("out");
    config.seeds.clear();
    CHECK_THROWS(validate_config(config));
    config = small_config("out");
    config.episodes = 5;  // below the window
    CHECK_THROWS(validate_config(config));
    config = small_config("out");
    config.layers = {2, 1};
    CHECK_THROWS(validate_config(config));
}

TEST_CASE("experiments are reproducible byte for byte") {
    const fs::path base = fs::temp_directory_path() / "coagent_harness_test";
    fs::remove_all(base);
    const auto dir_a = (base / "a").string();
    const auto dir_b = (base / "b").string();

    auto config = small_config(dir_a);
    const auto result_a = run_experiment(config);
    config.output_dir = dir_b;
    const auto result_b = run_experiment(config);

    REQUIRE(result_a.records.size() == 2);
    REQUIRE(result_a.failed_runs.empty());
    for (const char* name : {"run_0.csv", "run_1.csv", "agg.csv",
                             "counters_0.csv", "counters_1.csv"})
        CHECK(slurp(fs::path(dir_a) / name) == slurp(fs::path(dir_b) / name));

    // run CSV: one row per episode plus the header
    const std::string run_csv = slurp(fs::path(dir_a) / "run_0.csv");
    CHECK(std::count(run_csv.begin(), run_csv.end(), '\n') == 41);
    CHECK(run_csv.rfind("episode,steps,discounted_return,opt0_len,opt1_len",
                        0) == 0);

    // aggregate CSV: episodes - window + 1 rows plus the header
    const std::string agg_csv = slurp(fs::path(dir_a) / "agg.csv");
    CHECK(std::count(agg_csv.begin(), agg_csv.end(), '\n') == 32);

    // records round-trip through the CSV loader
    const auto loaded = load_run_records(dir_a);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].steps == result_a.records[0].steps);
    CHECK(loaded[0].option_length == result_a.records[0].option_length);
    CHECK(loaded[1].discounted_return == result_a.records[1].discounted_return);

    fs::remove_all(base);
}

TEST_CASE("comparisons: identical sets tie, missing horizons are rejected") {
    const fs::path base = fs::temp_directory_path() / "coagent_compare_test";
    fs::remove_all(base);
    auto config = small_config((base / "x").string());
    config.seeds = {0, 1, 2};
    const auto result = run_experiment(config);
    REQUIRE(result.records.size() == 3);

    const auto tie = compare_runs(result.records, result.records, "steps",
                                  config.episodes, config.ma_window);
    CHECK(tie.verdict == "tie");
    CHECK(tie.diff == 0.0);
    const std::string json = tie.to_json();
    CHECK(json.find("verdict") != std::string::npos);

    CHECK_THROWS_AS(compare_runs(result.records, result.records, "steps", 1000,
                                 config.ma_window),
                    std::invalid_argument);
    CHECK_THROWS_AS(compare_runs(result.records, result.records, "nonsense",
                                 config.episodes, config.ma_window),
                    std::invalid_argument);
    fs::remove_all(base);
}

TEST_CASE("run failures surface the offending path instead of aborting") {
    const fs::path base = fs::temp_directory_path() / "coagent_io_test";
    fs::remove_all(base);
    fs::create_directories(base);
    std::ofstream(base / "blocker") << "not a directory";
    auto config = small_config((base / "blocker" / "out").string());
    CHECK_THROWS_WITH_AS(run_experiment(config),
                         doctest::Contains("blocker"), std::runtime_error);
    fs::remove_all(base);
}
