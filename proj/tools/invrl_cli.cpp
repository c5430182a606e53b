#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "invrl/bench.hpp"

using namespace invrl;
using bench::Json;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    int workers = 0;
    double sigma2 = 0.0;
    std::string model;
    std::string transfer;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON config file; omitted keys take their defaults")->check(CLI::ExistingFile);
    app->add_option("--out", c.out, "output directory")->required();
    app->add_option("--seed", c.seed, "master seed");
    app->add_option("--workers", c.workers, "parallel runs (0 = all cores)");
    app->add_option("--sigma2", c.sigma2, "demand variance");
    app->add_option("--model", c.model, "environment model")->check(CLI::IsMember({"tabular", "det-net", "mc-dropout"}));
    app->add_option("--transfer", c.transfer, "use transfer-learning warm starts")->check(CLI::IsMember({"on", "off"}));
}

Json build_config(const std::string& experiment, const CLI::App* app, const Common& c) {
    Json user = c.config.empty() ? Json(nullptr) : bench::load_config_file(c.config);
    Json config = bench::resolve_config(experiment, user);
    bench::Overrides o;
    if (app->count("--seed")) o.seed = c.seed;
    if (app->count("--workers")) o.workers = c.workers;
    if (app->count("--sigma2")) o.sigma2 = c.sigma2;
    if (app->count("--model")) o.model = c.model;
    if (app->count("--transfer")) o.transfer = c.transfer == "on";
    bench::apply_overrides(experiment, config, o);
    return config;
}

void write_json(const fs::path& path, const Json& j) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

void write_records(const fs::path& path, const std::vector<Json>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : records) f << r.dump() << '\n';
}

ModelKind first_model(const Json& config) {
    return parse_model_kind(config.at("models").at(0).get<std::string>());
}

int run_batch(const std::string& experiment, const Json& config, const fs::path& out) {
    const auto result = bench::run_experiment(experiment, config);
    bench::write_result(result, config, out);
    std::cout << result.tables.front().second.to_string();
    std::cerr << "wrote " << result.records.size() << " records to " << out.string() << '\n';
    return 0;
}

int run_train(const Json& config, const fs::path& out) {
    const auto env = bench::make_env(config);
    const auto dist = bench::make_demand(config);
    const std::uint64_t master = config.at("seed").get<std::uint64_t>();
    const std::uint64_t rep_seed = derive_seed(master, "rep-0");
    const Algorithm algo = parse_algorithm(config.at("algorithm").get<std::string>());
    const ModelKind kind = first_model(config);
    const auto agent = bench::make_agent_config(config, algo, kind, derive_seed(rep_seed, "train"));

    fs::create_directories(out);
    std::optional<WarmStart> ws;
    if (config.at("transfer").get<bool>()) {
        const auto history = bench::load_history(config, derive_seed(master, "history"));
        const auto f = bench::fit_forecaster(config, history, derive_seed(master, "forecaster"));
        ws = bench::make_warm_start(config, f, env, kind, derive_seed(rep_seed, "warm-start"));
        write_transactions(out / "offline.csv", ws->offline, "offline");
    }
    const auto trained = train(agent, env, DemandProcess::sampled(dist), ws ? &*ws : nullptr);

    std::vector<Json> records;
    bench::CsvTable table{{"episode", "total_cost", "shortage_pct", "holding", "planning_steps"}, {}};
    bench::CsvTable timing{{"episode", "seconds"}, {}};
    for (std::size_t e = 0; e < trained.episodes.size(); ++e) {
        const auto& m = trained.episodes[e];
        Json r = bench::metrics_to_json(m);
        r["episode"] = e + 1;
        records.push_back(std::move(r));
        table.rows.push_back({std::to_string(e + 1), bench::format_number(m.total_cost),
                              bench::format_number(100.0 * m.shortage_fraction), bench::format_number(m.avg_holding),
                              std::to_string(m.planning_steps)});
        timing.rows.push_back({std::to_string(e + 1), bench::format_number(m.wall_seconds)});
    }
    write_json(out / "config.json", config);
    write_records(out / "records.jsonl", records);
    table.write(out / "episodes.csv");
    timing.write(out / "timing.csv");
    save_qtable(out / "qtable.json", trained.q);
    trained.model.save(out / "model.bin");
    std::cerr << to_string(algo) << ": " << trained.episodes.size() << " episodes, " << trained.total_planning_steps
              << " planning steps, last episode cost " << trained.episodes.back().total_cost << '\n';
    return 0;
}

int run_evaluate(Json config, const std::string& qtable_flag, const fs::path& out) {
    if (!qtable_flag.empty()) config["qtable"] = qtable_flag;
    const std::string qpath = config.at("qtable").get<std::string>();
    if (qpath.empty()) throw std::invalid_argument("evaluate needs a Q-table (--qtable or config key 'qtable')");
    const auto q = load_qtable(qpath);
    const auto env = bench::make_env(config);
    if (q.num_states() != env.num_states() || q.num_actions() != env.num_actions())
        throw std::invalid_argument("Q-table shape does not match the configured limits");
    const auto dist = bench::make_demand(config);
    const int days = config.at("test").at("days").get<int>();
    const int reps = config.at("test").at("repetitions").get<int>();
    const auto runs = evaluate(q, env, dist, {config.at("initial_state")[0].get<int>(), config.at("initial_state")[1].get<int>(),
                                              config.at("initial_state")[2].get<int>()},
                               days, reps, derive_seed(config.at("seed").get<std::uint64_t>(), "test"));

    fs::create_directories(out);
    std::vector<Json> records;
    std::vector<double> totals;
    double shortage = 0.0, holding = 0.0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        Json j = bench::metrics_to_json(runs[r]);
        j["repetition"] = r;
        records.push_back(std::move(j));
        totals.push_back(runs[r].total_cost);
        shortage += runs[r].shortage_fraction;
        holding += runs[r].avg_holding;
    }
    double mean = 0.0;
    for (double t : totals) mean += t;
    const double n = std::max<double>(1.0, static_cast<double>(runs.size()));
    bench::CsvTable summary{{"repetitions", "days", "total_cost", "total_cost_variance", "shortage_pct", "holding"},
                            {{std::to_string(runs.size()), std::to_string(days), bench::format_number(mean / n),
                              bench::format_number(bench::sample_variance(totals)),
                              bench::format_number(100.0 * shortage / n), bench::format_number(holding / n)}}};
    write_json(out / "config.json", config);
    write_records(out / "records.jsonl", records);
    summary.write(out / "summary.csv");
    std::cout << summary.to_string();
    return 0;
}

int run_forecast(const Json& config, const fs::path& out) {
    const std::uint64_t master = config.at("seed").get<std::uint64_t>();
    const auto env = bench::make_env(config);
    const auto history = bench::load_history(config, derive_seed(master, "history"));
    const auto f = bench::fit_forecaster(config, history, derive_seed(master, "forecaster"));
    const auto ws = bench::make_warm_start(config, f, env, first_model(config),
                                           derive_seed(derive_seed(master, "rep-0"), "warm-start"));
    fs::create_directories(out);
    write_json(out / "config.json", config);
    f.save(out / "forecaster.bin");
    write_transactions(out / "offline.csv", ws.offline, "offline");
    save_qtable(out / "q0.json", ws.q0);
    ws.m0.save(out / "m0.bin");
    write_records(out / "records.jsonl",
                  {Json{{"history_start", format_iso_date(history.start)},
                        {"history_days", history.size()},
                        {"history_mean", history.mean()},
                        {"offline_start", format_iso_date(ws.offline.start)},
                        {"offline_demand", ws.offline.quantities},
                        {"visited_pairs", ws.m0.visited_count()}}});
    std::cout << "offline demand from " << format_iso_date(ws.offline.start) << ":";
    for (int d : ws.offline.quantities) std::cout << ' ' << d;
    std::cout << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dyna-Q inventory control experiments"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    Common common;
    std::string qtable;
    std::vector<std::pair<std::string, CLI::App*>> subs;
    const std::pair<const char*, const char*> commands[] = {
        {"train", "train one agent and save its Q-table and model"},
        {"evaluate", "test a saved Q-table's greedy policy"},
        {"forecast", "fit the demand forecaster and build a warm start"},
        {"table1", "cost and planning-work comparison across algorithms"},
        {"scenario1", "training comparison with and without transfer"},
        {"scenario2", "testing comparison with and without transfer"},
        {"fig3", "track one transition-probability estimate during training"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        add_common(sub, common);
        if (std::string(name) == "evaluate") sub->add_option("--qtable", qtable, "Q-table JSON from train")->check(CLI::ExistingFile);
        subs.emplace_back(name, sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    for (const auto& [name, sub] : subs) {
        if (!sub->parsed()) continue;
        try {
            const Json config = build_config(name, sub, common);
            const fs::path out = common.out;
            if (name == "train") return run_train(config, out);
            if (name == "evaluate") return run_evaluate(config, qtable, out);
            if (name == "forecast") return run_forecast(config, out);
            return run_batch(name, config, out);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }
    return 1;
}
