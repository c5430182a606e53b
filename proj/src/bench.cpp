#include "invrl/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace invrl::bench {

namespace {

Json base_config() {
    return Json{
        {"seed", 2022},
        {"workers", 0},
        {"replications", 20},
        {"limits", {{"max_stock", 10}, {"max_order", 10}, {"max_demand", 10}}},
        {"costs", {{"b1", 0.7}, {"b2", 0.3}, {"b3", 0.0}, {"shortage", 1.0}}},
        {"demand", {{"mean", 5.0}, {"variance", 5.0}, {"bin_rule", "center"}}},
        {"initial_state", {0, 0, 5}},
        {"agent",
         {{"alpha", 0.3},
          {"gamma", 0.9},
          {"epsilon", {{"initial", 0.4}, {"floor", 0.1}, {"smoothing", 7500.0}}},
          {"planning", {{"initial", 100.0}, {"floor", 10.0}, {"smoothing", 5000.0}}},
          {"horizon", 100},
          {"episodes", 500}}},
        {"models", {"tabular"}},
        {"model",
         {{"hidden", {128, 64}},
          {"dropout", 0.5},
          {"mc_samples", 10},
          {"learning_rate", 1e-3},
          {"mse_transition", false}}},
        {"warm_start",
         {{"history",
           {{"path", ""},
            {"product", ""},
            {"delimiter", ","},
            {"date_column", "date"},
            {"product_column", "article"},
            {"quantity_column", "Quantity"},
            {"first", ""},
            {"last", ""},
            {"mean", 4.48},
            {"variance", 5.0},
            {"days", 638},
            {"start", "2021-01-01"}}},
          {"forecaster",
           {{"window", kDefaultWindow},
            {"hidden", {128, 64}},
            {"dropout", 0.5},
            {"epochs", 100},
            {"batch_size", 32},
            {"learning_rate", 1e-3}}},
          {"horizon", 10},
          {"alpha", 0.1},
          {"gamma", 0.9},
          {"epsilon", 0.2},
          {"epochs", 50}}},
        {"test", {{"days", 100}, {"repetitions", 1}}},
    };
}

Json five_configs() {
    return Json::array({
        {{"algorithm", "adjusted_dyna_q"}, {"transfer", true}},
        {{"algorithm", "adjusted_dyna_q"}, {"transfer", false}},
        {{"algorithm", "dyna_q"}, {"transfer", true}},
        {{"algorithm", "dyna_q"}, {"transfer", false}},
        {{"algorithm", "q_learning"}, {"transfer", false}},
    });
}

Json scenario_agent(double eps0, double eps_min, double n0, double n_min, int episodes) {
    return Json{{"alpha", 0.1},
                {"gamma", 0.9},
                {"epsilon", {{"initial", eps0}, {"floor", eps_min}, {"smoothing", 1000.0}}},
                {"planning", {{"initial", n0}, {"floor", n_min}, {"smoothing", 1000.0}}},
                {"horizon", 30},
                {"episodes", episodes}};
}

void check_known_keys(const Json& defaults, const Json& user, const std::string& prefix) {
    if (!user.is_object()) throw std::invalid_argument("config" + (prefix.empty() ? "" : " key '" + prefix + "'") + " must be an object");
    for (const auto& [key, value] : user.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!defaults.contains(key)) throw std::invalid_argument("unknown config key '" + path + "'");
        if (value.is_null()) throw std::invalid_argument("config key '" + path + "' is null");
        const Json& def = defaults.at(key);
        if (def.is_object()) {
            check_known_keys(def, value, path);
        } else if (def.is_number() && !value.is_number()) {
            throw std::invalid_argument("config key '" + path + "' must be a number");
        } else if (def.is_string() && !value.is_string()) {
            throw std::invalid_argument("config key '" + path + "' must be a string");
        } else if (def.is_boolean() && !value.is_boolean()) {
            throw std::invalid_argument("config key '" + path + "' must be true or false");
        } else if (def.is_array() && !value.is_array()) {
            throw std::invalid_argument("config key '" + path + "' must be a list");
        }
    }
}

InventoryState state_from(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("a state must be a list of three stock levels");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

StcSchedule stc_from(const Json& j) {
    return {j.at("initial").get<double>(), j.at("floor").get<double>(), j.at("smoothing").get<double>()};
}

std::vector<ModelKind> model_kinds(const Json& config) {
    std::vector<ModelKind> kinds;
    for (const auto& m : config.at("models")) kinds.push_back(parse_model_kind(m.get<std::string>()));
    if (kinds.empty()) throw std::invalid_argument("config 'models' is empty");
    return kinds;
}

struct RunSpec {
    Algorithm algorithm;
    bool transfer;
    std::string label() const { return std::string(to_string(algorithm)) + (transfer ? "+transfer" : ""); }
};

std::vector<RunSpec> run_specs(const Json& config) {
    std::vector<RunSpec> specs;
    for (const auto& c : config.at("configs")) {
        for (const auto& [k, v] : c.items())
            if (k != "algorithm" && k != "transfer") throw std::invalid_argument("unknown key '" + k + "' in configs entry");
        specs.push_back({parse_algorithm(c.at("algorithm").get<std::string>()), c.value("transfer", false)});
    }
    if (specs.empty()) throw std::invalid_argument("config 'configs' is empty");
    return specs;
}

bool any_transfer(const std::vector<RunSpec>& specs) {
    return std::any_of(specs.begin(), specs.end(), [](const RunSpec& s) { return s.transfer; });
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

template <class F>
double mean_over(const std::vector<RunMetrics>& runs, F f) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(f(r));
    return mean_of(v);
}

std::vector<double> totals(const std::vector<RunMetrics>& runs) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(r.total_cost);
    return v;
}

double seconds_per_episode(const TrainedAgent& a) {
    return mean_over(a.episodes, [](const RunMetrics& m) { return m.wall_seconds; });
}

std::string rep_key(int r) { return "rep-" + std::to_string(r); }

/// Percentage improvement, blank when the baseline is zero.
std::string improvement_cell(double baseline, double value) {
    return baseline == 0.0 ? std::string() : format_number(100.0 * improvement(baseline, value));
}

struct JobOutput {
    std::vector<Json> records;
    std::vector<std::vector<std::string>> timing;
};

int worker_count(const Json& config, std::size_t jobs) {
    int w = config.at("workers").get<int>();
    if (w <= 0) w = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(w), std::max<std::size_t>(jobs, 1)));
}

/// Runs job(i) for i in [0, n) on a pool and returns outputs in index order.
std::vector<JobOutput> run_jobs(std::size_t n, int workers, const std::function<JobOutput(std::size_t)>& job) {
    std::vector<JobOutput> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = job(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

struct Shared {
    std::uint64_t master = 0;
    PerishableInventory env;
    std::optional<Forecaster> forecaster;
};

Shared prepare(const Json& config, bool needs_forecaster) {
    Shared s;
    s.master = config.at("seed").get<std::uint64_t>();
    s.env = make_env(config);
    if (needs_forecaster) {
        const auto history = load_history(config, derive_seed(s.master, "history"));
        s.forecaster = fit_forecaster(config, history, derive_seed(s.master, "forecaster"));
    }
    return s;
}

// ---------------------------------------------------------------- table1

ExperimentResult run_table1(const Json& config) {
    const Shared shared = prepare(config, false);
    const auto kinds = model_kinds(config);
    std::vector<double> variances;
    for (const auto& v : config.at("variances")) variances.push_back(v.get<double>());
    std::vector<Algorithm> algos;
    for (const auto& a : config.at("algorithms")) algos.push_back(parse_algorithm(a.get<std::string>()));
    if (variances.empty() || algos.empty()) throw std::invalid_argument("table1 needs variances and algorithms");
    const int reps = config.at("replications").get<int>();
    const int test_days = config.at("test").at("days").get<int>();
    const int test_reps = config.at("test").at("repetitions").get<int>();
    const InventoryState initial = state_from(config.at("initial_state"));

    const std::size_t n = variances.size() * kinds.size() * static_cast<std::size_t>(reps);
    auto job = [&](std::size_t i) {
        const int r = static_cast<int>(i % static_cast<std::size_t>(reps));
        const ModelKind kind = kinds[(i / static_cast<std::size_t>(reps)) % kinds.size()];
        const double var = variances[i / (static_cast<std::size_t>(reps) * kinds.size())];
        const std::uint64_t rep_seed = derive_seed(shared.master, rep_key(r));
        const auto dist = make_demand(config, var);
        JobOutput out;
        for (Algorithm algo : algos) {
            const auto agent = make_agent_config(config, algo, kind, derive_seed(rep_seed, "train"));
            const auto trained = train(agent, shared.env, DemandProcess::sampled(dist));
            const auto tests = evaluate(trained.q, shared.env, dist, initial, test_days, test_reps,
                                        derive_seed(rep_seed, "test"));
            std::vector<double> episode_avg, day_avg(static_cast<std::size_t>(agent.horizon), 0.0);
            for (const auto& ep : trained.episodes) {
                episode_avg.push_back(ep.total_cost / agent.horizon);
                for (std::size_t d = 0; d < ep.daily_costs.size(); ++d) day_avg[d] += ep.daily_costs[d] / agent.episodes;
            }
            out.records.push_back(Json{
                {"experiment", "table1"},
                {"sigma2", var},
                {"model", to_string(kind)},
                {"rep", r},
                {"algorithm", to_string(algo)},
                {"planning_steps", trained.total_planning_steps},
                {"train_daily_cost", mean_of(episode_avg)},
                {"test_daily_cost", mean_over(tests, [&](const RunMetrics& m) { return m.total_cost / test_days; })},
                {"test_shortage_pct", mean_over(tests, [](const RunMetrics& m) { return m.shortage_fraction; })},
                {"test_holding", mean_over(tests, [](const RunMetrics& m) { return m.avg_holding; })},
                {"episode_avg_cost", episode_avg},
                {"day_avg_cost", day_avg},
            });
            out.timing.push_back({format_number(var), std::string(to_string(kind)), std::to_string(r),
                                  std::string(to_string(algo)), format_number(seconds_per_episode(trained))});
        }
        return out;
    };

    ExperimentResult result;
    CsvTable timing{{"sigma2", "model", "rep", "algorithm", "seconds_per_episode"}, {}};
    for (auto& o : run_jobs(n, worker_count(config, n), job)) {
        for (auto& r : o.records) result.records.push_back(std::move(r));
        for (auto& t : o.timing) timing.rows.push_back(std::move(t));
    }

    // Seconds per episode averaged over replications, with the saving against classic Dyna-Q.
    CsvTable time_summary{{"sigma2", "model", "algorithm", "seconds_per_episode", "time_improvement_vs_dyna_q_pct"}, {}};
    std::map<std::vector<std::string>, std::pair<double, int>> acc;
    std::vector<std::vector<std::string>> order;
    for (const auto& row : timing.rows) {
        const std::vector<std::string> key{row[0], row[1], row[3]};
        if (!acc.count(key)) order.push_back(key);
        acc[key].first += std::stod(row[4]);
        acc[key].second += 1;
    }
    for (const auto& key : order) {
        const double mean = acc[key].first / acc[key].second;
        const std::vector<std::string> classic{key[0], key[1], "dyna_q"};
        std::string imp;
        if (acc.count(classic)) imp = improvement_cell(acc[classic].first / acc[classic].second, mean);
        time_summary.rows.push_back({key[0], key[1], key[2], format_number(mean), imp});
    }
    result.timing_tables = {{"timing.csv", std::move(timing)}, {"table1_timing.csv", std::move(time_summary)}};
    result.tables = summarize("table1", result.records);
    return result;
}

std::vector<std::pair<std::string, CsvTable>> summarize_table1(const std::vector<Json>& records) {
    using Key = std::tuple<double, std::string, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<const Json*>> groups;
    for (const auto& r : records) {
        Key k{r.at("sigma2").get<double>(), r.at("model").get<std::string>(), r.at("algorithm").get<std::string>()};
        if (!groups.count(k)) order.push_back(k);
        groups[k].push_back(&r);
    }
    auto field = [](const std::vector<const Json*>& g, const char* name) {
        std::vector<double> v;
        for (const Json* r : g) v.push_back(r->at(name).get<double>());
        return v;
    };
    auto by_rep = [](const std::vector<const Json*>& g) {
        std::map<int, double> m;
        for (const Json* r : g) m[r->at("rep").get<int>()] = r->at("test_daily_cost").get<double>();
        return m;
    };

    CsvTable table{{"sigma2", "model", "algorithm", "runs", "test_daily_cost", "cost_improvement_vs_q_learning_pct",
                    "planning_steps", "planning_reduction_vs_dyna_q_pct", "sign_test_n", "sign_test_worse",
                    "sign_test_p"},
                   {}};
    CsvTable by_episode{{"sigma2", "model", "algorithm", "episode", "avg_cost"}, {}};
    CsvTable by_day{{"sigma2", "model", "algorithm", "day", "avg_cost"}, {}};
    for (const auto& k : order) {
        const auto& [var, model, algo] = k;
        const auto& g = groups[k];
        const double cost = mean_of(field(g, "test_daily_cost"));
        const double steps = mean_of(field(g, "planning_steps"));
        std::vector<std::string> row{format_number(var), model, algo, std::to_string(g.size()), format_number(cost)};

        const Key ql{var, model, "q_learning"};
        if (groups.count(ql)) {
            row.push_back(improvement_cell(mean_of(field(groups[ql], "test_daily_cost")), cost));
        } else {
            row.push_back("");
        }
        row.push_back(format_number(steps));
        const Key classic{var, model, "dyna_q"};
        row.push_back(groups.count(classic) ? improvement_cell(mean_of(field(groups[classic], "planning_steps")), steps) : "");
        if (groups.count(ql) && algo != "q_learning") {
            const auto mine = by_rep(g), base = by_rep(groups[ql]);
            std::vector<double> a, b;
            for (const auto& [rep, c] : mine)
                if (base.count(rep)) {
                    a.push_back(c);
                    b.push_back(base.at(rep));
                }
            const auto st = sign_test(a, b);
            row.insert(row.end(), {std::to_string(st.n), std::to_string(st.worse), format_number(st.p_value)});
        } else {
            row.insert(row.end(), {"", "", ""});
        }
        table.rows.push_back(std::move(row));

        const auto n_ep = g.front()->at("episode_avg_cost").size();
        for (std::size_t e = 0; e < n_ep; ++e) {
            double s = 0.0;
            for (const Json* r : g) s += r->at("episode_avg_cost")[e].get<double>();
            by_episode.rows.push_back({format_number(var), model, algo, std::to_string(e + 1), format_number(s / g.size())});
        }
        const auto n_day = g.front()->at("day_avg_cost").size();
        for (std::size_t d = 0; d < n_day; ++d) {
            double s = 0.0;
            for (const Json* r : g) s += r->at("day_avg_cost")[d].get<double>();
            by_day.rows.push_back({format_number(var), model, algo, std::to_string(d + 1), format_number(s / g.size())});
        }
    }
    return {{"table1.csv", std::move(table)}, {"fig2_episode.csv", std::move(by_episode)}, {"fig2_day.csv", std::move(by_day)}};
}

// ---------------------------------------------------------------- scenarios

ExperimentResult run_scenario(std::string_view name, const Json& config) {
    const auto specs = run_specs(config);
    const Shared shared = prepare(config, any_transfer(specs));
    const auto kinds = model_kinds(config);
    const int reps = config.at("replications").get<int>();
    const int test_days = config.at("test").at("days").get<int>();
    const int test_reps = config.at("test").at("repetitions").get<int>();
    const InventoryState initial = state_from(config.at("initial_state"));
    const auto dist = make_demand(config);

    const std::size_t n = kinds.size() * static_cast<std::size_t>(reps);
    auto job = [&](std::size_t i) {
        const int r = static_cast<int>(i % static_cast<std::size_t>(reps));
        const ModelKind kind = kinds[i / static_cast<std::size_t>(reps)];
        const std::uint64_t rep_seed = derive_seed(shared.master, rep_key(r));
        std::optional<WarmStart> ws;
        if (any_transfer(specs))
            ws = make_warm_start(config, *shared.forecaster, shared.env, kind, derive_seed(rep_seed, "warm-start"));
        JobOutput out;
        for (const auto& spec : specs) {
            const auto agent = make_agent_config(config, spec.algorithm, kind, derive_seed(rep_seed, "train"));
            const auto trained = train(agent, shared.env, DemandProcess::sampled(dist), spec.transfer ? &*ws : nullptr);
            const auto train_totals = totals(trained.episodes);
            Json rec{
                {"experiment", name},
                {"model", to_string(kind)},
                {"rep", r},
                {"config", spec.label()},
                {"algorithm", to_string(spec.algorithm)},
                {"transfer", spec.transfer},
                {"planning_steps", trained.total_planning_steps},
                {"train_total_cost_mean", mean_of(train_totals)},
                {"train_total_cost_variance", sample_variance(train_totals)},
                {"train_shortage_pct", mean_over(trained.episodes, [](const RunMetrics& m) { return m.shortage_fraction; })},
                {"train_holding", mean_over(trained.episodes, [](const RunMetrics& m) { return m.avg_holding; })},
                {"train_total_costs", train_totals},
            };
            if (spec.transfer) rec["offline_demand"] = ws->offline.quantities;
            if (test_reps > 0) {
                const auto tests = evaluate(trained.q, shared.env, dist, initial, test_days, test_reps,
                                            derive_seed(rep_seed, "test"));
                const auto test_totals = totals(tests);
                rec["test_total_cost_mean"] = mean_of(test_totals);
                rec["test_total_cost_variance"] = sample_variance(test_totals);
                rec["test_shortage_pct"] = mean_over(tests, [](const RunMetrics& m) { return m.shortage_fraction; });
                rec["test_holding"] = mean_over(tests, [](const RunMetrics& m) { return m.avg_holding; });
                rec["test_total_costs"] = test_totals;
            }
            out.records.push_back(std::move(rec));
            out.timing.push_back({std::string(to_string(kind)), std::to_string(r), spec.label(),
                                  format_number(seconds_per_episode(trained))});
        }
        return out;
    };

    ExperimentResult result;
    CsvTable timing{{"model", "rep", "config", "seconds_per_episode"}, {}};
    for (auto& o : run_jobs(n, worker_count(config, n), job)) {
        for (auto& r : o.records) result.records.push_back(std::move(r));
        for (auto& t : o.timing) timing.rows.push_back(std::move(t));
    }
    result.timing_tables = {{"timing.csv", std::move(timing)}};
    result.tables = summarize(name, result.records);
    return result;
}

std::vector<std::pair<std::string, CsvTable>> summarize_scenario(const std::string& name, const std::vector<Json>& records) {
    using Key = std::pair<std::string, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<const Json*>> groups;
    // Lowest mean test cost per (model, rep).
    std::map<std::pair<std::string, int>, double> best;
    for (const auto& r : records) {
        Key k{r.at("model").get<std::string>(), r.at("config").get<std::string>()};
        if (!groups.count(k)) order.push_back(k);
        groups[k].push_back(&r);
        if (r.contains("test_total_cost_mean")) {
            const std::pair<std::string, int> mr{k.first, r.at("rep").get<int>()};
            const double c = r.at("test_total_cost_mean").get<double>();
            if (!best.count(mr) || c < best[mr]) best[mr] = c;
        }
    }
    const bool tested = !best.empty();
    auto avg = [](const std::vector<const Json*>& g, const char* name) {
        double s = 0.0;
        for (const Json* r : g) s += r->at(name).get<double>();
        return s / static_cast<double>(g.size());
    };
    auto cold_label = [](const std::string& label) {
        const auto p = label.find("+transfer");
        return p == std::string::npos ? std::string() : label.substr(0, p);
    };

    CsvTable table{{"model", "config", "runs", "train_total_cost", "train_shortage_pct", "train_holding",
                    "train_cost_variance", "train_variance_reduction_vs_cold_pct", "planning_steps"},
                   {}};
    if (tested)
        table.header.insert(table.header.end(), {"test_total_cost", "test_shortage_pct", "test_holding",
                                                 "test_cost_variance", "test_variance_reduction_vs_cold_pct",
                                                 "lowest_test_cost_share"});
    for (const auto& k : order) {
        const auto& g = groups[k];
        const std::string cold = cold_label(k.second);
        const bool has_cold = !cold.empty() && groups.count({k.first, cold});
        const double train_var = avg(g, "train_total_cost_variance");
        std::vector<std::string> row{k.first,
                                     k.second,
                                     std::to_string(g.size()),
                                     format_number(avg(g, "train_total_cost_mean")),
                                     format_number(100.0 * avg(g, "train_shortage_pct")),
                                     format_number(avg(g, "train_holding")),
                                     format_number(train_var),
                                     has_cold ? improvement_cell(avg(groups[{k.first, cold}], "train_total_cost_variance"), train_var) : "",
                                     format_number(avg(g, "planning_steps"))};
        if (tested) {
            const double test_var = avg(g, "test_total_cost_variance");
            int lowest = 0;
            for (const Json* r : g)
                lowest += r->at("test_total_cost_mean").get<double>() ==
                          best.at({k.first, r->at("rep").get<int>()});
            row.insert(row.end(),
                       {format_number(avg(g, "test_total_cost_mean")), format_number(100.0 * avg(g, "test_shortage_pct")),
                        format_number(avg(g, "test_holding")), format_number(test_var),
                        has_cold ? improvement_cell(avg(groups[{k.first, cold}], "test_total_cost_variance"), test_var) : "",
                        format_number(static_cast<double>(lowest) / static_cast<double>(g.size()))});
        }
        table.rows.push_back(std::move(row));
    }

    CsvTable curve{{"model", "config", "episode", "total_cost"}, {}};
    for (const auto& k : order) {
        const auto& g = groups[k];
        const auto n_ep = g.front()->at("train_total_costs").size();
        for (std::size_t e = 0; e < n_ep; ++e) {
            double s = 0.0;
            for (const Json* r : g) s += r->at("train_total_costs")[e].get<double>();
            curve.rows.push_back({k.first, k.second, std::to_string(e + 1), format_number(s / g.size())});
        }
    }
    return {{name + ".csv", std::move(table)}, {name + "_training_curve.csv", std::move(curve)}};
}

// ---------------------------------------------------------------- fig3

ExperimentResult run_fig3(const Json& config) {
    const auto specs = run_specs(config);
    const Shared shared = prepare(config, any_transfer(specs));
    const auto kinds = model_kinds(config);
    const int reps = config.at("replications").get<int>();
    const auto dist = make_demand(config);
    const auto& probe = config.at("fig3");
    const InventoryState ps = state_from(probe.at("state"));
    const InventoryState ps_next = state_from(probe.at("next_state"));
    const int pa = probe.at("action").get<int>();
    if (!shared.env.contains(ps) || !shared.env.contains(ps_next) || pa < 0 || pa > shared.env.limits().max_order)
        throw std::invalid_argument("fig3 pair lies outside the environment");

    double truth = 0.0;
    const auto received = age_and_receive(ps, pa, shared.env.limits());
    for (int d = 0; d <= shared.env.limits().max_demand; ++d)
        if (consume_demand(received, d) == ps_next) truth += dist[d];

    const std::size_t n = kinds.size() * static_cast<std::size_t>(reps);
    auto job = [&](std::size_t i) {
        const int r = static_cast<int>(i % static_cast<std::size_t>(reps));
        const ModelKind kind = kinds[i / static_cast<std::size_t>(reps)];
        const std::uint64_t rep_seed = derive_seed(shared.master, rep_key(r));
        std::optional<WarmStart> ws;
        if (any_transfer(specs))
            ws = make_warm_start(config, *shared.forecaster, shared.env, kind, derive_seed(rep_seed, "warm-start"));
        JobOutput out;
        for (const auto& spec : specs) {
            const auto agent = make_agent_config(config, spec.algorithm, kind, derive_seed(rep_seed, "train"));
            Rng probe_rng(derive_seed(rep_seed, "probe"));
            std::vector<double> estimates;
            std::vector<bool> visited;
            auto observe = [&](const StepInfo&, const QTable&, const EnvModel& m) {
                const bool seen = m.visited(ps, pa);
                visited.push_back(seen);
                estimates.push_back(seen ? m.transition_prob(ps, pa, ps_next, probe_rng) : 0.0);
            };
            const auto trained = train(agent, shared.env, DemandProcess::sampled(dist), spec.transfer ? &*ws : nullptr, observe);
            out.records.push_back(Json{
                {"experiment", "fig3"},
                {"model", to_string(kind)},
                {"rep", r},
                {"config", spec.label()},
                {"algorithm", to_string(spec.algorithm)},
                {"transfer", spec.transfer},
                {"truth", truth},
                {"estimates", estimates},
                {"visited", visited},
            });
            out.timing.push_back({std::string(to_string(kind)), std::to_string(r), spec.label(),
                                  format_number(seconds_per_episode(trained))});
        }
        return out;
    };

    ExperimentResult result;
    CsvTable timing{{"model", "rep", "config", "seconds_per_episode"}, {}};
    for (auto& o : run_jobs(n, worker_count(config, n), job)) {
        for (auto& r : o.records) result.records.push_back(std::move(r));
        for (auto& t : o.timing) timing.rows.push_back(std::move(t));
    }
    result.timing_tables = {{"timing.csv", std::move(timing)}};
    result.tables = summarize("fig3", result.records);
    return result;
}

std::vector<std::pair<std::string, CsvTable>> summarize_fig3(const std::vector<Json>& records) {
    using Key = std::pair<std::string, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<const Json*>> groups;
    for (const auto& r : records) {
        Key k{r.at("model").get<std::string>(), r.at("config").get<std::string>()};
        if (!groups.count(k)) order.push_back(k);
        groups[k].push_back(&r);
    }
    auto final_error = [](const Json& r) {
        const auto& e = r.at("estimates");
        const double last = e.empty() ? 0.0 : e.back().get<double>();
        return std::abs(last - r.at("truth").get<double>());
    };

    CsvTable series{{"model", "config", "iteration", "mean_estimate", "truth"}, {}};
    CsvTable summary{{"model", "config", "runs", "final_mean_estimate", "final_mean_abs_error", "visited_share",
                      "closer_than_q_learning_share", "truth"},
                     {}};
    for (const auto& k : order) {
        const auto& g = groups[k];
        const double truth = g.front()->at("truth").get<double>();
        const auto n_it = g.front()->at("estimates").size();
        for (std::size_t t = 0; t < n_it; ++t) {
            double s = 0.0;
            for (const Json* r : g) s += r->at("estimates")[t].get<double>();
            series.rows.push_back({k.first, k.second, std::to_string(t + 1), format_number(s / g.size()), format_number(truth)});
        }
        double est = 0.0, err = 0.0, seen = 0.0;
        for (const Json* r : g) {
            const auto& e = r->at("estimates");
            est += e.empty() ? 0.0 : e.back().get<double>();
            err += final_error(*r);
            const auto& v = r->at("visited");
            seen += !v.empty() && v.back().get<bool>();
        }
        std::string closer;
        const Key base{k.first, "q_learning"};
        if (groups.count(base)) {
            std::map<int, double> base_err;
            for (const Json* r : groups[base]) base_err[r->at("rep").get<int>()] = final_error(*r);
            int wins = 0, paired = 0;
            for (const Json* r : g) {
                const int rep = r->at("rep").get<int>();
                if (!base_err.count(rep)) continue;
                ++paired;
                wins += final_error(*r) < base_err[rep];
            }
            if (paired > 0) closer = format_number(static_cast<double>(wins) / paired);
        }
        const double n = static_cast<double>(g.size());
        summary.rows.push_back({k.first, k.second, std::to_string(g.size()), format_number(est / n), format_number(err / n),
                                format_number(seen / n), closer, format_number(truth)});
    }
    return {{"fig3.csv", std::move(series)}, {"fig3_summary.csv", std::move(summary)}};
}

}  // namespace

// ---------------------------------------------------------------- configuration

Json default_config(std::string_view experiment) {
    Json c = base_config();
    if (experiment == "table1") {
        c["variances"] = {1.0, 3.0, 5.0};
        c["algorithms"] = {"q_learning", "dyna_q", "adjusted_dyna_q"};
    } else if (experiment == "scenario1") {
        c["agent"] = scenario_agent(0.4, 0.0, 100.0, 0.0, 100);
        c["configs"] = five_configs();
        c["test"] = {{"days", 30}, {"repetitions", 0}};
    } else if (experiment == "scenario2") {
        c["agent"] = scenario_agent(0.3, 0.1, 20.0, 10.0, 100);
        c["configs"] = five_configs();
        c["test"] = {{"days", 30}, {"repetitions", 100}};
    } else if (experiment == "fig3") {
        c["agent"] = scenario_agent(0.4, 0.0, 100.0, 0.0, 1);
        c["replications"] = 100;
        c["configs"] = five_configs();
        c["fig3"] = {{"state", {0, 0, 3}}, {"action", 2}, {"next_state", {0, 1, 2}}};
    } else if (experiment == "train") {
        c["algorithm"] = "adjusted_dyna_q";
        c["transfer"] = false;
    } else if (experiment == "evaluate") {
        c["qtable"] = "";
        c["test"] = {{"days", 30}, {"repetitions", 100}};
    } else if (experiment != "forecast") {
        throw std::invalid_argument("unknown experiment '" + std::string(experiment) + "'");
    }
    return c;
}

Json resolve_config(std::string_view experiment, const Json& user) {
    Json c = default_config(experiment);
    if (user.is_null()) return c;
    check_known_keys(c, user, "");
    c.merge_patch(user);
    return c;
}

Json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw std::runtime_error("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

void apply_overrides(std::string_view experiment, Json& config, const Overrides& o) {
    if (o.seed) config["seed"] = *o.seed;
    if (o.workers) config["workers"] = *o.workers;
    if (o.sigma2) {
        if (*o.sigma2 <= 0.0) throw std::invalid_argument("--sigma2 must be positive");
        config["demand"]["variance"] = *o.sigma2;
        if (config.contains("variances")) config["variances"] = {*o.sigma2};
    }
    if (o.model) {
        parse_model_kind(*o.model);
        config["models"] = {*o.model};
    }
    if (o.transfer) {
        if (experiment == "train") {
            config["transfer"] = *o.transfer;
        } else if (config.contains("configs")) {
            if (!*o.transfer) {
                Json kept = Json::array();
                for (const auto& c : config["configs"])
                    if (!c.value("transfer", false)) kept.push_back(c);
                config["configs"] = kept;
            }
        } else {
            throw std::invalid_argument("--transfer does not apply to " + std::string(experiment));
        }
    }
}

// ---------------------------------------------------------------- building blocks

PerishableInventory make_env(const Json& config) {
    const auto& l = config.at("limits");
    const auto& c = config.at("costs");
    return PerishableInventory(
        EnvLimits{l.at("max_stock").get<int>(), l.at("max_order").get<int>(), l.at("max_demand").get<int>()},
        CostParams{c.at("b1").get<double>(), c.at("b2").get<double>(), c.at("b3").get<double>(),
                   c.at("shortage").get<double>()});
}

DemandDistribution make_demand(const Json& config, std::optional<double> variance) {
    const auto& d = config.at("demand");
    const std::string rule = d.at("bin_rule").get<std::string>();
    if (rule != "center" && rule != "floor") throw std::invalid_argument("demand.bin_rule must be 'center' or 'floor'");
    return discretized_gamma(d.at("mean").get<double>(), variance.value_or(d.at("variance").get<double>()),
                             config.at("limits").at("max_demand").get<int>(),
                             rule == "center" ? BinRule::center : BinRule::floor);
}

ModelConfig make_model_config(const Json& config, ModelKind kind) {
    const auto& m = config.at("model");
    ModelConfig mc;
    mc.kind = kind;
    mc.hidden = m.at("hidden").get<std::vector<std::size_t>>();
    mc.dropout = m.at("dropout").get<double>();
    mc.mc_samples = m.at("mc_samples").get<int>();
    mc.learning_rate = m.at("learning_rate").get<double>();
    mc.mse_transition = m.at("mse_transition").get<bool>();
    return mc;
}

AgentConfig make_agent_config(const Json& config, Algorithm algo, ModelKind kind, std::uint64_t seed) {
    const auto& a = config.at("agent");
    HyperParams hp;
    hp.alpha = a.at("alpha").get<double>();
    hp.gamma = a.at("gamma").get<double>();
    hp.epsilon = stc_from(a.at("epsilon"));
    hp.planning = stc_from(a.at("planning"));
    AgentConfig c = AgentConfig::for_algorithm(algo, hp);
    c.model = make_model_config(config, kind);
    c.horizon = a.at("horizon").get<int>();
    c.episodes = a.at("episodes").get<int>();
    c.initial_state = state_from(config.at("initial_state"));
    c.seed = seed;
    c.validate();
    return c;
}

DemandSeries load_history(const Json& config, std::uint64_t seed) {
    const auto& h = config.at("warm_start").at("history");
    const std::string path = h.at("path").get<std::string>();
    if (!path.empty()) {
        TransactionFormat fmt;
        const std::string delim = h.at("delimiter").get<std::string>();
        if (delim.size() != 1) throw std::invalid_argument("warm_start.history.delimiter must be one character");
        fmt.delimiter = delim[0];
        fmt.date_column = h.at("date_column").get<std::string>();
        fmt.product_column = h.at("product_column").get<std::string>();
        fmt.quantity_column = h.at("quantity_column").get<std::string>();
        DateRange range;
        if (const auto first = h.at("first").get<std::string>(); !first.empty()) range.first = parse_iso_date(first);
        if (const auto last = h.at("last").get<std::string>(); !last.empty()) range.last = parse_iso_date(last);
        return load_transactions(path, h.at("product").get<std::string>(), range, fmt);
    }
    Rng rng(seed);
    const auto dist = discretized_gamma(h.at("mean").get<double>(), h.at("variance").get<double>(),
                                        config.at("limits").at("max_demand").get<int>());
    return synthesize_history(dist, h.at("days").get<std::size_t>(), parse_iso_date(h.at("start").get<std::string>()), rng);
}

Forecaster fit_forecaster(const Json& config, const DemandSeries& history, std::uint64_t seed) {
    const auto& f = config.at("warm_start").at("forecaster");
    ForecasterConfig fc;
    fc.window = f.at("window").get<int>();
    fc.hidden = f.at("hidden").get<std::vector<std::size_t>>();
    fc.dropout = f.at("dropout").get<double>();
    fc.epochs = f.at("epochs").get<int>();
    fc.batch_size = f.at("batch_size").get<std::size_t>();
    fc.learning_rate = f.at("learning_rate").get<double>();
    fc.max_demand = config.at("limits").at("max_demand").get<int>();
    Rng rng(seed);
    return train_forecaster(history, fc, rng);
}

WarmStart make_warm_start(const Json& config, const Forecaster& forecaster, const PerishableInventory& env,
                          ModelKind kind, std::uint64_t seed) {
    const auto& w = config.at("warm_start");
    Rng rng(derive_seed(seed, "offline"));
    const auto offline = generate_offline(forecaster, forecaster.last_date() + std::chrono::days{1},
                                          w.at("horizon").get<int>(), rng);
    WarmStartConfig wc;
    wc.alpha = w.at("alpha").get<double>();
    wc.gamma = w.at("gamma").get<double>();
    wc.epsilon = w.at("epsilon").get<double>();
    wc.epochs = w.at("epochs").get<int>();
    wc.model = make_model_config(config, kind);
    wc.initial_state = state_from(config.at("initial_state"));
    wc.seed = derive_seed(seed, "q-learning");
    return build_warm_start(offline, env, wc);
}

Json metrics_to_json(const RunMetrics& m) {
    return Json{{"total_cost", m.total_cost},
                {"shortage_pct", m.shortage_fraction},
                {"holding", m.avg_holding},
                {"planning_steps", m.planning_steps},
                {"daily_costs", m.daily_costs}};
}

// ---------------------------------------------------------------- statistics

double improvement(double baseline, double value) {
    if (baseline == 0.0) throw std::domain_error("improvement against a zero baseline");
    return (baseline - value) / baseline;
}

SignTest sign_test(const std::vector<double>& candidate, const std::vector<double>& baseline) {
    if (candidate.size() != baseline.size()) throw std::invalid_argument("sign test needs paired samples");
    SignTest st;
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        if (candidate[i] == baseline[i]) continue;
        ++st.n;
        st.worse += candidate[i] > baseline[i];
    }
    double p = 0.0;
    for (int k = st.worse; k <= st.n; ++k)
        p += std::exp(std::lgamma(st.n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(st.n - k + 1.0) - st.n * std::log(2.0));
    st.p_value = std::min(1.0, p);
    return st;
}

double sample_variance(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double m = mean_of(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return s / static_cast<double>(values.size() - 1);
}

// ---------------------------------------------------------------- output

std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", value);
    return buf;
}

std::string CsvTable::to_string() const {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            const auto& c = cells[i];
            if (c.find_first_of(",\"\n") != std::string::npos) {
                out << '"';
                for (char ch : c) out << (ch == '"' ? "\"\"" : std::string(1, ch));
                out << '"';
            } else {
                out << c;
            }
        }
        out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out.str();
}

void CsvTable::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_string();
}

ExperimentResult run_experiment(std::string_view experiment, const Json& config) {
    if (experiment == "table1") return run_table1(config);
    if (experiment == "scenario1" || experiment == "scenario2") return run_scenario(experiment, config);
    if (experiment == "fig3") return run_fig3(config);
    throw std::invalid_argument("'" + std::string(experiment) + "' is not a batch experiment");
}

std::vector<std::pair<std::string, CsvTable>> summarize(std::string_view experiment, const std::vector<Json>& records) {
    if (records.empty()) throw std::invalid_argument("no records to summarize");
    if (experiment == "table1") return summarize_table1(records);
    if (experiment == "scenario1" || experiment == "scenario2") return summarize_scenario(std::string(experiment), records);
    if (experiment == "fig3") return summarize_fig3(records);
    throw std::invalid_argument("no summary for '" + std::string(experiment) + "'");
}

void write_result(const ExperimentResult& result, const Json& config, const std::filesystem::path& out) {
    std::filesystem::create_directories(out);
    {
        std::ofstream f(out / "config.json", std::ios::binary);
        f << config.dump(2) << '\n';
    }
    {
        std::ofstream f(out / "records.jsonl", std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (out / "records.jsonl").string());
        for (const auto& r : result.records) f << r.dump() << '\n';
    }
    for (const auto& [name, table] : result.tables) table.write(out / name);
    for (const auto& [name, table] : result.timing_tables) table.write(out / name);
}

std::vector<Json> read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<Json> records;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            records.push_back(Json::parse(line));
        } catch (const Json::parse_error& e) {
            throw std::runtime_error(path.string() + " line " + std::to_string(n) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace invrl::bench
