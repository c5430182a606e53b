#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "invrl/demand.hpp"
#include "invrl/env.hpp"
#include "invrl/env_model.hpp"
#include "invrl/qtable.hpp"
#include "invrl/schedule.hpp"

namespace invrl {

enum class Algorithm {
    q_learning,       ///< real experience only
    dyna_q,           ///< constant exploration and planning depth
    adjusted_dyna_q,  ///< both decayed by STC schedules
};

std::string_view to_string(Algorithm algo);
Algorithm parse_algorithm(std::string_view text);

/// Initial Q-table and model learned offline on forecast demand.
struct WarmStart {
    QTable q0;
    EnvModel m0;
    DemandSeries offline;
};

/// Where a training run's daily demand comes from.
class DemandProcess {
public:
    /// i.i.d. draws, one engine output per day.
    static DemandProcess sampled(DemandDistribution dist);
    /// Replays `series` cyclically by global step; consumes no randomness.
    static DemandProcess replay(std::vector<int> series);

    int next(Rng& rng, std::int64_t t) const;

private:
    std::optional<DemandDistribution> dist_;
    std::vector<int> series_;
};

/// Shared hyper-parameters from which each algorithm's schedules are derived.
struct HyperParams {
    double alpha = 0.3;
    double gamma = 0.9;
    StcSchedule epsilon{0.4, 0.1, 7500.0};
    StcSchedule planning{100.0, 10.0, 5000.0};
};

struct AgentConfig {
    Algorithm algorithm = Algorithm::adjusted_dyna_q;
    double alpha = 0.3;
    double gamma = 0.9;
    Schedule epsilon = Schedule::stc({0.4, 0.1, 7500.0});
    Schedule planning = Schedule::stc({100.0, 10.0, 5000.0});
    ModelConfig model;
    int horizon = 100;   ///< days per episode
    int episodes = 500;
    InventoryState initial_state{0, 0, 5};
    std::uint64_t seed = 0;

    /// Q-learning: constant epsilon0, no planning. Classic Dyna-Q: constant
    /// epsilon0 and N0. Adjusted Dyna-Q: both follow their STC schedules.
    static AgentConfig for_algorithm(Algorithm algo, const HyperParams& hp);

    /// Throws std::invalid_argument when the schedules contradict the algorithm.
    void validate() const;
};

/// Per-episode (training) or per-repetition (testing) record.
struct RunMetrics {
    double total_cost = 0.0;
    std::vector<double> daily_costs;
    double shortage_fraction = 0.0;  ///< days with unmet demand / days
    double avg_holding = 0.0;        ///< mean pre-sale units on hand per day
    std::int64_t planning_steps = 0;
    double wall_seconds = 0.0;
};

struct TrainedAgent {
    QTable q;
    EnvModel model;
    std::vector<RunMetrics> episodes;
    std::int64_t total_planning_steps = 0;
};

/// What the training loop exposes after every real environment step.
struct StepInfo {
    std::int64_t t = 0;  ///< global step, counted across episodes
    int episode = 0;
    int day = 0;
    InventoryState state;
    int action = 0;
    int demand = 0;
    DayOutcome outcome;
    double epsilon = 0.0;
    std::int64_t planning_steps = 0;
};

using StepObserver = std::function<void(const StepInfo&, const QTable&, const EnvModel&)>;

/// Runs the configured algorithm. Demand, exploration and planning each draw
/// from their own stream derived from config.seed, so the demand sequence
/// does not depend on how much planning an algorithm does.
TrainedAgent train(const AgentConfig& config, const PerishableInventory& env, const DemandProcess& demand,
                   const WarmStart* warm_start = nullptr, const StepObserver& observer = {});

/// Greedy (lowest-index tie-break) policy rolled out for `days` per repetition.
/// Repetition r draws demand from a stream derived from (seed, r).
std::vector<RunMetrics> evaluate(const QTable& q, const PerishableInventory& env, const DemandDistribution& demand,
                                 const InventoryState& initial_state, int days, int repetitions, std::uint64_t seed);

}  // namespace invrl
