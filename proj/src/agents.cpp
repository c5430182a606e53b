#include "invrl/agents.hpp"

#include <chrono>
#include <stdexcept>

namespace invrl {

std::string_view to_string(Algorithm algo) {
    switch (algo) {
        case Algorithm::q_learning: return "q_learning";
        case Algorithm::dyna_q: return "dyna_q";
        case Algorithm::adjusted_dyna_q: return "adjusted_dyna_q";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view text) {
    if (text == "q_learning" || text == "q-learning" || text == "qlearning") return Algorithm::q_learning;
    if (text == "dyna_q" || text == "dyna-q" || text == "classic") return Algorithm::dyna_q;
    if (text == "adjusted_dyna_q" || text == "adjusted-dyna-q" || text == "adjusted") return Algorithm::adjusted_dyna_q;
    throw std::invalid_argument("unknown algorithm '" + std::string(text) + "' (q_learning, dyna_q, adjusted_dyna_q)");
}

DemandProcess DemandProcess::sampled(DemandDistribution dist) {
    DemandProcess p;
    p.dist_ = std::move(dist);
    return p;
}

DemandProcess DemandProcess::replay(std::vector<int> series) {
    if (series.empty()) throw std::invalid_argument("cannot replay an empty demand series");
    for (int d : series)
        if (d < 0) throw std::invalid_argument("negative demand in replay series");
    DemandProcess p;
    p.series_ = std::move(series);
    return p;
}

int DemandProcess::next(Rng& rng, std::int64_t t) const {
    if (dist_) return dist_->sample(rng);
    return series_[static_cast<std::size_t>(t % static_cast<std::int64_t>(series_.size()))];
}

AgentConfig AgentConfig::for_algorithm(Algorithm algo, const HyperParams& hp) {
    AgentConfig c;
    c.algorithm = algo;
    c.alpha = hp.alpha;
    c.gamma = hp.gamma;
    switch (algo) {
        case Algorithm::q_learning:
            c.epsilon = Schedule::constant(hp.epsilon.initial);
            c.planning = Schedule::constant(0.0);
            break;
        case Algorithm::dyna_q:
            c.epsilon = Schedule::constant(hp.epsilon.initial);
            c.planning = Schedule::constant(hp.planning.initial);
            break;
        case Algorithm::adjusted_dyna_q:
            c.epsilon = Schedule::stc(hp.epsilon);
            c.planning = Schedule::stc(hp.planning);
            break;
    }
    return c;
}

void AgentConfig::validate() const {
    switch (algorithm) {
        case Algorithm::q_learning:
            if (!planning.is_constant() || planning.steps(0) != 0)
                throw std::invalid_argument("Q-learning must not plan");
            break;
        case Algorithm::dyna_q:
            if (!epsilon.is_constant() || !planning.is_constant())
                throw std::invalid_argument("classic Dyna-Q uses constant exploration and planning depth");
            break;
        case Algorithm::adjusted_dyna_q:
            if (epsilon.is_constant() || planning.is_constant())
                throw std::invalid_argument("adjusted Dyna-Q decays exploration and planning with STC schedules");
            break;
    }
    if (epsilon.value(0) > 1.0) throw std::invalid_argument("exploration probability above 1");
    if (horizon < 1 || episodes < 1) throw std::invalid_argument("horizon and episode count must be positive");
}

namespace {

struct Accumulator {
    RunMetrics m;
    int short_days = 0;
    double holding = 0.0;

    void add(const DayOutcome& out) {
        m.total_cost += out.cost;
        m.daily_costs.push_back(out.cost);
        short_days += out.shortage > 0;
        holding += out.received.total();
    }

    RunMetrics finish() {
        const auto days = static_cast<double>(m.daily_costs.size());
        if (days > 0) {
            m.shortage_fraction = short_days / days;
            m.avg_holding = holding / days;
        }
        return std::move(m);
    }
};

}  // namespace

TrainedAgent train(const AgentConfig& config, const PerishableInventory& env, const DemandProcess& demand,
                   const WarmStart* warm_start, const StepObserver& observer) {
    config.validate();
    if (!env.contains(config.initial_state)) throw std::invalid_argument("initial state outside the environment");

    Rng env_rng(derive_seed(config.seed, "environment"));
    Rng explore_rng(derive_seed(config.seed, "exploration"));
    Rng plan_rng(derive_seed(config.seed, "planning"));

    QTable q(env.num_states(), env.num_actions(), config.alpha, config.gamma);
    EnvModel model = [&] {
        if (!warm_start) return EnvModel(env, config.model, derive_seed(config.seed, "model"));
        if (warm_start->m0.kind() != config.model.kind)
            throw std::invalid_argument("warm-start model variant does not match the agent's model");
        return warm_start->m0;
    }();
    if (warm_start) {
        const auto& q0 = warm_start->q0;
        if (q0.num_states() != q.num_states() || q0.num_actions() != q.num_actions())
            throw std::invalid_argument("warm-start Q-table shape does not match the environment");
        for (std::size_t s = 0; s < q.num_states(); ++s)
            for (std::size_t a = 0; a < q.num_actions(); ++a) q.set(s, a, q0(s, a));
    }

    TrainedAgent result{std::move(q), std::move(model), {}, 0};
    QTable& Q = result.q;
    EnvModel& M = result.model;
    result.episodes.reserve(static_cast<std::size_t>(config.episodes));

    std::int64_t t = 0;
    for (int ep = 0; ep < config.episodes; ++ep) {
        const auto started = std::chrono::steady_clock::now();
        Accumulator acc;
        acc.m.daily_costs.reserve(static_cast<std::size_t>(config.horizon));
        InventoryState s = config.initial_state;
        for (int day = 0; day < config.horizon; ++day, ++t) {
            const double eps = config.epsilon.value(t);
            const std::int64_t n_plan = config.planning.steps(t);

            const auto si = env.state_index(s);
            const int a = static_cast<int>(select_action(Q, si, eps, explore_rng));
            const int d = demand.next(env_rng, t);
            const DayOutcome out = env.step(s, a, d);
            Q.update(si, static_cast<std::size_t>(a), out.cost, env.state_index(out.next_state));
            M.update(s, a, out.next_state, out.cost);
            acc.add(out);

            for (std::int64_t n = 0; n < n_plan; ++n) {
                const auto [ps, pa] = M.sample_visited(plan_rng);
                const auto [ps_next, pc] = M.simulate(ps, pa, plan_rng);
                Q.update(env.state_index(ps), static_cast<std::size_t>(pa), pc, env.state_index(ps_next));
            }
            acc.m.planning_steps += n_plan;

            if (observer) observer(StepInfo{t, ep, day, s, a, d, out, eps, n_plan}, Q, M);
            s = out.next_state;
        }
        acc.m.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.total_planning_steps += acc.m.planning_steps;
        result.episodes.push_back(acc.finish());
    }
    return result;
}

std::vector<RunMetrics> evaluate(const QTable& q, const PerishableInventory& env, const DemandDistribution& demand,
                                 const InventoryState& initial_state, int days, int repetitions, std::uint64_t seed) {
    if (days < 1 || repetitions < 0) throw std::invalid_argument("evaluation needs days >= 1 and repetitions >= 0");
    const auto policy = greedy_policy(q);
    std::vector<RunMetrics> out;
    out.reserve(static_cast<std::size_t>(repetitions));
    for (int r = 0; r < repetitions; ++r) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        Accumulator acc;
        InventoryState s = initial_state;
        for (int day = 0; day < days; ++day) {
            const int a = static_cast<int>(policy[env.state_index(s)]);
            const DayOutcome o = env.step(s, a, demand.sample(rng));
            acc.add(o);
            s = o.next_state;
        }
        out.push_back(acc.finish());
    }
    return out;
}

}  // namespace invrl
