#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "invrl/demand.hpp"
#include "invrl/env_model.hpp"
#include "oracles.hpp"

using namespace invrl;

namespace {

const PerishableInventory kEnv{};

void observe(EnvModel& m, const InventoryState& s, int a, int d) {
    const auto out = kEnv.step(s, a, d);
    m.update(s, a, out.next_state, out.cost);
}

}  // namespace

TEST(EnvModel, PointMassAfterOneObservation) {
    EnvModel m(kEnv, {});
    const InventoryState s{0, 0, 3};
    observe(m, s, 2, 1);
    Rng rng(1);
    const auto pmf = m.demand_pmf(s, 2, rng);
    EXPECT_EQ(pmf[1], 1.0);
    EXPECT_EQ(m.transition_prob(s, 2, {0, 2, 2}, rng), 1.0);
    EXPECT_EQ(m.transition_prob(s, 2, {0, 1, 2}, rng), 0.0);
    EXPECT_EQ(m.expected_cost(s, 2, rng), kEnv.step(s, 2, 1).cost);
}

TEST(EnvModel, EmpiricalFrequencies) {
    EnvModel m(kEnv, {});
    const InventoryState s{0, 0, 3};
    for (int d : {2, 2, 3}) observe(m, s, 2, d);
    Rng rng(1);
    const auto pmf = m.demand_pmf(s, 2, rng);
    EXPECT_NEAR(pmf[2], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(pmf[3], 1.0 / 3.0, 1e-15);
    EXPECT_EQ(m.counts(s, 2)[2], 2u);

    const double mean_cost = (2 * kEnv.step(s, 2, 2).cost + kEnv.step(s, 2, 3).cost) / 3.0;
    EXPECT_NEAR(m.expected_cost(s, 2, rng), mean_cost, 1e-12);
}

TEST(EnvModel, TransitionProbabilityIsDistribution) {
    EnvModel m(kEnv, {});
    const InventoryState s{0, 0, 3};
    observe(m, s, 2, 1);
    observe(m, s, 2, 1);
    observe(m, s, 2, 2);
    observe(m, s, 2, 4);
    Rng rng(2);
    EXPECT_NEAR(m.transition_prob(s, 2, {0, 1, 2}, rng), 0.25, 1e-15);
    // Nothing observed drains the stock.
    EXPECT_NEAR(m.transition_prob(s, 2, {0, 0, 0}, rng), 0.0, 1e-15);
    EXPECT_NEAR(m.transition_prob(s, 2, {0, 0, 1}, rng), 0.25, 1e-15);
    double total = 0.0;
    for (const auto& next : kEnv.enumerate_states()) total += m.transition_prob(s, 2, next, rng);
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(EnvModel, SimulatedSamplesMatchEmpiricalPmf) {
    EnvModel m(kEnv, {});
    const InventoryState s{1, 2, 3};
    const auto truth = discretized_gamma(5.0, 5.0, 10);
    Rng demand(4);
    for (int i = 0; i < 200; ++i) observe(m, s, 4, truth.sample(demand));
    Rng rng(5);
    const auto pmf = m.demand_pmf(s, 4, rng);

    std::vector<double> freq(11, 0.0);
    const InventoryState received = age_and_receive(s, 4, kEnv.limits());
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto [next, cost] = m.simulate(s, 4, rng);
        // Map the next state back to the lowest demand class reaching it.
        for (int d = 0; d <= 10; ++d)
            if (consume_demand(received, d) == next) {
                freq[static_cast<std::size_t>(d)] += 1.0 / n;
                break;
            }
        EXPECT_EQ(cost, m.expected_cost(s, 4, rng));
    }
    // Classes draining all stock are indistinguishable by state; fold them.
    std::vector<double> folded = pmf;
    const int drain = received.total();
    for (int d = drain + 1; d <= 10; ++d) {
        folded[static_cast<std::size_t>(drain)] += folded[static_cast<std::size_t>(d)];
        folded[static_cast<std::size_t>(d)] = 0.0;
    }
    EXPECT_LT(total_variation(freq, folded), 0.03);
}

TEST(EnvModel, InverseDynamicsRoundTrip) {
    EnvModel m(kEnv, {});
    for (const auto& s : kEnv.enumerate_states())
        for (int a : kEnv.enumerate_actions()) {
            for (int d = 0; d <= kEnv.limits().max_demand; ++d) {
                const auto out = kEnv.step(s, a, d);
                const int recovered = m.recover_demand(s, a, out.next_state, out.cost);
                // The recovered class must reproduce the same transition and cost.
                const auto again = kEnv.step(s, a, recovered);
                ASSERT_EQ(again.next_state, out.next_state);
                ASSERT_EQ(again.cost, out.cost);
                ASSERT_EQ(oracle::fifo_unit_by_unit(out.received, recovered), out.next_state);
            }
        }
    EXPECT_THROW(m.recover_demand({0, 0, 0}, 1, {0, 0, 5}, 0.0), std::invalid_argument);
}

TEST(EnvModel, SimulateReachable) {
    for (auto kind : {ModelKind::tabular, ModelKind::det_net, ModelKind::mc_dropout}) {
        ModelConfig cfg;
        cfg.kind = kind;
        cfg.hidden = {16, 8};
        EnvModel m(kEnv, cfg, 3);
        Rng demand(6), rng(7);
        const auto truth = discretized_gamma(5.0, 5.0, 10);
        InventoryState s{0, 0, 5};
        for (int i = 0; i < 50; ++i) {
            const int a = static_cast<int>(uniform_index(demand, 4));
            const auto out = kEnv.step(s, a, truth.sample(demand));
            m.update(s, a, out.next_state, out.cost);
            s = out.next_state;
        }
        for (int i = 0; i < 200; ++i) {
            const auto [ps, pa] = m.sample_visited(rng);
            ASSERT_TRUE(m.visited(ps, pa));
            const auto [next, cost] = m.simulate(ps, pa, rng);
            const auto received = age_and_receive(ps, pa, kEnv.limits());
            bool reachable = false;
            for (int d = 0; d <= 10; ++d) reachable |= consume_demand(received, d) == next;
            EXPECT_TRUE(reachable) << to_string(kind);
            EXPECT_TRUE(std::isfinite(cost));
        }
    }
}

TEST(EnvModel, SampleVisitedIsUniformOverPairs) {
    EnvModel m(kEnv, {});
    Rng rng(8);
    EXPECT_THROW(m.sample_visited(rng), std::logic_error);
    EXPECT_THROW(m.demand_pmf({0, 0, 0}, 0, rng), std::logic_error);

    // One pair observed many times, two pairs once: sampling ignores multiplicity.
    for (int i = 0; i < 20; ++i) observe(m, {0, 0, 0}, 3, 1);
    observe(m, {0, 0, 1}, 3, 1);
    observe(m, {0, 1, 0}, 3, 1);
    EXPECT_EQ(m.visited_count(), 3u);
    int first = 0;
    const int n = 9000;
    for (int i = 0; i < n; ++i) {
        const auto [s, a] = m.sample_visited(rng);
        first += s == InventoryState{0, 0, 0};
    }
    EXPECT_NEAR(first / double(n), 1.0 / 3.0, 0.03);
}

TEST(EnvModel, ThirtyDayEstimatesFollowBinomial) {
    // 30 observed days from a true demand pmf: the estimated class mass is a
    // binomial proportion, so its error stays within 4 standard deviations.
    const auto truth = discretized_gamma(5.0, 5.0, 10);
    EnvModel m(kEnv, {});
    const InventoryState s{0, 0, 0};
    Rng rng(9);
    for (int i = 0; i < 30; ++i) observe(m, s, 10, truth.sample(rng));
    const auto pmf = m.demand_pmf(s, 10, rng);
    for (std::size_t d = 0; d <= 10; ++d) {
        const double p = truth[static_cast<int>(d)];
        EXPECT_LE(std::abs(pmf[d] - p), 4.0 * std::sqrt(p * (1 - p) / 30.0) + 1e-12) << "class " << d;
    }
}

TEST(EnvModel, NetworkVariantsLearnConstantDemand) {
    for (auto kind : {ModelKind::det_net, ModelKind::mc_dropout}) {
        ModelConfig cfg;
        cfg.kind = kind;
        cfg.hidden = {32, 16};
        cfg.dropout = 0.1;
        cfg.learning_rate = 1e-2;
        EnvModel m(kEnv, cfg, 11);
        const InventoryState s{0, 0, 3};
        for (int i = 0; i < 300; ++i) observe(m, s, 2, 3);
        Rng rng(12);
        const auto pmf = m.demand_pmf(s, 2, rng);
        double sum = 0.0;
        for (double p : pmf) sum += p;
        EXPECT_NEAR(sum, 1.0, 1e-9);
        EXPECT_GT(pmf[3], 0.8) << to_string(kind);
        EXPECT_NEAR(m.expected_cost(s, 2, rng), kEnv.step(s, 2, 3).cost, 0.3) << to_string(kind);
    }
}

TEST(EnvModel, KindNames) {
    EXPECT_EQ(parse_model_kind("tabular"), ModelKind::tabular);
    EXPECT_EQ(parse_model_kind("mlp"), ModelKind::det_net);
    EXPECT_EQ(parse_model_kind("bnn"), ModelKind::mc_dropout);
    EXPECT_THROW(parse_model_kind("gp"), std::invalid_argument);
}

TEST(EnvModel, SaveLoadRoundTrip) {
    for (auto kind : {ModelKind::tabular, ModelKind::mc_dropout}) {
        ModelConfig cfg;
        cfg.kind = kind;
        cfg.hidden = {16, 8};
        EnvModel m(kEnv, cfg, 13);
        Rng rng(14);
        InventoryState s{0, 0, 5};
        for (int i = 0; i < 40; ++i) {
            const int a = static_cast<int>(uniform_index(rng, 5));
            const auto out = kEnv.step(s, a, static_cast<int>(uniform_index(rng, 8)));
            m.update(s, a, out.next_state, out.cost);
            s = out.next_state;
        }
        const auto path = std::filesystem::temp_directory_path() / "invrl_model.bin";
        m.save(path);
        const auto back = EnvModel::load(path);
        EXPECT_EQ(back, m) << to_string(kind);
        Rng pick(16), r1(15), r2(15);
        const auto [ps, pa] = m.sample_visited(pick);
        EXPECT_EQ(back.demand_pmf(ps, pa, r2), m.demand_pmf(ps, pa, r1));
    }
}
