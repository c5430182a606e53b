#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "invrl/agents.hpp"
#include "invrl/demand.hpp"
#include "invrl/nn.hpp"

namespace invrl {

struct ForecasterConfig {
    int window = kDefaultWindow;
    std::vector<std::size_t> hidden = {128, 64};
    double dropout = 0.5;
    int epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    int max_demand = 10;
};

/// Next-day demand regressor over lagged demand and calendar features,
/// trained with dropout so that stochastic passes sample the prediction.
class Forecaster {
public:
    Forecaster(nn::Network net, ForecasterConfig config, std::vector<int> tail, Date last_date);

    const nn::Network& network() const noexcept { return net_; }
    const ForecasterConfig& config() const noexcept { return config_; }
    /// The last `window` demands of the training history, oldest first.
    const std::vector<int>& tail() const noexcept { return tail_; }
    Date last_date() const noexcept { return last_date_; }

    /// Network input for a feature vector (demands scaled by max_demand).
    std::vector<double> encode(const FeatureVector& f) const;

    /// Deterministic prediction in demand units (dropout off).
    double predict(const FeatureVector& f) const;
    /// One dropout sample in demand units.
    double sample(const FeatureVector& f, Rng& rng) const;
    /// Monte-Carlo mean and variance in demand units.
    nn::Prediction predict_mc(const FeatureVector& f, int samples, Rng& rng) const;

    /// Rounds half-up and clamps into [0, max_demand].
    int to_demand(double prediction) const;

    void save(const std::filesystem::path& path) const;
    static Forecaster load(const std::filesystem::path& path);

private:
    nn::Network net_;
    ForecasterConfig config_;
    std::vector<int> tail_;
    Date last_date_;
};

/// Fits the forecaster on (features, next-day demand) pairs with shuffled
/// mini-batch Adam on MSE. Throws std::invalid_argument when the series is
/// not longer than window + 1.
Forecaster train_forecaster(const DemandSeries& series, const ForecasterConfig& config, Rng& rng);

/// Autoregressive rollout of `h` days starting at `start`: each day takes one
/// dropout sample, rounds and clamps it, and feeds it back as history.
DemandSeries generate_offline(const Forecaster& f, Date start, int h, Rng& rng);

struct WarmStartConfig {
    double alpha = 0.1;
    double gamma = 0.9;
    double epsilon = 0.2;
    int epochs = 50;  ///< passes over the offline series, one episode each
    ModelConfig model;
    InventoryState initial_state{0, 0, 5};
    std::uint64_t seed = 0;
};

/// Q-learning on a simulator replaying `offline` cyclically; every transition
/// also trains the model. Returns the resulting Q-table and model.
WarmStart build_warm_start(const DemandSeries& offline, const PerishableInventory& env,
                           const WarmStartConfig& config);

}  // namespace invrl
