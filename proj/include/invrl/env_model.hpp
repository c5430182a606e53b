#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "invrl/env.hpp"
#include "invrl/nn.hpp"
#include "invrl/random.hpp"

namespace invrl {

enum class ModelKind : std::uint8_t {
    tabular = 0,     ///< demand-class counts and running-mean cost per pair
    det_net = 1,     ///< deterministic networks, single forward pass
    mc_dropout = 2,  ///< dropout networks, Monte-Carlo averaged
};

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct ModelConfig {
    ModelKind kind = ModelKind::tabular;
    std::vector<std::size_t> hidden = {128, 64};
    double dropout = 0.5;  ///< used by mc_dropout only
    int mc_samples = 10;
    double learning_rate = 1e-3;
    /// Train the transition network with MSE against one-hot targets instead
    /// of softmax cross-entropy; outputs are clipped and renormalized.
    bool mse_transition = false;
};

/// Learned model of one day's transition and cost for each (state, order).
///
/// The next state is a deterministic function of the day's demand, so the
/// transition distribution is kept over demand classes 0..max_demand. Each
/// observed transition is inverted back to its demand class (the shortage
/// penalty in the observed cost separates demands that drain all stock).
class EnvModel {
public:
    EnvModel(const PerishableInventory& env, ModelConfig config, std::uint64_t seed = 0);

    ModelKind kind() const noexcept { return config_.kind; }
    const ModelConfig& config() const noexcept { return config_; }
    const PerishableInventory& env() const noexcept { return env_; }
    std::size_t num_classes() const noexcept { return static_cast<std::size_t>(env_.limits().max_demand) + 1; }

    /// The demand class explaining an observed transition.
    /// Throws std::invalid_argument if no demand in 0..max_demand does.
    int recover_demand(const InventoryState& s, int a, const InventoryState& s_next, double cost) const;

    void update(const InventoryState& s, int a, const InventoryState& s_next, double cost);

    /// Estimated demand-class distribution for a visited pair. The rng feeds
    /// Monte-Carlo sampling for the dropout variant and is otherwise unused.
    std::vector<double> demand_pmf(const InventoryState& s, int a, Rng& rng) const;
    double expected_cost(const InventoryState& s, int a, Rng& rng) const;

    /// Draws a demand class from the model and returns the implied next state
    /// and the estimated cost.
    std::pair<InventoryState, double> simulate(const InventoryState& s, int a, Rng& rng) const;

    /// P(s_next | s, a): mass of every demand class leading to s_next.
    double transition_prob(const InventoryState& s, int a, const InventoryState& s_next, Rng& rng) const;

    bool visited(const InventoryState& s, int a) const;
    std::size_t visited_count() const noexcept { return visit_order_.size(); }
    /// Uniform over distinct observed pairs.
    std::pair<InventoryState, int> sample_visited(Rng& rng) const;

    /// Raw demand-class counts for a pair (tabular variant).
    std::vector<std::uint32_t> counts(const InventoryState& s, int a) const;

    bool operator==(const EnvModel& other) const;

    void save(const std::filesystem::path& path) const;
    static EnvModel load(const std::filesystem::path& path);

private:
    std::size_t pair_index(const InventoryState& s, int a) const;
    std::size_t checked_visited_pair(const InventoryState& s, int a) const;
    std::vector<double> encode(const InventoryState& s, int a) const;
    void init_networks(std::uint64_t seed);

    PerishableInventory env_;
    ModelConfig config_;
    double cost_scale_ = 1.0;

    std::vector<std::uint8_t> visited_;
    std::vector<std::uint32_t> visit_order_;

    // tabular
    std::vector<std::uint32_t> counts_;
    std::vector<std::uint32_t> totals_;
    std::vector<double> cost_sum_;

    // networks
    nn::Network transition_net_;
    nn::Network cost_net_;
    nn::Adam transition_adam_;
    nn::Adam cost_adam_;
    Rng train_rng_;
};

}  // namespace invrl
