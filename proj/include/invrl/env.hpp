#pragma once

#include <compare>
#include <cstddef>
#include <vector>

namespace invrl {

/// On-hand stock grouped by remaining shelf life.
///
/// `s1` units expire at the end of the current day, `s2` have two days left
/// and `s3` are the fresh units received this morning.
struct InventoryState {
    int s1 = 0;
    int s2 = 0;
    int s3 = 0;

    int total() const noexcept { return s1 + s2 + s3; }

    friend auto operator<=>(const InventoryState&, const InventoryState&) = default;
};

/// Holding/obsolescence cost per unit at each shelf-life bucket plus the
/// lost-sales penalty per unit of unmet demand.
struct CostParams {
    double b1 = 0.7;
    double b2 = 0.3;
    double b3 = 0.0;
    double shortage = 1.0;

    /// Throws std::invalid_argument unless b1 > b2 >= b3 >= 0 and shortage >= 0.
    void validate() const;
};

/// Size of the tabular problem.
struct EnvLimits {
    int max_stock = 10;   ///< per-bucket cap
    int max_order = 10;
    int max_demand = 10;

    void validate() const;
};

struct DayOutcome {
    InventoryState received;    ///< after aging and receipt, before sales
    InventoryState next_state;  ///< after sales; the state the next order is placed from
    double cost = 0.0;
    int shortage = 0;
    int demand_served = 0;
};

/// Shelf-life shift at the start of a day. The old `s1` is disposed of.
InventoryState age_and_receive(const InventoryState& state, int order_qty, const EnvLimits& limits);

/// Holding cost of the pre-sale inventory plus the shortage penalty.
double period_cost(const InventoryState& presale, int demand, const CostParams& params);

/// Serves demand first-in-first-out, oldest bucket first.
InventoryState consume_demand(const InventoryState& presale, int demand);

/// The perishable-inventory MDP with dense state/action indexing.
class PerishableInventory {
public:
    PerishableInventory() : PerishableInventory(EnvLimits{}, CostParams{}) {}
    PerishableInventory(EnvLimits limits, CostParams costs);

    const EnvLimits& limits() const noexcept { return limits_; }
    const CostParams& costs() const noexcept { return costs_; }

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return static_cast<std::size_t>(limits_.max_order) + 1; }

    std::size_t state_index(const InventoryState& s) const;
    InventoryState state_at(std::size_t index) const;
    bool contains(const InventoryState& s) const noexcept;

    /// All states in index order.
    std::vector<InventoryState> enumerate_states() const;
    /// All order quantities 0..max_order.
    std::vector<int> enumerate_actions() const;

    /// One full day: receive, charge, sell.
    DayOutcome step(const InventoryState& state, int order_qty, int demand) const;

private:
    EnvLimits limits_;
    CostParams costs_;
    std::size_t num_states_;
};

}  // namespace invrl
