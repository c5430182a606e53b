#include "invrl/env.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace invrl {

void CostParams::validate() const {
    if (!(b1 > b2 && b2 >= b3 && b3 >= 0.0))
        throw std::invalid_argument("cost params: require b1 > b2 >= b3 >= 0");
    if (!(shortage >= 0.0)) throw std::invalid_argument("cost params: shortage cost must be >= 0");
}

void EnvLimits::validate() const {
    if (max_stock < 1 || max_order < 0 || max_demand < 0)
        throw std::invalid_argument("env limits: max_stock >= 1, max_order >= 0, max_demand >= 0");
    // s3 takes the order quantity verbatim, so the bucket cap must hold any order.
    if (max_order > max_stock)
        throw std::invalid_argument("env limits: max_order must not exceed max_stock");
}

InventoryState age_and_receive(const InventoryState& state, int order_qty, const EnvLimits& limits) {
    if (order_qty < 0 || order_qty > limits.max_order)
        throw std::domain_error("order quantity " + std::to_string(order_qty) + " outside [0, " +
                                std::to_string(limits.max_order) + "]");
    return {state.s2, state.s3, order_qty};
}

double period_cost(const InventoryState& presale, int demand, const CostParams& params) {
    if (demand < 0) throw std::domain_error("negative demand");
    const int unmet = std::max(demand - presale.total(), 0);
    return params.b3 * presale.s3 + params.b2 * presale.s2 + params.b1 * presale.s1 +
           params.shortage * unmet;
}

InventoryState consume_demand(const InventoryState& presale, int demand) {
    if (demand < 0) throw std::domain_error("negative demand");
    const auto& [s1, s2, s3] = presale;
    InventoryState out = presale;
    out.s1 = std::max(s1 - demand, 0);
    if (demand >= s1) out.s2 = std::max(s2 - (demand - s1), 0);
    if (demand >= s1 + s2) out.s3 = std::max(s3 - (demand - s1 - s2), 0);
    return out;
}

PerishableInventory::PerishableInventory(EnvLimits limits, CostParams costs)
    : limits_(limits), costs_(costs) {
    limits_.validate();
    costs_.validate();
    const auto side = static_cast<std::size_t>(limits_.max_stock) + 1;
    num_states_ = side * side * side;
}

bool PerishableInventory::contains(const InventoryState& s) const noexcept {
    const auto in = [&](int v) { return v >= 0 && v <= limits_.max_stock; };
    return in(s.s1) && in(s.s2) && in(s.s3);
}

std::size_t PerishableInventory::state_index(const InventoryState& s) const {
    if (!contains(s)) throw std::out_of_range("inventory state outside the configured bounds");
    const auto side = static_cast<std::size_t>(limits_.max_stock) + 1;
    return (static_cast<std::size_t>(s.s1) * side + static_cast<std::size_t>(s.s2)) * side +
           static_cast<std::size_t>(s.s3);
}

InventoryState PerishableInventory::state_at(std::size_t index) const {
    if (index >= num_states_) throw std::out_of_range("state index out of range");
    const auto side = static_cast<std::size_t>(limits_.max_stock) + 1;
    InventoryState s;
    s.s3 = static_cast<int>(index % side);
    index /= side;
    s.s2 = static_cast<int>(index % side);
    s.s1 = static_cast<int>(index / side);
    return s;
}

std::vector<InventoryState> PerishableInventory::enumerate_states() const {
    std::vector<InventoryState> out;
    out.reserve(num_states_);
    for (std::size_t i = 0; i < num_states_; ++i) out.push_back(state_at(i));
    return out;
}

std::vector<int> PerishableInventory::enumerate_actions() const {
    std::vector<int> out(num_actions());
    for (std::size_t a = 0; a < out.size(); ++a) out[a] = static_cast<int>(a);
    return out;
}

DayOutcome PerishableInventory::step(const InventoryState& state, int order_qty, int demand) const {
    if (!contains(state)) throw std::out_of_range("inventory state outside the configured bounds");
    DayOutcome out;
    out.received = age_and_receive(state, order_qty, limits_);
    out.cost = period_cost(out.received, demand, costs_);
    out.next_state = consume_demand(out.received, demand);
    out.shortage = std::max(demand - out.received.total(), 0);
    out.demand_served = demand - out.shortage;
    return out;
}

}  // namespace invrl
