#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "invrl/random.hpp"

namespace invrl {

/// Dense table of estimated discounted cost-to-go, row-major by state.
/// Lower is better: updates bootstrap on the minimum over next actions.
class QTable {
public:
    QTable() = default;
    /// All entries start at zero.
    QTable(std::size_t num_states, std::size_t num_actions, double alpha, double gamma);

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    double alpha() const noexcept { return alpha_; }
    double gamma() const noexcept { return gamma_; }

    double operator()(std::size_t s, std::size_t a) const { return values_[offset(s, a)]; }
    void set(std::size_t s, std::size_t a, double v) { values_[offset(s, a)] = v; }

    std::span<const double> row(std::size_t s) const;
    std::span<const double> values() const noexcept { return values_; }

    double min_value(std::size_t s) const;

    /// Q(s,a) += alpha * (cost + gamma * min_a' Q(s',a') - Q(s,a)).
    void update(std::size_t s, std::size_t a, double cost, std::size_t s_next);

    bool operator==(const QTable&) const = default;

private:
    std::size_t offset(std::size_t s, std::size_t a) const;

    std::size_t num_states_ = 0;
    std::size_t num_actions_ = 0;
    double alpha_ = 0.1;
    double gamma_ = 0.9;
    std::vector<double> values_;
};

/// Epsilon-greedy over the cost-minimizing action; greedy ties are broken
/// uniformly at random. Consumes one uniform draw, plus one index draw when
/// exploring or when the minimum is tied.
std::size_t select_action(const QTable& q, std::size_t s, double epsilon, Rng& rng);

/// Lowest-index argmin of a row.
std::size_t greedy_action(const QTable& q, std::size_t s);

/// Greedy action for every state, lowest index on ties.
std::vector<std::size_t> greedy_policy(const QTable& q);

void to_json(nlohmann::json& j, const QTable& q);
void from_json(const nlohmann::json& j, QTable& q);

void save_qtable(const std::filesystem::path& path, const QTable& q);
QTable load_qtable(const std::filesystem::path& path);

}  // namespace invrl
