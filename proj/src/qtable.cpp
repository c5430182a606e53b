#include "invrl/qtable.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace invrl {

QTable::QTable(std::size_t num_states, std::size_t num_actions, double alpha, double gamma)
    : num_states_(num_states), num_actions_(num_actions), alpha_(alpha), gamma_(gamma),
      values_(num_states * num_actions, 0.0) {
    if (num_states == 0 || num_actions == 0) throw std::invalid_argument("Q-table needs at least one state and action");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("learning rate must lie in (0, 1)");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("discount factor must lie in (0, 1)");
}

std::size_t QTable::offset(std::size_t s, std::size_t a) const {
    if (s >= num_states_ || a >= num_actions_) throw std::out_of_range("Q-table index out of range");
    return s * num_actions_ + a;
}

std::span<const double> QTable::row(std::size_t s) const {
    return std::span<const double>(values_).subspan(offset(s, 0), num_actions_);
}

double QTable::min_value(std::size_t s) const {
    const auto r = row(s);
    return *std::min_element(r.begin(), r.end());
}

void QTable::update(std::size_t s, std::size_t a, double cost, std::size_t s_next) {
    if (!std::isfinite(cost)) throw std::invalid_argument("non-finite cost in Q update");
    const double target = cost + gamma_ * min_value(s_next);
    double& q = values_[offset(s, a)];
    q += alpha_ * (target - q);
}

std::size_t select_action(const QTable& q, std::size_t s, double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
    const auto r = q.row(s);
    if (uniform01(rng) < epsilon) return static_cast<std::size_t>(uniform_index(rng, r.size()));

    const double best = *std::min_element(r.begin(), r.end());
    std::size_t ties = 0;
    for (double v : r) ties += v == best;
    if (ties == 1) return static_cast<std::size_t>(std::find(r.begin(), r.end(), best) - r.begin());
    auto pick = uniform_index(rng, ties);
    for (std::size_t a = 0; a < r.size(); ++a)
        if (r[a] == best && pick-- == 0) return a;
    return 0;  // unreachable
}

std::size_t greedy_action(const QTable& q, std::size_t s) {
    const auto r = q.row(s);
    return static_cast<std::size_t>(std::min_element(r.begin(), r.end()) - r.begin());
}

std::vector<std::size_t> greedy_policy(const QTable& q) {
    std::vector<std::size_t> policy(q.num_states());
    for (std::size_t s = 0; s < policy.size(); ++s) policy[s] = greedy_action(q, s);
    return policy;
}

void to_json(nlohmann::json& j, const QTable& q) {
    j = nlohmann::json{{"format", "invrl-qtable"},
                       {"version", 1},
                       {"num_states", q.num_states()},
                       {"num_actions", q.num_actions()},
                       {"alpha", q.alpha()},
                       {"gamma", q.gamma()},
                       {"values", std::vector<double>(q.values().begin(), q.values().end())}};
}

void from_json(const nlohmann::json& j, QTable& q) {
    if (j.value("format", "") != "invrl-qtable") throw std::runtime_error("not a Q-table document");
    QTable out(j.at("num_states").get<std::size_t>(), j.at("num_actions").get<std::size_t>(),
               j.at("alpha").get<double>(), j.at("gamma").get<double>());
    const auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != out.num_states() * out.num_actions())
        throw std::runtime_error("Q-table values do not match the declared shape");
    for (std::size_t s = 0; s < out.num_states(); ++s)
        for (std::size_t a = 0; a < out.num_actions(); ++a) out.set(s, a, values[s * out.num_actions() + a]);
    q = std::move(out);
}

void save_qtable(const std::filesystem::path& path, const QTable& q) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << nlohmann::json(q).dump() << '\n';
}

QTable load_qtable(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return nlohmann::json::parse(in).get<QTable>();
}

}  // namespace invrl
