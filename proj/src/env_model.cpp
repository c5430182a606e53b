#include "invrl/env_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace invrl {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::tabular: return "tabular";
        case ModelKind::det_net: return "det-net";
        case ModelKind::mc_dropout: return "mc-dropout";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "tabular") return ModelKind::tabular;
    if (text == "det-net" || text == "mlp") return ModelKind::det_net;
    if (text == "mc-dropout" || text == "bnn") return ModelKind::mc_dropout;
    throw std::invalid_argument("unknown model kind '" + std::string(text) + "' (tabular, det-net, mc-dropout)");
}

EnvModel::EnvModel(const PerishableInventory& env, ModelConfig config, std::uint64_t seed)
    : env_(env), config_(std::move(config)) {
    const std::size_t pairs = env_.num_states() * env_.num_actions();
    visited_.assign(pairs, 0);
    const auto& c = env_.costs();
    const auto& lim = env_.limits();
    cost_scale_ = std::max(1.0, (c.b1 + c.b2 + c.b3) * lim.max_stock + c.shortage * lim.max_demand);
    if (config_.kind == ModelKind::tabular) {
        counts_.assign(pairs * num_classes(), 0);
        totals_.assign(pairs, 0);
        cost_sum_.assign(pairs, 0.0);
    } else {
        if (config_.mc_samples < 1) throw std::invalid_argument("model needs at least one MC sample");
        init_networks(seed);
    }
}

void EnvModel::init_networks(std::uint64_t seed) {
    Rng init(derive_seed(seed, "model-init"));
    train_rng_.seed(derive_seed(seed, "model-train"));
    const double p = config_.kind == ModelKind::mc_dropout ? config_.dropout : 0.0;

    nn::NetworkSpec trans{{4}, p, config_.mse_transition ? nn::Head::linear : nn::Head::softmax};
    trans.sizes.insert(trans.sizes.end(), config_.hidden.begin(), config_.hidden.end());
    trans.sizes.push_back(num_classes());
    nn::NetworkSpec cost{{4}, p, nn::Head::linear};
    cost.sizes.insert(cost.sizes.end(), config_.hidden.begin(), config_.hidden.end());
    cost.sizes.push_back(1);

    transition_net_ = nn::Network(trans, init);
    cost_net_ = nn::Network(cost, init);
    transition_adam_ = nn::Adam(transition_net_.parameters().size(), config_.learning_rate);
    cost_adam_ = nn::Adam(cost_net_.parameters().size(), config_.learning_rate);
}

std::size_t EnvModel::pair_index(const InventoryState& s, int a) const {
    if (a < 0 || static_cast<std::size_t>(a) >= env_.num_actions()) throw std::out_of_range("action out of range");
    return env_.state_index(s) * env_.num_actions() + static_cast<std::size_t>(a);
}

std::size_t EnvModel::checked_visited_pair(const InventoryState& s, int a) const {
    const auto p = pair_index(s, a);
    if (!visited_[p]) throw std::logic_error("model queried for a state-action pair it has never observed");
    return p;
}

std::vector<double> EnvModel::encode(const InventoryState& s, int a) const {
    const double smax = env_.limits().max_stock;
    const double amax = std::max(1, env_.limits().max_order);
    return {s.s1 / smax, s.s2 / smax, s.s3 / smax, a / amax};
}

int EnvModel::recover_demand(const InventoryState& s, int a, const InventoryState& s_next, double cost) const {
    const InventoryState received = age_and_receive(s, a, env_.limits());
    const double tol = 1e-9 * std::max(1.0, std::abs(cost));
    int fallback = -1;
    for (int d = 0; d <= env_.limits().max_demand; ++d) {
        if (consume_demand(received, d) != s_next) continue;
        if (std::abs(period_cost(received, d, env_.costs()) - cost) <= tol) return d;
        if (fallback < 0) fallback = d;
    }
    // Without a shortage penalty the cost cannot separate stock-draining demands.
    if (fallback >= 0 && env_.costs().shortage == 0.0) return fallback;
    throw std::invalid_argument("no demand explains the observed transition");
}

void EnvModel::update(const InventoryState& s, int a, const InventoryState& s_next, double cost) {
    const int d = recover_demand(s, a, s_next, cost);
    const auto p = pair_index(s, a);
    if (config_.kind == ModelKind::tabular) {
        ++counts_[p * num_classes() + static_cast<std::size_t>(d)];
        ++totals_[p];
        cost_sum_[p] += cost;
    } else {
        const nn::Batch x{encode(s, a)};
        std::vector<double> onehot(num_classes(), 0.0);
        onehot[static_cast<std::size_t>(d)] = 1.0;
        nn::train_step(transition_net_, transition_adam_, x, nn::Batch{onehot}, train_rng_);
        nn::train_step(cost_net_, cost_adam_, x, nn::Batch{{cost / cost_scale_}}, train_rng_);
    }
    if (!visited_[p]) {
        visited_[p] = 1;
        visit_order_.push_back(static_cast<std::uint32_t>(p));
    }
}

std::vector<double> EnvModel::demand_pmf(const InventoryState& s, int a, Rng& rng) const {
    const auto p = checked_visited_pair(s, a);
    const std::size_t k = num_classes();
    std::vector<double> pmf(k);
    if (config_.kind == ModelKind::tabular) {
        const double total = totals_[p];
        for (std::size_t d = 0; d < k; ++d) pmf[d] = counts_[p * k + d] / total;
        return pmf;
    }
    const auto x = encode(s, a);
    pmf = config_.kind == ModelKind::mc_dropout ? nn::mc_predict(transition_net_, x, config_.mc_samples, rng).mean
                                                : transition_net_.forward(x);
    if (config_.mse_transition) {
        double sum = 0.0;
        for (double& v : pmf) sum += (v = std::max(v, 0.0));
        if (sum <= 0.0) std::fill(pmf.begin(), pmf.end(), 1.0 / static_cast<double>(k));
        else for (double& v : pmf) v /= sum;
    }
    return pmf;
}

double EnvModel::expected_cost(const InventoryState& s, int a, Rng& rng) const {
    const auto p = checked_visited_pair(s, a);
    if (config_.kind == ModelKind::tabular) return cost_sum_[p] / totals_[p];
    const auto x = encode(s, a);
    const double scaled = config_.kind == ModelKind::mc_dropout
                              ? nn::mc_predict(cost_net_, x, config_.mc_samples, rng).mean[0]
                              : cost_net_.forward(x)[0];
    return scaled * cost_scale_;
}

std::pair<InventoryState, double> EnvModel::simulate(const InventoryState& s, int a, Rng& rng) const {
    const auto pmf = demand_pmf(s, a, rng);
    const double u = uniform01(rng);
    int d = static_cast<int>(pmf.size()) - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        acc += pmf[i];
        if (u < acc) {
            d = static_cast<int>(i);
            break;
        }
    }
    const InventoryState next = consume_demand(age_and_receive(s, a, env_.limits()), d);
    return {next, expected_cost(s, a, rng)};
}

double EnvModel::transition_prob(const InventoryState& s, int a, const InventoryState& s_next, Rng& rng) const {
    const auto pmf = demand_pmf(s, a, rng);
    const InventoryState received = age_and_receive(s, a, env_.limits());
    double prob = 0.0;
    for (std::size_t d = 0; d < pmf.size(); ++d)
        if (consume_demand(received, static_cast<int>(d)) == s_next) prob += pmf[d];
    return prob;
}

bool EnvModel::visited(const InventoryState& s, int a) const { return visited_[pair_index(s, a)] != 0; }

std::pair<InventoryState, int> EnvModel::sample_visited(Rng& rng) const {
    if (visit_order_.empty()) throw std::logic_error("model has no observed state-action pairs");
    const std::size_t p = visit_order_[uniform_index(rng, visit_order_.size())];
    return {env_.state_at(p / env_.num_actions()), static_cast<int>(p % env_.num_actions())};
}

std::vector<std::uint32_t> EnvModel::counts(const InventoryState& s, int a) const {
    if (config_.kind != ModelKind::tabular) throw std::logic_error("demand counts exist only for the tabular model");
    const auto p = pair_index(s, a);
    const auto k = num_classes();
    return {counts_.begin() + static_cast<std::ptrdiff_t>(p * k), counts_.begin() + static_cast<std::ptrdiff_t>((p + 1) * k)};
}

bool EnvModel::operator==(const EnvModel& o) const {
    return config_.kind == o.config_.kind && visit_order_ == o.visit_order_ && counts_ == o.counts_ &&
           totals_ == o.totals_ && cost_sum_ == o.cost_sum_ && transition_net_ == o.transition_net_ &&
           cost_net_ == o.cost_net_;
}

namespace {

constexpr char kMagic[8] = {'I', 'N', 'V', 'R', 'L', 'E', 'M', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
void put_vec(std::ostream& out, const std::vector<T>& v) {
    put<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("truncated model file");
    return v;
}

template <class T>
std::vector<T> get_vec(std::istream& in) {
    const auto n = get<std::uint64_t>(in);
    if (n > (1ULL << 32)) throw std::runtime_error("corrupt model file");
    std::vector<T> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in) throw std::runtime_error("truncated model file");
    return v;
}

}  // namespace

void EnvModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(config_.kind));
    const auto& lim = env_.limits();
    put<std::int32_t>(out, lim.max_stock);
    put<std::int32_t>(out, lim.max_order);
    put<std::int32_t>(out, lim.max_demand);
    const auto& c = env_.costs();
    for (double v : {c.b1, c.b2, c.b3, c.shortage}) put<double>(out, v);
    put_vec(out, std::vector<std::uint64_t>(config_.hidden.begin(), config_.hidden.end()));
    put<double>(out, config_.dropout);
    put<std::int32_t>(out, config_.mc_samples);
    put<double>(out, config_.learning_rate);
    put<std::uint8_t>(out, config_.mse_transition ? 1 : 0);
    put_vec(out, visit_order_);
    if (config_.kind == ModelKind::tabular) {
        put_vec(out, counts_);
        put_vec(out, totals_);
        put_vec(out, cost_sum_);
    } else {
        nn::write_network(out, transition_net_);
        nn::write_network(out, cost_net_);
        std::ostringstream rng_state;
        rng_state << train_rng_;
        const std::string s = rng_state.str();
        put_vec(out, std::vector<char>(s.begin(), s.end()));
    }
}

EnvModel EnvModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error("not an environment model file");

    ModelConfig cfg;
    const auto kind = get<std::uint8_t>(in);
    if (kind > 2) throw std::runtime_error("unknown model kind in file");
    cfg.kind = static_cast<ModelKind>(kind);
    EnvLimits lim;
    lim.max_stock = get<std::int32_t>(in);
    lim.max_order = get<std::int32_t>(in);
    lim.max_demand = get<std::int32_t>(in);
    CostParams c;
    c.b1 = get<double>(in);
    c.b2 = get<double>(in);
    c.b3 = get<double>(in);
    c.shortage = get<double>(in);
    const auto hidden = get_vec<std::uint64_t>(in);
    cfg.hidden.assign(hidden.begin(), hidden.end());
    cfg.dropout = get<double>(in);
    cfg.mc_samples = get<std::int32_t>(in);
    cfg.learning_rate = get<double>(in);
    cfg.mse_transition = get<std::uint8_t>(in) != 0;

    EnvModel m(PerishableInventory(lim, c), cfg);
    m.visit_order_ = get_vec<std::uint32_t>(in);
    for (auto p : m.visit_order_) {
        if (p >= m.visited_.size()) throw std::runtime_error("corrupt visit memory in model file");
        m.visited_[p] = 1;
    }
    if (cfg.kind == ModelKind::tabular) {
        m.counts_ = get_vec<std::uint32_t>(in);
        m.totals_ = get_vec<std::uint32_t>(in);
        m.cost_sum_ = get_vec<double>(in);
        if (m.counts_.size() != m.visited_.size() * m.num_classes() || m.totals_.size() != m.visited_.size() ||
            m.cost_sum_.size() != m.visited_.size())
            throw std::runtime_error("model table shape does not match its limits");
    } else {
        m.transition_net_ = nn::read_network(in);
        m.cost_net_ = nn::read_network(in);
        m.transition_adam_ = nn::Adam(m.transition_net_.parameters().size(), cfg.learning_rate);
        m.cost_adam_ = nn::Adam(m.cost_net_.parameters().size(), cfg.learning_rate);
        const auto s = get_vec<char>(in);
        std::istringstream rng_state(std::string(s.begin(), s.end()));
        rng_state >> m.train_rng_;
    }
    return m;
}

}  // namespace invrl
