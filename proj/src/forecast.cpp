#include "invrl/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace invrl {

Forecaster::Forecaster(nn::Network net, ForecasterConfig config, std::vector<int> tail, Date last_date)
    : net_(std::move(net)), config_(std::move(config)), tail_(std::move(tail)), last_date_(last_date) {
    if (tail_.size() != static_cast<std::size_t>(config_.window))
        throw std::invalid_argument("forecaster history tail must hold exactly one window");
    if (net_.input_size() != feature_size(config_.window) || net_.output_size() != 1)
        throw std::invalid_argument("forecaster network shape does not match its window");
}

std::vector<double> Forecaster::encode(const FeatureVector& f) const {
    const double scale = std::max(1, config_.max_demand);
    std::vector<double> x = f.concat();
    for (std::size_t i = 0; i < f.numeric.size(); ++i) x[i] /= scale;
    return x;
}

double Forecaster::predict(const FeatureVector& f) const {
    return net_.forward(encode(f))[0] * std::max(1, config_.max_demand);
}

double Forecaster::sample(const FeatureVector& f, Rng& rng) const {
    return net_.forward(encode(f), true, &rng)[0] * std::max(1, config_.max_demand);
}

nn::Prediction Forecaster::predict_mc(const FeatureVector& f, int samples, Rng& rng) const {
    auto p = nn::mc_predict(net_, encode(f), samples, rng);
    const double scale = std::max(1, config_.max_demand);
    p.mean[0] *= scale;
    p.variance[0] *= scale * scale;
    return p;
}

int Forecaster::to_demand(double prediction) const {
    if (!std::isfinite(prediction)) return 0;
    const double rounded = std::floor(prediction + 0.5);
    return static_cast<int>(std::clamp(rounded, 0.0, static_cast<double>(config_.max_demand)));
}

Forecaster train_forecaster(const DemandSeries& series, const ForecasterConfig& config, Rng& rng) {
    if (config.window < 1) throw std::invalid_argument("forecast window must be positive");
    const auto w = static_cast<std::size_t>(config.window);
    if (series.size() <= w + 1)
        throw std::invalid_argument("demand history of " + std::to_string(series.size()) +
                                    " days is too short for window " + std::to_string(config.window));
    if (config.epochs < 1 || config.batch_size < 1) throw std::invalid_argument("forecaster needs epochs and batch size >= 1");

    nn::NetworkSpec spec{{feature_size(config.window)}, config.dropout, nn::Head::linear};
    spec.sizes.insert(spec.sizes.end(), config.hidden.begin(), config.hidden.end());
    spec.sizes.push_back(1);
    Rng init(rng());
    std::vector<int> tail(series.quantities.end() - static_cast<std::ptrdiff_t>(w), series.quantities.end());
    Forecaster f(nn::Network(spec, init), config, std::move(tail), series.date_at(series.size() - 1));

    const double scale = std::max(1, config.max_demand);
    nn::Batch inputs, targets;
    for (std::size_t day = w; day < series.size(); ++day) {
        inputs.push_back(f.encode(extract_features(series, day, config.window)));
        targets.push_back({series.quantities[day] / scale});
    }

    nn::Network net = f.network();
    nn::Adam adam(net.parameters().size(), config.learning_rate);
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    nn::Batch bx, by;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            bx.clear();
            by.clear();
            for (std::size_t k = start; k < end; ++k) {
                bx.push_back(inputs[order[k]]);
                by.push_back(targets[order[k]]);
            }
            nn::train_step(net, adam, bx, by, rng);
        }
    }
    return Forecaster(std::move(net), config, f.tail(), f.last_date());
}

DemandSeries generate_offline(const Forecaster& f, Date start, int h, Rng& rng) {
    if (h < 1) throw std::invalid_argument("offline horizon must be at least one day");
    std::vector<int> history = f.tail();
    const auto w = history.size();
    DemandSeries out;
    out.start = start;
    for (int day = 0; day < h; ++day) {
        const std::span<const int> recent(history.data() + (history.size() - w), w);
        const Date previous = start + std::chrono::days{day - 1};
        const int d = f.to_demand(f.sample(make_features(recent, previous), rng));
        out.quantities.push_back(d);
        history.push_back(d);
    }
    return out;
}

WarmStart build_warm_start(const DemandSeries& offline, const PerishableInventory& env, const WarmStartConfig& config) {
    if (offline.empty()) throw std::invalid_argument("offline demand series is empty");
    for (int d : offline.quantities)
        if (d > env.limits().max_demand) throw std::invalid_argument("offline demand exceeds the environment's maximum");

    AgentConfig agent;
    agent.algorithm = Algorithm::q_learning;
    agent.alpha = config.alpha;
    agent.gamma = config.gamma;
    agent.epsilon = Schedule::constant(config.epsilon);
    agent.planning = Schedule::constant(0.0);
    agent.model = config.model;
    agent.horizon = static_cast<int>(offline.size());
    agent.episodes = config.epochs;
    agent.initial_state = config.initial_state;
    agent.seed = config.seed;

    TrainedAgent trained = train(agent, env, DemandProcess::replay(offline.quantities));
    return WarmStart{std::move(trained.q), std::move(trained.model), offline};
}

namespace {

constexpr char kMagic[8] = {'I', 'N', 'V', 'R', 'L', 'F', 'C', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("truncated forecaster file");
    return v;
}

}  // namespace

void Forecaster::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    put<std::int32_t>(out, config_.window);
    put<std::int32_t>(out, config_.max_demand);
    put<std::int32_t>(out, config_.epochs);
    put<std::uint64_t>(out, config_.batch_size);
    put<double>(out, config_.learning_rate);
    put<std::int64_t>(out, last_date_.time_since_epoch().count());
    for (int d : tail_) put<std::int32_t>(out, d);
    nn::write_network(out, net_);
}

Forecaster Forecaster::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error("not a forecaster file");
    ForecasterConfig cfg;
    cfg.window = get<std::int32_t>(in);
    if (cfg.window < 1 || cfg.window > 10000) throw std::runtime_error("corrupt forecaster header");
    cfg.max_demand = get<std::int32_t>(in);
    cfg.epochs = get<std::int32_t>(in);
    cfg.batch_size = get<std::uint64_t>(in);
    cfg.learning_rate = get<double>(in);
    const Date last{std::chrono::days{get<std::int64_t>(in)}};
    std::vector<int> tail;
    for (int i = 0; i < cfg.window; ++i) tail.push_back(get<std::int32_t>(in));
    nn::Network net = nn::read_network(in);
    cfg.dropout = net.spec().dropout;
    cfg.hidden.assign(net.spec().sizes.begin() + 1, net.spec().sizes.end() - 1);
    return Forecaster(std::move(net), cfg, std::move(tail), last);
}

}  // namespace invrl
