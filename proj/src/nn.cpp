#include "invrl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace invrl::nn {

namespace {

using Vec = Eigen::VectorXd;
using MatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutMatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using VecMap = Eigen::Map<const Vec>;
using MutVecMap = Eigen::Map<Vec>;

void softmax_inplace(Vec& z) {
    const double mx = z.maxCoeff();
    z = (z.array() - mx).exp();
    z /= z.sum();
}

// Per-sample activations kept for backpropagation.
struct Trace {
    std::vector<Vec> acts;   // acts[0] = input, acts[l] = post-ReLU/mask output of layer l-1
    std::vector<Vec> pre;    // pre-activation of every layer
    std::vector<Vec> masks;  // dropout scale per hidden layer (empty when deterministic)
    Vec out;
};

constexpr char kMagic[8] = {'I', 'N', 'V', 'R', 'L', 'N', 'N', '1'};

}  // namespace

void NetworkSpec::validate() const {
    if (sizes.size() < 2) throw std::invalid_argument("network needs at least an input and an output layer");
    for (auto s : sizes)
        if (s == 0) throw std::invalid_argument("network layer of width 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout probability must lie in [0, 1)");
    if (head == Head::softmax && sizes.back() < 2) throw std::invalid_argument("softmax head needs >= 2 outputs");
}

Network::Network(NetworkSpec spec, Rng& init_rng) : spec_(std::move(spec)) {
    spec_.validate();
    layout();
    for (std::size_t l = 0; l < num_layers(); ++l) {
        const double fan_in = static_cast<double>(spec_.sizes[l]);
        const double fan_out = static_cast<double>(spec_.sizes[l + 1]);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        const std::size_t n = spec_.sizes[l] * spec_.sizes[l + 1];
        for (std::size_t i = 0; i < n; ++i) params_[offsets_[l] + i] = (2.0 * uniform01(init_rng) - 1.0) * limit;
    }
}

void Network::layout() {
    offsets_.clear();
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < spec_.sizes.size(); ++l) {
        offsets_.push_back(total);
        total += spec_.sizes[l] * spec_.sizes[l + 1] + spec_.sizes[l + 1];
    }
    params_.assign(total, 0.0);
}

namespace {

Trace run(const Network& net, std::span<const double> input, bool stochastic, Rng* rng) {
    const auto& spec = net.spec();
    if (input.size() != net.input_size())
        throw std::invalid_argument("network input has " + std::to_string(input.size()) + " values, expected " +
                                    std::to_string(net.input_size()));
    const bool drop = stochastic && spec.dropout > 0.0;
    if (drop && rng == nullptr) throw std::invalid_argument("stochastic forward pass needs a random stream");
    const double keep_scale = drop ? 1.0 / (1.0 - spec.dropout) : 1.0;

    Trace tr;
    const std::size_t layers = net.num_layers();
    tr.acts.reserve(layers);
    tr.pre.reserve(layers);
    tr.acts.emplace_back(VecMap(input.data(), static_cast<Eigen::Index>(input.size())));
    const auto params = net.parameters();
    for (std::size_t l = 0; l < layers; ++l) {
        const auto in = static_cast<Eigen::Index>(spec.sizes[l]);
        const auto out = static_cast<Eigen::Index>(spec.sizes[l + 1]);
        const MatMap w(params.data() + net.weight_offset(l), out, in);
        const VecMap b(params.data() + net.bias_offset(l), out);
        Vec z = w * tr.acts.back() + b;
        tr.pre.push_back(z);
        if (l + 1 == layers) {
            if (spec.head == Head::softmax) softmax_inplace(z);
            tr.out = std::move(z);
        } else {
            Vec a = z.cwiseMax(0.0);
            if (drop) {
                Vec mask(out);
                for (Eigen::Index j = 0; j < out; ++j) mask[j] = uniform01(*rng) < spec.dropout ? 0.0 : keep_scale;
                a = a.cwiseProduct(mask);
                tr.masks.push_back(std::move(mask));
            }
            tr.acts.push_back(std::move(a));
        }
    }
    return tr;
}

double sample_loss(const Network& net, const Vec& out, std::span<const double> target) {
    const VecMap t(target.data(), static_cast<Eigen::Index>(target.size()));
    if (net.spec().head == Head::linear) return (out - t).squaredNorm() / static_cast<double>(out.size());
    double ce = 0.0;
    for (Eigen::Index j = 0; j < out.size(); ++j)
        if (t[j] != 0.0) ce -= t[j] * std::log(std::max(out[j], 1e-300));
    return ce;
}

}  // namespace

void Network::check_batch(const Batch& inputs, const Batch& targets) const {
    if (inputs.empty() || inputs.size() != targets.size())
        throw std::invalid_argument("batch inputs and targets must be non-empty and equally sized");
    for (const auto& t : targets)
        if (t.size() != output_size()) throw std::invalid_argument("target width does not match network output");
}

std::vector<double> Network::forward(std::span<const double> input, bool stochastic, Rng* rng) const {
    const Trace tr = run(*this, input, stochastic, rng);
    return {tr.out.data(), tr.out.data() + tr.out.size()};
}

double Network::loss(const Batch& inputs, const Batch& targets, bool stochastic, Rng* rng) const {
    check_batch(inputs, targets);
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        total += sample_loss(*this, run(*this, inputs[i], stochastic, rng).out, targets[i]);
    return total / static_cast<double>(inputs.size());
}

double Network::loss_and_gradient(const Batch& inputs, const Batch& targets, std::vector<double>& grad,
                                  bool stochastic, Rng* rng) const {
    check_batch(inputs, targets);
    grad.assign(params_.size(), 0.0);
    const double inv_batch = 1.0 / static_cast<double>(inputs.size());
    const std::size_t layers = num_layers();
    double total = 0.0;

    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Trace tr = run(*this, inputs[i], stochastic, rng);
        total += sample_loss(*this, tr.out, targets[i]);
        const VecMap t(targets[i].data(), static_cast<Eigen::Index>(targets[i].size()));

        Vec delta;
        if (spec_.head == Head::linear)
            delta = 2.0 * (tr.out - t) / static_cast<double>(tr.out.size());
        else
            delta = tr.out * t.sum() - t;
        delta *= inv_batch;

        for (std::size_t l = layers; l-- > 0;) {
            const auto in = static_cast<Eigen::Index>(spec_.sizes[l]);
            const auto out = static_cast<Eigen::Index>(spec_.sizes[l + 1]);
            MutMatMap gw(grad.data() + weight_offset(l), out, in);
            MutVecMap gb(grad.data() + bias_offset(l), out);
            gw.noalias() += delta * tr.acts[l].transpose();
            gb += delta;
            if (l == 0) break;
            const MatMap w(params_.data() + weight_offset(l), out, in);
            Vec back = w.transpose() * delta;
            const Vec& z = tr.pre[l - 1];
            for (Eigen::Index j = 0; j < in; ++j) {
                double g = z[j] > 0.0 ? back[j] : 0.0;
                if (!tr.masks.empty()) g *= tr.masks[l - 1][j];
                back[j] = g;
            }
            delta = std::move(back);
        }
    }
    return total * inv_batch;
}

Adam::Adam(std::size_t num_parameters, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(num_parameters, 0.0),
      v_(num_parameters, 0.0) {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("Adam learning rate must be > 0");
}

void Adam::apply(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
        throw std::invalid_argument("Adam state does not match the parameter count");
    ++step_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

double train_step(Network& net, Adam& adam, const Batch& inputs, const Batch& targets, Rng& rng) {
    std::vector<double> grad;
    const double loss = net.loss_and_gradient(inputs, targets, grad, true, &rng);
    if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss " << loss << " after " << adam.steps() << " Adam steps (batch of "
            << inputs.size() << ", " << net.parameters().size() << " parameters)";
        throw std::runtime_error(msg.str());
    }
    adam.apply(net.parameters(), grad);
    return loss;
}

Prediction mc_predict(const Network& net, std::span<const double> input, int samples, Rng& rng) {
    if (samples < 1) throw std::invalid_argument("MC prediction needs at least one sample");
    Prediction p;
    if (net.spec().dropout == 0.0) {
        p.mean = net.forward(input);
        p.variance.assign(p.mean.size(), 0.0);
        return p;
    }
    const std::size_t k = net.output_size();
    p.mean.assign(k, 0.0);
    std::vector<double> sq(k, 0.0);
    for (int s = 0; s < samples; ++s) {
        const auto y = net.forward(input, true, &rng);
        for (std::size_t j = 0; j < k; ++j) {
            p.mean[j] += y[j];
            sq[j] += y[j] * y[j];
        }
    }
    p.variance.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        p.mean[j] /= samples;
        p.variance[j] = samples == 1 ? 0.0 : std::max(sq[j] / samples - p.mean[j] * p.mean[j], 0.0);
    }
    return p;
}

namespace {

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("truncated network file");
    return v;
}

}  // namespace

void write_network(std::ostream& out, const Network& net) {
    out.write(kMagic, sizeof kMagic);
    const auto& spec = net.spec();
    put<std::uint64_t>(out, spec.sizes.size());
    for (auto s : spec.sizes) put<std::uint64_t>(out, s);
    put<double>(out, spec.dropout);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(spec.head));
    put<std::uint64_t>(out, net.parameters().size());
    out.write(reinterpret_cast<const char*>(net.parameters().data()),
              static_cast<std::streamsize>(net.parameters().size() * sizeof(double)));
}

Network read_network(std::istream& in) {
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error("not a network parameter file");
    Network net;
    const auto layers = get<std::uint64_t>(in);
    if (layers < 2 || layers > 64) throw std::runtime_error("corrupt network header");
    for (std::uint64_t i = 0; i < layers; ++i) net.spec_.sizes.push_back(get<std::uint64_t>(in));
    net.spec_.dropout = get<double>(in);
    const auto head = get<std::uint8_t>(in);
    if (head > 1) throw std::runtime_error("unknown network head kind");
    net.spec_.head = static_cast<Head>(head);
    net.spec_.validate();
    net.layout();
    if (get<std::uint64_t>(in) != net.params_.size()) throw std::runtime_error("network parameter count mismatch");
    in.read(reinterpret_cast<char*>(net.params_.data()), static_cast<std::streamsize>(net.params_.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated network file");
    return net;
}

void save_network(const std::filesystem::path& path, const Network& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_network(out, net);
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_network(in);
}

}  // namespace invrl::nn
