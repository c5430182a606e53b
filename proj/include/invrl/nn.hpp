#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "invrl/random.hpp"

namespace invrl::nn {

/// Output head and the loss trained against it.
enum class Head : std::uint8_t {
    linear = 0,   ///< identity output, mean squared error
    softmax = 1,  ///< probability vector, cross-entropy
};

struct NetworkSpec {
    /// Layer widths from input to output; every interior width is a ReLU layer.
    std::vector<std::size_t> sizes;
    /// Dropout probability applied after each hidden layer when sampling.
    double dropout = 0.0;
    Head head = Head::linear;

    void validate() const;
};

using Batch = std::vector<std::vector<double>>;

/// Fully connected feed-forward network. All weights and biases live in one
/// flat parameter vector, layer by layer, weights (row-major, out x in) before
/// biases.
class Network {
public:
    Network() = default;
    /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    Network(NetworkSpec spec, Rng& init_rng);

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::size_t input_size() const noexcept { return spec_.sizes.front(); }
    std::size_t output_size() const noexcept { return spec_.sizes.back(); }
    std::size_t num_layers() const noexcept { return spec_.sizes.size() - 1; }

    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }

    /// Offset of layer `l`'s weight block and bias block within parameters().
    std::size_t weight_offset(std::size_t l) const { return offsets_.at(l); }
    std::size_t bias_offset(std::size_t l) const { return offsets_.at(l) + spec_.sizes[l] * spec_.sizes[l + 1]; }

    /// Single forward pass. With `stochastic` set and dropout > 0, fresh
    /// inverted-dropout masks are drawn from `rng` for each hidden layer.
    std::vector<double> forward(std::span<const double> input, bool stochastic = false, Rng* rng = nullptr) const;

    /// Mean batch loss. Masks (if stochastic) are drawn in the same order as
    /// in loss_and_gradient, so equal rng states give equal losses.
    double loss(const Batch& inputs, const Batch& targets, bool stochastic = false, Rng* rng = nullptr) const;

    /// Mean batch loss and its gradient with respect to parameters().
    double loss_and_gradient(const Batch& inputs, const Batch& targets, std::vector<double>& grad,
                             bool stochastic = false, Rng* rng = nullptr) const;

    bool operator==(const Network& other) const {
        return spec_.sizes == other.spec_.sizes && spec_.dropout == other.spec_.dropout &&
               spec_.head == other.spec_.head && params_ == other.params_;
    }

private:
    void layout();
    void check_batch(const Batch& inputs, const Batch& targets) const;

    NetworkSpec spec_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;

    friend Network read_network(std::istream& in);
};

class Adam {
public:
    Adam() = default;
    explicit Adam(std::size_t num_parameters, double learning_rate = 1e-3, double beta1 = 0.9,
                  double beta2 = 0.999, double epsilon = 1e-8);

    void apply(std::span<double> params, std::span<const double> grad);

    std::int64_t steps() const noexcept { return step_; }
    double learning_rate() const noexcept { return lr_; }

    bool operator==(const Adam&) const = default;

private:
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::int64_t step_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

/// One Adam step on the mean batch loss. Returns the loss before the step.
/// Dropout masks are drawn from `rng` when the network has dropout.
double train_step(Network& net, Adam& adam, const Batch& inputs, const Batch& targets, Rng& rng);

struct Prediction {
    std::vector<double> mean;
    std::vector<double> variance;  ///< population variance across samples
};

/// Monte-Carlo dropout: `samples` stochastic passes, averaged. Without
/// dropout a single deterministic pass is returned with zero variance.
Prediction mc_predict(const Network& net, std::span<const double> input, int samples, Rng& rng);

void write_network(std::ostream& out, const Network& net);
Network read_network(std::istream& in);
void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(const std::filesystem::path& path);

}  // namespace invrl::nn
