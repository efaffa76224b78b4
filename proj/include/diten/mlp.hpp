#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "diten/common.hpp"

namespace diten {

enum class Activation { tanh, linear };

struct Dense {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

/// Per-parameter gradients, shaped like the network.
struct GradientTape {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;

    void zero();
    GradientTape& operator+=(const GradientTape& other);
    GradientTape& operator*=(double s);
};

/// Fully connected network. Hidden layers use `hidden` activation, the output
/// layer is linear (softmax heads are applied by the caller on the logits).
/// Batched calls take one sample per column.
class Mlp {
public:
    Mlp() = default;
    /// Glorot-uniform weights scaled by 1 on hidden layers and `output_gain` on
    /// the last layer; zero biases.
    Mlp(std::vector<int> sizes, Rng& rng, double output_gain = 0.01, Activation hidden = Activation::tanh);
    /// Zero-initialized network.
    explicit Mlp(std::vector<int> sizes, Activation hidden = Activation::tanh);

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    const std::vector<int>& sizes() const { return sizes_; }
    Activation hidden_activation() const { return hidden_; }
    std::vector<Dense>& layers() { return layers_; }
    const std::vector<Dense>& layers() const { return layers_; }

    /// Forward pass that records activations for a later backward().
    /// Throws std::domain_error on an input of the wrong height.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& input);
    /// Forward pass without recording.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& input) const;
    Eigen::VectorXd predict(std::span<const double> input) const;

    /// Reverse pass for the recorded batch given dLoss/dOutput (same shape as
    /// the output). Gradients are summed over the batch. Optionally returns the
    /// gradient with respect to the input. Throws std::logic_error if nothing
    /// was recorded.
    GradientTape backward(const Eigen::MatrixXd& grad_output, Eigen::MatrixXd* grad_input = nullptr) const;

    GradientTape zero_tape() const;
    bool has_recording() const { return !activations_.empty(); }
    void clear_recording() { activations_.clear(); }

    std::size_t parameter_count() const;
    std::vector<double> flat_parameters() const;
    void set_flat_parameters(std::span<const double> values);
    bool finite() const;

private:
    void check_input(const Eigen::MatrixXd& input) const;

    std::vector<int> sizes_;
    std::vector<Dense> layers_;
    Activation hidden_ = Activation::tanh;
    std::vector<Eigen::MatrixXd> activations_;  // input and every layer output
};

std::vector<double> flatten(const GradientTape& tape);

enum class Direction { ascent, descent };

/// theta <- theta +/- lr * grad
void sgd_step(Mlp& net, const GradientTape& tape, double lr, Direction dir);

/// Adaptive-moment update, available as an alternative to plain SGD.
class Adam {
public:
    Adam() = default;
    explicit Adam(const Mlp& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(Mlp& net, const GradientTape& tape, Direction dir);

private:
    double lr_ = 0.0, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long long t_ = 0;
    GradientTape m_, v_;
};

/// target <- tau * source + (1 - tau) * target
void soft_update(Mlp& target, const Mlp& source, double tau);

/// Per-block log-softmax of a logit vector made of `blocks` runs of `block_size`.
std::vector<double> block_log_softmax(std::span<const double> logits, int blocks, int block_size);

struct BlockSample {
    std::vector<int> choice;  // one category per block
    double log_prob = 0.0;    // sum of per-block log-probabilities
};

BlockSample softmax_block_sample(std::span<const double> logits, int blocks, int block_size, Rng& rng);

/// Checkpoint layout: 8-byte magic "DITNMLP1", uint32 layer-size count, that many
/// uint32 sizes, one uint8 hidden-activation code, then every layer's weights
/// (row-major) followed by its biases as little-endian float64.
void save_checkpoint(const Mlp& net, std::ostream& out);
Mlp load_checkpoint(std::istream& in);

}  // namespace diten
