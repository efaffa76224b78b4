#include "diten/mlp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace diten {

void GradientTape::zero() {
    for (auto& w : weight) w.setZero();
    for (auto& b : bias) b.setZero();
}

GradientTape& GradientTape::operator+=(const GradientTape& other) {
    if (other.weight.size() != weight.size()) throw std::invalid_argument("GradientTape: shape mismatch");
    for (std::size_t i = 0; i < weight.size(); ++i) {
        weight[i] += other.weight[i];
        bias[i] += other.bias[i];
    }
    return *this;
}

GradientTape& GradientTape::operator*=(double s) {
    for (auto& w : weight) w *= s;
    for (auto& b : bias) b *= s;
    return *this;
}

std::vector<double> flatten(const GradientTape& tape) {
    std::vector<double> out;
    for (std::size_t i = 0; i < tape.weight.size(); ++i) {
        const auto& w = tape.weight[i];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) out.push_back(w(r, c));
        for (Eigen::Index r = 0; r < tape.bias[i].size(); ++r) out.push_back(tape.bias[i](r));
    }
    return out;
}

Mlp::Mlp(std::vector<int> sizes, Activation hidden) : sizes_(std::move(sizes)), hidden_(hidden) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    for (int n : sizes_)
        if (n <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
        layers_.push_back({Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]), Eigen::VectorXd::Zero(sizes_[l + 1])});
}

Mlp::Mlp(std::vector<int> sizes, Rng& rng, double output_gain, Activation hidden) : Mlp(std::move(sizes), hidden) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        auto& w = layers_[l].weight;
        const double gain = l + 1 == layers_.size() ? output_gain : 1.0;
        const double limit = gain * std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        // row-major fill order keeps the draw sequence independent of Eigen's storage
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
}

void Mlp::check_input(const Eigen::MatrixXd& input) const {
    if (sizes_.empty()) throw std::logic_error("Mlp: empty network");
    if (input.rows() != sizes_.front())
        throw std::domain_error("Mlp: input has " + std::to_string(input.rows()) + " rows, expected " +
                                std::to_string(sizes_.front()));
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) {
    check_input(input);
    activations_.clear();
    activations_.push_back(input);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd z = layers_[l].weight * activations_.back();
        z.colwise() += layers_[l].bias;
        if (l + 1 < layers_.size() && hidden_ == Activation::tanh) z = z.array().tanh();
        activations_.push_back(std::move(z));
    }
    return activations_.back();
}

Eigen::MatrixXd Mlp::predict(const Eigen::MatrixXd& input) const {
    check_input(input);
    Eigen::MatrixXd a = input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd z = layers_[l].weight * a;
        z.colwise() += layers_[l].bias;
        if (l + 1 < layers_.size() && hidden_ == Activation::tanh) z = z.array().tanh();
        a = std::move(z);
    }
    return a;
}

Eigen::VectorXd Mlp::predict(std::span<const double> input) const {
    const Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(input.size()));
    return predict(Eigen::MatrixXd(x)).col(0);
}

GradientTape Mlp::zero_tape() const {
    GradientTape t;
    for (const auto& d : layers_) {
        t.weight.push_back(Eigen::MatrixXd::Zero(d.weight.rows(), d.weight.cols()));
        t.bias.push_back(Eigen::VectorXd::Zero(d.bias.size()));
    }
    return t;
}

GradientTape Mlp::backward(const Eigen::MatrixXd& grad_output, Eigen::MatrixXd* grad_input) const {
    if (activations_.empty()) throw std::logic_error("Mlp::backward: no recorded forward pass");
    const auto& out = activations_.back();
    if (grad_output.rows() != out.rows() || grad_output.cols() != out.cols())
        throw std::domain_error("Mlp::backward: gradient shape does not match the recorded output");
    GradientTape tape = zero_tape();
    Eigen::MatrixXd delta = grad_output;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& in = activations_[l];
        tape.weight[l].noalias() = delta * in.transpose();
        tape.bias[l] = delta.rowwise().sum();
        if (l == 0 && grad_input == nullptr) break;
        Eigen::MatrixXd prev = layers_[l].weight.transpose() * delta;
        if (l > 0 && hidden_ == Activation::tanh) prev.array() *= 1.0 - in.array().square();
        delta = std::move(prev);
    }
    if (grad_input) *grad_input = std::move(delta);
    return tape;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& d : layers_) n += static_cast<std::size_t>(d.weight.size() + d.bias.size());
    return n;
}

std::vector<double> Mlp::flat_parameters() const {
    GradientTape t;
    for (const auto& d : layers_) {
        t.weight.push_back(d.weight);
        t.bias.push_back(d.bias);
    }
    return flatten(t);
}

void Mlp::set_flat_parameters(std::span<const double> values) {
    if (values.size() != parameter_count()) throw std::invalid_argument("Mlp: parameter count mismatch");
    std::size_t k = 0;
    for (auto& d : layers_) {
        for (Eigen::Index r = 0; r < d.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < d.weight.cols(); ++c) d.weight(r, c) = values[k++];
        for (Eigen::Index r = 0; r < d.bias.size(); ++r) d.bias(r) = values[k++];
    }
}

bool Mlp::finite() const {
    for (const auto& d : layers_)
        if (!d.weight.allFinite() || !d.bias.allFinite()) return false;
    return true;
}

void sgd_step(Mlp& net, const GradientTape& tape, double lr, Direction dir) {
    auto& layers = net.layers();
    if (tape.weight.size() != layers.size()) throw std::invalid_argument("sgd_step: tape does not match network");
    const double s = dir == Direction::ascent ? lr : -lr;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight += s * tape.weight[l];
        layers[l].bias += s * tape.bias[l];
    }
}

Adam::Adam(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(net.zero_tape()), v_(net.zero_tape()) {}

void Adam::step(Mlp& net, const GradientTape& tape, Direction dir) {
    auto& layers = net.layers();
    if (tape.weight.size() != layers.size() || m_.weight.size() != layers.size())
        throw std::invalid_argument("Adam: tape does not match network");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const double s = dir == Direction::ascent ? lr_ : -lr_;
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
        param.array() += s * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weight, m_.weight[l], v_.weight[l], tape.weight[l]);
        update(layers[l].bias, m_.bias[l], v_.bias[l], tape.bias[l]);
    }
}

void soft_update(Mlp& target, const Mlp& source, double tau) {
    if (target.sizes() != source.sizes()) throw std::invalid_argument("soft_update: architectures differ");
    auto& t = target.layers();
    const auto& s = source.layers();
    for (std::size_t l = 0; l < t.size(); ++l) {
        if (tau == 1.0) {
            t[l] = s[l];
            continue;
        }
        t[l].weight = tau * s[l].weight + (1.0 - tau) * t[l].weight;
        t[l].bias = tau * s[l].bias + (1.0 - tau) * t[l].bias;
    }
}

std::vector<double> block_log_softmax(std::span<const double> logits, int blocks, int block_size) {
    if (blocks < 0 || block_size <= 0 || logits.size() != static_cast<std::size_t>(blocks) * block_size)
        throw std::invalid_argument("block_log_softmax: blocks do not partition the logits");
    std::vector<double> out(logits.size());
    for (int b = 0; b < blocks; ++b) {
        const auto first = logits.begin() + static_cast<std::ptrdiff_t>(b) * block_size;
        const double top = *std::max_element(first, first + block_size);
        double sum = 0.0;
        for (int k = 0; k < block_size; ++k) sum += std::exp(first[k] - top);
        const double lse = top + std::log(sum);
        for (int k = 0; k < block_size; ++k)
            out[static_cast<std::size_t>(b * block_size + k)] = first[k] - lse;
    }
    return out;
}

BlockSample softmax_block_sample(std::span<const double> logits, int blocks, int block_size, Rng& rng) {
    const auto logp = block_log_softmax(logits, blocks, block_size);
    BlockSample s;
    s.choice.resize(static_cast<std::size_t>(blocks));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int b = 0; b < blocks; ++b) {
        const double u = unit(rng);
        double acc = 0.0;
        int pick = block_size - 1;
        for (int k = 0; k < block_size; ++k) {
            acc += std::exp(logp[static_cast<std::size_t>(b * block_size + k)]);
            if (u < acc) {
                pick = k;
                break;
            }
        }
        s.choice[static_cast<std::size_t>(b)] = pick;
        s.log_prob += logp[static_cast<std::size_t>(b * block_size + pick)];
    }
    return s;
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr std::array<char, 8> kMagic{'D', 'I', 'T', 'N', 'M', 'L', 'P', '1'};

template <typename T>
void put_le(std::ostream& out, T v) {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bytes;
    if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw std::runtime_error("checkpoint: truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T v;
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
}

}  // namespace

void save_checkpoint(const Mlp& net, std::ostream& out) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.sizes().size()));
    for (int n : net.sizes()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
    put_le<std::uint8_t>(out, net.hidden_activation() == Activation::tanh ? 0 : 1);
    for (double v : net.flat_parameters()) put_le<double>(out, v);
    if (!out) throw std::runtime_error("checkpoint: write failed");
}

Mlp load_checkpoint(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw std::runtime_error("checkpoint: bad magic");
    const auto count = get_le<std::uint32_t>(in);
    if (count < 2 || count > 1024) throw std::runtime_error("checkpoint: implausible layer count");
    std::vector<int> sizes;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto n = get_le<std::uint32_t>(in);
        if (n == 0 || n > (1u << 24)) throw std::runtime_error("checkpoint: implausible layer size");
        sizes.push_back(static_cast<int>(n));
    }
    const auto act = get_le<std::uint8_t>(in);
    if (act > 1) throw std::runtime_error("checkpoint: unknown activation code");
    Mlp net(sizes, act == 0 ? Activation::tanh : Activation::linear);
    std::vector<double> params(net.parameter_count());
    for (auto& v : params) v = get_le<double>(in);
    net.set_flat_parameters(params);
    return net;
}

}  // namespace diten
