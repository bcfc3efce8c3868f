#pragma once

#include <string>
#include <vector>

#include "reinverify/errors.hpp"

namespace reinverify {

enum class Activation { Relu, Tanh, Identity };

/// Axis-aligned box, the substrate for interval bound propagation.
struct IntervalBox {
    std::vector<double> lower;
    std::vector<double> upper;

    IntervalBox() = default;
    IntervalBox(std::vector<double> lo, std::vector<double> hi);

    std::size_t size() const { return lower.size(); }
};

struct Layer {
    std::vector<std::vector<double>> weights;  // rows x cols, row-major
    std::vector<double> bias;                  // length rows
    Activation activation = Activation::Identity;

    std::size_t rows() const { return weights.size(); }
    std::size_t cols() const { return weights.empty() ? 0 : weights[0].size(); }
};

/// Dense feedforward policy network. Immutable after construction.
class Network {
  public:
    Network() = default;
    explicit Network(std::vector<Layer> layers);

    const std::vector<Layer>& layers() const { return layers_; }
    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    bool has_tanh() const { return has_tanh_; }

    /// Exact floating-point evaluation, layer by layer.
    std::vector<double> forward(const std::vector<double>& x) const;

    /// Sound output box: forward(x) is contained in the result for every x
    /// in the input box. Affine layers split weight signs; activations map
    /// endpoint-monotonically.
    IntervalBox interval_propagate(const IntervalBox& box) const;

    /// Total ReLU neuron count across hidden layers.
    int relu_count() const;

  private:
    std::vector<Layer> layers_;
    int input_dim_ = 0;
    int output_dim_ = 0;
    bool has_tanh_ = false;
};

/// Loads either the plain-text network format or the JSON layer format,
/// chosen by sniffing the first non-space byte ('{' or '[' means JSON).
Network load_network(const std::string& path);

Network parse_network_text(const std::string& content);
Network parse_network_json(const std::string& content);

std::string network_to_text(const Network& net);
std::string network_to_json(const Network& net);

/// k-step expansion of a network. All copies share the base weights; only
/// the variable index map grows. Ids are laid out per step as
/// [x_i (n ids), y_i (m ids)], steps ascending.
class UnrolledNetwork {
  public:
    UnrolledNetwork(const Network& base, int depth);

    const Network& base() const { return *base_; }
    int depth() const { return depth_; }
    int input_dim() const { return base_->input_dim(); }
    int output_dim() const { return base_->output_dim(); }

    int input_id(int step, int feature) const;
    int output_id(int step, int feature) const;
    int total_vars() const { return depth_ * (base_->input_dim() + base_->output_dim()); }

  private:
    const Network* base_;
    int depth_;
};

}  // namespace reinverify
