#pragma once

#include <span>
#include <string>
#include <vector>

#include "mecsim/numkit/activation.hpp"
#include "mecsim/numkit/params.hpp"
#include "mecsim/numkit/rng.hpp"
#include "mecsim/numkit/tensor.hpp"

namespace mecsim::numkit {

/// Fully-connected network. Weights are stored as (in x out) so a batch of
/// row vectors propagates as X * W + b. Weight init is uniform in
/// +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
class DenseNet {
 public:
  DenseNet() = default;
  DenseNet(std::string name, int in_dim, const std::vector<int>& hidden, int out_dim,
           Act hidden_act, Act output_act, Rng& rng);

  const std::string& name() const { return name_; }
  int in_dim() const;
  int out_dim() const;
  int layer_count() const { return static_cast<int>(layers_.size()); }
  std::size_t param_count() const;

  /// Per-layer inputs and pre-activations kept for the matching backward.
  struct Cache {
    bool valid = false;
    Tensor2 input;
    std::vector<Tensor2> pre;
    std::vector<Tensor2> post;
  };

  /// X: batch x in_dim. Returns batch x out_dim.
  Tensor2 forward(const Tensor2& x, Cache* cache = nullptr) const;
  std::vector<double> forward1(std::span<const double> x) const;

  /// upstream: batch x out_dim gradient w.r.t. the outputs. Accumulates
  /// parameter gradients into grads at entry_offset (layout must match
  /// append_params_to) and returns the gradient w.r.t. the inputs.
  Tensor2 backward(const Cache& cache, const Tensor2& upstream, ParamSet& grads,
                   int entry_offset) const;

  /// Input gradient only; parameter gradients are not formed.
  Tensor2 backward_input_only(const Cache& cache, const Tensor2& upstream) const;

  /// Entries "<name>.<layer>.W" / "<name>.<layer>.b" in layer order.
  void append_params_to(ParamSet& out) const;
  ParamSet param_set() const;
  /// Loads entries starting at entry_offset; shapes must match.
  void load_params(const ParamSet& src, int entry_offset);
  int entry_count() const { return 2 * layer_count(); }

  // Direct access used by tests and checkpoint round-trips.
  Tensor2& weight(int layer) { return layers_[layer].w; }
  Tensor2& bias(int layer) { return layers_[layer].b; }
  const Tensor2& weight(int layer) const { return layers_[layer].w; }
  const Tensor2& bias(int layer) const { return layers_[layer].b; }
  Act activation(int layer) const { return layers_[layer].act; }

 private:
  struct Layer {
    Tensor2 w;  // in x out
    Tensor2 b;  // 1 x out
    Act act = Act::identity;
  };

  std::string name_;
  std::vector<Layer> layers_;
};

}  // namespace mecsim::numkit
