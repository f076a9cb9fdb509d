#include "mecsim/numkit/net.hpp"

#include <cmath>

#include "mecsim/errors.hpp"

namespace mecsim::numkit {

DenseNet::DenseNet(std::string name, int in_dim, const std::vector<int>& hidden, int out_dim,
                   Act hidden_act, Act output_act, Rng& rng)
    : name_(std::move(name)) {
  if (in_dim < 1 || out_dim < 1) throw ContractError("DenseNet: dims must be positive");
  std::vector<int> dims;
  dims.push_back(in_dim);
  for (int h : hidden) {
    if (h < 1) throw ContractError("DenseNet: hidden width must be positive");
    dims.push_back(h);
  }
  dims.push_back(out_dim);

  layers_.resize(dims.size() - 1);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    Layer& layer = layers_[l];
    layer.w = Tensor2(fan_in, fan_out);
    layer.b = Tensor2(1, fan_out);
    layer.act = (l + 1 == layers_.size()) ? output_act : hidden_act;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < fan_in; ++i) {
      for (int j = 0; j < fan_out; ++j) layer.w(i, j) = rng.uniform(-bound, bound);
    }
  }
}

int DenseNet::in_dim() const { return layers_.empty() ? 0 : layers_.front().w.rows(); }
int DenseNet::out_dim() const { return layers_.empty() ? 0 : layers_.back().w.cols(); }

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

Tensor2 DenseNet::forward(const Tensor2& x, Cache* cache) const {
  if (layers_.empty()) throw StateError("DenseNet::forward: empty net");
  if (x.cols() != in_dim()) throw ContractError("DenseNet::forward: input width mismatch");
  if (cache) {
    cache->valid = false;
    cache->input = x;
    cache->pre.assign(layers_.size(), Tensor2());
    cache->post.assign(layers_.size(), Tensor2());
  }
  Tensor2 cur = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Tensor2 pre(cur.rows(), layer.w.cols());
    gemm_nn(cur, layer.w, pre);
    for (int r = 0; r < pre.rows(); ++r) {
      double* row = pre.row(r);
      const double* b = layer.b.row(0);
      for (int j = 0; j < pre.cols(); ++j) row[j] += b[j];
    }
    Tensor2 post(pre.rows(), pre.cols());
    for (int r = 0; r < pre.rows(); ++r) {
      const double* pr = pre.row(r);
      double* po = post.row(r);
      for (int j = 0; j < pre.cols(); ++j) po[j] = act_apply(layer.act, pr[j]);
    }
    if (cache) {
      cache->pre[l] = pre;
      cache->post[l] = post;
    }
    cur = std::move(post);
  }
  if (cache) cache->valid = true;
  return cur;
}

std::vector<double> DenseNet::forward1(std::span<const double> x) const {
  Tensor2 in(1, static_cast<int>(x.size()));
  std::copy(x.begin(), x.end(), in.row(0));
  Tensor2 out = forward(in);
  return {out.row(0), out.row(0) + out.cols()};
}

Tensor2 DenseNet::backward(const Cache& cache, const Tensor2& upstream, ParamSet& grads,
                           int entry_offset) const {
  if (!cache.valid) throw StateError("DenseNet::backward: no forward cache");
  if (upstream.rows() != cache.input.rows() || upstream.cols() != out_dim()) {
    throw ContractError("DenseNet::backward: upstream shape mismatch");
  }
  const int n_layers = layer_count();
  Tensor2 delta = upstream;
  for (int l = n_layers - 1; l >= 0; --l) {
    const Layer& layer = layers_[l];
    const Tensor2& pre = cache.pre[l];
    const Tensor2& post = cache.post[l];
    // delta <- delta .* act'(pre)
    for (int r = 0; r < delta.rows(); ++r) {
      double* d = delta.row(r);
      const double* pr = pre.row(r);
      const double* po = post.row(r);
      for (int j = 0; j < delta.cols(); ++j) d[j] *= act_grad(layer.act, pr[j], po[j]);
    }
    const Tensor2& layer_in = (l == 0) ? cache.input : cache.post[l - 1];
    Tensor2& gw = grads.entries[entry_offset + 2 * l].value;
    Tensor2& gb = grads.entries[entry_offset + 2 * l + 1].value;
    if (!gw.same_shape(layer.w) || !gb.same_shape(layer.b)) {
      throw ContractError("DenseNet::backward: gradient layout mismatch");
    }
    gemm_tn(layer_in, delta, gw, /*accumulate=*/true);
    for (int r = 0; r < delta.rows(); ++r) {
      const double* d = delta.row(r);
      double* g = gb.row(0);
      for (int j = 0; j < delta.cols(); ++j) g[j] += d[j];
    }
    Tensor2 dx(delta.rows(), layer.w.rows());
    gemm_nt(delta, layer.w, dx);
    delta = std::move(dx);
  }
  return delta;
}

Tensor2 DenseNet::backward_input_only(const Cache& cache, const Tensor2& upstream) const {
  if (!cache.valid) throw StateError("DenseNet::backward: no forward cache");
  if (upstream.rows() != cache.input.rows() || upstream.cols() != out_dim()) {
    throw ContractError("DenseNet::backward: upstream shape mismatch");
  }
  Tensor2 delta = upstream;
  for (int l = layer_count() - 1; l >= 0; --l) {
    const Layer& layer = layers_[l];
    const Tensor2& pre = cache.pre[l];
    const Tensor2& post = cache.post[l];
    for (int r = 0; r < delta.rows(); ++r) {
      double* d = delta.row(r);
      const double* pr = pre.row(r);
      const double* po = post.row(r);
      for (int j = 0; j < delta.cols(); ++j) d[j] *= act_grad(layer.act, pr[j], po[j]);
    }
    Tensor2 dx(delta.rows(), layer.w.rows());
    gemm_nt(delta, layer.w, dx);
    delta = std::move(dx);
  }
  return delta;
}

void DenseNet::append_params_to(ParamSet& out) const {
  for (int l = 0; l < layer_count(); ++l) {
    out.entries.push_back({name_ + "." + std::to_string(l) + ".W", layers_[l].w});
    out.entries.push_back({name_ + "." + std::to_string(l) + ".b", layers_[l].b});
  }
}

ParamSet DenseNet::param_set() const {
  ParamSet out;
  append_params_to(out);
  return out;
}

void DenseNet::load_params(const ParamSet& src, int entry_offset) {
  for (int l = 0; l < layer_count(); ++l) {
    const Tensor2& w = src.entries[entry_offset + 2 * l].value;
    const Tensor2& b = src.entries[entry_offset + 2 * l + 1].value;
    if (!w.same_shape(layers_[l].w) || !b.same_shape(layers_[l].b)) {
      throw ContractError("DenseNet::load_params: shape mismatch for " + name_);
    }
    layers_[l].w = w;
    layers_[l].b = b;
  }
}

}  // namespace mecsim::numkit
