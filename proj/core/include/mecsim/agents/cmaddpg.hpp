#pragma once

#include <array>
#include <span>

#include "mecsim/agents/arch.hpp"
#include "mecsim/agents/policy.hpp"
#include "mecsim/agents/ratechain.hpp"
#include "mecsim/numkit/net.hpp"

namespace mecsim::agents {

/// How the server fuses the per-device features into the downlink vectors.
enum class Aggregator { gat, graphsage };

/// The cooperative actor group: shared device message actor, the server's
/// feature extractors and attention scorer, trajectory/CPU heads and the
/// shared device solution actor. One parameter set serves any number of
/// devices.
class CmaddpgActors final : public TrainablePolicy {
 public:
  CmaddpgActors(const env::SimConfig& sim, ActorArch arch, Aggregator agg, numkit::Rng& rng);

  std::string kind() const override;
  int n_max() const override { return sim_.n_max; }
  int packed_msg_dim() const override { return arch_.critic_sees_messages ? arch_.msg_dim : 0; }
  int packed_feat_dim() const override { return arch_.critic_sees_messages ? arch_.feat_dim : 0; }
  Aggregator aggregator() const { return agg_; }
  const ActorArch& arch() const { return arch_; }
  const env::SimConfig& sim() const { return sim_; }
  /// Width of the feature vectors e_j (halved under graphsage so the
  /// concatenated downlink payload keeps the same budget).
  int feature_width() const;

  // --- Algorithm-1 phases as standalone operations -------------------------

  /// Uplink phase: m_j from the device's own observation; identical
  /// parameters for every device.
  std::vector<double> id_message(std::span<const double> obs) const;

  /// e_0 from the server observation, e_j from each received message.
  /// Row 0 is the server feature.
  std::vector<std::vector<double>> extract_features(
      std::span<const double> uav_obs, const std::vector<std::vector<double>>& messages) const;

  /// Row-stochastic attention matrix over the (N+1)-node star (GAT only).
  std::vector<std::vector<double>> attention_scores(
      const std::vector<std::vector<double>>& features) const;

  /// Raw pairwise affinity before the softmax (GAT only).
  double attention_logit(std::span<const double> e_j, std::span<const double> e_k) const;

  /// w_j = sum_k z_jk e_k.
  static std::vector<std::vector<double>> gat_aggregate(
      const std::vector<std::vector<double>>& features,
      const std::vector<std::vector<double>>& scores);

  /// w_j = concat(e_j, sum_{k != j} e_k).
  static std::vector<std::vector<double>> gs_aggregate(
      const std::vector<std::vector<double>>& features);

  /// Downlink phase: extract + aggregate; entry 0 is the server-internal
  /// w_0, entries 1.. are the multicast payload.
  std::vector<std::vector<double>> uav_message(
      std::span<const double> uav_obs, const std::vector<std::vector<double>>& messages) const;

  struct UavDecision {
    double v = 0, eta = 0, beta = 0;
    std::array<double, 3> raw{};
    std::vector<double> f_tilde;  // per active device, in input order
    std::vector<double> f;
    bool equal_split_fallback = false;
  };
  /// Trajectory from (w_0, sum_j w_j); CPU shares from the per-device head,
  /// normalized onto f_max (equal split when every raw share is zero).
  UavDecision uav_solution(std::span<const double> w0,
                           const std::vector<std::vector<double>>& w_ids) const;

  /// Offload ratio: cap * sigmoid(pi_I(w_j)); cap = 0 forces local-only.
  double id_solution(std::span<const double> w_j, double f_j, double rate_up, double rate_down,
                     double task_bits) const;
  /// The raw sigmoid output alone.
  double id_solution_sig(std::span<const double> w_j) const;

  /// Full Algorithm-1 round against the live environment.
  ActionBundle act(const env::Env& e) const override;

  // --- Training path --------------------------------------------------------

  std::unique_ptr<Cache> make_cache() const override;
  void forward_batch(const numkit::Tensor2& states, const MaskMat& masks, const Geometry& geom,
                     Cache& cache, numkit::Tensor2& actions) const override;
  void backward_batch(const Cache& cache, const numkit::Tensor2& d_actions,
                      numkit::ParamSet& grads) const override;

  numkit::ParamSet params() const override;
  void set_params(const numkit::ParamSet& ps) override;
  std::unique_ptr<TrainablePolicy> clone() const override;

  std::size_t param_count() const { return params().scalar_count(); }

 private:
  env::SimConfig sim_;
  ActorArch arch_;
  Aggregator agg_;

  numkit::DenseNet mu_id_;     // 7 -> M, relu output
  numkit::DenseNet eps_uav_;   // 3 -> F, relu output
  numkit::DenseNet eps_id_;    // M -> F, relu output
  numkit::DenseNet eps_att_;   // 2F -> 1 (gat only)
  numkit::DenseNet gamma_v_;   // 2E -> 3, tanh output
  numkit::DenseNet gamma_f_;   // E -> 1, relu output
  numkit::DenseNet pi_id_;     // E -> 1, sigmoid output

  std::vector<const numkit::DenseNet*> net_list() const;
  std::vector<numkit::DenseNet*> net_list();
  int entry_offset(const numkit::DenseNet* net) const;

  struct BatchCache;
};

/// Trajectory projection used by every scheme: tanh outputs mapped affinely
/// onto [0, v_max] x [0, 2*pi] x [0, pi].
struct TrajProjection {
  double v = 0, eta = 0, beta = 0;
};
TrajProjection project_traj(const std::array<double, 3>& raw, const env::SimConfig& cfg);

/// f_j = f_tilde_j * f_max / sum(f_tilde); equal split when the sum is zero.
/// Returns true when the fallback fired.
bool normalize_f(const std::vector<double>& f_tilde, double f_max, std::vector<double>& f_out);

}  // namespace mecsim::agents
