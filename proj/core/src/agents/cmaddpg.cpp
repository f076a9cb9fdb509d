#include "mecsim/agents/cmaddpg.hpp"

#include <cmath>
#include <numbers>

#include "mecsim/errors.hpp"

namespace mecsim::agents {

using numkit::Act;
using numkit::DenseNet;
using numkit::ParamSet;
using numkit::Tensor2;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kUavObs = 3;
constexpr int kIdObs = 7;

/// Stable softmax over a contiguous row.
void softmax_row(const double* in, int n, double* out) {
  double mx = in[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, in[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(in[i] - mx);
    sum += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= sum;
}

}  // namespace

TrajProjection project_traj(const std::array<double, 3>& raw, const env::SimConfig& cfg) {
  TrajProjection t;
  t.v = (raw[0] + 1.0) * 0.5 * cfg.v_max;
  t.eta = (raw[1] + 1.0) * kPi;
  t.beta = (raw[2] + 1.0) * 0.5 * kPi;
  return t;
}

bool normalize_f(const std::vector<double>& f_tilde, double f_max, std::vector<double>& f_out) {
  f_out.assign(f_tilde.size(), 0.0);
  double sum = 0.0;
  for (double v : f_tilde) sum += v;
  if (sum == 0.0) {
    if (!f_tilde.empty()) {
      const double share = f_max / static_cast<double>(f_tilde.size());
      for (auto& v : f_out) v = share;
    }
    return true;
  }
  for (std::size_t i = 0; i < f_tilde.size(); ++i) f_out[i] = f_tilde[i] / sum * f_max;
  return false;
}

void ActorArch::validate() const {
  if (msg_dim < 1 || feat_dim < 1) throw ConfigError("arch: msg_dim and feat_dim must be >= 1");
  auto check = [](const std::vector<int>& h, const char* name) {
    for (int v : h) {
      if (v < 1) throw ConfigError(std::string("arch.") + name + ": width must be >= 1");
    }
  };
  check(mu_id_hidden, "mu_id_hidden");
  check(eps_uav_hidden, "eps_uav_hidden");
  check(eps_id_hidden, "eps_id_hidden");
  check(gamma_v_hidden, "gamma_v_hidden");
  check(gamma_f_hidden, "gamma_f_hidden");
  check(pi_id_hidden, "pi_id_hidden");
  check(critic_hidden, "critic_hidden");
}

Geometry geometry_from_env(const env::Env& e) {
  Geometry g;
  g.u_prev = {e.uav().pos};
  g.id_pos.resize(1);
  g.task_bits.resize(1);
  for (int j = 0; j < e.cfg().n_max; ++j) {
    g.id_pos[0].push_back(e.id(j).pos);
    g.task_bits[0].push_back(e.id(j).task_bits);
  }
  return g;
}

Geometry geometry_from_states(const Tensor2& states, int n_max, const env::SimConfig& cfg) {
  Geometry g;
  const int b = states.rows();
  g.u_prev.resize(b);
  g.id_pos.assign(b, std::vector<env::Vec3>(n_max));
  g.task_bits.assign(b, std::vector<double>(n_max, 0.0));
  for (int i = 0; i < b; ++i) {
    const double* s = states.row(i);
    g.u_prev[i] = {s[0] * cfg.area_side, s[1] * cfg.area_side, s[2] * cfg.area_side};
    for (int j = 0; j < n_max; ++j) {
      const double* oj = s + kUavObs + kIdObs * j;
      g.id_pos[i][j] = {oj[0] * cfg.area_side, oj[1] * cfg.area_side, oj[2] * cfg.area_side};
      g.task_bits[i][j] = oj[5] * cfg.task_max;
    }
  }
  return g;
}

CmaddpgActors::CmaddpgActors(const env::SimConfig& sim, ActorArch arch, Aggregator agg,
                             numkit::Rng& rng)
    : sim_(sim), arch_(std::move(arch)), agg_(agg) {
  arch_.validate();
  if (agg_ == Aggregator::graphsage && arch_.feat_dim % 2 != 0) {
    throw ConfigError("graphsage aggregation needs an even feat_dim");
  }
  const int f = feature_width();
  const int e = arch_.feat_dim;
  const Act hact = arch_.hidden_act;
  mu_id_ = DenseNet("mu_id", kIdObs, arch_.mu_id_hidden, arch_.msg_dim, hact, Act::relu, rng);
  eps_uav_ = DenseNet("eps_uav", kUavObs, arch_.eps_uav_hidden, f, hact, Act::relu, rng);
  eps_id_ = DenseNet("eps_id", arch_.msg_dim, arch_.eps_id_hidden, f, hact, Act::relu, rng);
  if (agg_ == Aggregator::gat) {
    eps_att_ = DenseNet("eps_att", 2 * f, {f}, 1, Act::leaky_relu, Act::identity, rng);
  }
  gamma_v_ = DenseNet("gamma_v", 2 * e, arch_.gamma_v_hidden, 3, hact, Act::tanh, rng);
  gamma_f_ = DenseNet("gamma_f", e, arch_.gamma_f_hidden, 1, hact, Act::relu, rng);
  pi_id_ = DenseNet("pi_id", e, arch_.pi_id_hidden, 1, hact, Act::sigmoid, rng);
}

std::string CmaddpgActors::kind() const {
  return agg_ == Aggregator::gat ? "cmaddpg" : "cmaddpg-gs";
}

int CmaddpgActors::feature_width() const {
  return agg_ == Aggregator::gat ? arch_.feat_dim : arch_.feat_dim / 2;
}

std::vector<const DenseNet*> CmaddpgActors::net_list() const {
  std::vector<const DenseNet*> nets{&mu_id_, &eps_uav_, &eps_id_};
  if (agg_ == Aggregator::gat) nets.push_back(&eps_att_);
  nets.push_back(&gamma_v_);
  nets.push_back(&gamma_f_);
  nets.push_back(&pi_id_);
  return nets;
}

std::vector<DenseNet*> CmaddpgActors::net_list() {
  std::vector<DenseNet*> nets{&mu_id_, &eps_uav_, &eps_id_};
  if (agg_ == Aggregator::gat) nets.push_back(&eps_att_);
  nets.push_back(&gamma_v_);
  nets.push_back(&gamma_f_);
  nets.push_back(&pi_id_);
  return nets;
}

int CmaddpgActors::entry_offset(const DenseNet* net) const {
  int off = 0;
  for (const DenseNet* n : net_list()) {
    if (n == net) return off;
    off += n->entry_count();
  }
  throw StateError("entry_offset: net not registered");
}

ParamSet CmaddpgActors::params() const {
  ParamSet ps;
  for (const DenseNet* n : net_list()) n->append_params_to(ps);
  return ps;
}

void CmaddpgActors::set_params(const ParamSet& ps) {
  int off = 0;
  for (DenseNet* n : net_list()) {
    n->load_params(ps, off);
    off += n->entry_count();
  }
  if (off != static_cast<int>(ps.entries.size())) {
    throw ContractError("set_params: entry count mismatch");
  }
}

std::unique_ptr<TrainablePolicy> CmaddpgActors::clone() const {
  return std::make_unique<CmaddpgActors>(*this);
}

// --- Single-sample operations -------------------------------------------------

std::vector<double> CmaddpgActors::id_message(std::span<const double> obs) const {
  if (static_cast<int>(obs.size()) != kIdObs) {
    throw ContractError("id_message: observation must be 7 wide");
  }
  return mu_id_.forward1(obs);
}

std::vector<std::vector<double>> CmaddpgActors::extract_features(
    std::span<const double> uav_obs, const std::vector<std::vector<double>>& messages) const {
  if (static_cast<int>(uav_obs.size()) != kUavObs) {
    throw ContractError("extract_features: server observation must be 3 wide");
  }
  std::vector<std::vector<double>> feats;
  feats.reserve(messages.size() + 1);
  feats.push_back(eps_uav_.forward1(uav_obs));
  for (const auto& m : messages) {
    if (static_cast<int>(m.size()) != arch_.msg_dim) {
      throw ContractError("extract_features: message width mismatch");
    }
    feats.push_back(eps_id_.forward1(m));
  }
  return feats;
}

double CmaddpgActors::attention_logit(std::span<const double> e_j,
                                      std::span<const double> e_k) const {
  if (agg_ != Aggregator::gat) throw StateError("attention_logit: not a GAT aggregator");
  const int f = feature_width();
  if (static_cast<int>(e_j.size()) != f || static_cast<int>(e_k.size()) != f) {
    throw ContractError("attention_logit: feature width mismatch");
  }
  std::vector<double> pair(2 * f);
  std::copy(e_j.begin(), e_j.end(), pair.begin());
  std::copy(e_k.begin(), e_k.end(), pair.begin() + f);
  return eps_att_.forward1(pair)[0];
}

std::vector<std::vector<double>> CmaddpgActors::attention_scores(
    const std::vector<std::vector<double>>& features) const {
  if (agg_ != Aggregator::gat) throw StateError("attention_scores: not a GAT aggregator");
  if (features.empty()) throw ContractError("attention_scores: need at least one feature");
  const int n = static_cast<int>(features.size());
  const int f = feature_width();
  std::vector<double> pair(2 * f);
  std::vector<std::vector<double>> z(n, std::vector<double>(n, 0.0));
  std::vector<double> row(n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      std::copy(features[j].begin(), features[j].end(), pair.begin());
      std::copy(features[k].begin(), features[k].end(), pair.begin() + f);
      row[k] = eps_att_.forward1(pair)[0];
    }
    softmax_row(row.data(), n, z[j].data());
  }
  return z;
}

std::vector<std::vector<double>> CmaddpgActors::gat_aggregate(
    const std::vector<std::vector<double>>& features,
    const std::vector<std::vector<double>>& scores) {
  const int n = static_cast<int>(features.size());
  const int f = n > 0 ? static_cast<int>(features[0].size()) : 0;
  std::vector<std::vector<double>> w(n, std::vector<double>(f, 0.0));
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const double zjk = scores[j][k];
      for (int c = 0; c < f; ++c) w[j][c] += zjk * features[k][c];
    }
  }
  return w;
}

std::vector<std::vector<double>> CmaddpgActors::gs_aggregate(
    const std::vector<std::vector<double>>& features) {
  const int n = static_cast<int>(features.size());
  const int f = n > 0 ? static_cast<int>(features[0].size()) : 0;
  std::vector<std::vector<double>> w(n, std::vector<double>(2 * f, 0.0));
  for (int j = 0; j < n; ++j) {
    for (int c = 0; c < f; ++c) w[j][c] = features[j][c];
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      for (int c = 0; c < f; ++c) w[j][f + c] += features[k][c];
    }
  }
  return w;
}

std::vector<std::vector<double>> CmaddpgActors::uav_message(
    std::span<const double> uav_obs, const std::vector<std::vector<double>>& messages) const {
  const auto feats = extract_features(uav_obs, messages);
  if (agg_ == Aggregator::gat) return gat_aggregate(feats, attention_scores(feats));
  return gs_aggregate(feats);
}

CmaddpgActors::UavDecision CmaddpgActors::uav_solution(
    std::span<const double> w0, const std::vector<std::vector<double>>& w_ids) const {
  if (w_ids.empty()) throw ContractError("uav_solution: need at least one active device");
  const int e = arch_.feat_dim;
  std::vector<double> gv_in(2 * e, 0.0);
  std::copy(w0.begin(), w0.end(), gv_in.begin());
  for (const auto& w : w_ids) {
    for (int c = 0; c < e; ++c) gv_in[e + c] += w[c];
  }
  const auto raw = gamma_v_.forward1(gv_in);
  UavDecision d;
  d.raw = {raw[0], raw[1], raw[2]};
  const TrajProjection t = project_traj(d.raw, sim_);
  d.v = t.v;
  d.eta = t.eta;
  d.beta = t.beta;
  d.f_tilde.reserve(w_ids.size());
  for (const auto& w : w_ids) d.f_tilde.push_back(gamma_f_.forward1(w)[0]);
  d.equal_split_fallback = normalize_f(d.f_tilde, sim_.f_max, d.f);
  return d;
}

double CmaddpgActors::id_solution_sig(std::span<const double> w_j) const {
  return pi_id_.forward1(w_j)[0];
}

double CmaddpgActors::id_solution(std::span<const double> w_j, double f_j, double rate_up,
                                  double rate_down, double task_bits) const {
  const double cap = env::lambda_max(task_bits, rate_up, rate_down, f_j, sim_);
  if (cap == 0.0) return 0.0;
  return cap * id_solution_sig(w_j);
}

// --- Batched training path ----------------------------------------------------

struct CmaddpgActors::BatchCache : TrainablePolicy::Cache {
  int batch = 0;
  std::vector<std::vector<int>> act_ids;
  std::vector<int> row_off;   // batch + 1
  std::vector<int> pair_off;  // batch + 1 (gat)
  int total_ids = 0;
  int total_pairs = 0;

  Tensor2 mu_in, e0_in;
  DenseNet::Cache mu_cache, eu_cache, ei_cache, ea_cache, gv_cache, gf_cache, pi_cache;
  Tensor2 mu_out, e0, e_id;
  Tensor2 pair_in, pair_score;
  std::vector<std::vector<double>> z;  // per sample, (n+1)^2
  std::vector<std::vector<double>> w;  // per sample, (n+1) * E
  Tensor2 w_id_rows;                   // total_ids x E
  Tensor2 gv_in, gv_out;
  Tensor2 gf_out, pi_out;
  std::vector<double> f_sum;
  std::vector<std::uint8_t> f_fallback;
  std::vector<double> f_vals;  // total_ids
  std::vector<RateChainCache> chains;
  std::vector<std::array<double, 3>> traj;  // projected v/eta/beta
};

std::unique_ptr<TrainablePolicy::Cache> CmaddpgActors::make_cache() const {
  return std::make_unique<BatchCache>();
}

void CmaddpgActors::forward_batch(const Tensor2& states, const MaskMat& masks,
                                  const Geometry& geom, Cache& cache_base,
                                  Tensor2& actions) const {
  auto& c = static_cast<BatchCache&>(cache_base);
  const int b = states.rows();
  const int nm = sim_.n_max;
  if (states.cols() != state_width()) throw ContractError("forward_batch: state width mismatch");
  if (static_cast<int>(masks.size()) != b) throw ContractError("forward_batch: mask rows");

  c.batch = b;
  c.act_ids.assign(b, {});
  c.row_off.assign(b + 1, 0);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < nm; ++j) {
      if (masks[i][j]) c.act_ids[i].push_back(j);
    }
    if (c.act_ids[i].empty()) throw ContractError("forward_batch: sample without active devices");
    c.row_off[i + 1] = c.row_off[i] + static_cast<int>(c.act_ids[i].size());
  }
  c.total_ids = c.row_off[b];

  // Uplink messages, stacked over (sample, device).
  c.mu_in = Tensor2(c.total_ids, kIdObs);
  c.e0_in = Tensor2(b, kUavObs);
  for (int i = 0; i < b; ++i) {
    const double* s = states.row(i);
    std::copy(s, s + kUavObs, c.e0_in.row(i));
    for (std::size_t a = 0; a < c.act_ids[i].size(); ++a) {
      const int j = c.act_ids[i][a];
      std::copy(s + kUavObs + kIdObs * j, s + kUavObs + kIdObs * (j + 1),
                c.mu_in.row(c.row_off[i] + static_cast<int>(a)));
    }
  }
  c.mu_out = mu_id_.forward(c.mu_in, &c.mu_cache);
  c.e0 = eps_uav_.forward(c.e0_in, &c.eu_cache);
  c.e_id = eps_id_.forward(c.mu_out, &c.ei_cache);

  const int f = feature_width();
  const int e = arch_.feat_dim;
  auto feat_row = [&](int i, int node) -> const double* {
    return node == 0 ? c.e0.row(i) : c.e_id.row(c.row_off[i] + node - 1);
  };

  // Aggregation into the w vectors, node 0 = server.
  c.w.assign(b, {});
  if (agg_ == Aggregator::gat) {
    c.pair_off.assign(b + 1, 0);
    for (int i = 0; i < b; ++i) {
      const int n1 = static_cast<int>(c.act_ids[i].size()) + 1;
      c.pair_off[i + 1] = c.pair_off[i] + n1 * n1;
    }
    c.total_pairs = c.pair_off[b];
    c.pair_in = Tensor2(c.total_pairs, 2 * f);
    for (int i = 0; i < b; ++i) {
      const int n1 = static_cast<int>(c.act_ids[i].size()) + 1;
      for (int j = 0; j < n1; ++j) {
        for (int k = 0; k < n1; ++k) {
          double* row = c.pair_in.row(c.pair_off[i] + j * n1 + k);
          std::copy(feat_row(i, j), feat_row(i, j) + f, row);
          std::copy(feat_row(i, k), feat_row(i, k) + f, row + f);
        }
      }
    }
    c.pair_score = eps_att_.forward(c.pair_in, &c.ea_cache);
    c.z.assign(b, {});
    for (int i = 0; i < b; ++i) {
      const int n1 = static_cast<int>(c.act_ids[i].size()) + 1;
      c.z[i].assign(static_cast<std::size_t>(n1) * n1, 0.0);
      std::vector<double> row(n1);
      for (int j = 0; j < n1; ++j) {
        for (int k = 0; k < n1; ++k) row[k] = c.pair_score(c.pair_off[i] + j * n1 + k, 0);
        softmax_row(row.data(), n1, c.z[i].data() + static_cast<std::size_t>(j) * n1);
      }
      c.w[i].assign(static_cast<std::size_t>(n1) * e, 0.0);
      for (int j = 0; j < n1; ++j) {
        double* wj = c.w[i].data() + static_cast<std::size_t>(j) * e;
        for (int k = 0; k < n1; ++k) {
          const double zjk = c.z[i][static_cast<std::size_t>(j) * n1 + k];
          const double* ek = feat_row(i, k);
          for (int q = 0; q < e; ++q) wj[q] += zjk * ek[q];
        }
      }
    }
  } else {
    for (int i = 0; i < b; ++i) {
      const int n1 = static_cast<int>(c.act_ids[i].size()) + 1;
      c.w[i].assign(static_cast<std::size_t>(n1) * e, 0.0);
      for (int j = 0; j < n1; ++j) {
        double* wj = c.w[i].data() + static_cast<std::size_t>(j) * e;
        const double* ej = feat_row(i, j);
        for (int q = 0; q < f; ++q) wj[q] = ej[q];
        for (int k = 0; k < n1; ++k) {
          if (k == j) continue;
          const double* ek = feat_row(i, k);
          for (int q = 0; q < f; ++q) wj[f + q] += ek[q];
        }
      }
    }
  }

  // Trajectory head on [w_0 | sum_j w_j].
  c.gv_in = Tensor2(b, 2 * e);
  for (int i = 0; i < b; ++i) {
    double* row = c.gv_in.row(i);
    const double* w0 = c.w[i].data();
    std::copy(w0, w0 + e, row);
    const int n = static_cast<int>(c.act_ids[i].size());
    for (int a = 1; a <= n; ++a) {
      const double* wj = c.w[i].data() + static_cast<std::size_t>(a) * e;
      for (int q = 0; q < e; ++q) row[e + q] += wj[q];
    }
  }
  c.gv_out = gamma_v_.forward(c.gv_in, &c.gv_cache);
  c.traj.assign(b, {});
  for (int i = 0; i < b; ++i) {
    const TrajProjection t =
        project_traj({c.gv_out(i, 0), c.gv_out(i, 1), c.gv_out(i, 2)}, sim_);
    c.traj[i] = {t.v, t.eta, t.beta};
  }

  // CPU and offload heads on the per-device w rows.
  c.w_id_rows = Tensor2(c.total_ids, e);
  for (int i = 0; i < b; ++i) {
    const int n = static_cast<int>(c.act_ids[i].size());
    for (int a = 0; a < n; ++a) {
      const double* wj = c.w[i].data() + static_cast<std::size_t>(a + 1) * e;
      std::copy(wj, wj + e, c.w_id_rows.row(c.row_off[i] + a));
    }
  }
  c.gf_out = gamma_f_.forward(c.w_id_rows, &c.gf_cache);
  c.pi_out = pi_id_.forward(c.w_id_rows, &c.pi_cache);

  c.f_sum.assign(b, 0.0);
  c.f_fallback.assign(b, 0);
  c.f_vals.assign(c.total_ids, 0.0);
  for (int i = 0; i < b; ++i) {
    const int n = static_cast<int>(c.act_ids[i].size());
    double sum = 0.0;
    for (int a = 0; a < n; ++a) sum += c.gf_out(c.row_off[i] + a, 0);
    c.f_sum[i] = sum;
    if (sum == 0.0) {
      c.f_fallback[i] = 1;
      for (int a = 0; a < n; ++a) c.f_vals[c.row_off[i] + a] = sim_.f_max / n;
    } else {
      for (int a = 0; a < n; ++a) {
        c.f_vals[c.row_off[i] + a] = c.gf_out(c.row_off[i] + a, 0) / sum * sim_.f_max;
      }
    }
  }

  // Rates and feasible bounds at the post-move geometry.
  c.chains.assign(c.total_ids, {});
  for (int i = 0; i < b; ++i) {
    const int n = static_cast<int>(c.act_ids[i].size());
    for (int a = 0; a < n; ++a) {
      const int j = c.act_ids[i][a];
      const int row = c.row_off[i] + a;
      c.chains[row] = rate_chain_forward(sim_, geom.u_prev[i], geom.id_pos[i][j],
                                         geom.task_bits[i][j], n, c.traj[i][0], c.traj[i][1],
                                         c.traj[i][2], c.f_vals[row]);
    }
  }

  // Packed action rows.
  const int aw = action_width();
  if (actions.rows() != b || actions.cols() != aw) actions = Tensor2(b, aw);
  actions.fill(0.0);
  const int pm = packed_msg_dim();
  const int pf = packed_feat_dim();
  for (int i = 0; i < b; ++i) {
    double* out = actions.row(i);
    out[0] = (c.gv_out(i, 0) + 1.0) * 0.5;
    out[1] = (c.gv_out(i, 1) + 1.0) * 0.5;
    out[2] = (c.gv_out(i, 2) + 1.0) * 0.5;
    const int n = static_cast<int>(c.act_ids[i].size());
    for (int a = 0; a < n; ++a) {
      const int j = c.act_ids[i][a];
      const int row = c.row_off[i] + a;
      out[3 + j] = c.f_vals[row] / sim_.f_max;
      out[3 + nm + j] = c.chains[row].cap * c.pi_out(row, 0);
      if (pm > 0) {
        const double* m = c.mu_out.row(row);
        std::copy(m, m + pm, out + 3 + 2 * nm + j * pm);
      }
      if (pf > 0) {
        const double* wj = c.w[i].data() + static_cast<std::size_t>(a + 1) * e;
        std::copy(wj, wj + pf, out + 3 + 2 * nm + nm * pm + j * pf);
      }
    }
  }
}

void CmaddpgActors::backward_batch(const Cache& cache_base, const Tensor2& d_actions,
                                   ParamSet& grads) const {
  const auto& c = static_cast<const BatchCache&>(cache_base);
  const int b = c.batch;
  if (b == 0) throw StateError("backward_batch: no forward cache");
  const int nm = sim_.n_max;
  const int e = arch_.feat_dim;
  const int f = feature_width();
  const int pm = packed_msg_dim();
  const int pf = packed_feat_dim();
  if (d_actions.rows() != b || d_actions.cols() != action_width()) {
    throw ContractError("backward_batch: upstream shape mismatch");
  }

  // Stage 1: offload-ratio slots split into the sigmoid path and the
  // feas  bound path; the bound path reaches the trajectory and the CPU
  // shares through the rate chain.
  Tensor2 d_sig(c.total_ids, 1);
  std::vector<double> d_f(c.total_ids, 0.0);
  std::vector<std::array<double, 3>> d_traj_phys(b, {0.0, 0.0, 0.0});
  for (int i = 0; i < b; ++i) {
    const int n = static_cast<int>(c.act_ids[i].size());
    for (int a = 0; a < n; ++a) {
      const int j = c.act_ids[i][a];
      const int row = c.row_off[i] + a;
      const double d_lambda = d_actions(i, 3 + nm + j);
      const double sig = c.pi_out(row, 0);
      d_sig(row, 0) = d_lambda * c.chains[row].cap;
      const double d_cap = d_lambda * sig;
      const RateChainGrad g = rate_chain_backward(sim_, c.chains[row], 0.0, 0.0, d_cap);
      d_f[row] += g.df;
      d_traj_phys[i][0] += g.dv;
      d_traj_phys[i][1] += g.deta;
      d_traj_phys[i][2] += g.dbeta;
      d_f[row] += d_actions(i, 3 + j) / sim_.f_max;  // direct f slot
    }
  }

  // Stage 2: normalization backward onto the raw CPU shares.
  Tensor2 d_ftilde(c.total_ids, 1);
  for (int i = 0; i < b; ++i) {
    const int n = static_cast<int>(c.act_ids[i].size());
    if (c.f_fallback[i]) {
      for (int a = 0; a < n; ++a) d_ftilde(c.row_off[i] + a, 0) = 0.0;
      continue;
    }
    const double s = c.f_sum[i];
    double dot = 0.0;
    for (int a = 0; a < n; ++a) {
      dot += d_f[c.row_off[i] + a] * c.gf_out(c.row_off[i] + a, 0);
    }
    for (int a = 0; a < n; ++a) {
      const int row = c.row_off[i] + a;
      d_ftilde(row, 0) = sim_.f_max / s * (d_f[row] - dot / s);
    }
  }

  // Stage 3: head backwards accumulate into the w gradients.
  std::vector<std::vector<double>> d_w(b);
  for (int i = 0; i < b; ++i) {
    d_w[i].assign(c.w[i].size(), 0.0);
  }
  Tensor2 d_wrows = gamma_f_.backward(c.gf_cache, d_ftilde, grads, entry_offset(&gamma_f_));
  Tensor2 d_wrows_pi = pi_id_.backward(c.pi_cache, d_sig, grads, entry_offset(&pi_id_));
  for (int i = 0; i < b; ++i) {
    const int n = static_cast<int>(c.act_ids[i].size());
    for (int a = 0; a < n; ++a) {
      const int row = c.row_off[i] + a;
      double* dw = d_w[i].data() + static_cast<std::size_t>(a + 1) * e;
      for (int q = 0; q < e; ++q) dw[q] += d_wrows(row, q) + d_wrows_pi(row, q);
      if (pf > 0) {
        const int j = c.act_ids[i][a];
        const double* slot = d_actions.row(i) + 3 + 2 * nm + nm * pm + j * pf;
        for (int q = 0; q < pf; ++q) dw[q] += slot[q];
      }
    }
  }

  // Stage 4: trajectory head. Packed slots carry (g+1)/2; the physical path
  // adds the affine ranges.
  Tensor2 d_g(b, 3);
  for (int i = 0; i < b; ++i) {
    d_g(i, 0) = d_actions(i, 0) * 0.5 + d_traj_phys[i][0] * (sim_.v_max * 0.5);
    d_g(i, 1) = d_actions(i, 1) * 0.5 + d_traj_phys[i][1] * kPi;
    d_g(i, 2) = d_actions(i, 2) * 0.5 + d_traj_phys[i][2] * (kPi * 0.5);
  }
  Tensor2 d_gvin = gamma_v_.backward(c.gv_cache, d_g, grads, entry_offset(&gamma_v_));
  for (int i = 0; i < b; ++i) {
    const double* row = d_gvin.row(i);
    double* dw0 = d_w[i].data();
    for (int q = 0; q < e; ++q) dw0[q] += row[q];
    const int n = static_cast<int>(c.act_ids[i].size());
    for (int a = 1; a <= n; ++a) {
      double* dwj = d_w[i].data() + static_cast<std::size_t>(a) * e;
      for (int q = 0; q < e; ++q) dwj[q] += row[e + q];
    }
  }

  // Stage 5: aggregation backward onto the feature gradients.
  Tensor2 d_e0(b, f);
  Tensor2 d_eid(c.total_ids, f);
  d_e0.fill(0.0);
  d_eid.fill(0.0);
  auto feat_row = [&](int i, int node) -> const double* {
    return node == 0 ? c.e0.row(i) : c.e_id.row(c.row_off[i] + node - 1);
  };
  auto dfeat_row = [&](int i, int node) -> double* {
    return node == 0 ? d_e0.row(i) : d_eid.row(c.row_off[i] + node - 1);
  };

  if (agg_ == Aggregator::gat) {
    Tensor2 d_score(c.total_pairs, 1);
    d_score.fill(0.0);
    for (int i = 0; i < b; ++i) {
      const int n1 = static_cast<int>(c.act_ids[i].size()) + 1;
      std::vector<double> d_z(static_cast<std::size_t>(n1) * n1, 0.0);
      for (int j = 0; j < n1; ++j) {
        const double* dwj = d_w[i].data() + static_cast<std::size_t>(j) * e;
        for (int k = 0; k < n1; ++k) {
          const double zjk = c.z[i][static_cast<std::size_t>(j) * n1 + k];
          double* dek = dfeat_row(i, k);
          const double* ek = feat_row(i, k);
          double dot = 0.0;
          for (int q = 0; q < e; ++q) {
            dek[q] += zjk * dwj[q];
            dot += dwj[q] * ek[q];
          }
          d_z[static_cast<std::size_t>(j) * n1 + k] = dot;
        }
      }
      for (int j = 0; j < n1; ++j) {
        const double* zrow = c.z[i].data() + static_cast<std::size_t>(j) * n1;
        const double* dzrow = d_z.data() + static_cast<std::size_t>(j) * n1;
        double inner = 0.0;
        for (int k = 0; k < n1; ++k) inner += zrow[k] * dzrow[k];
        for (int k = 0; k < n1; ++k) {
          d_score(c.pair_off[i] + j * n1 + k, 0) = zrow[k] * (dzrow[k] - inner);
        }
      }
    }
    Tensor2 d_pair = eps_att_.backward(c.ea_cache, d_score, grads, entry_offset(&eps_att_));
    for (int i = 0; i < b; ++i) {
      const int n1 = static_cast<int>(c.act_ids[i].size()) + 1;
      for (int j = 0; j < n1; ++j) {
        for (int k = 0; k < n1; ++k) {
          const double* row = d_pair.row(c.pair_off[i] + j * n1 + k);
          double* dej = dfeat_row(i, j);
          double* dek = dfeat_row(i, k);
          for (int q = 0; q < f; ++q) {
            dej[q] += row[q];
            dek[q] += row[f + q];
          }
        }
      }
    }
  } else {
    for (int i = 0; i < b; ++i) {
      const int n1 = static_cast<int>(c.act_ids[i].size()) + 1;
      for (int j = 0; j < n1; ++j) {
        const double* dwj = d_w[i].data() + static_cast<std::size_t>(j) * e;
        double* dej = dfeat_row(i, j);
        for (int q = 0; q < f; ++q) dej[q] += dwj[q];
        for (int k = 0; k < n1; ++k) {
          if (k == j) continue;
          double* dek = dfeat_row(i, k);
          for (int q = 0; q < f; ++q) dek[q] += dwj[f + q];
        }
      }
    }
  }

  // Stage 6: feature extractors, then the shared device message actor with
  // both the network path and (when packed) the direct uplink slots.
  eps_uav_.backward(c.eu_cache, d_e0, grads, entry_offset(&eps_uav_));
  Tensor2 d_msg = eps_id_.backward(c.ei_cache, d_eid, grads, entry_offset(&eps_id_));
  if (pm > 0) {
    for (int i = 0; i < b; ++i) {
      const int n = static_cast<int>(c.act_ids[i].size());
      for (int a = 0; a < n; ++a) {
        const int j = c.act_ids[i][a];
        const double* slot = d_actions.row(i) + 3 + 2 * nm + j * pm;
        double* row = d_msg.row(c.row_off[i] + a);
        for (int q = 0; q < pm; ++q) row[q] += slot[q];
      }
    }
  }
  mu_id_.backward(c.mu_cache, d_msg, grads, entry_offset(&mu_id_));
}

ActionBundle CmaddpgActors::act(const env::Env& e) const {
  const int nm = sim_.n_max;
  if (e.cfg().n_max != nm) throw ContractError("act: environment n_max mismatch");
  if (e.active_count() < 1) throw ContractError("act: need at least one active device");

  Tensor2 states(1, state_width());
  const auto s = e.state_vector();
  std::copy(s.begin(), s.end(), states.row(0));
  MaskMat masks{e.active()};
  const Geometry geom = geometry_from_env(e);

  BatchCache cache;
  Tensor2 actions;
  forward_batch(states, masks, geom, cache, actions);

  ActionBundle a;
  a.resize(nm, arch_.msg_dim, arch_.feat_dim);
  a.pack_messages = arch_.critic_sees_messages;
  a.active = e.active();
  a.v = cache.traj[0][0];
  a.eta = cache.traj[0][1];
  a.beta = cache.traj[0][2];
  a.traj_raw = {cache.gv_out(0, 0), cache.gv_out(0, 1), cache.gv_out(0, 2)};
  const int ew = arch_.feat_dim;
  for (std::size_t idx = 0; idx < cache.act_ids[0].size(); ++idx) {
    const int j = cache.act_ids[0][idx];
    const int row = static_cast<int>(idx);
    a.f[j] = cache.f_vals[row];
    a.f_tilde[j] = cache.gf_out(row, 0);
    a.lambda_sig[j] = cache.pi_out(row, 0);
    a.lambda_cap[j] = cache.chains[row].cap;
    a.lambda[j] = a.lambda_cap[j] * a.lambda_sig[j];
    std::copy(cache.mu_out.row(row), cache.mu_out.row(row) + arch_.msg_dim,
              a.uplink.begin() + static_cast<std::size_t>(j) * arch_.msg_dim);
    const double* wj = cache.w[0].data() + (idx + 1) * static_cast<std::size_t>(ew);
    std::copy(wj, wj + ew, a.downlink.begin() + static_cast<std::size_t>(j) * ew);
  }
  return a;
}

}  // namespace mecsim::agents
