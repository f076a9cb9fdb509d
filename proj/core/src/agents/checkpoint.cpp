#include "mecsim/agents/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "../internal/json_io.hpp"
#include "mecsim/errors.hpp"

namespace mecsim::agents {

using internal::Json;

namespace {

constexpr char kMagic[8] = {'M', 'E', 'C', 'S', 'I', 'M', 'P', '1'};

void write_u64_le(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t read_u64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_doubles_le(std::ostream& out, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) write_u64_le(out, std::bit_cast<std::uint64_t>(data[i]));
}

void read_doubles_le(std::istream& in, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(read_u64_le(in));
}

Json arch_to_json(const ActorArch& a) {
  Json j;
  j["msg_dim"] = a.msg_dim;
  j["feat_dim"] = a.feat_dim;
  j["mu_id_hidden"] = a.mu_id_hidden;
  j["eps_uav_hidden"] = a.eps_uav_hidden;
  j["eps_id_hidden"] = a.eps_id_hidden;
  j["gamma_v_hidden"] = a.gamma_v_hidden;
  j["gamma_f_hidden"] = a.gamma_f_hidden;
  j["pi_id_hidden"] = a.pi_id_hidden;
  j["critic_hidden"] = a.critic_hidden;
  j["hidden_act"] = numkit::act_to_string(a.hidden_act);
  j["critic_sees_messages"] = a.critic_sees_messages;
  return j;
}

ActorArch arch_from_json(const Json& j) {
  ActorArch a;
  a.msg_dim = j.at("msg_dim").get<int>();
  a.feat_dim = j.at("feat_dim").get<int>();
  a.mu_id_hidden = j.at("mu_id_hidden").get<std::vector<int>>();
  a.eps_uav_hidden = j.at("eps_uav_hidden").get<std::vector<int>>();
  a.eps_id_hidden = j.at("eps_id_hidden").get<std::vector<int>>();
  a.gamma_v_hidden = j.at("gamma_v_hidden").get<std::vector<int>>();
  a.gamma_f_hidden = j.at("gamma_f_hidden").get<std::vector<int>>();
  a.pi_id_hidden = j.at("pi_id_hidden").get<std::vector<int>>();
  a.critic_hidden = j.at("critic_hidden").get<std::vector<int>>();
  a.hidden_act = numkit::act_from_string(j.at("hidden_act").get<std::string>());
  a.critic_sees_messages = j.at("critic_sees_messages").get<bool>();
  return a;
}

Json tensors_to_json(const numkit::ParamSet& ps, const char* set_tag) {
  Json arr = Json::array();
  for (const auto& e : ps.entries) {
    arr.push_back({{"name", e.name},
                   {"rows", e.value.rows()},
                   {"cols", e.value.cols()},
                   {"set", set_tag}});
  }
  return arr;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const numkit::ParamSet& actor_params,
                     const numkit::ParamSet* critic_params) {
  Json manifest;
  manifest["format"] = "mecsim-params-v1";
  manifest["byte_order"] = "little";
  manifest["dtype"] = "f64";
  manifest["scheme"] = meta.scheme;
  manifest["n_max"] = meta.n_max;
  manifest["n_min"] = meta.n_min;
  manifest["seed"] = meta.seed;
  manifest["episodes_trained"] = meta.episodes_trained;
  manifest["arch"] = arch_to_json(meta.arch);
  Json tensors = tensors_to_json(actor_params, "actor");
  if (critic_params) {
    for (auto& t : tensors_to_json(*critic_params, "critic")) tensors.push_back(t);
  }
  manifest["tensors"] = tensors;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::string m = manifest.dump();
  write_u64_le(out, m.size());
  out.write(m.data(), static_cast<std::streamsize>(m.size()));
  for (const auto& e : actor_params.entries) {
    write_doubles_le(out, e.value.data(), e.value.size());
  }
  if (critic_params) {
    for (const auto& e : critic_params->entries) {
      write_doubles_le(out, e.value.data(), e.value.size());
    }
  }
  if (!out) throw ContractError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw ContractError("load_checkpoint: bad magic in " + path);
  }
  const std::uint64_t mlen = read_u64_le(in);
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));
  const Json manifest = internal::parse_json_text(mtext, path + " manifest");
  if (manifest.at("format").get<std::string>() != "mecsim-params-v1") {
    throw ContractError("load_checkpoint: unsupported format in " + path);
  }

  Checkpoint ck;
  ck.meta.scheme = manifest.at("scheme").get<std::string>();
  ck.meta.n_max = manifest.at("n_max").get<int>();
  ck.meta.n_min = manifest.at("n_min").get<int>();
  ck.meta.seed = manifest.at("seed").get<std::uint64_t>();
  ck.meta.episodes_trained = manifest.at("episodes_trained").get<long>();
  ck.meta.arch = arch_from_json(manifest.at("arch"));

  for (const auto& t : manifest.at("tensors")) {
    numkit::ParamSet::Entry e;
    e.name = t.at("name").get<std::string>();
    e.value = numkit::Tensor2(t.at("rows").get<int>(), t.at("cols").get<int>());
    read_doubles_le(in, e.value.data(), e.value.size());
    if (t.at("set").get<std::string>() == "critic") {
      ck.critic_params.entries.push_back(std::move(e));
      ck.has_critic = true;
    } else {
      ck.actor_params.entries.push_back(std::move(e));
    }
  }
  if (!in) throw ContractError("load_checkpoint: truncated file " + path);
  return ck;
}

}  // namespace mecsim::agents
