#include "mfc/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>

namespace mfc {

namespace {

constexpr char kMagic[8] = {'M', 'F', 'C', 'C', 'K', 'P', 'T', '\0'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos, const std::string& path) {
  if (pos + 8 > in.size()) throw IoError("truncated checkpoint: " + path);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

Json header_json(const PolicyNetwork& policy, const CheckpointMeta& meta) {
  Json h;
  h["format"] = 1;
  h["network"] = to_json(policy.spec());
  h["basis"] = meta.basis;
  h["basis_hash"] = meta.basis_hash;
  h["model_hash"] = meta.model_hash;
  h["config_hash"] = meta.config_hash;
  h["seeds"] = {{"noise", meta.seeds.noise}, {"init", meta.seeds.init},
                {"weights", meta.seeds.weights}};
  h["iteration"] = meta.iteration;
  h["loss"] = meta.loss;
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const PolicyNetwork& policy,
                     const CheckpointMeta& meta) {
  std::string bytes(kMagic, sizeof kMagic);
  const std::string header = header_json(policy, meta).dump();
  put_u64(bytes, header.size());
  bytes += header;
  const Vector& w = policy.parameters();
  put_u64(bytes, static_cast<std::uint64_t>(w.size()));
  for (Index i = 0; i < w.size(); ++i) put_u64(bytes, std::bit_cast<std::uint64_t>(w(i)));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + path + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw IoError("not a checkpoint file: " + path);
  std::size_t pos = sizeof kMagic;
  const std::uint64_t hlen = get_u64(bytes, pos, path);
  if (pos + hlen > bytes.size()) throw IoError("truncated checkpoint header: " + path);
  Json h;
  try {
    h = Json::parse(bytes.substr(pos, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header in " + path + ": " + e.what());
  }
  pos += hlen;
  const std::uint64_t count = get_u64(bytes, pos, path);
  if (pos + 8 * count != bytes.size()) throw IoError("checkpoint weight block has wrong size: " + path);
  Vector w(static_cast<Index>(count));
  for (std::uint64_t i = 0; i < count; ++i)
    w(static_cast<Index>(i)) = std::bit_cast<Real>(get_u64(bytes, pos, path));

  Checkpoint c;
  try {
    c.policy = PolicyNetwork(network_spec_from_json(h.at("network")), std::move(w));
    c.meta.basis = h.at("basis");
    c.meta.basis_hash = h.at("basis_hash").get<std::string>();
    c.meta.model_hash = h.at("model_hash").get<std::string>();
    c.meta.config_hash = h.at("config_hash").get<std::string>();
    c.meta.seeds.noise = h.at("seeds").at("noise").get<std::uint64_t>();
    c.meta.seeds.init = h.at("seeds").at("init").get<std::uint64_t>();
    c.meta.seeds.weights = h.at("seeds").at("weights").get<std::uint64_t>();
    c.meta.iteration = h.at("iteration").get<long>();
    c.meta.loss = h.at("loss").get<Real>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("incomplete checkpoint header in " + path + ": " + e.what());
  }
  return c;
}

Checkpoint load_checkpoint(const std::string& path, const CheckpointExpectation& expect,
                           bool force) {
  Checkpoint c = load_checkpoint(path);
  const auto check = [&](const char* what, const std::optional<std::string>& want,
                         const std::string& have) {
    if (!want || *want == have) return;
    const std::string msg = std::string(what) + " mismatch loading " + path + ": checkpoint " +
                            have + ", run " + *want;
    if (!force) throw ConfigError(msg + " (use --force to load anyway)");
    std::cerr << "warning: " << msg << " (forced)\n";
  };
  check("basis hash", expect.basis_hash, c.meta.basis_hash);
  check("model hash", expect.model_hash, c.meta.model_hash);
  return c;
}

}  // namespace mfc
