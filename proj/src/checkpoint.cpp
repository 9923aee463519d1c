#include "basiscluster/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "basiscluster/errors.hpp"

namespace basiscluster {

namespace {

constexpr char kMagic[8] = {'B', 'C', 'L', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, 8);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_f64_block(std::ostream& os, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) write_u64(os, std::bit_cast<std::uint64_t>(data[i]));
}

void read_f64_block(std::istream& is, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(read_u64(is));
}

nlohmann::json model_to_json(const ModelConfig& m) {
  return nlohmann::json{{"p", m.p},
                        {"q", m.q},
                        {"k", m.k},
                        {"likelihood", to_string(m.likelihood)},
                        {"translation_invariant", m.translation_invariant},
                        {"scale_invariant", m.scale_invariant},
                        {"encoder_hidden", m.encoder_hidden},
                        {"decoder_hidden", m.decoder_hidden},
                        {"dropout_hidden", m.dropout_hidden},
                        {"activation", to_string(m.activation)},
                        {"phi_threshold", m.phi_threshold}};
}

ModelConfig model_from_json(const nlohmann::json& j) {
  ModelConfig m;
  m.p = j.at("p").get<std::size_t>();
  m.q = j.at("q").get<std::size_t>();
  m.k = j.at("k").get<std::size_t>();
  m.likelihood = likelihood_from_string(j.at("likelihood").get<std::string>());
  m.translation_invariant = j.at("translation_invariant").get<bool>();
  m.scale_invariant = j.at("scale_invariant").get<bool>();
  m.encoder_hidden = j.at("encoder_hidden").get<std::vector<std::size_t>>();
  m.decoder_hidden = j.at("decoder_hidden").get<std::vector<std::size_t>>();
  m.dropout_hidden = j.at("dropout_hidden").get<std::vector<std::size_t>>();
  m.activation = activation_from_string(j.at("activation").get<std::string>());
  m.phi_threshold = j.at("phi_threshold").get<double>();
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format_version"] = kVersion;
  header["model"] = model_to_json(ckpt.model);
  header["scheme"] = to_string(ckpt.scheme);
  header["prior"] = {{"alpha", ckpt.prior.alpha}, {"beta", ckpt.prior.beta}};
  header["rng"] = ckpt.rng_state;
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& p : ckpt.params.entries())
    arrays.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  header["arrays"] = std::move(arrays);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  write_u32(os, kVersion);
  const std::string h = header.dump();
  write_u64(os, h.size());
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& p : ckpt.params.entries())
    write_f64_block(os, p.value.data(), p.value.size());
  if (!os) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a checkpoint file (bad magic): " + path);
  const std::uint32_t version = read_u32(is);
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t hlen = read_u64(is);
  std::string htext(hlen, '\0');
  is.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw DataError("truncated checkpoint header: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(htext);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.model = model_from_json(header.at("model"));
  ckpt.scheme = scheme_from_string(header.at("scheme").get<std::string>());
  ckpt.prior.alpha = header.at("prior").at("alpha").get<std::vector<double>>();
  ckpt.prior.beta = header.at("prior").at("beta").get<double>();
  ckpt.rng_state = header.at("rng").get<std::string>();

  for (const auto& entry : header.at("arrays")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    NdArray& arr = ckpt.params.add(name, shape);
    read_f64_block(is, arr.data(), arr.size());
  }
  if (!is) throw DataError("truncated checkpoint payload: " + path);
  return ckpt;
}

}  // namespace basiscluster
