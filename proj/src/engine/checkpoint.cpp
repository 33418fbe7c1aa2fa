#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mvptm/engine.hpp"
#include "mvptm/error.hpp"

namespace mvptm::engine {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'V', 'P', 'T'};
constexpr std::size_t kHeader = 4 + 4 + 8;

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorCode::CorruptCheckpoint, "checkpoint: " + what); }

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::string_view in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string serialize(const Checkpoint& ckpt) {
  json params = json::array();
  std::string blob;
  for (const auto& [name, t] : ckpt.params) {
    params.push_back({{"name", name}, {"shape", t.shape()}, {"offset", blob.size()}});
    for (double x : t.data()) put_le(blob, std::bit_cast<std::uint64_t>(x), 8);
  }
  const json manifest = {
      {"config", to_json(ckpt.config)},
      {"vocab", ckpt.vocab.tokens()},
      {"rng_state", ckpt.rng_state},
      {"params", std::move(params)},
      {"blob_bytes", blob.size()},
  };
  const std::string text = manifest.dump();

  std::string out(kMagic, 4);
  put_le(out, kCheckpointVersion, 4);
  put_le(out, text.size(), 8);
  out += text;
  out += blob;
  return out;
}

Checkpoint deserialize(std::string_view bytes) {
  if (bytes.size() < kHeader) corrupt("truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) corrupt("bad magic bytes");
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                std::to_string(kCheckpointVersion));
  }
  const std::uint64_t mlen = get_le(bytes, 8, 8);
  if (mlen > bytes.size() - kHeader) corrupt("truncated manifest");
  const json manifest = json::parse(bytes.substr(kHeader, mlen), nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) corrupt("manifest is not a JSON object");
  const std::string_view blob = bytes.substr(kHeader + mlen);

  Checkpoint ckpt;
  try {
    ckpt.config = config_from_json(manifest.at("config"));
    ckpt.vocab = corpus::Vocab::from_tokens(manifest.at("vocab").get<std::vector<std::string>>());
    ckpt.rng_state = manifest.at("rng_state").get<std::string>();
    if (manifest.at("blob_bytes").get<std::uint64_t>() != blob.size()) corrupt("blob length differs from manifest");
    for (const json& p : manifest.at("params")) {
      const auto name = p.at("name").get<std::string>();
      const auto shape = p.at("shape").get<numerics::Shape>();
      const auto offset = p.at("offset").get<std::uint64_t>();
      const std::size_t count = numerics::element_count(shape);
      if (shape.empty() && count != 1) corrupt("parameter " + name + " has no shape");
      if (offset > blob.size() || count > (blob.size() - offset) / 8) {
        corrupt("parameter " + name + " runs past the end of the blob");
      }
      std::vector<double> data(count);
      for (std::size_t i = 0; i < count; ++i) data[i] = std::bit_cast<double>(get_le(blob, offset + 8 * i, 8));
      if (!ckpt.params.emplace(name, numerics::Tensor(shape, std::move(data))).second) {
        corrupt("duplicate parameter " + name);
      }
    }
  } catch (const json::exception& e) {
    corrupt(std::string("malformed manifest: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptCheckpoint) throw;
    corrupt(e.what());
  }
  try {
    make_model(ckpt);
  } catch (const Error& e) {
    corrupt(e.what());
  }
  return ckpt;
}

void save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::FileNotFound, "write failed for " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

encoder::Model make_model(const Checkpoint& ckpt) { return encoder::Model(ckpt.config.encoder, ckpt.params); }

}  // namespace mvptm::engine
