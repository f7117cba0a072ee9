#pragma once

// Checkpoint file: one line of JSON (terminated by '\n') describing the
// layout, hidden width, epoch, rng state and tensor table, followed by the
// raw tensor blob as 64-bit little-endian IEEE-754 values. Tensors appear in
// parameter-set order, weights (column-major) before biases.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace mmvae {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  MultimodalVae model;
  std::int64_t epoch = 0;
  Rng rng;
};

namespace checkpoint_detail {

inline void put_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b)
    out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

inline double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace checkpoint_detail

inline std::string encode_checkpoint(const MultimodalVae& model,
                                     std::int64_t epoch, const Rng& rng) {
  using nlohmann::json;
  const auto& params = model.parameters();
  json header;
  header["format"] = "mmvae-checkpoint";
  header["format_version"] = kCheckpointFormatVersion;
  header["byte_order"] = "little";
  json layout = json::array();
  for (const auto& m : model.layout().modalities())
    layout.push_back({{"name", m.name}, {"dim", m.dim}});
  header["layout"] = layout;
  header["hidden_width"] = model.hidden_width();
  header["epoch"] = epoch;
  header["rng_state"] = rng.serialize();

  std::string blob;
  json tensors = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& l = params.layer(i);
    tensors.push_back({{"path", params.path(i)},
                       {"activation", std::string(to_string(l.activation))},
                       {"rows", l.weights.rows()},
                       {"cols", l.weights.cols()},
                       {"offset", blob.size()}});
    for (Eigen::Index k = 0; k < l.weights.size(); ++k)
      checkpoint_detail::put_le(blob, l.weights.data()[k]);
    for (Eigen::Index k = 0; k < l.biases.size(); ++k)
      checkpoint_detail::put_le(blob, l.biases[k]);
  }
  header["tensors"] = tensors;
  header["blob_bytes"] = blob.size();
  return header.dump() + "\n" + blob;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  using nlohmann::json;
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos)
    throw InputError("checkpoint has no header line");
  json header;
  try {
    header = json::parse(bytes.substr(0, newline));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (header.value("format", "") != "mmvae-checkpoint")
    throw InputError("not an mmvae checkpoint");
  if (header.value("format_version", 0) != kCheckpointFormatVersion)
    throw InputError("unsupported checkpoint format version");

  std::vector<ModalityDescriptor> mods;
  for (const auto& m : header.at("layout"))
    mods.push_back({m.at("name").get<std::string>(), m.at("dim").get<std::size_t>()});
  Rng scratch(0);
  Checkpoint cp{MultimodalVae(ModalityLayout(std::move(mods)),
                              header.at("hidden_width").get<std::size_t>(),
                              scratch),
                header.at("epoch").get<std::int64_t>(),
                Rng::deserialize(header.at("rng_state").get<std::string>())};

  const std::size_t blob_bytes = header.at("blob_bytes").get<std::size_t>();
  if (bytes.size() - newline - 1 != blob_bytes)
    throw InputError("checkpoint blob is truncated or oversized");
  const auto* blob =
      reinterpret_cast<const unsigned char*>(bytes.data() + newline + 1);

  auto& params = cp.model.parameters();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size())
    throw InputError("checkpoint tensor count does not match the architecture");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    auto& l = params.layer(i);
    if (t.at("path").get<std::string>() != params.path(i) ||
        t.at("rows").get<Eigen::Index>() != l.weights.rows() ||
        t.at("cols").get<Eigen::Index>() != l.weights.cols())
      throw InputError("checkpoint tensor '" + t.at("path").get<std::string>() +
                       "' does not match the architecture");
    std::size_t off = t.at("offset").get<std::size_t>();
    const auto count = static_cast<std::size_t>(l.weights.size() + l.biases.size());
    if (off + 8 * count > blob_bytes)
      throw InputError("checkpoint tensor extends past the blob");
    for (Eigen::Index k = 0; k < l.weights.size(); ++k, off += 8)
      l.weights.data()[k] = checkpoint_detail::get_le(blob + off);
    for (Eigen::Index k = 0; k < l.biases.size(); ++k, off += 8)
      l.biases[k] = checkpoint_detail::get_le(blob + off);
  }
  if (!params.all_finite()) throw InputError("checkpoint holds non-finite values");
  params.bump_version();
  return cp;
}

inline void save_checkpoint(const std::filesystem::path& path,
                            const MultimodalVae& model, std::int64_t epoch,
                            const Rng& rng) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint '" + path.string() + "'");
  const auto bytes = encode_checkpoint(model, epoch, rng);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing checkpoint '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace mmvae
