#include "dreamland/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace dreamland {
namespace {

constexpr std::string_view kMagic = "DLCK";

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
}

void append_f64(std::string& out, double v) { append_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::string_view ByteReader::take(std::size_t n) {
  if (n > remaining()) {
    throw FormatError("unexpected end of data (truncated file?)");
  }
  const std::string_view out = bytes_.substr(offset_, n);
  offset_ += n;
  return out;
}

std::uint32_t ByteReader::u32() {
  const std::string_view b = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
  }
  return v;
}

std::uint64_t ByteReader::u64() {
  const std::string_view b = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
  }
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw std::runtime_error("write failed for " + path.string());
  }
}

const NamedArray& Checkpoint::array(std::string_view name) const {
  for (const NamedArray& a : arrays) {
    if (a.name == name) {
      return a;
    }
  }
  throw FormatError("checkpoint has no array named '" + std::string(name) + "'");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json meta = ckpt.metadata;
  meta["kind"] = ckpt.kind;
  const std::string meta_text = meta.dump();

  std::string out;
  out.append(kMagic);
  append_u32(out, Checkpoint::kVersion);
  append_u32(out, static_cast<std::uint32_t>(meta_text.size()));
  out.append(meta_text);
  append_u32(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const NamedArray& a : ckpt.arrays) {
    if (a.data.size() != a.rows * a.cols) {
      throw std::invalid_argument("checkpoint array '" + a.name + "' has inconsistent size");
    }
    append_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out.append(a.name);
    append_u64(out, a.rows);
    append_u64(out, a.cols);
    for (double v : a.data) {
      append_f64(out, v);
    }
  }
  append_u64(out, fnv1a64(out));
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  ByteReader in(bytes);
  if (in.take(kMagic.size()) != kMagic) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = in.u32();
  if (version != Checkpoint::kVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(Checkpoint::kVersion) + ")");
  }
  if (bytes.size() < 8 + 12) {
    throw FormatError("checkpoint truncated");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  ByteReader tail(bytes.substr(bytes.size() - 8));
  if (tail.u64() != fnv1a64(body)) {
    throw FormatError("checkpoint checksum mismatch (corrupt or truncated file)");
  }

  Checkpoint ckpt;
  const std::uint32_t meta_len = in.u32();
  try {
    ckpt.metadata = nlohmann::json::parse(in.take(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  ckpt.kind = ckpt.metadata.value("kind", "");
  ckpt.metadata.erase("kind");
  const std::uint32_t count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = std::string(in.take(in.u32()));
    a.rows = in.u64();
    a.cols = in.u64();
    if (a.rows * a.cols > in.remaining() / 8) {
      throw FormatError("checkpoint array '" + a.name + "' overruns the file");
    }
    a.data.resize(a.rows * a.cols);
    for (double& v : a.data) {
      v = in.f64();
    }
    ckpt.arrays.push_back(std::move(a));
  }
  if (in.remaining() != 8) {
    throw FormatError("checkpoint has trailing bytes");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

Checkpoint world_model_checkpoint(const WorldModelParams& params, const nlohmann::json& training) {
  Checkpoint ckpt;
  ckpt.kind = "world_model";
  ckpt.metadata = {{"n", params.shape.latent_size},
                   {"k", params.shape.mixtures},
                   {"d", params.shape.hidden_size},
                   {"action_size", params.shape.action_size},
                   {"training", training}};
  WorldModelParams::visit(params, [&](const std::string& name, const double* data,
                                      Eigen::Index rows, Eigen::Index cols) {
    NamedArray a{name, static_cast<std::uint64_t>(rows), static_cast<std::uint64_t>(cols),
                 std::vector<double>(data, data + rows * cols)};
    ckpt.arrays.push_back(std::move(a));
  });
  return ckpt;
}

WorldModelParams world_model_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "world_model") {
    throw FormatError("checkpoint holds a '" + ckpt.kind + "', expected a world_model");
  }
  WorldModelShape shape;
  try {
    shape.latent_size = ckpt.metadata.at("n").get<std::size_t>();
    shape.mixtures = ckpt.metadata.at("k").get<std::size_t>();
    shape.hidden_size = ckpt.metadata.at("d").get<std::size_t>();
    shape.action_size = ckpt.metadata.at("action_size").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("world model metadata incomplete: ") + e.what());
  }
  WorldModelParams params = WorldModelParams::zeros(shape);
  WorldModelParams::visit(params, [&](const std::string& name, double* data, Eigen::Index rows,
                                      Eigen::Index cols) {
    const NamedArray& a = ckpt.array(name);
    if (a.rows != static_cast<std::uint64_t>(rows) || a.cols != static_cast<std::uint64_t>(cols)) {
      throw FormatError("array '" + name + "' has shape " + std::to_string(a.rows) + "x" +
                        std::to_string(a.cols) + ", expected " + std::to_string(rows) + "x" +
                        std::to_string(cols));
    }
    std::copy(a.data.begin(), a.data.end(), data);
  });
  params.validate();
  return params;
}

}  // namespace dreamland
