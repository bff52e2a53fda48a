#include "hatesense/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hatesense {

namespace {

constexpr char kMagic[8] = {'H', 'S', 'N', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string read_string(std::istream& in) {
  const std::uint32_t len = read_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  write_string(out, name);
  write_u32(out, static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t extent : t.shape()) write_u64(out, extent);
  for (double v : t.data()) write_f64(out, v);
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write checkpoint file: " + path);
  }
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);

  const ModelConfig& cfg = checkpoint.config;
  write_u64(out, cfg.encoder.vocab_size);
  write_u64(out, cfg.encoder.d_model);
  write_u64(out, cfg.encoder.n_heads);
  write_u64(out, cfg.encoder.n_layers);
  write_u64(out, cfg.encoder.d_ff);
  write_u64(out, cfg.encoder.max_len);
  write_f64(out, cfg.encoder.dropout_rate);
  write_u64(out, cfg.encoder.seed);
  write_u64(out, cfg.max_vocab);
  write_u64(out, cfg.d_hidden);
  write_f64(out, cfg.temperature);
  out.put(cfg.sense_augmentation ? 1 : 0);
  out.put(cfg.soft_augment ? 1 : 0);

  write_u32(out, static_cast<std::uint32_t>(checkpoint.classes.size()));
  for (std::size_t i = 0; i < checkpoint.classes.size(); ++i) {
    write_string(out, checkpoint.classes.names[i]);
    out.put(checkpoint.classes.hateful[i] ? 1 : 0);
  }

  write_u32(out, static_cast<std::uint32_t>(checkpoint.vocab_tokens.size()));
  for (const std::string& token : checkpoint.vocab_tokens)
    write_string(out, token);

  const auto named = checkpoint.params.named();
  write_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) write_tensor(out, name, tensor);
  if (!out) {
    throw std::runtime_error("failed while writing checkpoint: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint file: " + path);
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version) + " in " + path);
  }

  Checkpoint ckpt;
  ModelConfig& cfg = ckpt.config;
  cfg.encoder.vocab_size = read_u64(in);
  cfg.encoder.d_model = read_u64(in);
  cfg.encoder.n_heads = read_u64(in);
  cfg.encoder.n_layers = read_u64(in);
  cfg.encoder.d_ff = read_u64(in);
  cfg.encoder.max_len = read_u64(in);
  cfg.encoder.dropout_rate = read_f64(in);
  cfg.encoder.seed = read_u64(in);
  cfg.max_vocab = read_u64(in);
  cfg.d_hidden = read_u64(in);
  cfg.temperature = read_f64(in);
  cfg.sense_augmentation = in.get() != 0;
  cfg.soft_augment = in.get() != 0;

  const std::uint32_t n_classes = read_u32(in);
  for (std::uint32_t i = 0; i < n_classes; ++i) {
    ckpt.classes.names.push_back(read_string(in));
    ckpt.classes.hateful.push_back(in.get() != 0);
  }
  ckpt.classes.validate();

  const std::uint32_t n_tokens = read_u32(in);
  for (std::uint32_t i = 0; i < n_tokens; ++i)
    ckpt.vocab_tokens.push_back(read_string(in));

  ckpt.params = ModelParams::init(cfg, n_classes);
  const std::uint32_t n_tensors = read_u32(in);
  auto named = ckpt.params.named();
  if (n_tensors != named.size()) {
    throw std::runtime_error("checkpoint parameter count mismatch in " + path);
  }
  for (auto& [name, tensor] : named) {
    const std::string stored_name = read_string(in);
    if (stored_name != name) {
      throw std::runtime_error("checkpoint tensor order mismatch: expected " +
                               name + ", found " + stored_name);
    }
    const std::uint32_t ndim = read_u32(in);
    Shape shape(ndim);
    for (std::uint32_t d = 0; d < ndim; ++d) shape[d] = read_u64(in);
    if (shape != tensor.shape()) {
      throw std::runtime_error("checkpoint tensor shape mismatch for " + name);
    }
    for (double& v : tensor.data()) v = read_f64(in);
  }
  if (!in) {
    throw std::runtime_error("checkpoint truncated: " + path);
  }
  return ckpt;
}

}  // namespace hatesense
