#include "rnmt/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rnmt/error.h"
#include "rnmt/kv.h"

namespace rnmt {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'R', 'N', 'M', 'T', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_blob(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("truncated checkpoint while reading " + what);
  return v;
}

std::string get_blob(std::istream& in, const std::string& what) {
  const auto n = get<std::uint64_t>(in, what);
  if (n > (1ull << 32)) throw DataError("corrupt checkpoint: oversized " + what);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("truncated checkpoint while reading " + what);
  return s;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + '\n';
  return out;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

Checkpoint snapshot(const Model& model, const Vocab& src_vocab, const Vocab& tgt_vocab, std::uint64_t step) {
  Checkpoint c;
  c.step = step;
  c.config = model.config();
  c.src_vocab = src_vocab;
  c.tgt_vocab = tgt_vocab;
  for (const auto& [name, t] : model.params().items())
    c.tensors.push_back({name, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, ckpt.version);
  put<std::uint64_t>(out, ckpt.step);
  std::string cfg;
  for (const auto& [k, v] : ckpt.config.to_kv()) cfg += k + " = " + v + "\n";
  put_blob(out, cfg);
  put_blob(out, join_lines(ckpt.src_vocab.tokens()));
  put_blob(out, join_lines(ckpt.tgt_vocab.tokens()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError(path.string() + " is not a checkpoint");
  Checkpoint c;
  c.version = get<std::uint32_t>(in, "version");
  if (c.version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(c.version));
  c.step = get<std::uint64_t>(in, "step");
  for (const auto& [k, v] : kv::parse_text(get_blob(in, "config")))
    if (!c.config.set(k, v)) throw DataError("checkpoint config has unknown key '" + k + "'");
  c.src_vocab = Vocab::from_tokens(split_lines(get_blob(in, "source vocabulary")));
  c.tgt_vocab = Vocab::from_tokens(split_lines(get_blob(in, "target vocabulary")));
  const auto count = get<std::uint32_t>(in, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = get<std::uint32_t>(in, "tensor name");
    t.name.resize(name_len);
    if (!in.read(t.name.data(), name_len)) throw DataError("truncated checkpoint tensor name");
    const auto rank = get<std::uint32_t>(in, "tensor rank");
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(get<std::uint64_t>(in, "tensor shape"));
      n *= t.shape.back();
    }
    t.values.resize(n);
    if (!in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(n * sizeof(double))))
      throw DataError("truncated checkpoint tensor " + t.name);
    c.tensors.push_back(std::move(t));
  }
  return c;
}

void load_parameters(Model& model, const Checkpoint& ckpt) {
  auto& items = model.params().items();
  if (items.size() != ckpt.tensors.size())
    throw DataError("checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                    std::to_string(items.size()));
  for (const auto& t : ckpt.tensors) {
    if (!model.params().contains(t.name)) throw DataError("checkpoint tensor '" + t.name + "' unknown to the model");
    Tensor& p = model.params().get(t.name);
    if (p.shape() != t.shape)
      throw DataError("checkpoint tensor '" + t.name + "' has shape " + shape_str(t.shape) + ", model expects " +
                      shape_str(p.shape()));
    std::copy(t.values.begin(), t.values.end(), p.data().begin());
  }
}

std::unique_ptr<Model> restore_model(const Checkpoint& ckpt) {
  auto model = std::make_unique<Model>(ckpt.config);
  load_parameters(*model, ckpt);
  return model;
}

Checkpoint average_checkpoints(std::span<const Checkpoint> checkpoints) {
  if (checkpoints.empty()) throw std::invalid_argument("average_checkpoints: nothing to average");
  Checkpoint avg = checkpoints.front();
  const auto cfg = avg.config.to_kv();
  for (std::size_t c = 1; c < checkpoints.size(); ++c) {
    const auto& other = checkpoints[c];
    if (other.config.to_kv() != cfg) throw DataError("average_checkpoints: model configurations differ");
    if (other.tensors.size() != avg.tensors.size()) throw DataError("average_checkpoints: tensor counts differ");
    for (std::size_t i = 0; i < avg.tensors.size(); ++i) {
      if (other.tensors[i].name != avg.tensors[i].name || other.tensors[i].shape != avg.tensors[i].shape)
        throw DataError("average_checkpoints: tensor '" + other.tensors[i].name + "' does not match '" +
                        avg.tensors[i].name + "' " + shape_str(avg.tensors[i].shape));
      auto& dst = avg.tensors[i].values;
      const auto& src = other.tensors[i].values;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    avg.step = std::max(avg.step, other.step);
  }
  const double inv = 1.0 / static_cast<double>(checkpoints.size());
  if (checkpoints.size() > 1)
    for (auto& t : avg.tensors)
      for (double& v : t.values) v *= inv;
  return avg;
}

Checkpoint average_checkpoints(std::span<const std::filesystem::path> paths) {
  std::vector<Checkpoint> loaded;
  for (const auto& p : paths) loaded.push_back(load_checkpoint(p));
  return average_checkpoints(loaded);
}

}  // namespace rnmt
