#include "hybo/nn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace hybo::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'H', 'Y', 'B', 'O', 'C', 'K', 'P', 'T'};
constexpr std::uint64_t kMaxMeta = 1u << 26;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = 1ull << 31;

template <typename U>
void put(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& in, const char* what) {
  U v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(U))) throw CheckpointError(std::string("checkpoint truncated reading ") + what);
  return v;
}

std::string get_string(std::istream& in, std::uint64_t n, const char* what) {
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw CheckpointError(std::string("checkpoint truncated reading ") + what);
  }
  return s;
}

}  // namespace

const CheckpointEntry* Checkpoint::find(const std::string& key) const {
  for (const auto& e : entries)
    if (e.key == key) return &e;
  return nullptr;
}

template <typename T>
Checkpoint snapshot(const ParameterStore<T>& store, nlohmann::json meta) {
  Checkpoint c;
  c.scalar_bytes = sizeof(T);
  c.meta = std::move(meta);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(i);
    const auto v = e.value.values();
    c.entries.push_back({e.name, e.kind, e.value.shape(), std::vector<double>(v.begin(), v.end())});
  }
  return c;
}

template <typename T>
void restore(ParameterStore<T>& store, const Checkpoint& checkpoint) {
  if (checkpoint.entries.size() != store.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(checkpoint.entries.size()) + " tensors, model expects " +
                          std::to_string(store.size()));
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.entry(i);
    const CheckpointEntry* src = checkpoint.find(e.name);
    if (src == nullptr) throw CheckpointError("checkpoint lacks tensor '" + e.name + "'");
    if (src->shape != e.value.shape()) {
      throw CheckpointError("checkpoint tensor '" + e.name + "' has shape " + ad::shape_str(src->shape) + ", expected " +
                            ad::shape_str(e.value.shape()));
    }
    if (src->kind != e.kind) throw CheckpointError("checkpoint tensor '" + e.name + "' has the wrong kind");
    auto dst = e.value.mutable_values();
    std::transform(src->values.begin(), src->values.end(), dst.begin(), [](double v) { return static_cast<T>(v); });
  }
}

void write_checkpoint(const std::string& path, const Checkpoint& c) {
  if (c.scalar_bytes != 4 && c.scalar_bytes != 8) throw CheckpointError("checkpoint scalar width must be 4 or 8 bytes");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, c.version);
  put<std::uint32_t>(out, c.scalar_bytes);
  const std::string meta = c.meta.dump();
  put<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put<std::uint64_t>(out, c.entries.size());
  for (const auto& e : c.entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.key.size()));
    out.write(e.key.data(), static_cast<std::streamsize>(e.key.size()));
    put<std::uint8_t>(out, e.kind == ParamKind::lorentz_rows ? 1 : 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put<std::uint64_t>(out, d);
    if (ad::shape_numel(e.shape) != e.values.size()) throw CheckpointError("checkpoint entry '" + e.key + "' size mismatch");
    for (double v : e.values) {
      if (c.scalar_bytes == 4) {
        put<float>(out, static_cast<float>(v));
      } else {
        put<double>(out, v);
      }
    }
  }
  if (!out.flush()) throw CheckpointError("failed writing '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("'" + path + "' is not a checkpoint");
  }
  Checkpoint c;
  c.version = get<std::uint32_t>(in, "version");
  if (c.version != Checkpoint::kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(c.version));
  }
  c.scalar_bytes = get<std::uint32_t>(in, "scalar width");
  if (c.scalar_bytes != 4 && c.scalar_bytes != 8) throw CheckpointError("bad scalar width in checkpoint");
  const auto meta_len = get<std::uint64_t>(in, "meta length");
  if (meta_len > kMaxMeta) throw CheckpointError("checkpoint metadata too large");
  try {
    c.meta = nlohmann::json::parse(get_string(in, meta_len, "metadata"));
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint metadata is not JSON: ") + e.what());
  }
  const auto count = get<std::uint64_t>(in, "entry count");
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.key = get_string(in, get<std::uint32_t>(in, "key length"), "key");
    const auto kind = get<std::uint8_t>(in, "kind");
    if (kind > 1) throw CheckpointError("bad tensor kind for '" + e.key + "'");
    e.kind = kind == 1 ? ParamKind::lorentz_rows : ParamKind::euclidean;
    const auto rank = get<std::uint32_t>(in, "rank");
    if (rank == 0 || rank > kMaxRank) throw CheckpointError("bad rank for '" + e.key + "'");
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = get<std::uint64_t>(in, "dimension");
      if (dim == 0 || dim > kMaxElements || n * dim > kMaxElements) throw CheckpointError("bad shape for '" + e.key + "'");
      n *= dim;
      e.shape.push_back(dim);
    }
    e.values.resize(n);
    for (std::uint64_t k = 0; k < n; ++k) {
      e.values[k] = c.scalar_bytes == 4 ? static_cast<double>(get<float>(in, "values")) : get<double>(in, "values");
    }
    c.entries.push_back(std::move(e));
  }
  return c;
}

template Checkpoint snapshot(const ParameterStore<float>&, nlohmann::json);
template Checkpoint snapshot(const ParameterStore<double>&, nlohmann::json);
template void restore(ParameterStore<float>&, const Checkpoint&);
template void restore(ParameterStore<double>&, const Checkpoint&);

}  // namespace hybo::nn
