#include "gipcnn/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gipcnn/errors.hpp"

namespace gipcnn {

namespace {

using nlohmann::json;

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) |
           (v >> 24);
  }
}

}  // namespace

std::size_t TensorFile::element_count() const {
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  return dims.empty() ? 0 : n;
}

TensorFile read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open tensor file: " + path);

  std::string header;
  if (!std::getline(in, header)) {
    throw SchemaError("tensor file has no header: " + path);
  }
  json h;
  try {
    h = json::parse(header);
  } catch (const json::exception& e) {
    throw SchemaError("bad tensor header in " + path + ": " + e.what());
  }
  if (!h.contains("dims") || !h["dims"].is_array() || !h.contains("dtype")) {
    throw SchemaError("tensor header must carry dims and dtype: " + path);
  }
  if (h["dtype"].get<std::string>() != "f32") {
    throw SchemaError("unsupported tensor dtype in " + path);
  }

  TensorFile t;
  for (const auto& d : h["dims"]) {
    const int v = d.get<int>();
    if (v <= 0) throw SchemaError("non-positive dim in tensor header: " + path);
    t.dims.push_back(v);
  }
  const std::size_t n = t.element_count();
  std::vector<std::uint32_t> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(n * sizeof(std::uint32_t)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(std::uint32_t)) {
    throw SchemaError("tensor payload truncated: " + path);
  }
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    float f;
    const std::uint32_t le = to_le(raw[i]);
    std::memcpy(&f, &le, sizeof(f));
    t.data[i] = static_cast<double>(f);
  }
  return t;
}

void write_tensor(const std::string& path, const TensorFile& t) {
  if (t.data.size() != t.element_count()) {
    throw SchemaError("tensor data size does not match dims");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SchemaError("cannot write tensor file: " + path);

  json h;
  h["dims"] = t.dims;
  h["dtype"] = "f32";
  out << h.dump() << '\n';

  std::vector<std::uint32_t> raw(t.data.size());
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    const float f = static_cast<float>(t.data[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    raw[i] = to_le(bits);
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
  if (!out) throw SchemaError("tensor payload write failed: " + path);
}

PlainTensor read_plain_tensor(const std::string& path) {
  TensorFile t = read_tensor(path);
  if (t.dims.size() != 3) {
    throw SchemaError("expected a 3-D (C,H,W) tensor in " + path);
  }
  PlainTensor out(t.dims[0], t.dims[1], t.dims[2]);
  out.data() = std::move(t.data);
  return out;
}

void write_plain_tensor(const std::string& path, const PlainTensor& t) {
  TensorFile f;
  f.dims = {t.channels(), t.height(), t.width()};
  f.data = t.data();
  write_tensor(path, f);
}

}  // namespace gipcnn
