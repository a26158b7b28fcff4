#include "poolattn/dpt_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace poolattn {

namespace {

constexpr char kMagic[8] = {'D', 'P', 'T', 'E', 'N', 'S', 'O', 'R'};
constexpr std::size_t kFixedHeader = 8 + 3;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

template <typename T>
void encode_payload(std::vector<std::uint8_t>& out, const BasicTensor<T>& t) {
  for (T v : t.data()) put_le(out, std::bit_cast<Bits<T>>(v));
}

template <typename T>
BasicTensor<T> decode_payload(Shape shape, const std::uint8_t* p) {
  std::vector<T> data(shape.numel());
  for (auto& v : data) {
    v = std::bit_cast<T>(get_le<Bits<T>>(p));
    p += sizeof(T);
  }
  return BasicTensor<T>(std::move(shape), std::move(data));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

DType dtype_of(const AnyTensor& t) { return t.index() == 0 ? DType::F32 : DType::F64; }

const Shape& shape_of(const AnyTensor& t) {
  return std::visit([](const auto& v) -> const Shape& { return v.shape(); }, t);
}

Tensor to_f64(const AnyTensor& t) {
  return std::visit([](const auto& v) { return v.template cast<double>(); }, t);
}

std::vector<std::uint8_t> encode_dpt(const AnyTensor& t) {
  const Shape& shape = shape_of(t);
  const DType dt = dtype_of(t);
  std::vector<std::uint8_t> out;
  out.reserve(kFixedHeader + 4 * shape.rank() + shape.numel() * dtype_size(dt));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kDptVersion);
  out.push_back(static_cast<std::uint8_t>(dt));
  out.push_back(static_cast<std::uint8_t>(shape.rank()));
  for (auto d : shape.dims()) {
    if (d > 0xffffffffu) throw FormatError("dimension " + std::to_string(d) + " does not fit in u32");
    put_le(out, static_cast<std::uint32_t>(d));
  }
  std::visit([&out](const auto& v) { encode_payload(out, v); }, t);
  return out;
}

AnyTensor decode_dpt(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFixedHeader || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError("not a DPT file (bad magic)");
  }
  const std::uint8_t version = bytes[8];
  const std::uint8_t dtype = bytes[9];
  const std::uint8_t rank = bytes[10];
  if (version != kDptVersion) throw FormatError("unsupported DPT version " + std::to_string(version));
  if (dtype > 1) throw FormatError("unknown DPT dtype code " + std::to_string(dtype));
  if (rank < 1 || rank > 4) throw FormatError("DPT rank must be 1..4, got " + std::to_string(rank));
  const std::size_t header = kFixedHeader + 4u * rank;
  if (bytes.size() < header) throw FormatError("truncated DPT header");
  std::vector<std::size_t> dims(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    dims[i] = get_le<std::uint32_t>(bytes.data() + kFixedHeader + 4 * i);
    if (dims[i] == 0) throw FormatError("DPT dimension " + std::to_string(i) + " is zero");
  }
  Shape shape(std::move(dims));
  const DType dt = static_cast<DType>(dtype);
  const std::size_t expected = shape.numel() * dtype_size(dt);
  if (bytes.size() - header != expected) {
    throw FormatError("payload length mismatch: expected " + std::to_string(expected) + " bytes for " +
                      shape.str() + ", found " + std::to_string(bytes.size() - header));
  }
  const std::uint8_t* p = bytes.data() + header;
  if (dt == DType::F32) return decode_payload<float>(std::move(shape), p);
  return decode_payload<double>(std::move(shape), p);
}

void write_dpt(const std::filesystem::path& path, const AnyTensor& t) {
  const auto bytes = encode_dpt(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

AnyTensor read_dpt(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_dpt(bytes);
}

Tensor parse_json_tensor(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid JSON tensor: ") + e.what());
  }
  if (!j.is_object() || !j.contains("shape") || !j.contains("data") || !j["shape"].is_array() ||
      !j["data"].is_array()) {
    throw FormatError("JSON tensor must be an object with array fields 'shape' and 'data'");
  }
  std::vector<std::size_t> dims;
  for (const auto& d : j["shape"]) {
    if (!d.is_number_unsigned()) throw FormatError("JSON tensor shape entries must be positive integers");
    dims.push_back(d.get<std::size_t>());
  }
  std::vector<double> data;
  for (const auto& v : j["data"]) {
    if (!v.is_number()) throw FormatError("JSON tensor data entries must be numbers");
    data.push_back(v.get<double>());
  }
  try {
    return Tensor(Shape(std::move(dims)), std::move(data));
  } catch (const DimensionError& e) {
    throw FormatError(std::string("JSON tensor: ") + e.what());
  }
}

std::string json_tensor_string(const Tensor& t) {
  nlohmann::json j;
  j["shape"] = std::vector<std::size_t>(t.shape().dims().begin(), t.shape().dims().end());
  j["data"] = t.vec();
  return j.dump();
}

AnyTensor load_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kMagic, 8) == 0) return decode_dpt(bytes);
  return parse_json_tensor(std::string(bytes.begin(), bytes.end()));
}

}  // namespace poolattn
