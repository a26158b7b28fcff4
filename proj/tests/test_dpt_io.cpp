#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "poolattn/dpt_io.hpp"
#include "poolattn/errors.hpp"

using namespace poolattn;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("poolattn_test_" + name);
}

template <typename T>
bool same_bits(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(T)) == 0;
}

std::string expect_format_error(std::span<const std::uint8_t> bytes) {
  try {
    decode_dpt(bytes);
  } catch (const FormatError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no FormatError";
  return {};
}

}  // namespace

TEST(Dpt, HandEncodedBytes) {
  // F32 [2] = {1, -2}: magic, version 1, dtype 0, rank 1, dim 2, payload.
  const std::vector<std::uint8_t> expected = {'D', 'P', 'T', 'E', 'N', 'S', 'O', 'R', 1, 0, 1, 2, 0, 0, 0,
                                              0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  const TensorF32 t(Shape{2}, {1.0f, -2.0f});
  EXPECT_EQ(encode_dpt(t), expected);
  const auto back = decode_dpt(expected);
  ASSERT_TRUE(std::holds_alternative<TensorF32>(back));
  EXPECT_TRUE(same_bits(std::get<TensorF32>(back), t));
}

TEST(Dpt, RoundTripBothDtypesAllRanks) {
  Rng rng(1);
  const std::vector<Shape> shapes = {Shape{7}, Shape{3, 4}, Shape{2, 3, 5}, Shape{2, 1, 3, 2}};
  for (const auto& s : shapes) {
    auto d = random_uniform<double>(s, rng, 10.0);
    d[0] = -0.0;
    if (d.numel() > 1) d[1] = std::numeric_limits<double>::denorm_min();
    const auto f = random_uniform<float>(s, rng, 10.0);
    for (const AnyTensor& t : {AnyTensor(d), AnyTensor(f)}) {
      const auto path = temp_file("rt.dpt");
      write_dpt(path, t);
      const auto back = read_dpt(path);
      std::filesystem::remove(path);
      ASSERT_EQ(back.index(), t.index());
      EXPECT_EQ(dtype_of(back), dtype_of(t));
      EXPECT_EQ(shape_of(back), s);
      if (t.index() == 0) {
        EXPECT_TRUE(same_bits(std::get<TensorF32>(back), std::get<TensorF32>(t)));
      } else {
        EXPECT_TRUE(same_bits(std::get<Tensor>(back), std::get<Tensor>(t)));
      }
      EXPECT_EQ(decode_dpt(encode_dpt(t)).index(), t.index());
    }
  }
}

TEST(Dpt, TruncatedPayload) {
  auto bytes = encode_dpt(Tensor(Shape{2, 2}, {1, 2, 3, 4}));
  bytes.pop_back();
  EXPECT_NE(expect_format_error(bytes).find("payload length mismatch"), std::string::npos);
  bytes.push_back(0);
  bytes.push_back(0);
  EXPECT_NE(expect_format_error(bytes).find("payload length mismatch"), std::string::npos);
}

TEST(Dpt, MalformedHeaders) {
  const auto good = encode_dpt(Tensor(Shape{1}, {1.0}));
  auto bad = good;
  bad[0] = 'X';
  EXPECT_NE(expect_format_error(bad).find("magic"), std::string::npos);
  bad = good;
  bad[8] = 2;
  EXPECT_NE(expect_format_error(bad).find("version"), std::string::npos);
  bad = good;
  bad[9] = 7;
  EXPECT_NE(expect_format_error(bad).find("dtype"), std::string::npos);
  bad = good;
  bad[10] = 5;
  EXPECT_NE(expect_format_error(bad).find("rank"), std::string::npos);
  bad = good;
  bad[11] = 0;
  EXPECT_NE(expect_format_error(bad).find("zero"), std::string::npos);
  EXPECT_NE(expect_format_error(std::span(good.data(), 13)).find("truncated"), std::string::npos);
  EXPECT_THROW(read_dpt(temp_file("does-not-exist.dpt")), FormatError);
}

TEST(JsonTensor, ParseAndPrint) {
  const auto t = parse_json_tensor(R"({"shape": [2, 1, 2], "data": [1, 2.5, -3, 4e-3]})");
  EXPECT_TRUE(t.identical(Tensor(Shape{2, 1, 2}, {1, 2.5, -3, 4e-3})));
  EXPECT_TRUE(parse_json_tensor(json_tensor_string(t)).identical(t));
  EXPECT_THROW(parse_json_tensor("{"), FormatError);
  EXPECT_THROW(parse_json_tensor(R"({"shape": [3], "data": [1, 2]})"), Error);
  EXPECT_THROW(parse_json_tensor(R"({"shape": [2], "data": [1, "x"]})"), FormatError);
  EXPECT_THROW(parse_json_tensor(R"([1, 2])"), FormatError);
}

TEST(LoadTensor, DetectsFormat) {
  const Tensor t(Shape{1, 2}, {0.25, -1.0});
  const auto dpt = temp_file("load.dpt");
  const auto js = temp_file("load.json");
  write_dpt(dpt, t);
  std::ofstream(js) << json_tensor_string(t);
  EXPECT_TRUE(to_f64(load_tensor(dpt)).identical(t));
  EXPECT_TRUE(to_f64(load_tensor(js)).identical(t));
  std::filesystem::remove(dpt);
  std::filesystem::remove(js);
}
