#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "posebias/io.hpp"
#include "support.hpp"

using namespace posebias;
using namespace posebias::io;
using posebias::geometry::Vec3;

namespace {

Tensor random_tensor(std::mt19937_64 &rng, std::vector<std::size_t> dims) {
  std::normal_distribution<float> n(0.0f, 3.0f);
  std::size_t count = 1;
  for (auto d : dims) count *= d;
  std::vector<float> v(count);
  for (auto &x : v) x = n(rng);
  return Tensor(std::move(dims), std::move(v));
}

ErrorCode code_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("tensor container layout") {
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto bytes = encode_tensor(t);
  CHECK(bytes[0] == 0x93);
  CHECK(std::string(bytes.begin() + 1, bytes.begin() + 6) == "NUMPY");
  CHECK(bytes[6] == 1);
  CHECK(bytes[7] == 0);
  const std::size_t header_len = bytes[8] | (bytes[9] << 8);
  CHECK((10 + header_len) % 64 == 0);
  const std::string header(bytes.begin() + 10, bytes.begin() + 10 + header_len);
  CHECK(header.find("'descr': '<f4'") != std::string::npos);
  CHECK(header.find("'shape': (2, 3)") != std::string::npos);
  CHECK(header.back() == '\n');
  CHECK(bytes.size() == 10 + header_len + 24);
  float last;
  std::memcpy(&last, bytes.data() + bytes.size() - 4, 4);
  CHECK(last == 6.0f);
  const auto one = encode_tensor(Tensor({5}, {0, 0, 0, 0, 0}));
  CHECK(std::string(one.begin() + 10, one.begin() + 64).find("(5,)") != std::string::npos);
}

TEST_CASE("tensor round trip is bit-exact") {
  std::mt19937_64 rng(41);
  const std::vector<std::vector<std::size_t>> shapes{{1}, {7}, {3, 4}, {5, 6, 7}, {2, 1, 3, 2}};
  for (const auto &dims : shapes) {
    const Tensor t = random_tensor(rng, dims);
    const auto bytes = encode_tensor(t);
    const Tensor back = decode_tensor(bytes);
    CHECK(back == t);
    CHECK(encode_tensor(back) == bytes);
  }
  const Tensor tricky({4}, {-0.0f, 1e-45f, 3.4028235e38f, -1.17549435e-38f});
  const Tensor back = decode_tensor(encode_tensor(tricky));
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::bit_cast<std::uint32_t>(back.data()[i]) ==
          std::bit_cast<std::uint32_t>(tricky.data()[i]));

  testsupport::TempDir dir("tensor");
  const Tensor t = random_tensor(rng, {3, 4, 5});
  write_tensor(t, dir / ("frame0_grad_rx" + std::string(kTensorExtension)));
  CHECK(read_tensor(dir / "frame0_grad_rx.f32t") == t);
}

TEST_CASE("zero-size and zero-rank tensors are rejected") {
  CHECK(code_of([] { Tensor({}, {}); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { Tensor({3, 0}, {}); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { Tensor({2}, {1.0f}); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { Tensor({1}, {INFINITY}); }) == ErrorCode::kNonFinite);
  CHECK(code_of([] {
          decode_tensor(fixtures::tensor_with_header(
              "{'descr': '<f4', 'fortran_order': False, 'shape': (), }"));
        }) == ErrorCode::kBadHeader);
  CHECK(code_of([] {
          decode_tensor(fixtures::tensor_with_header(
              "{'descr': '<f4', 'fortran_order': False, 'shape': (0, 3), }"));
        }) == ErrorCode::kBadHeader);
}

TEST_CASE("tensor headers in any key order") {
  const auto bytes = fixtures::tensor_with_header(
      "{'shape': (2, 3), 'fortran_order': False, 'descr': '<f4'}");
  const Tensor t = decode_tensor(bytes);
  CHECK(t.dims() == std::vector<std::size_t>{2, 3});
  CHECK(code_of([] {
          decode_tensor(fixtures::tensor_with_header(
              "{'descr': '<f4', 'fortran_order': True, 'shape': (2, 3), }"));
        }) == ErrorCode::kBadHeader);
}

TEST_CASE("truncation reports the file length as offset") {
  const auto full = fixtures::valid_tensor();
  for (std::size_t cut : {std::size_t{3}, std::size_t{9}, std::size_t{40}, full.size() - 1}) {
    const std::vector<std::uint8_t> part(full.begin(), full.begin() + cut);
    try {
      decode_tensor(part);
      FAIL("expected ParseError");
    } catch (const ParseError &e) {
      if (cut < 6) {
        CHECK(e.code() == ErrorCode::kBadMagic);
      } else {
        CHECK(e.code() == ErrorCode::kTruncated);
        CHECK(e.offset() == cut);
      }
    }
  }
  auto longer = full;
  longer.push_back(0);
  CHECK(code_of([&] { decode_tensor(longer); }) == ErrorCode::kBadHeader);
}

TEST_CASE("malformed fixtures raise distinct errors") {
  std::set<ErrorCode> seen;
  const auto all = fixtures::malformed_fixtures();
  for (const auto &f : all) {
    CAPTURE(f.name);
    const auto got = fixtures::decode_error(f.codec, f.bytes);
    REQUIRE(got.has_value());
    CHECK(*got == f.expected);
    seen.insert(*got);
  }
  CHECK(seen.size() == all.size());
}

TEST_CASE("numpy reads and writes the container") {
  if (std::system("python3 -c 'import numpy' >/dev/null 2>&1") != 0) {
    MESSAGE("numpy unavailable, interop check skipped");
    return;
  }
  testsupport::TempDir dir("numpy");
  std::mt19937_64 rng(42);
  const Tensor t = random_tensor(rng, {4, 5, 6});
  write_tensor(t, dir / "ours.f32t");
  const std::string script =
      "import numpy as np, sys\n"
      "a = np.load(sys.argv[1])\n"
      "assert a.dtype == np.float32 and a.shape == (4, 5, 6), (a.dtype, a.shape)\n"
      "assert a[1, 2, 3] == np.float32(sys.argv[3]), a[1, 2, 3]\n"
      "b = np.arange(24, dtype='<f4').reshape(2, 3, 4) - 7.5\n"
      "with open(sys.argv[2], 'wb') as f: np.save(f, b)\n";
  write_text_file(dir / "check.py", script);
  char value[64];
  std::snprintf(value, sizeof value, "%.9g", t(1, 2, 3));
  const std::string cmd = "python3 " + (dir / "check.py").string() + " " +
                          (dir / "ours.f32t").string() + " " + (dir / "theirs.f32t").string() +
                          " " + value;
  REQUIRE(std::system(cmd.c_str()) == 0);
  const Tensor theirs = read_tensor(dir / "theirs.f32t");
  CHECK(theirs.dims() == std::vector<std::size_t>{2, 3, 4});
  CHECK(theirs(1, 2, 3) == 23.0f - 7.5f);
}

TEST_CASE("ply ascii and binary decode to the same vertices") {
  std::mt19937_64 rng(43);
  MeshFile mesh;
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 257; ++i) mesh.vertices.emplace_back(u(rng), u(rng), u(rng));
  mesh.declared_diameter = 102.99;
  const MeshFile a = decode_ply(encode_ply(mesh, PlyFormat::kAscii));
  const MeshFile b = decode_ply(encode_ply(mesh, PlyFormat::kBinaryLittleEndian));
  CHECK(a.vertices == mesh.vertices);
  CHECK(b.vertices == mesh.vertices);
  CHECK(a.declared_diameter == 102.99);
  CHECK(b.declared_diameter == 102.99);
  CHECK(encode_ply(a, PlyFormat::kAscii) == encode_ply(mesh, PlyFormat::kAscii));

  testsupport::TempDir dir("ply");
  write_ply(mesh, PlyFormat::kBinaryLittleEndian, dir / "m.ply");
  CHECK(read_ply(dir / "m.ply").vertices == mesh.vertices);
}

TEST_CASE("ply with extra properties, faces and float32 coordinates") {
  std::string text =
      "ply\r\nformat binary_little_endian 1.0\ncomment made by hand\n"
      "element vertex 2\nproperty uchar red\nproperty float x\nproperty float y\n"
      "property float z\nproperty list uchar int extra\nelement face 1\n"
      "property list uchar int vertex_indices\nend_header\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  const auto put = [&](const void *p, std::size_t n) {
    const auto *b = static_cast<const std::uint8_t *>(p);
    bytes.insert(bytes.end(), b, b + n);
  };
  const float v0[3] = {1.5f, -2.0f, 3.25f};
  const float v1[3] = {4.0f, 5.0f, 6.0f};
  const std::uint8_t red = 200, two = 2, zero = 0;
  const std::int32_t idx[2] = {0, 1};
  put(&red, 1);
  put(v0, 12);
  put(&two, 1);
  put(idx, 8);
  put(&red, 1);
  put(v1, 12);
  put(&zero, 1);
  put(&two, 1);
  put(idx, 8);
  const MeshFile m = decode_ply(bytes);
  REQUIRE(m.vertices.size() == 2);
  CHECK(m.vertices[0] == Vec3(1.5, -2.0, 3.25));
  CHECK(m.vertices[1] == Vec3(4, 5, 6));
  CHECK_FALSE(m.declared_diameter.has_value());

  const MeshFile ascii = decode_ply(fixtures::text_bytes(
      "ply\nformat ascii 1.0\nelement vertex 2\nproperty float z\nproperty double y\n"
      "property float x\nproperty uchar alpha\nelement face 1\nproperty list uchar int "
      "vertex_indices\nend_header\n3 2 1 255\n6 5 4 0\n2 0 1\n"));
  CHECK(ascii.vertices[0] == Vec3(1, 2, 3));
  CHECK(ascii.vertices[1] == Vec3(4, 5, 6));
}

TEST_CASE("ply header errors") {
  const auto ply = [](const std::string &s) {
    return fixtures::decode_error(fixtures::Codec::kPly, fixtures::text_bytes(s));
  };
  CHECK(ply("ply\nformat binary_big_endian 1.0\nelement vertex 1\nproperty float x\n"
            "property float y\nproperty float z\nend_header\n") == ErrorCode::kPlyFormat);
  CHECK(ply("ply\nformat ascii 1.0\nelement vertex 1\nproperty int x\nproperty float y\n"
            "property float z\nend_header\n1 2 3\n") == ErrorCode::kPlyFormat);
  CHECK(ply("ply\nformat ascii 1.0\nelement face 1\nproperty list uchar int idx\n"
            "end_header\n0\n") == ErrorCode::kPlyMissingProperty);
  CHECK(ply("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
            "property float z\n") == ErrorCode::kPlyFormat);
  CHECK(ply("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
            "property float z\nend_header\n1 two 3\n") == ErrorCode::kPlyFormat);
  CHECK(ply("ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\n"
            "property float z\nend_header\n") == ErrorCode::kPlyCountMismatch);
  CHECK(ply("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
            "property float z\nend_header\n1 nan 3\n") == ErrorCode::kNonFinite);
}

TEST_CASE("ply binary count mismatch") {
  MeshFile mesh{{Vec3(1, 2, 3), Vec3(4, 5, 6)}, std::nullopt};
  auto bytes = encode_ply(mesh, PlyFormat::kBinaryLittleEndian);
  bytes.resize(bytes.size() - 8);
  CHECK(fixtures::decode_error(fixtures::Codec::kPly, bytes) == ErrorCode::kPlyCountMismatch);
}

TEST_CASE("png round trip") {
  std::mt19937_64 rng(44);
  for (int channels : {1, 3}) {
    for (auto [w, h] : {std::pair{1, 1}, std::pair{17, 5}, std::pair{64, 48}}) {
      ImageBuffer img = ImageBuffer::filled(w, h, channels);
      for (auto &s : img.samples) s = static_cast<std::uint8_t>(rng());
      const auto bytes = encode_png(img);
      const ImageBuffer back = decode_png(bytes);
      CHECK(back == img);
      CHECK(encode_png(back) == bytes);
    }
  }
  const ImageBuffer black = ImageBuffer::filled(1, 1, 3);
  CHECK(decode_png(encode_png(black)).samples == std::vector<std::uint8_t>{0, 0, 0});

  testsupport::TempDir dir("png");
  const ImageBuffer gray = ImageBuffer::filled(5, 4, 1, 77);
  write_png(gray, dir / "g.png");
  CHECK(read_png(dir / "g.png") == gray);
  CHECK(code_of([&] { read_png(dir / "missing.png"); }) == ErrorCode::kIo);
}

TEST_CASE("png variants outside 8-bit gray and RGB are refused") {
  CHECK(fixtures::decode_error(fixtures::Codec::kPng, fixtures::raw_png(3, 3, 16, PNG_COLOR_TYPE_RGB)) ==
        ErrorCode::kPngUnsupported);
  CHECK(fixtures::decode_error(fixtures::Codec::kPng,
                               fixtures::raw_png(3, 3, 8, PNG_COLOR_TYPE_RGB_ALPHA)) ==
        ErrorCode::kPngUnsupported);
  CHECK(fixtures::decode_error(fixtures::Codec::kPng,
                               fixtures::raw_png(3, 3, 8, PNG_COLOR_TYPE_PALETTE)) ==
        ErrorCode::kPngUnsupported);
  CHECK(fixtures::decode_error(fixtures::Codec::kPng,
                               fixtures::raw_png(9, 9, 8, PNG_COLOR_TYPE_GRAY,
                                                 PNG_INTERLACE_ADAM7)) ==
        ErrorCode::kPngUnsupported);
  CHECK_FALSE(fixtures::decode_error(fixtures::Codec::kPng,
                                     fixtures::raw_png(3, 3, 8, PNG_COLOR_TYPE_GRAY))
                  .has_value());
  auto cut = encode_png(ImageBuffer::filled(30, 30, 3, 1));
  cut.resize(cut.size() / 2);
  CHECK(fixtures::decode_error(fixtures::Codec::kPng, cut) == ErrorCode::kPngCorrupt);
  CHECK(code_of([] { encode_png(ImageBuffer::filled(2, 2, 4)); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("exported tensor file names") {
  CHECK(io::tensor_file_name("0007", "input_grad") == "0007_input_grad.f32t");
  CHECK(io::tensor_file_name("seq-1.f2", "grad_rx3") == "seq-1.f2_grad_rx3.f32t");
  CHECK_THROWS_AS(io::tensor_file_name("", "feat1"), Error);
  CHECK_THROWS_AS(io::tensor_file_name("../0", "feat1"), Error);
  CHECK_THROWS_AS(io::tensor_file_name("0001", "a/b"), Error);
  CHECK_THROWS_AS(io::tensor_file_name("0001", ""), Error);
}
