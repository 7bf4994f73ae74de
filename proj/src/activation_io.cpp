#include "ortsae/activation_io.hpp"

#include <cmath>
#include <limits>

#include "wire.hpp"

namespace ortsae {

namespace {
constexpr char kMagic[9] = "SAEACT1\0";
}

void write_activations(const std::string& path, const Matrix& x) {
  std::string out;
  out.append(kMagic, 8);
  wire::put_u32(out, static_cast<std::uint32_t>(x.rows()));
  wire::put_u32(out, static_cast<std::uint32_t>(x.cols()));
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      wire::put_f32(out, static_cast<float>(x(i, j)));
    }
  }
  wire::write_file(path, out, "activations");
}

Matrix read_activations(const std::string& path) {
  wire::Reader r = wire::open_reader(path, "activations");
  r.expect_magic(kMagic);

  const std::uint64_t dims_at = r.offset();
  const std::uint64_t rows = r.get_u32("row count");
  const std::uint64_t cols = r.get_u32("column count");
  if (cols == 0) r.fail_at("zero column count in header", dims_at);
  if (rows != 0 && cols > std::numeric_limits<std::uint64_t>::max() / 4 / rows) {
    r.fail_at("dimension overflow in header", dims_at);
  }
  if (rows * cols * 4 > r.remaining()) {
    r.fail_at("payload shorter than the header claims", dims_at);
  }

  Matrix x(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const std::uint64_t at = r.offset();
      const float v = r.get_f32("payload");
      if (!std::isfinite(v)) r.fail_at("non-finite value in payload", at);
      x(i, j) = static_cast<double>(v);
    }
  }
  if (!r.at_end()) r.fail("trailing bytes after payload");
  return x;
}

}  // namespace ortsae
