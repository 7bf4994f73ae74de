#include "ortsae/checkpoint.hpp"

#include <limits>

#include "wire.hpp"

namespace ortsae {

namespace {

constexpr char kMagic[9] = "SAECKPT1";

void put_matrix_f32(std::string& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      wire::put_f32(out, static_cast<float>(m(i, j)));
    }
  }
}

void put_vector_f32(std::string& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) {
    wire::put_f32(out, static_cast<float>(v(i)));
  }
}

Matrix get_matrix_f32(wire::Reader& r, Index rows, Index cols,
                      const std::string& field) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const std::uint64_t at = r.offset();
      const float v = r.get_f32(field);
      if (!std::isfinite(v)) r.fail_at("non-finite value in " + field, at);
      m(i, j) = static_cast<double>(v);
    }
  }
  return m;
}

}  // namespace

void write_checkpoint(const std::string& path, const SaeParams& params,
                      ActivationMode mode, const nlohmann::json& metadata) {
  const Index n = params.n();
  const Index m = params.m();
  std::string out;
  out.append(kMagic, 8);
  wire::put_u32(out, static_cast<std::uint32_t>(n));
  wire::put_u32(out, static_cast<std::uint32_t>(m));
  out.push_back(static_cast<char>(mode));
  put_matrix_f32(out, params.w_enc);
  put_vector_f32(out, params.b_enc);
  put_matrix_f32(out, params.w_dec);
  put_vector_f32(out, params.b_dec);
  const std::string meta = metadata.dump();
  wire::put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  wire::write_file(path, out, "checkpoint");
}

Checkpoint read_checkpoint(const std::string& path) {
  wire::Reader r = wire::open_reader(path, "checkpoint");
  r.expect_magic(kMagic);

  const std::uint64_t dims_at = r.offset();
  const std::uint64_t n = r.get_u32("input dimension");
  const std::uint64_t m = r.get_u32("latent dimension");
  if (n == 0 || m == 0) r.fail_at("zero dimension in header", dims_at);
  if (m > std::numeric_limits<std::uint64_t>::max() / 8 / n) {
    r.fail_at("dimension overflow in header", dims_at);
  }

  Checkpoint ck;
  const std::uint64_t mode_at = r.offset();
  const std::uint8_t tag = r.get_u8("mode tag");
  if (tag > 2) r.fail_at("unknown mode tag " + std::to_string(tag), mode_at);
  ck.mode = static_cast<ActivationMode>(tag);

  // Size the weight payload before allocating anything.
  const std::uint64_t weight_bytes = (2 * n * m + n + m) * 4;
  if (weight_bytes > r.remaining()) {
    r.fail_at("weight payload exceeds file size", dims_at);
  }

  const Index ni = static_cast<Index>(n);
  const Index mi = static_cast<Index>(m);
  ck.params.w_enc = get_matrix_f32(r, mi, ni, "encoder weights");
  ck.params.b_enc = get_matrix_f32(r, mi, 1, "encoder bias").col(0);
  ck.params.w_dec = get_matrix_f32(r, ni, mi, "decoder weights");
  ck.params.b_dec = get_matrix_f32(r, ni, 1, "decoder bias").col(0);

  const std::uint64_t len_at = r.offset();
  const std::uint64_t meta_len = r.get_u32("metadata length");
  if (meta_len > r.remaining()) {
    r.fail_at("metadata length exceeds file size", len_at);
  }
  const std::string meta = r.get_bytes(meta_len, "metadata");
  ck.metadata = nlohmann::json::parse(meta, nullptr, /*allow_exceptions=*/false);
  if (ck.metadata.is_discarded()) {
    r.fail_at("metadata is not valid JSON", len_at + 4);
  }
  if (!r.at_end()) r.fail("trailing bytes after metadata");
  return ck;
}

}  // namespace ortsae
