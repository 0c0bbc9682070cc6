#include "xview/encoder.hpp"

#include <fstream>

#include "xview/binary_io.hpp"

namespace xview {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kCollapseNorm = 1e-12;

void check_dims(const EncoderDims& d) {
  require(d.input > 0 && d.hidden > 0 && d.embed > 0, ErrorCode::kInvalidArgument,
          "encoder dims must be positive");
}

}  // namespace

bool EncoderParams::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

EncoderGrads zero_grads(const EncoderDims& d) {
  EncoderGrads g;
  g.w1 = Matrix::Zero(d.hidden, d.input);
  g.b1 = Vector::Zero(d.hidden);
  g.w2 = Matrix::Zero(d.embed, d.hidden);
  g.b2 = Vector::Zero(d.embed);
  return g;
}

EncoderGrads& operator+=(EncoderGrads& acc, const EncoderGrads& g) {
  acc.w1 += g.w1;
  acc.b1 += g.b1;
  acc.w2 += g.w2;
  acc.b2 += g.b2;
  return acc;
}

EncoderParams init_params(Rng& rng, const EncoderDims& dims) {
  check_dims(dims);
  EncoderParams p;
  p.w1 = random_normal(dims.hidden, dims.input,
                       std::sqrt(2.0 / static_cast<double>(dims.input)), rng);
  p.b1 = Vector::Zero(dims.hidden);
  p.w2 = random_normal(dims.embed, dims.hidden,
                       std::sqrt(2.0 / static_cast<double>(dims.hidden)), rng);
  p.b2 = Vector::Zero(dims.embed);
  return p;
}

Encoded forward(const EncoderParams& params, const Matrix& x) {
  require(x.cols() == params.w1.cols(), ErrorCode::kShapeMismatch,
          "encoder forward: input dimension mismatch");
  Encoded out;
  ForwardTape& tape = out.tape;
  tape.input = x;
  tape.hidden = ((x * params.w1.transpose()).rowwise() + params.b1.transpose())
                    .array()
                    .tanh()
                    .matrix();
  Matrix pre = (tape.hidden * params.w2.transpose()).rowwise() + params.b2.transpose();
  tape.norms.resize(pre.rows());
  for (Index i = 0; i < pre.rows(); ++i) {
    const double n = pre.row(i).norm();
    if (!(n >= kCollapseNorm))
      fail(ErrorCode::kDegenerate, "encoder forward: collapsed embedding row");
    tape.norms(i) = n;
    pre.row(i) /= n;
  }
  tape.embedding = pre;
  out.embedding = std::move(pre);
  return out;
}

Matrix encode(const EncoderParams& params, const Matrix& x) {
  return forward(params, x).embedding;
}

EncoderGrads backward(const EncoderParams& params, const ForwardTape& tape,
                      const Matrix& d_embedding) {
  const Matrix& e = tape.embedding;
  require(d_embedding.rows() == e.rows() && d_embedding.cols() == e.cols(),
          ErrorCode::kShapeMismatch, "encoder backward: gradient shape mismatch");
  // Jacobian of y / |y|: (I - e e^T) / |y| applied row-wise.
  Matrix d_pre(e.rows(), e.cols());
  for (Index i = 0; i < e.rows(); ++i) {
    const double proj = d_embedding.row(i).dot(e.row(i));
    d_pre.row(i) = (d_embedding.row(i) - proj * e.row(i)) / tape.norms(i);
  }
  const Matrix d_hidden = d_pre * params.w2;
  const Matrix d_act =
      (d_hidden.array() * (1.0 - tape.hidden.array().square())).matrix();

  EncoderGrads g;
  g.w2 = d_pre.transpose() * tape.hidden;
  g.b2 = d_pre.colwise().sum().transpose();
  g.w1 = d_act.transpose() * tape.input;
  g.b1 = d_act.colwise().sum().transpose();
  return g;
}

EncoderParams sgd_step(const EncoderParams& params, const EncoderGrads& grads,
                       double lr) {
  require(lr >= 0.0, ErrorCode::kInvalidArgument, "sgd_step: negative learning rate");
  if (!grads.all_finite()) fail(ErrorCode::kNumeric, "sgd_step: non-finite gradient");
  EncoderParams next;
  next.w1 = params.w1 - lr * grads.w1;
  next.b1 = params.b1 - lr * grads.b1;
  next.w2 = params.w2 - lr * grads.w2;
  next.b2 = params.b2 - lr * grads.b2;
  return next;
}

Vector flatten(const EncoderParams& p) {
  Vector flat(p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size());
  Index k = 0;
  for (Index i = 0; i < p.w1.size(); ++i) flat(k++) = p.w1.data()[i];
  for (Index i = 0; i < p.b1.size(); ++i) flat(k++) = p.b1(i);
  for (Index i = 0; i < p.w2.size(); ++i) flat(k++) = p.w2.data()[i];
  for (Index i = 0; i < p.b2.size(); ++i) flat(k++) = p.b2(i);
  return flat;
}

EncoderParams unflatten(const Vector& flat, const EncoderDims& d) {
  EncoderParams p = zero_grads(d);
  require(flat.size() == flatten(p).size(), ErrorCode::kShapeMismatch,
          "unflatten: size mismatch");
  Index k = 0;
  for (Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = flat(k++);
  for (Index i = 0; i < p.b1.size(); ++i) p.b1(i) = flat(k++);
  for (Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = flat(k++);
  for (Index i = 0; i < p.b2.size(); ++i) p.b2(i) = flat(k++);
  return p;
}

void write_checkpoint(const EncoderParams& params, std::ostream& out) {
  const EncoderDims d = params.dims();
  binary::put_magic(out, "DMPW");
  binary::put_le<std::uint32_t>(out, kCheckpointVersion);
  binary::put_le<std::uint32_t>(out, 3);
  binary::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.input));
  binary::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.hidden));
  binary::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.embed));
  const Vector flat = flatten(params);
  for (Index i = 0; i < flat.size(); ++i) binary::put_le<double>(out, flat(i));
}

EncoderParams read_checkpoint(std::istream& in) {
  char tag[4];
  if (!binary::read_tag(in, tag)) fail(ErrorCode::kTruncated, "checkpoint: missing magic");
  if (std::string(tag, 4) != "DMPW") fail(ErrorCode::kBadMagic, "checkpoint: bad magic");
  const auto version = binary::get_le<std::uint32_t>(in, "checkpoint version");
  if (version != kCheckpointVersion)
    fail(ErrorCode::kBadVersion, "checkpoint: unsupported version");
  const auto ndims = binary::get_le<std::uint32_t>(in, "checkpoint layer count");
  if (ndims != 3) fail(ErrorCode::kBadVersion, "checkpoint: expected 3 layer dims");
  EncoderDims d;
  d.input = binary::get_le<std::uint32_t>(in, "checkpoint dims");
  d.hidden = binary::get_le<std::uint32_t>(in, "checkpoint dims");
  d.embed = binary::get_le<std::uint32_t>(in, "checkpoint dims");
  check_dims(d);
  Vector flat(d.hidden * d.input + d.hidden + d.embed * d.hidden + d.embed);
  for (Index i = 0; i < flat.size(); ++i) {
    flat(i) = binary::get_le<double>(in, "checkpoint payload");
    if (!std::isfinite(flat(i))) fail(ErrorCode::kNonFinite, "checkpoint: non-finite weight");
  }
  return unflatten(flat, d);
}

void save_checkpoint(const EncoderParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open checkpoint for writing: " + path);
  write_checkpoint(params, out);
  if (!out) fail(ErrorCode::kIo, "failed writing checkpoint: " + path);
}

EncoderParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

}  // namespace xview
