#pragma once

#include <iosfwd>
#include <string>

#include "xview/numcore.hpp"

namespace xview {

struct EncoderDims {
  Index input = 32;
  Index hidden = 64;
  Index embed = 32;
};

// Two-layer tanh network followed by row L2 normalization. The same
// parameter set encodes both views.
struct EncoderParams {
  Matrix w1;  // hidden x input
  Vector b1;  // hidden
  Matrix w2;  // embed x hidden
  Vector b2;  // embed

  EncoderDims dims() const { return {w1.cols(), w1.rows(), w2.rows()}; }
  bool all_finite() const;
};

using EncoderGrads = EncoderParams;

EncoderGrads zero_grads(const EncoderDims& dims);
EncoderGrads& operator+=(EncoderGrads& acc, const EncoderGrads& g);

struct ForwardTape {
  Matrix input;      // batch x input
  Matrix hidden;     // tanh activations, batch x hidden
  Matrix embedding;  // normalized output, batch x embed
  Vector norms;      // pre-normalization row norms
};

struct Encoded {
  Matrix embedding;
  ForwardTape tape;
};

// Kaiming (fan-in, normal) weights, zero biases.
EncoderParams init_params(Rng& rng, const EncoderDims& dims);

Encoded forward(const EncoderParams& params, const Matrix& x);

// Convenience when the tape is not needed.
Matrix encode(const EncoderParams& params, const Matrix& x);

EncoderGrads backward(const EncoderParams& params, const ForwardTape& tape,
                      const Matrix& d_embedding);

EncoderParams sgd_step(const EncoderParams& params, const EncoderGrads& grads,
                       double lr);

// Flat views used by gradient checks and serialization; order is
// w1 (row-major), b1, w2 (row-major), b2.
Vector flatten(const EncoderParams& p);
EncoderParams unflatten(const Vector& flat, const EncoderDims& dims);

// "DMPW" checkpoint format.
void save_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_checkpoint(const std::string& path);
void write_checkpoint(const EncoderParams& params, std::ostream& out);
EncoderParams read_checkpoint(std::istream& in);

}  // namespace xview
