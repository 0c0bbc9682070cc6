#pragma once

#include <stdexcept>
#include <string>

namespace xview {

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kDegenerate,  // zero-norm vectors, collapsed embeddings
  kConfig,
  kIo,
  kBadMagic,
  kBadVersion,
  kTruncated,
  kNonFinite,
  kNumeric,  // non-finite loss or gradient during training
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const char* what) {
  if (!cond) throw Error(code, what);
}

}  // namespace xview
