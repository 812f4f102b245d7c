#pragma once

#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>

namespace awe {

// Whole-line warning on stderr; safe to call from worker threads.
inline void warn(const std::string& line) {
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::clog << "warning: " << line << '\n';
}

// Base of every error raised by the toolkit. The kind() tag is stable and is
// what tests and the CLI match on; what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)), message_(message) {}

  const std::string& kind() const noexcept { return kind_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string kind_;
  std::string message_;
};

#define AWE_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& message) : Error(tag, message) {} \
  }

AWE_DEFINE_ERROR(ShapeError, "shape error");
AWE_DEFINE_ERROR(FormatError, "format error");
AWE_DEFINE_ERROR(IoError, "I/O error");
AWE_DEFINE_ERROR(IntervalError, "interval error");
AWE_DEFINE_ERROR(EmptySpanError, "empty-span error");
AWE_DEFINE_ERROR(LayerError, "layer error");
AWE_DEFINE_ERROR(EmptyVocabularyError, "empty-vocabulary error");
AWE_DEFINE_ERROR(DegenerateVectorError, "degenerate-vector error");
AWE_DEFINE_ERROR(UnknownWordError, "unknown-word error");
AWE_DEFINE_ERROR(ParameterError, "parameter error");
AWE_DEFINE_ERROR(UndefinedError, "undefined error");
AWE_DEFINE_ERROR(NumericError, "numeric error");
AWE_DEFINE_ERROR(LabelError, "label error");
AWE_DEFINE_ERROR(SequenceError, "sequence error");
AWE_DEFINE_ERROR(SplitError, "split error");
AWE_DEFINE_ERROR(ConfigError, "configuration error");

#undef AWE_DEFINE_ERROR

}  // namespace awe
