#pragma once

#include <stdexcept>
#include <string>

namespace ctx {

// Error categories; exit codes documented in the CLI --help.
enum class ErrorKind {
  usage,
  config,
  data,
  training,
  evaluation,
  io,
};

class CtxError : public std::runtime_error {
public:
  CtxError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  // 0 ok, 2 usage, 3 config, 4 data (I/O counts as data), 5 training,
  // 6 evaluation.
  int exit_code() const {
    switch (kind_) {
      case ErrorKind::usage: return 2;
      case ErrorKind::config: return 3;
      case ErrorKind::data: return 4;
      case ErrorKind::training: return 5;
      case ErrorKind::evaluation: return 6;
      case ErrorKind::io: return 4;
    }
    return 1;
  }

private:
  ErrorKind kind_;
};

} // namespace ctx
