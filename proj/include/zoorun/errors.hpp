#pragma once

#include <stdexcept>
#include <string>

namespace zoorun {

// Exit-code classes shared with the CLI:
//   0 success, 1 usage, 2 data/validation, 3 engine/worker, 4 integrity.
enum class ErrorClass { Usage = 1, Data = 2, Engine = 3, Integrity = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string msg)
      : std::runtime_error(std::move(msg)), cls_(cls) {}
  ErrorClass error_class() const { return cls_; }
  int exit_code() const { return static_cast<int>(cls_); }

 private:
  ErrorClass cls_;
};

#define ZOORUN_DEFINE_ERROR(NAME, CLASS)                       \
  class NAME : public Error {                                  \
   public:                                                     \
    explicit NAME(std::string msg)                             \
        : Error(ErrorClass::CLASS, std::move(msg)) {}          \
  }

// tensor / shape layer
ZOORUN_DEFINE_ERROR(ShapeMismatch, Data);
ZOORUN_DEFINE_ERROR(BadAxes, Data);
ZOORUN_DEFINE_ERROR(OutOfBounds, Data);
ZOORUN_DEFINE_ERROR(DTypeMismatch, Data);

// descriptor / document layer
ZOORUN_DEFINE_ERROR(ParseError, Data);
ZOORUN_DEFINE_ERROR(SchemaError, Data);
ZOORUN_DEFINE_ERROR(NonIntegralScale, Data);

// engine layer
ZOORUN_DEFINE_ERROR(NoCompatibleEngine, Engine);
ZOORUN_DEFINE_ERROR(FetchError, Engine);
ZOORUN_DEFINE_ERROR(ChecksumMismatch, Integrity);
ZOORUN_DEFINE_ERROR(AlreadyInstalling, Engine);
ZOORUN_DEFINE_ERROR(UnpackError, Integrity);

// worker layer
ZOORUN_DEFINE_ERROR(WorkerSpawnError, Engine);
ZOORUN_DEFINE_ERROR(LoadError, Engine);
ZOORUN_DEFINE_ERROR(InferenceError, Engine);
ZOORUN_DEFINE_ERROR(ProtocolError, Engine);
ZOORUN_DEFINE_ERROR(WorkerCrashed, Engine);
ZOORUN_DEFINE_ERROR(TimeoutError, Engine);
ZOORUN_DEFINE_ERROR(SessionClosed, Engine);

// reference engine
ZOORUN_DEFINE_ERROR(GraphError, Data);
ZOORUN_DEFINE_ERROR(OddSizeError, Data);

// tiling
ZOORUN_DEFINE_ERROR(BadTile, Data);

#undef ZOORUN_DEFINE_ERROR

}  // namespace zoorun
