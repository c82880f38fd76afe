#pragma once

#include <stdexcept>
#include <string>

namespace phasemap {

// Base for every error raised by the library. Callers that only need a
// message can catch this; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidConfig : public Error {
public:
    explicit InvalidConfig(const std::string& what) : Error("invalid config: " + what) {}
};

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& what) : Error("shape mismatch: " + what) {}
};

class UndefinedMetric : public Error {
public:
    explicit UndefinedMetric(const std::string& what) : Error("undefined metric: " + what) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error("format error: " + what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("i/o error: " + what) {}
};

class SweepFailed : public Error {
public:
    explicit SweepFailed(const std::string& what) : Error("sweep failed: " + what) {}
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error("precondition violated: " + what) {}
};

}  // namespace phasemap
