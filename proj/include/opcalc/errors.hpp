#pragma once

#include <stdexcept>
#include <string>

namespace opcalc {

// Base type for everything thrown by this library. Callers that only care
// about "library failure vs. programming error" can catch this one.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct NotHermitian : Error {
    explicit NotHermitian(const std::string& msg) : Error(msg) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

// Operand block shapes or weights disagree, or a kernel arity does not
// match the requested integral order.
struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

// A derivative beyond the declared smoothness budget was requested.
struct OrderExceeded : Error {
    explicit OrderExceeded(const std::string& msg) : Error(msg) {}
};

// Kernel not evaluable at a required node tuple.
struct KernelDomain : Error {
    explicit KernelDomain(const std::string& msg) : Error(msg) {}
};

// Scalar function undefined (NaN/Inf) at an eigenvalue.
struct FunctionDomain : Error {
    explicit FunctionDomain(const std::string& msg) : Error(msg) {}
};

struct QuadratureBudgetExceeded : Error {
    explicit QuadratureBudgetExceeded(const std::string& msg) : Error(msg) {}
};

// pq_index precondition ||T - P T Q|| <= tol failed.
struct NotCompressed : Error {
    explicit NotCompressed(const std::string& msg) : Error(msg) {}
};

// mu sits in the spectrum of a path endpoint: flow undefined there.
struct EndpointKernel : Error {
    explicit EndpointKernel(const std::string& msg) : Error(msg) {}
};

struct PartitionBudgetExceeded : Error {
    explicit PartitionBudgetExceeded(const std::string& msg) : Error(msg) {}
};

struct ConfigParse : Error {
    explicit ConfigParse(const std::string& msg) : Error(msg) {}
};

struct FileNotFound : Error {
    explicit FileNotFound(const std::string& msg) : Error(msg) {}
};

struct IOError : Error {
    explicit IOError(const std::string& msg) : Error(msg) {}
};

} // namespace opcalc
