#pragma once

#include <stdexcept>
#include <string>

namespace pssim {

// Base class for all simulator errors so callers can catch one type.
class SimError : public std::runtime_error {
public:
    explicit SimError(const std::string& msg) : std::runtime_error(msg) {}
};

class AccumulatorOverflow : public SimError {
public:
    explicit AccumulatorOverflow(const std::string& msg) : SimError(msg) {}
};

class ShapeError : public SimError {
public:
    explicit ShapeError(const std::string& msg) : SimError(msg) {}
};

class ExponentError : public SimError {
public:
    explicit ExponentError(const std::string& msg) : SimError(msg) {}
};

class AccumulatorBudgetError : public SimError {
public:
    explicit AccumulatorBudgetError(const std::string& msg) : SimError(msg) {}
};

class CapacityError : public SimError {
public:
    explicit CapacityError(const std::string& msg) : SimError(msg) {}
};

class CorruptStream : public SimError {
public:
    explicit CorruptStream(const std::string& msg) : SimError(msg) {}
};

class RangeError : public SimError {
public:
    explicit RangeError(const std::string& msg) : SimError(msg) {}
};

class FitError : public SimError {
public:
    explicit FitError(const std::string& msg) : SimError(msg) {}
};

class ParseError : public SimError {
public:
    explicit ParseError(const std::string& msg) : SimError(msg) {}
};

class ShapeChainError : public SimError {
public:
    explicit ShapeChainError(const std::string& msg) : SimError(msg) {}
};

class IoError : public SimError {
public:
    explicit IoError(const std::string& msg) : SimError(msg) {}
};

} // namespace pssim
