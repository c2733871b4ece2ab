#pragma once

#include <stdexcept>
#include <string>

namespace mgst {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Image and mask dimensions disagree.
class PairMismatchError : public Error {
public:
    using Error::Error;
};

/// A mask label value has no channel assignment.
class UnknownLabelError : public Error {
public:
    using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// A file's contents do not match its declared format.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Input spatial dimensions are not divisible by the network's pooling factor.
class IndivisibleDimsError : public Error {
public:
    using Error::Error;
};

/// Operand shapes are incompatible.
class ShapeMismatchError : public Error {
public:
    using Error::Error;
};

/// A mask channel has zero total mass where positive mass is required.
class EmptyRegionError : public Error {
public:
    using Error::Error;
};

/// The objective evaluated to NaN or infinity.
class NonFiniteLossError : public Error {
public:
    using Error::Error;
};

} // namespace mgst
