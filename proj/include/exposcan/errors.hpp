#pragma once

#include <stdexcept>
#include <string>

namespace exposcan {

// Root of the scanner's exception hierarchy. Network and codec failures
// inside probes never escape as these; they are folded into statuses.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class AuthError : public Error {
public:
    using Error::Error;
};

class QuotaError : public Error {
public:
    using Error::Error;
};

class RuleError : public Error {
public:
    using Error::Error;
};

class UnsupportedFormat : public Error {
public:
    using Error::Error;
};

class PortInUse : public Error {
public:
    using Error::Error;
};

class UnsupportedService : public Error {
public:
    using Error::Error;
};

} // namespace exposcan
