// Error taxonomy shared by all lmkex components.
#pragma once

#include <stdexcept>
#include <string>

namespace lmkex {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or missing configuration (profiles, paths, unusable LM set).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Referential-integrity violation inside a knowledge store.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Illegal status transition or operation on a terminal-state record.
class StateError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// Violated precondition or domain-type invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Template instantiation problems: missing/unknown bindings, bad pattern.
class TemplateError : public Error {
public:
    using Error::Error;
};

// Prompting-strategy misuse (e.g. analogical prompt without cases).
class StrategyError : public Error {
public:
    using Error::Error;
};

// API misuse: wrong request kind for a backend, schema/response mismatch.
class UsageError : public Error {
public:
    using Error::Error;
};

// Malformed input file; carries a 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line = 0)
        : Error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_ = 0;
};

// Response text that cannot be turned into any assertion.
class InterpretationError : public Error {
public:
    using Error::Error;
};

// Transport-level backend failure. Retryable unless stated otherwise.
class BackendError : public Error {
public:
    explicit BackendError(const std::string& msg, bool retryable = true)
        : Error(msg), retryable_(retryable) {}
    bool retryable() const { return retryable_; }

private:
    bool retryable_ = true;
};

class TimeoutError : public BackendError {
public:
    explicit TimeoutError(const std::string& msg) : BackendError(msg, true) {}
};

} // namespace lmkex
