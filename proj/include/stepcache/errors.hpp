#pragma once

#include <stdexcept>
#include <string>

namespace stepcache {

// Base class for all stepcache errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class EmptyResponseError : public Error {
public:
    EmptyResponseError() : Error("response text is empty") {}
};

class EmptyStepListError : public Error {
public:
    EmptyStepListError() : Error("step list is empty") {}
};

class NoJsonFoundError : public Error {
public:
    explicit NoJsonFoundError(const std::string& detail = "no parseable JSON substring found")
        : Error(detail) {}
};

class EmptyPromptError : public Error {
public:
    EmptyPromptError() : Error("prompt is empty") {}
};

class DuplicateIdError : public Error {
public:
    explicit DuplicateIdError(std::uint64_t id)
        : Error("duplicate cache entry id " + std::to_string(id)) {}
};

// Corrupt or version-mismatched cache file; carries the offending record index
// (0 = header line).
class CorruptStoreError : public Error {
public:
    CorruptStoreError(std::size_t record_index, const std::string& detail)
        : Error("corrupt cache file at record " + std::to_string(record_index) + ": " + detail),
          record_index_(record_index) {}

    std::size_t record_index() const { return record_index_; }

private:
    std::size_t record_index_;
};

// Transport failure or non-2xx status after retries; retryable by the caller.
class BackendUnavailableError : public Error {
public:
    explicit BackendUnavailableError(const std::string& detail)
        : Error("backend unavailable: " + detail) {}
};

class BackendProtocolError : public Error {
public:
    explicit BackendProtocolError(const std::string& detail)
        : Error("malformed backend response: " + detail) {}
};

class NoDataError : public Error {
public:
    NoDataError() : Error("no records to aggregate") {}
};

class UnsupportedError : public Error {
public:
    explicit UnsupportedError(const std::string& detail) : Error(detail) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& detail) : Error(detail) {}
};

}  // namespace stepcache
