#pragma once

#include <stdexcept>
#include <string>

namespace ctnli {

// Bad or inconsistent input data: malformed files, dangling references,
// invariant violations. The CLI maps these to exit status 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Generation transport failed after retries (or no transport is configured
// and the cache is cold). The CLI maps these to exit status 3.
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, int status)
        : std::runtime_error(what), status_(status) {}

    // Last transport status observed: an HTTP status code, or 0 when the
    // request never produced one.
    int status() const noexcept { return status_; }

private:
    int status_;
};

}  // namespace ctnli
