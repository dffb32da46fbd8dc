#ifndef PROBEKIT_ERROR_HPP
#define PROBEKIT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace probekit {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user-supplied input (manifests, configs, flag values). CLI exit code 1.
struct validation_error : error {
  using error::error;
};

// Filesystem / serialization failures. CLI exit code 2.
struct io_error : error {
  using error::error;
};

// Malformed on-disk data; the message names the offending field.
struct format_error : io_error {
  using io_error::io_error;
};

// Precondition violated on otherwise valid data (empty sequence, single-class split, ...).
struct domain_error : error {
  using error::error;
};

// Programming-contract violation (shape mismatch, unsorted input where sorted required).
struct contract_error : error {
  using error::error;
};

}  // namespace probekit

#endif  // PROBEKIT_ERROR_HPP
