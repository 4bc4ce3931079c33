#pragma once

#include <stdexcept>
#include <string>

namespace qate {

// A computation hit a genuine singularity (closing gap, vanishing
// denominator). Distinct from plain std::domain_error so callers can
// tell "bad input range" from "the physics blew up here".
class SingularityError : public std::domain_error {
public:
    explicit SingularityError(const std::string& what) : std::domain_error(what) {}
};

// Request exceeds a configured resource cap (e.g. dense ED above the
// site limit).
class ResourceError : public std::runtime_error {
public:
    explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent configuration (specs, dimensions, schema).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

} // namespace qate
