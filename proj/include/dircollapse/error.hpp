#ifndef DIRCOLLAPSE_ERROR_HPP
#define DIRCOLLAPSE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dircollapse {

enum class Errc {
    io,
    format,
    validation,
    degenerate_pair,
    domain,
    usage,
};

// All library failures surface as this type; the CLI maps every code to exit 2.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace dircollapse

#endif
