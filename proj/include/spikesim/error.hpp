#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace spikesim {

/// Raised for invalid user input (bundles, configs, datasets, CLI arguments).
/// When the problem is tied to a specific layer, `layer()` carries its index.
class Error : public std::runtime_error
{
public:
    explicit Error(const std::string &what) : std::runtime_error(what) {}

    Error(const std::string &what, std::size_t layer)
        : std::runtime_error(what + ", layer " + std::to_string(layer))
        , layer_(layer)
    {
    }

    [[nodiscard]] std::optional<std::size_t> layer() const noexcept
    {
        return layer_;
    }

private:
    std::optional<std::size_t> layer_;
};

} // namespace spikesim
