#pragma once

#include <stdexcept>
#include <string>

namespace tontine {

// Adaptive quadrature failed to converge within the depth limit.
class quadrature_error : public std::runtime_error {
public:
    explicit quadrature_error(const std::string& what) : std::runtime_error(what) {}
};

// A quantity the model defines as infinite was requested (natural-tontine
// utility and certainty equivalents diverge for gamma > 2).
class divergence_error : public std::runtime_error {
public:
    explicit divergence_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace tontine
