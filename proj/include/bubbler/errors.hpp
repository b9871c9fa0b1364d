#pragma once

#include <stdexcept>
#include <string>

namespace bubbler {

/// Evaluation outside the domain of a function (coincident points, |y| >= 1, x = p with alpha < 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid problem data: rejected alpha, coincident centers, unsupported forcing, bad config file.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite integrand value at a quadrature node.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, std::size_t node, int patch)
      : std::runtime_error(what), node_(node), patch_(patch) {}
  std::size_t node() const { return node_; }
  /// -1 denotes the background rule.
  int patch() const { return patch_; }

 private:
  std::size_t node_;
  int patch_;
};

/// Linear or nonlinear solver failure; carries the residual history when there is one.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Grid too coarse for the narrowest bubble.
class ResolutionError : public std::runtime_error {
 public:
  ResolutionError(const std::string& what, int required_n)
      : std::runtime_error(what), required_n_(required_n) {}
  int required_n() const { return required_n_; }

 private:
  int required_n_;
};

}  // namespace bubbler
