#ifndef MGFA_ERRORS_HPP
#define MGFA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mgfa {

/// A q-by-q system that should be positive definite failed to factor.
/// `component` is the 1-based mixture component involved, or 0 when the
/// failure is not tied to a component.
class SingularMatrixError : public std::runtime_error {
 public:
  explicit SingularMatrixError(const std::string& what, int component = 0)
      : std::runtime_error(what), component(component) {}
  int component;
};

/// A component lost essentially all of its posterior mass.
class EmptyComponentError : public std::runtime_error {
 public:
  EmptyComponentError(const std::string& what, int component, double count)
      : std::runtime_error(what), component(component), count(count) {}
  int component;
  double count;
};

/// Row-level numerical failure (e.g. all component densities underflowed).
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, long row)
      : std::runtime_error(what), row(row) {}
  long row;
};

/// Malformed input file. Line/column are 1-based; 0 means "not applicable".
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what, long line = 0, long column = 0)
      : std::runtime_error(what), line(line), column(column) {}
  long line;
  long column;
};

}  // namespace mgfa

#endif  // MGFA_ERRORS_HPP
