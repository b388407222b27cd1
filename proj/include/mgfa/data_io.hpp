#ifndef MGFA_DATA_IO_HPP
#define MGFA_DATA_IO_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mgfa/types.hpp"

namespace mgfa {

/// Column names of a CSV file (first line only; the body is not parsed).
std::vector<std::string> csv_header(const std::string& path);

/// Reads a rectangular numeric CSV with a mandatory header row. When
/// label_column names a column, its cells (numeric or strings) become
/// 1-based classes in first-appearance order. Throws ParseError with the
/// 1-based row/column of the offending cell.
Dataset load_csv(const std::string& path, const std::string& label_column = "");

/// Writes observations (and a trailing "label" column when labels are
/// present) with round-trip float formatting. Atomic: the target appears
/// only after a successful write.
void write_csv(const Dataset& data, const std::string& path);

/// Per-feature centering and scaling, kept for the inverse transform.
/// Scale is the sample standard deviation (n-1 convention).
struct ScalingTransform {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& x) const;
};

/// Centers and scales every column to mean 0 and sample sd 1. Throws
/// std::invalid_argument naming the first constant column.
std::pair<Dataset, ScalingTransform> standardize(const Dataset& data);

/// Model file payload: the parameters plus optional fit metadata.
struct ModelFile {
  MgfaParams params;
  std::optional<EigenBounds> bounds;
  std::optional<double> loglik;
  std::optional<int> outer_iterations;
  std::optional<bool> converged;
};

/// Line-oriented versioned text format, full 17-significant-digit reals;
/// see README for the layout. Atomic write.
void save_model(const ModelFile& model, const std::string& path);

/// Parses and validates a model file. Throws ParseError (with line number)
/// on malformed input and std::invalid_argument on violated parameter
/// invariants (e.g. weights not summing to 1 within 1e-12).
ModelFile load_model(const std::string& path);

/// Writes content to path via a temporary file and rename, so failures
/// never leave a partial target behind.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace mgfa

#endif  // MGFA_DATA_IO_HPP
