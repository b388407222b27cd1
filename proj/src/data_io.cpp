#include "mgfa/data_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "mgfa/errors.hpp"

namespace mgfa {

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_double(const std::string& token, long row, long col) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (token.empty() || end != token.c_str() + token.size() || errno == ERANGE)
    throw ParseError("csv: cell '" + token + "' at row " + std::to_string(row) +
                         ", column " + std::to_string(col) + " is not numeric",
                     row, col);
  return v;
}

}  // namespace

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open '" + tmp + "' for writing");
    out << content;
    if (!out.good()) {
      out.close();
      std::remove(tmp.c_str());
      throw ParseError("write to '" + tmp + "' failed");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw ParseError("cannot move '" + tmp + "' to '" + path + "'");
  }
}

std::vector<std::string> csv_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw ParseError("csv: missing header row in '" + path + "'", 1);
  return split_csv_line(line);
}

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw ParseError("csv: missing header row in '" + path + "'", 1);
  const std::vector<std::string> header = split_csv_line(line);

  long label_idx = -1;
  if (!label_column.empty()) {
    for (size_t j = 0; j < header.size(); ++j)
      if (header[j] == label_column) label_idx = static_cast<long>(j);
    if (label_idx < 0)
      throw ParseError("csv: no column named '" + label_column + "'", 1);
  }

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  long row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("csv: row " + std::to_string(row_no) + " has " +
                           std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(header.size()),
                       row_no);
    std::vector<double> values;
    values.reserve(header.size());
    for (size_t j = 0; j < cells.size(); ++j) {
      if (static_cast<long>(j) == label_idx) {
        raw_labels.push_back(cells[j]);
        continue;
      }
      values.push_back(
          parse_double(cells[j], row_no, static_cast<long>(j) + 1));
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError("csv: no data rows in '" + path + "'", row_no);

  Dataset out;
  out.observations.resize(static_cast<long>(rows.size()),
                          static_cast<long>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      out.observations(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
  for (size_t j = 0; j < header.size(); ++j)
    if (static_cast<long>(j) != label_idx)
      out.feature_names.push_back(header[j]);

  if (label_idx >= 0) {
    // Classes are renumbered 1..G in order of first appearance.
    std::unordered_map<std::string, int> classes;
    out.labels.reserve(raw_labels.size());
    for (const std::string& raw : raw_labels) {
      auto [it, inserted] =
          classes.emplace(raw, static_cast<int>(classes.size()) + 1);
      (void)inserted;
      out.labels.push_back(it->second);
    }
  }
  return out;
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ostringstream out;
  const int d = data.dim();
  for (int j = 0; j < d; ++j) {
    if (j) out << ',';
    out << (static_cast<int>(data.feature_names.size()) == d
                ? data.feature_names[static_cast<size_t>(j)]
                : "x" + std::to_string(j + 1));
  }
  if (data.has_labels()) out << ",label";
  out << '\n';
  for (long i = 0; i < data.n_rows(); ++i) {
    for (int j = 0; j < d; ++j) {
      if (j) out << ',';
      out << format_real(data.observations(i, j));
    }
    if (data.has_labels()) out << ',' << data.labels[static_cast<size_t>(i)];
    out << '\n';
  }
  atomic_write(path, out.str());
}

Eigen::MatrixXd ScalingTransform::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - center.transpose()).array().rowwise() /
         scale.transpose().array();
}

Eigen::MatrixXd ScalingTransform::invert(const Eigen::MatrixXd& x) const {
  return (x.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
         center.transpose();
}

std::pair<Dataset, ScalingTransform> standardize(const Dataset& data) {
  const long n = data.n_rows();
  if (n < 2)
    throw std::invalid_argument("standardize: need at least two rows");
  ScalingTransform t;
  t.center = data.observations.colwise().mean().transpose();
  const Eigen::MatrixXd centered =
      data.observations.rowwise() - t.center.transpose();
  t.scale = (centered.colwise().squaredNorm() / static_cast<double>(n - 1))
                .cwiseSqrt()
                .transpose();
  for (long j = 0; j < t.scale.size(); ++j) {
    if (!(t.scale[j] > 0.0)) {
      const std::string name =
          static_cast<long>(data.feature_names.size()) > j
              ? data.feature_names[static_cast<size_t>(j)]
              : "column " + std::to_string(j + 1);
      throw std::invalid_argument("standardize: constant column '" + name +
                                  "'");
    }
  }
  Dataset out = data;
  out.observations = t.apply(data.observations);
  return {std::move(out), std::move(t)};
}

void save_model(const ModelFile& model, const std::string& path) {
  model.params.validate();
  const int G = model.params.n_components();
  const int d = model.params.dim();
  const int q = model.params.n_factors();
  std::ostringstream out;
  out << "format mgfa-model\nversion 1\n";
  out << "components " << G << "\ndim " << d << "\nfactors " << q << '\n';
  for (int g = 0; g < G; ++g) {
    out << "weight " << g + 1 << ' ' << format_real(model.params.weights[g])
        << '\n';
    out << "mean " << g + 1;
    for (int j = 0; j < d; ++j)
      out << ' ' << format_real(model.params.means[g][j]);
    out << '\n';
    for (int r = 0; r < d; ++r) {
      out << "loading " << g + 1 << ' ' << r + 1;
      for (int c = 0; c < q; ++c)
        out << ' ' << format_real(model.params.loadings[g](r, c));
      out << '\n';
    }
    out << "uniqueness " << g + 1;
    for (int j = 0; j < d; ++j)
      out << ' ' << format_real(model.params.uniquenesses[g][j]);
    out << '\n';
  }
  if (model.bounds) {
    out << "bounds " << format_real(model.bounds->lower) << ' '
        << (model.bounds->bounded_above() ? format_real(model.bounds->upper)
                                          : "inf")
        << '\n';
  }
  if (model.loglik) out << "loglik " << format_real(*model.loglik) << '\n';
  if (model.outer_iterations)
    out << "outer_iterations " << *model.outer_iterations << '\n';
  if (model.converged) out << "converged " << (*model.converged ? 1 : 0) << '\n';
  atomic_write(path, out.str());
}

namespace {

struct LineReader {
  std::istream& in;
  long line_no = 0;
  std::string line;

  bool next() {
    while (std::getline(in, line)) {
      ++line_no;
      line = trim(line);
      if (!line.empty() && line[0] != '#') return true;
    }
    return false;
  }
};

long expect_scalar(LineReader& r, const std::string& key) {
  if (!r.next())
    throw ParseError("model: unexpected end of file, expected '" + key + "'",
                     r.line_no);
  std::istringstream ss(r.line);
  std::string k;
  long v;
  if (!(ss >> k >> v) || k != key)
    throw ParseError("model: expected '" + key + " <value>' at line " +
                         std::to_string(r.line_no),
                     r.line_no);
  return v;
}

double token_double(std::istringstream& ss, LineReader& r) {
  std::string tok;
  if (!(ss >> tok))
    throw ParseError("model: missing value at line " +
                         std::to_string(r.line_no),
                     r.line_no);
  return parse_double(tok, r.line_no, 0);
}

}  // namespace

ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  LineReader r{in, 0, {}};

  if (!r.next() || r.line != "format mgfa-model")
    throw ParseError("model: bad or missing format line", r.line_no);
  if (!r.next() || r.line != "version 1")
    throw ParseError("model: unsupported version '" + r.line + "'", r.line_no);
  const long G = expect_scalar(r, "components");
  const long d = expect_scalar(r, "dim");
  const long q = expect_scalar(r, "factors");
  if (G < 1 || d < 1 || q < 0 || q >= d)
    throw ParseError("model: inconsistent dimensions", r.line_no);

  ModelFile model;
  model.params.weights = Eigen::VectorXd::Constant(G, -1.0);
  model.params.means.assign(static_cast<size_t>(G), Eigen::VectorXd());
  model.params.loadings.assign(
      static_cast<size_t>(G),
      Eigen::MatrixXd::Constant(d, q, std::numeric_limits<double>::quiet_NaN()));
  model.params.uniquenesses.assign(static_cast<size_t>(G), Eigen::VectorXd());
  std::vector<std::vector<char>> loading_rows(
      static_cast<size_t>(G), std::vector<char>(static_cast<size_t>(d), 0));

  const auto component_index = [&](long g) {
    if (g < 1 || g > G)
      throw ParseError("model: component index " + std::to_string(g) +
                           " out of range at line " + std::to_string(r.line_no),
                       r.line_no);
    return static_cast<size_t>(g - 1);
  };

  while (r.next()) {
    std::istringstream ss(r.line);
    std::string key;
    ss >> key;
    if (key == "weight") {
      long g;
      if (!(ss >> g)) throw ParseError("model: bad weight line", r.line_no);
      model.params.weights[static_cast<long>(component_index(g))] =
          token_double(ss, r);
    } else if (key == "mean" || key == "uniqueness") {
      long g;
      if (!(ss >> g)) throw ParseError("model: bad " + key + " line", r.line_no);
      Eigen::VectorXd v(d);
      for (long j = 0; j < d; ++j) v[j] = token_double(ss, r);
      if (key == "mean")
        model.params.means[component_index(g)] = std::move(v);
      else
        model.params.uniquenesses[component_index(g)] = std::move(v);
    } else if (key == "loading") {
      long g, row;
      if (!(ss >> g >> row) || row < 1 || row > d)
        throw ParseError("model: bad loading line", r.line_no);
      for (long c = 0; c < q; ++c)
        model.params.loadings[component_index(g)](row - 1, c) =
            token_double(ss, r);
      loading_rows[component_index(g)][static_cast<size_t>(row - 1)] = 1;
    } else if (key == "bounds") {
      EigenBounds b;
      b.lower = token_double(ss, r);
      std::string up;
      if (!(ss >> up)) throw ParseError("model: bad bounds line", r.line_no);
      b.upper = up == "inf" ? std::numeric_limits<double>::infinity()
                            : parse_double(up, r.line_no, 0);
      b.validate();
      model.bounds = b;
    } else if (key == "loglik") {
      model.loglik = token_double(ss, r);
    } else if (key == "outer_iterations") {
      long v;
      if (!(ss >> v)) throw ParseError("model: bad iteration line", r.line_no);
      model.outer_iterations = static_cast<int>(v);
    } else if (key == "converged") {
      long v;
      if (!(ss >> v)) throw ParseError("model: bad converged line", r.line_no);
      model.converged = v != 0;
    } else {
      throw ParseError("model: unknown key '" + key + "' at line " +
                           std::to_string(r.line_no),
                       r.line_no);
    }
  }

  for (long g = 0; g < G; ++g) {
    const auto gi = static_cast<size_t>(g);
    if (model.params.weights[g] < 0.0)
      throw ParseError("model: missing weight for component " +
                       std::to_string(g + 1));
    if (model.params.means[gi].size() == 0)
      throw ParseError("model: missing mean for component " +
                       std::to_string(g + 1));
    if (model.params.uniquenesses[gi].size() == 0)
      throw ParseError("model: missing uniqueness for component " +
                       std::to_string(g + 1));
    for (long row = 0; row < d; ++row)
      if (!loading_rows[gi][static_cast<size_t>(row)])
        throw ParseError("model: missing loading row " + std::to_string(row + 1) +
                         " for component " + std::to_string(g + 1));
  }

  // Weights are renormalized when they drift beyond accumulated-rounding
  // scale but stay within the 1e-12 gate; exact saved values pass through
  // untouched so a save/load cycle is bitwise stable.
  const double sum = model.params.weights.sum();
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("model: weights sum to " +
                                std::to_string(sum) + ", expected 1");
  if (std::abs(sum - 1.0) > 1e-14) model.params.weights /= sum;
  model.params.validate();
  return model;
}

}  // namespace mgfa
