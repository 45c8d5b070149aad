#include "ddmlab/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ddmlab/errors.hpp"

namespace ddmlab::diag {

FeatureActivationReport class_domain_means(const Mat& reps, std::span<const int> class_labels,
                                           std::span<const int> domain_labels, int num_domains, int num_classes) {
  const Eigen::Index n = reps.rows();
  if (static_cast<Eigen::Index>(class_labels.size()) != n || static_cast<Eigen::Index>(domain_labels.size()) != n) {
    throw InputError("class_domain_means: label count mismatch");
  }
  Mat sums = Mat::Zero(static_cast<Eigen::Index>(num_domains) * num_classes, reps.cols());
  std::vector<int> counts(static_cast<std::size_t>(num_domains * num_classes), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int d = domain_labels[static_cast<std::size_t>(i)];
    const int c = class_labels[static_cast<std::size_t>(i)];
    if (d < 0 || d >= num_domains || c < 0 || c >= num_classes) throw InputError("class_domain_means: label out of range");
    sums.row(d * num_classes + c) += reps.row(i);
    ++counts[static_cast<std::size_t>(d * num_classes + c)];
  }
  FeatureActivationReport r;
  std::vector<Eigen::Index> keep;
  for (int d = 0; d < num_domains; ++d) {
    for (int c = 0; c < num_classes; ++c) {
      const int cnt = counts[static_cast<std::size_t>(d * num_classes + c)];
      if (cnt == 0) {
        r.warnings.push_back("empty cell (domain " + std::to_string(d) + ", class " + std::to_string(c) + ") omitted");
        log_warning(r.warnings.back());
        continue;
      }
      keep.push_back(d * num_classes + c);
      r.cells.push_back({d, c, cnt});
    }
  }
  r.means.resize(static_cast<Eigen::Index>(keep.size()), reps.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    Eigen::RowVectorXd m = sums.row(keep[i]) / static_cast<double>(r.cells[i].count);
    const double norm = m.norm();
    r.means.row(static_cast<Eigen::Index>(i)) = norm > 1e-12 ? Eigen::RowVectorXd(m / norm) : m;
  }
  return r;
}

std::vector<std::vector<int>> row_activating_features(const FeatureActivationReport& report, double threshold) {
  if (!(threshold > 0)) throw ConfigError("most_activating_features: threshold must be positive");
  const Mat& x = report.means;
  std::vector<std::vector<int>> out(static_cast<std::size_t>(x.rows()));
  if (x.rows() == 0) return out;
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Mat dev = x.rowwise() - mu;
  const Eigen::RowVectorXd sigma = (dev.colwise().squaredNorm() / static_cast<double>(x.rows())).cwiseSqrt();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (!(sigma(j) > 0)) continue;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (std::abs(dev(i, j)) > threshold * sigma(j)) out[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
    }
  }
  return out;
}

std::vector<int> most_activating_features(const FeatureActivationReport& report, double threshold) {
  std::vector<int> all;
  for (const auto& row : row_activating_features(report, threshold)) all.insert(all.end(), row.begin(), row.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

double jaccard(std::span<const int> a, std::span<const int> b) {
  std::vector<int> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  x.erase(std::unique(x.begin(), x.end()), x.end());
  std::sort(y.begin(), y.end());
  y.erase(std::unique(y.begin(), y.end()), y.end());
  std::vector<int> inter, uni;
  std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(inter));
  std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(uni));
  if (uni.empty()) return 1.0;
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

double domain_overlap_score(const FeatureActivationReport& report, double threshold, eval::Slice slice, int prefix_dim) {
  const auto sets = row_activating_features(report, threshold);
  const int r = static_cast<int>(report.means.cols());
  int lo = 0, hi = r;
  if (slice == eval::Slice::kPrefix) hi = prefix_dim;
  if (slice == eval::Slice::kRemainder) lo = prefix_dim;
  if (slice != eval::Slice::kFull && (prefix_dim <= 0 || prefix_dim >= r)) {
    throw InputError("domain_overlap_score: prefix width must satisfy 0 < k < r");
  }
  auto restrict = [lo, hi](const std::vector<int>& s) {
    std::vector<int> out;
    for (int j : s) {
      if (j >= lo && j < hi) out.push_back(j);
    }
    return out;
  };

  int max_class = -1, num_domains = 0;
  for (const auto& c : report.cells) {
    max_class = std::max(max_class, c.class_label);
    num_domains = std::max(num_domains, c.domain + 1);
  }
  if (num_domains < 2) throw InputError("domain_overlap_score: needs at least two domains");
  double total = 0;
  int classes = 0;
  for (int c = 0; c <= max_class; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
      if (report.cells[i].class_label == c) rows.push_back(i);
    }
    if (rows.size() < 2) continue;
    double sum = 0;
    int pairs = 0;
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        sum += jaccard(restrict(sets[rows[a]]), restrict(sets[rows[b]]));
        ++pairs;
      }
    }
    total += sum / pairs;
    ++classes;
  }
  if (classes == 0) throw InputError("domain_overlap_score: no class is present in two domains");
  return total / classes;
}

void write_heatmap_csv(const std::string& path, const FeatureActivationReport& report, std::span<const int> features,
                       const std::vector<std::pair<std::string, std::string>>& header,
                       const std::vector<std::string>& domain_names) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write heatmap '" + path + "'");
  for (const auto& [k, v] : header) out << "# " << k << "=" << v << "\n";
  out << "domain,class";
  for (int j : features) out << ",f" << j;
  out << "\n";
  char buf[32];
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const Cell& c = report.cells[i];
    const bool named = c.domain >= 0 && static_cast<std::size_t>(c.domain) < domain_names.size();
    out << (named ? domain_names[static_cast<std::size_t>(c.domain)] : std::to_string(c.domain)) << "," << c.class_label;
    for (int j : features) {
      if (j < 0 || j >= report.means.cols()) throw InputError("heatmap: feature index out of range");
      std::snprintf(buf, sizeof(buf), "%.6f", report.means(static_cast<Eigen::Index>(i), j));
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

void export_embeddings(const std::string& path, const Mat& reps, std::span<const int> class_labels,
                       std::span<const int> domain_labels, eval::Slice slice, int prefix_dim,
                       const std::vector<std::pair<std::string, std::string>>& header) {
  const Mat v = eval::slice_features(reps, slice, prefix_dim);
  if (static_cast<Eigen::Index>(class_labels.size()) != v.rows()) throw InputError("export_embeddings: label count mismatch");
  if (!domain_labels.empty() && domain_labels.size() != class_labels.size()) {
    throw InputError("export_embeddings: domain label count mismatch");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings '" + path + "'");
  out << "# ddmlab-embeddings v" << kEmbeddingVersion << "\n";
  out << "# slice=" << eval::to_string(slice) << "\n# width=" << v.cols() << "\n";
  for (const auto& [k, val] : header) out << "# " << k << "=" << val << "\n";
  out << "id,class,domain";
  for (Eigen::Index j = 0; j < v.cols(); ++j) out << ",f" << j;
  out << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    out << i << "," << class_labels[static_cast<std::size_t>(i)] << ","
        << (domain_labels.empty() ? -1 : domain_labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", v(i, j));
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

Embeddings load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings '" + path + "'");
  Embeddings e;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ddmlab-embeddings v", 0) != 0) {
    throw FormatError("'" + path + "' is not an embedding export");
  }
  e.version = std::stoi(line.substr(21));
  if (e.version != kEmbeddingVersion) throw FormatError("embedding format version " + std::to_string(e.version) + " is not supported");
  std::vector<std::vector<double>> rows;
  bool seen_columns = false;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) e.header.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    if (!seen_columns) {
      seen_columns = true;
      width = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 2;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != width + 3) throw FormatError("embedding row has the wrong number of columns");
    e.ids.push_back(std::stoi(cells[0]));
    e.class_labels.push_back(std::stoi(cells[1]));
    e.domain_labels.push_back(std::stoi(cells[2]));
    std::vector<double> row(width);
    for (std::size_t j = 0; j < width; ++j) {
      const std::string& s = cells[j + 3];
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), row[j]);
      if (ec != std::errc() || p != s.data() + s.size()) throw FormatError("bad number '" + s + "' in embeddings");
    }
    rows.push_back(std::move(row));
  }
  e.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) e.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return e;
}

}  // namespace ddmlab::diag
