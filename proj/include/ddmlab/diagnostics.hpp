#pragma once

// Representation-structure analysis: per (domain, class) mean vectors,
// most-activating features, cross-domain overlap and embedding export.
//
// Embedding file (text, version 1):
//   # ddmlab-embeddings v1
//   # key=value            (slice, width, config_hash, seed, ...)
//   id,class,domain,f0,f1,...
//   one row per sample; values printed with 17 significant digits so a
//   reload reproduces every double exactly.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddmlab/autograd.hpp"
#include "ddmlab/evaluation.hpp"

namespace ddmlab::diag {

inline constexpr int kEmbeddingVersion = 1;

struct Cell {
  int domain = 0;
  int class_label = 0;
  int count = 0;
};

struct FeatureActivationReport {
  Mat means;                // one L2-normalized row per non-empty cell
  std::vector<Cell> cells;  // row order: domain-major, then class
  std::vector<std::string> warnings;
};

/// Per-(domain, class) mean followed by row L2 normalization. Empty cells
/// are omitted with a warning.
FeatureActivationReport class_domain_means(const Mat& reps, std::span<const int> class_labels,
                                           std::span<const int> domain_labels, int num_domains, int num_classes);

/// Per row: features whose value deviates from the across-row feature mean
/// by more than `threshold` standard deviations.
std::vector<std::vector<int>> row_activating_features(const FeatureActivationReport& report, double threshold);
/// Union of the per-row sets, sorted.
std::vector<int> most_activating_features(const FeatureActivationReport& report, double threshold);

/// Jaccard index; two empty sets count as identical (1.0).
double jaccard(std::span<const int> a, std::span<const int> b);

/// Mean over classes (and domain pairs) of the Jaccard overlap between the
/// activating-feature sets of the same class in different domains,
/// restricted to the slice's feature range.
double domain_overlap_score(const FeatureActivationReport& report, double threshold, eval::Slice slice, int prefix_dim);

/// Rows = cells, columns = the selected feature indices.
void write_heatmap_csv(const std::string& path, const FeatureActivationReport& report, std::span<const int> features,
                       const std::vector<std::pair<std::string, std::string>>& header,
                       const std::vector<std::string>& domain_names = {});

struct Embeddings {
  int version = 0;
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<int> ids;
  std::vector<int> class_labels;
  std::vector<int> domain_labels;
  Mat values;
};

void export_embeddings(const std::string& path, const Mat& reps, std::span<const int> class_labels,
                       std::span<const int> domain_labels, eval::Slice slice, int prefix_dim,
                       const std::vector<std::pair<std::string, std::string>>& header);
Embeddings load_embeddings(const std::string& path);

}  // namespace ddmlab::diag
