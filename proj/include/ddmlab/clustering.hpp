#pragma once

// Pseudo-domain discovery for runs without domain labels: K-means over
// encoder representations, the ratio-based outlier gate, and the
// exponentially decaying outlier threshold.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddmlab/autograd.hpp"

namespace ddmlab::cluster {

/// kLiteral: max over all centroid pairs of d_m^2 / d_n^2 (= d_max^2 / d_min^2).
/// kNearestPair: second-nearest over nearest. Identical for M = 2.
enum class Gate { kLiteral, kNearestPair };

Gate parse_gate(const std::string& name);
std::string to_string(Gate g);

struct KMeansResult {
  Mat centroids;                  // M x r
  std::vector<int> assignments;   // nearest centroid per row
  std::vector<double> objective;  // sum of squared distances after each assignment step
  int iterations = 0;
  int reseeds = 0;                // empty clusters moved to the farthest point
};

/// k-means++ seeding under `seed`, then Lloyd iterations until the
/// assignments stop changing or `max_iters` is reached.
KMeansResult kmeans(const Mat& points, int num_clusters, std::uint64_t seed, int max_iters);

/// Squared-distance ratio used by the gate; +inf when the sample coincides
/// with a centroid and some other centroid is farther away.
double distance_ratio(const Eigen::Ref<const Eigen::RowVectorXd>& point, const Mat& centroids, Gate gate);

/// Relative slack on the gate so that points equidistant up to rounding
/// (exact midpoints) stay outliers at epsilon = 0.
inline constexpr double kRatioSlack = 1e-9;

/// true = keep (not an outlier): ratio > (1 + epsilon)(1 + kRatioSlack).
std::vector<std::uint8_t> outlier_mask(const Mat& points, const Mat& centroids, double epsilon,
                                       Gate gate = Gate::kLiteral);

/// epsilon(round) = gamma^round, starting from 1. gamma must lie in (0, 1).
double epsilon_schedule(int round, double gamma);

/// Minimum-cost perfect assignment for a square cost matrix; result[row] = col.
std::vector<int> hungarian(const Mat& cost);

/// Permutation perm[new_label] = old_label maximizing agreement between the
/// two labelings over samples where both are >= 0.
std::vector<int> match_labels(std::span<const int> previous, std::span<const int> current, int num_labels);

/// Accuracy after the best label permutation, over samples with keep != 0
/// (all samples when keep is empty). Returns NaN when nothing is kept.
double matched_accuracy(std::span<const int> predicted, std::span<const int> truth, int num_labels,
                        std::span<const std::uint8_t> keep = {});

struct ClusterState {
  Mat centroids;
  double epsilon = 1.0;
  int round = 0;
  std::vector<int> assignments;
  std::vector<std::uint8_t> keep;

  /// Assignments with outliers replaced by -1.
  std::vector<int> pseudo_labels() const;
  double non_outlier_fraction() const;
};

struct ClusterOptions {
  int num_domains = 2;
  double gamma = 0.5;
  Gate gate = Gate::kLiteral;
  int max_iters = 100;
  std::uint64_t seed = 0;
};

struct ReclusterOutcome {
  std::optional<ClusterState> state;  // empty when the round was aborted
  std::string warning;
};

/// One clustering round over fixed representations. The round index is
/// previous->round + 1 (0 without a previous state); labels are aligned to
/// the previous round by maximum overlap.
ReclusterOutcome recluster_representations(const Mat& representations, const ClusterState* previous,
                                           const ClusterOptions& options);

struct ClusterReport {
  int round = 0;
  double epsilon = 0;
  double non_outlier_fraction = 0;
  std::vector<int> cluster_sizes;    // non-outlier members per cluster
  std::optional<double> accuracy;    // permutation-matched, non-outliers only
};

ClusterReport make_report(const ClusterState& state, int num_domains, std::span<const int> true_labels = {});
nlohmann::json to_json(const ClusterReport& report);
ClusterReport report_from_json(const nlohmann::json& j);

}  // namespace ddmlab::cluster
