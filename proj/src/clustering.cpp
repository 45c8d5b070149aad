#include "ddmlab/clustering.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "ddmlab/errors.hpp"
#include "ddmlab/rng.hpp"

namespace ddmlab::cluster {

Gate parse_gate(const std::string& name) {
  if (name == "literal") return Gate::kLiteral;
  if (name == "nearest_pair") return Gate::kNearestPair;
  throw ConfigError("unknown outlier gate '" + name + "' (expected literal or nearest_pair)");
}

std::string to_string(Gate g) { return g == Gate::kLiteral ? "literal" : "nearest_pair"; }

namespace {

std::vector<double> squared_distances(const Eigen::Ref<const Eigen::RowVectorXd>& p, const Mat& centroids) {
  std::vector<double> d(static_cast<std::size_t>(centroids.rows()));
  for (Eigen::Index m = 0; m < centroids.rows(); ++m) d[static_cast<std::size_t>(m)] = (centroids.row(m) - p).squaredNorm();
  return d;
}

}  // namespace

KMeansResult kmeans(const Mat& points, int num_clusters, std::uint64_t seed, int max_iters) {
  const Eigen::Index n = points.rows();
  if (num_clusters < 1) throw ConfigError("kmeans: need at least one cluster");
  if (n < num_clusters) throw InputError("kmeans: fewer points than clusters");
  if (max_iters < 1) throw ConfigError("kmeans: max_iters must be >= 1");

  Rng rng = make_rng(seed, "kmeans");
  KMeansResult out;
  out.centroids.resize(num_clusters, points.cols());

  // k-means++ seeding
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  const auto first = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
  out.centroids.row(0) = points.row(first);
  for (int c = 1; c < num_clusters; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - out.centroids.row(c - 1)).squaredNorm());
      total += d2[i];
    }
    Eigen::Index pick;
    if (total > 0.0) {
      std::discrete_distribution<Eigen::Index> dist(d2.begin(), d2.end());
      pick = dist(rng);
    } else {
      pick = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
    }
    out.centroids.row(c) = points.row(pick);
  }

  out.assignments.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> nearest(static_cast<std::size_t>(n));
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < num_clusters; ++c) {
        const double d = (points.row(i) - out.centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      nearest[static_cast<std::size_t>(i)] = best_d;
      objective += best_d;
      if (out.assignments[static_cast<std::size_t>(i)] != best) {
        out.assignments[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    out.objective.push_back(objective);
    out.iterations = iter + 1;
    if (!changed && iter > 0) break;

    Mat sums = Mat::Zero(num_clusters, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(num_clusters), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(out.assignments[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(out.assignments[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < num_clusters; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        out.centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centroid.
      Eigen::Index far = 0;
      for (Eigen::Index i = 1; i < n; ++i) {
        if (nearest[static_cast<std::size_t>(i)] > nearest[static_cast<std::size_t>(far)]) far = i;
      }
      out.centroids.row(c) = points.row(far);
      nearest[static_cast<std::size_t>(far)] = 0.0;
      ++out.reseeds;
    }
  }
  return out;
}

double distance_ratio(const Eigen::Ref<const Eigen::RowVectorXd>& point, const Mat& centroids, Gate gate) {
  if (centroids.rows() < 2) throw InputError("outlier gate: need at least two centroids");
  std::vector<double> d = squared_distances(point, centroids);
  std::sort(d.begin(), d.end());
  const double lo = d[0];
  const double hi = gate == Gate::kLiteral ? d.back() : d[1];
  if (lo == 0.0) return hi > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  return hi / lo;
}

std::vector<std::uint8_t> outlier_mask(const Mat& points, const Mat& centroids, double epsilon, Gate gate) {
  if (epsilon < 0) throw ConfigError("outlier_mask: epsilon must be >= 0");
  if (points.cols() != centroids.cols()) throw InputError("outlier_mask: dimension mismatch");
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    keep[static_cast<std::size_t>(i)] = distance_ratio(points.row(i), centroids, gate) > (1.0 + epsilon) * (1.0 + kRatioSlack) ? 1 : 0;
  }
  return keep;
}

double epsilon_schedule(int round, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("epsilon_schedule: decay must lie in (0, 1)");
  if (round < 0) throw InputError("epsilon_schedule: round must be >= 0");
  return std::pow(gamma, round);
}

std::vector<int> hungarian(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw InputError("hungarian: cost matrix must be square");
  // Potentials formulation, 1-based internally.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> result(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) result[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  }
  return result;
}

std::vector<int> match_labels(std::span<const int> previous, std::span<const int> current, int num_labels) {
  if (previous.size() != current.size()) throw InputError("match_labels: length mismatch");
  Mat overlap = Mat::Zero(num_labels, num_labels);  // rows: current, cols: previous
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (current[i] < 0 || previous[i] < 0) continue;
    if (current[i] >= num_labels || previous[i] >= num_labels) throw InputError("match_labels: label out of range");
    overlap(current[i], previous[i]) += 1.0;
  }
  return hungarian(-overlap);
}

double matched_accuracy(std::span<const int> predicted, std::span<const int> truth, int num_labels,
                        std::span<const std::uint8_t> keep) {
  if (predicted.size() != truth.size()) throw InputError("matched_accuracy: length mismatch");
  if (!keep.empty() && keep.size() != predicted.size()) throw InputError("matched_accuracy: mask length mismatch");
  std::vector<int> p, t;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!keep.empty() && !keep[i]) continue;
    p.push_back(predicted[i]);
    t.push_back(truth[i]);
  }
  if (p.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::vector<int> perm = match_labels(t, p, num_labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.size(); ++i) correct += perm[static_cast<std::size_t>(p[i])] == t[i];
  return static_cast<double>(correct) / static_cast<double>(p.size());
}

std::vector<int> ClusterState::pseudo_labels() const {
  std::vector<int> out(assignments.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep[i] ? assignments[i] : -1;
  return out;
}

double ClusterState::non_outlier_fraction() const {
  if (keep.empty()) return 0.0;
  std::size_t kept = 0;
  for (auto k : keep) kept += k != 0;
  return static_cast<double>(kept) / static_cast<double>(keep.size());
}

ReclusterOutcome recluster_representations(const Mat& representations, const ClusterState* previous,
                                           const ClusterOptions& options) {
  if (options.num_domains < 2) throw ConfigError("recluster: need at least two domains");
  ReclusterOutcome out;
  const int round = previous ? previous->round + 1 : 0;
  const double eps = epsilon_schedule(round, options.gamma);
  KMeansResult km = kmeans(representations, options.num_domains, options.seed, options.max_iters);
  ClusterState state;
  state.round = round;
  state.epsilon = eps;
  state.keep = outlier_mask(representations, km.centroids, eps, options.gate);
  state.assignments = std::move(km.assignments);
  state.centroids = std::move(km.centroids);

  std::size_t kept = 0;
  for (auto k : state.keep) kept += k != 0;
  if (kept < static_cast<std::size_t>(2 * options.num_domains)) {
    out.warning = "recluster round " + std::to_string(round) + ": only " + std::to_string(kept) +
                  " non-outlier samples; keeping previous clustering";
    return out;
  }

  if (previous && previous->assignments.size() == state.assignments.size()) {
    const std::vector<int> perm = match_labels(previous->pseudo_labels(), state.pseudo_labels(), options.num_domains);
    Mat reordered(state.centroids.rows(), state.centroids.cols());
    for (int c = 0; c < options.num_domains; ++c) reordered.row(perm[static_cast<std::size_t>(c)]) = state.centroids.row(c);
    state.centroids = std::move(reordered);
    for (int& a : state.assignments) a = perm[static_cast<std::size_t>(a)];
  }
  out.state = std::move(state);
  return out;
}

ClusterReport make_report(const ClusterState& state, int num_domains, std::span<const int> true_labels) {
  ClusterReport r;
  r.round = state.round;
  r.epsilon = state.epsilon;
  r.non_outlier_fraction = state.non_outlier_fraction();
  r.cluster_sizes.assign(static_cast<std::size_t>(num_domains), 0);
  for (std::size_t i = 0; i < state.assignments.size(); ++i) {
    if (state.keep[i]) ++r.cluster_sizes[static_cast<std::size_t>(state.assignments[i])];
  }
  if (!true_labels.empty()) {
    const double acc = matched_accuracy(state.assignments, true_labels, num_domains, state.keep);
    if (!std::isnan(acc)) r.accuracy = acc;
  }
  return r;
}

nlohmann::json to_json(const ClusterReport& report) {
  nlohmann::json j;
  j["round"] = report.round;
  j["epsilon"] = report.epsilon;
  j["non_outlier_fraction"] = report.non_outlier_fraction;
  j["cluster_sizes"] = report.cluster_sizes;
  if (report.accuracy) j["accuracy"] = *report.accuracy;
  return j;
}

ClusterReport report_from_json(const nlohmann::json& j) {
  ClusterReport r;
  r.round = j.at("round").get<int>();
  r.epsilon = j.at("epsilon").get<double>();
  r.non_outlier_fraction = j.at("non_outlier_fraction").get<double>();
  r.cluster_sizes = j.at("cluster_sizes").get<std::vector<int>>();
  if (j.contains("accuracy")) r.accuracy = j.at("accuracy").get<double>();
  return r;
}

}  // namespace ddmlab::cluster
