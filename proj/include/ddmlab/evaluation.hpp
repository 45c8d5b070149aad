#pragma once

// Linear probes on frozen representations, domain probes per slice and
// evaluation on held-out domains.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddmlab/autograd.hpp"
#include "ddmlab/datagen.hpp"
#include "ddmlab/encoder.hpp"

namespace ddmlab::eval {

enum class Slice { kFull, kPrefix, kRemainder };
enum class Target { kClass, kDomain };

Slice parse_slice(const std::string& name);
std::string to_string(Slice s);
Target parse_target(const std::string& name);
std::string to_string(Target t);

/// Columns of `h` seen by a probe: all r, the first k, or the last r - k.
Mat slice_features(const Mat& h, Slice slice, int prefix_dim);

/// Multinomial logistic regression on standardized features, trained
/// full-batch with Adam from a zero start for a fixed number of
/// iterations. No randomness is involved.
struct ProbeOptions {
  int iters = 300;
  double lr = 0.05;
  double l2 = 1e-4;
};

struct DomainAccuracy {
  int domain = 0;
  std::string name;
  int count = 0;
  int correct = 0;
  double top1 = 0;
};

struct ProbeResult {
  std::string target = "class";
  std::string slice = "full";
  std::string split = "train-domain";
  double top1 = 0;  // [0, 100]
  int evaluated = 0;
  int correct = 0;
  std::vector<DomainAccuracy> per_domain;
  std::vector<int> excluded_classes;  // absent from the probe-train split
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const ProbeResult& r);

struct LinearProbe {
  Mat weight;                      // d x C
  Eigen::RowVectorXd bias;         // C
  Eigen::RowVectorXd mean;         // d
  Eigen::RowVectorXd inv_std;      // d
  std::vector<double> loss_history;

  std::vector<int> predict(const Mat& x) const;
};

LinearProbe train_probe(const Mat& x, std::span<const int> labels, int num_classes, const ProbeOptions& opts);

/// Trains on (train_x, train_y), reports top-1 on (test_x, test_y) with a
/// per-domain breakdown keyed by `test_domains` (may be empty). Test samples
/// of classes absent from the training labels are excluded with a warning.
ProbeResult linear_probe(const Mat& train_x, std::span<const int> train_y, const Mat& test_x,
                         std::span<const int> test_y, std::span<const int> test_domains, int num_classes,
                         const ProbeOptions& opts, const std::vector<std::string>& domain_names = {});

/// Frozen-encoder probe on one slice of representations of two splits.
ProbeResult probe_datasets(Encoder& encoder, const data::MultiDomainDataset& train, const data::MultiDomainDataset& test,
                           Target target, Slice slice, const ProbeOptions& opts,
                           const std::vector<std::string>& domain_names = {});

/// linear_probe with domain labels as targets.
ProbeResult domain_probe(const Mat& train_x, std::span<const int> train_domains, const Mat& test_x,
                         std::span<const int> test_domains, int num_domains, const ProbeOptions& opts,
                         const std::vector<std::string>& domain_names = {});

/// Per-colour identity hashes parsed from a colored-shapes recipe id.
std::vector<std::uint64_t> palette_hashes(const std::string& recipe_id);

/// Class probe trained on the unseen-domain train split and scored on its
/// test split. Throws InputError when any unseen domain (or the data
/// itself) overlaps the pretraining provenance.
ProbeResult generalization_eval(Encoder& encoder, const std::string& pretrain_recipe_id, std::uint64_t pretrain_seed,
                                const data::MultiDomainDataset& unseen_train,
                                const data::MultiDomainDataset& unseen_test, Slice slice, const ProbeOptions& opts);

struct ProbeRow {
  std::string model;
  ProbeResult result;
};

/// CSV with one row per model and one column per domain plus the average.
/// `header` lines are written first as "# key=value" comments.
void write_probe_csv(const std::string& path, const std::vector<ProbeRow>& rows,
                     const std::vector<std::pair<std::string, std::string>>& header);

}  // namespace ddmlab::eval
