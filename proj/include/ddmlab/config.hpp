#pragma once

// Declarative experiment configuration. The JSON document is the single
// source of truth for a run: every field has a default, unknown keys are
// rejected, and the canonical dump is hashed into every output artifact.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddmlab/clustering.hpp"
#include "ddmlab/datagen.hpp"
#include "ddmlab/ddm.hpp"
#include "ddmlab/encoder.hpp"
#include "ddmlab/ssl_losses.hpp"

namespace ddmlab {

struct DataConfig {
  std::string generator = "colored_shapes";
  int n_train = 5000;
  int n_test = 2000;
  int n_unseen = 2000;
  int num_classes = 10;
  int image_size = 16;
  double noise = 0.1;
  std::vector<data::Tint> palette{data::named_tint("red"), data::named_tint("green")};
  std::vector<data::Tint> unseen_palette{data::named_tint("yellow")};
  std::uint64_t seed = 7;
  std::string cache_dir;
  data::AugmentRecipe augment;
};

struct SslConfig {
  std::string baseline = "simclr";
  ssl::HeadOptions head;
};

struct DdmSection {
  bool enabled = true;
  ddm::DdmConfig losses;
  int critic_hidden = 64;
  double critic_lr = 0.005;
  double critic_slope = 0.2;
  double critic_beta1 = 0.5;
  double critic_beta2 = 0.9;
  // Critic reads the batch-standardized remainder, so shrinking a direction
  // cannot hide it from the critic.
  bool critic_standardize = false;
};

enum class DomainMode { kLabeled, kPseudo };

struct DomainsConfig {
  DomainMode mode = DomainMode::kLabeled;
  int num_domains = 2;
  double warmup_fraction = 0.1;
  int recluster_interval = 10;  // epochs
  double gamma = 0.5;
  /// "ddm_only": outliers still train L_ssl; "all": outliers are dropped
  /// from every loss.
  std::string outlier_policy = "ddm_only";
  /// Representation clustered for pseudo-domains: "full" h, the "prefix",
  /// or "auto" (full h for the first round, the prefix once it has been
  /// trained to separate domains).
  std::string cluster_slice = "auto";
  cluster::Gate gate = cluster::Gate::kLiteral;
  int kmeans_iters = 100;
};

struct TrainerConfig {
  int epochs = 50;
  int batch_size = 128;
  std::optional<double> lr;  // unset: baseline default
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  int checkpoint_every = 1;  // epochs; 0 disables intermediate checkpoints
};

struct ProbeSpec {
  std::string target = "class";  // class | domain
  std::string slice = "full";    // full | prefix | remainder
  std::string split = "train-domain";  // train-domain | unseen-domain
};

struct EvaluationConfig {
  int probe_iters = 300;
  double probe_lr = 0.05;
  double probe_l2 = 1e-4;
  std::vector<ProbeSpec> probes;
  double heatmap_threshold = 1.5;
};

struct ExperimentConfig {
  DataConfig data;
  EncoderSpec encoder;
  SslConfig ssl;
  DdmSection ddm;
  DomainsConfig domains;
  TrainerConfig trainer;
  EvaluationConfig evaluation;
  std::string output_dir = "runs/default";

  /// Encoder learning rate after applying the baseline default.
  double encoder_lr() const;
};

/// Default encoder learning rate for each baseline.
double default_encoder_lr(ssl::Baseline baseline);

struct Violation {
  std::string path;
  std::string message;
};

/// Parses a config document. Unknown keys and type mismatches throw a
/// ConfigError naming every offending field path.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

/// Checks every cross-field invariant; empty result means valid.
std::vector<Violation> validate(const ExperimentConfig& config);

/// Applies "a.b.c=value" overrides to a config document. Values are parsed
/// as JSON when possible and kept as strings otherwise.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

/// Canonical JSON without the location fields (output_dir, data.cache_dir),
/// which never change results.
nlohmann::json semantic_json(const ExperimentConfig& config);

/// Hex FNV-1a of the semantic JSON dump.
std::string config_hash(const ExperimentConfig& config);

std::string to_string(DomainMode mode);

}  // namespace ddmlab
