#pragma once

// Alternating descent-ascent training of encoder + SSL head against the
// domain critic, the pseudo-label loop for runs without domain labels,
// metrics logging and checkpoints.
//
// Checkpoint layout (little-endian):
//   char[8] magic "DDMCKPT1", u32 version
//   str     canonical config JSON, str config hash, u64 seed, str overrides JSON
//   str     encoder spec JSON
//   str     training data provenance (recipe id), u64 data seed, u64 data checksum
//   u64 n, then n x (str name, matrix)          named parameter tensors
//   2 x Adam state: i64 t, u64 n, n x (matrix m, matrix v)   encoder, critic
//   i64 step, i32 next epoch, i64 total steps
//   u64 n, then n x (str stream, str state)     rng engines
//   u8 has_cluster [matrix centroids, f64 epsilon, i32 round, i32[] assignments, u8[] keep]
//   f64[] label prior weights

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddmlab/clustering.hpp"
#include "ddmlab/config.hpp"
#include "ddmlab/datagen.hpp"
#include "ddmlab/ddm.hpp"
#include "ddmlab/encoder.hpp"
#include "ddmlab/optim.hpp"
#include "ddmlab/rng.hpp"
#include "ddmlab/ssl_losses.hpp"

namespace ddmlab::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr int kMetricsVersion = 1;

/// Two augmented views per sample. Both views share the sample's domain
/// label; -1 marks an unknown label or a pseudo-label outlier.
struct ViewBatch {
  Mat view_a;
  Mat view_b;
  std::vector<int> sample_ids;
  std::vector<int> domain_labels;
  std::int64_t batch_id = 0;

  int size() const { return static_cast<int>(sample_ids.size()); }
};

struct StepMetrics {
  std::int64_t step = 0;
  int epoch = 0;
  std::int64_t batch_id = 0;
  std::string phase;  // baseline | warmup | ddm
  double ssl = 0;
  double d_var = 0;   // per-view mean of the prefix loss
  double d_invar = 0;
  double gp = 0;
  double total_encoder = 0;
  double total_critic = 0;
  double lr = 0;
  double critic_lr = 0;
  int anchors_skipped = 0;
  bool ddm_skipped = false;  // fewer than two domains among labelled views
};

/// Step record for the metrics log. Warm-up and baseline records carry only
/// the ssl loss.
nlohmann::json to_json(const StepMetrics& m);

enum class Split { kTrain, kTest, kUnseenTrain, kUnseenTest };

data::ColoredShapesRecipe split_recipe(const ExperimentConfig& config, Split split);
std::uint64_t split_seed(const ExperimentConfig& config, Split split);
/// Generates (or loads from data.cache_dir) one dataset split.
data::MultiDomainDataset load_split(const ExperimentConfig& config, Split split);

struct TrainingProvenance {
  std::string recipe_id;
  std::uint64_t seed = 0;
  std::uint64_t checksum = 0;
};

class Trainer {
 public:
  explicit Trainer(const ExperimentConfig& config);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const ExperimentConfig& config() const { return config_; }
  Encoder& encoder() { return encoder_; }
  const Encoder& encoder() const { return encoder_; }
  ssl::SslHead& head() { return head_; }
  ddm::Critic& critic() { return critic_; }
  optim::Adam& encoder_optimizer() { return enc_opt_; }
  optim::Adam& critic_optimizer() { return critic_opt_; }
  RngStreams& rng() { return rng_; }

  /// With any DDM weight active the SSL head reads the remainder h^p; the
  /// bare baseline (and the all-zero-weight reduction) reads the full h.
  bool ssl_on_remainder() const { return ssl_on_remainder_; }

  /// Horizon of both cosine schedules.
  void set_total_steps(std::int64_t total) { total_steps_ = total; }
  std::int64_t total_steps() const { return total_steps_; }
  std::int64_t step() const { return step_; }
  int epoch() const { return epoch_; }
  void set_epoch(int e) { epoch_ = e; }

  double encoder_lr_now() const;
  double critic_lr_now() const;

  /// Shuffles `pool` with the data stream and cuts it into full batches.
  std::vector<std::vector<int>> epoch_batches(std::span<const int> pool, int batch_size);
  /// Augments the given samples. Views depend only on (run seed, epoch,
  /// sample id), never on the data stream position.
  ViewBatch make_batch(const data::MultiDomainDataset& ds, std::span<const int> ids, std::span<const int> domain_labels,
                       int epoch, std::int64_t batch_id) const;

  /// L_ssl only, no critic, no DDM terms.
  StepMetrics baseline_step(const ViewBatch& batch);
  /// L_ssl only through the same head as DDM steps (pseudo-label warm-up).
  StepMetrics warmup_step(const ViewBatch& batch);
  /// critic_steps ascent updates of the critic, then one encoder descent
  /// update on l_ssl - lambda1 l_d_var + lambda2 l_d_invar. Throws
  /// NumericalError on a non-finite loss.
  StepMetrics train_step(const ViewBatch& batch);

  void set_label_prior(ddm::LabelPrior prior) { prior_ = std::move(prior); }
  const ddm::LabelPrior& label_prior() const { return prior_; }
  const std::optional<cluster::ClusterState>& cluster_state() const { return cluster_; }
  void set_cluster_state(std::optional<cluster::ClusterState> s) { cluster_ = std::move(s); }

  /// One clustering round over the unaugmented dataset. Returns the report
  /// (with accuracy when `true_labels` is non-empty) or nullopt when the
  /// round was aborted.
  std::optional<cluster::ClusterReport> recluster(const data::MultiDomainDataset& ds, std::span<const int> true_labels,
                                                  std::string* warning = nullptr);

  /// Checksum over encoder, head and critic parameters.
  std::uint64_t checksum() const;

  TrainingProvenance provenance;
  std::vector<std::string> overrides;

  void save_checkpoint(const std::string& path) const;
  static std::unique_ptr<Trainer> load_checkpoint(const std::string& path);

 private:
  struct Forward;
  Forward forward_views(ag::Tape& tape, const ViewBatch& batch);
  StepMetrics ssl_only_step(const ViewBatch& batch, const char* phase);
  void check_finite(const StepMetrics& m) const;
  std::vector<Parameter*> all_parameters();
  std::vector<const Parameter*> all_parameters() const;

  ExperimentConfig config_;
  bool ssl_on_remainder_ = false;
  RngStreams rng_;
  Encoder encoder_;
  ssl::SslHead head_;
  ddm::Critic critic_;
  optim::Adam enc_opt_;
  optim::Adam critic_opt_;
  ddm::LabelPrior prior_;
  std::optional<cluster::ClusterState> cluster_;
  std::int64_t step_ = 0;
  std::int64_t total_steps_ = 1;
  int epoch_ = 0;
};

/// Appends JSON lines; the first line of every log is a header with the
/// config hash and seed.
class JsonlWriter {
 public:
  JsonlWriter(const std::string& path, const nlohmann::json& header, bool append = false);
  void write(const nlohmann::json& record);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

nlohmann::json artifact_header(const ExperimentConfig& config, const std::vector<std::string>& overrides,
                               const std::string& kind);

/// Exclusive lock on an output directory, released on destruction.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::string& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::string path_;
};

struct FitOptions {
  std::vector<std::string> overrides;
  std::string resume;   // checkpoint to continue from
  bool run_probes = true;
  std::function<void(const StepMetrics&)> on_step;
};

struct FitResult {
  std::string output_dir;
  std::string checkpoint;
  std::string metrics;
  std::string cluster_report;  // empty in labeled mode
  std::int64_t steps = 0;
  std::uint64_t parameter_checksum = 0;
  int skipped_batches = 0;
};

/// Full training run: validates, builds data, trains, checkpoints every
/// `trainer.checkpoint_every` epochs and at the end, then runs the
/// configured probes.
FitResult fit(const ExperimentConfig& config, const FitOptions& options = {});
/// Same with an explicit training set (domain labels are ignored in pseudo
/// mode except for reporting).
FitResult fit(const ExperimentConfig& config, const data::MultiDomainDataset& train_set, const FitOptions& options);

}  // namespace ddmlab::train
