#include "ddmlab/trainer.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ddmlab/binary_io.hpp"
#include "ddmlab/errors.hpp"
#include "ddmlab/evaluation.hpp"

namespace ddmlab::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'D', 'M', 'C', 'K', 'P', 'T', '1'};

bool finite(double v) { return std::isfinite(v); }

constexpr double kStandardizeEps = 1e-5;

// Same transform as ag::col_standardize on plain values.
Mat standardize_columns(const Mat& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  Mat c = x.rowwise() - mean;
  const Eigen::RowVectorXd var = c.colwise().squaredNorm() / static_cast<double>(x.rows());
  return c.array().rowwise() / (var.array() + kStandardizeEps).sqrt();
}

void write_adam(BinaryWriter& w, const optim::Adam& opt) {
  w.pod<std::int64_t>(opt.steps());
  w.pod<std::uint64_t>(opt.first_moments().size());
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    w.matrix(opt.first_moments()[i]);
    w.matrix(opt.second_moments()[i]);
  }
}

void read_adam(BinaryReader& r, optim::Adam& opt, const std::string& path) {
  opt.set_steps(r.pod<std::int64_t>());
  const auto n = r.pod<std::uint64_t>();
  if (n != opt.first_moments().size()) throw FormatError("optimizer state size mismatch in '" + path + "'");
  for (std::size_t i = 0; i < n; ++i) {
    Mat m = r.matrix();
    Mat v = r.matrix();
    if (m.rows() != opt.first_moments()[i].rows() || m.cols() != opt.first_moments()[i].cols() ||
        v.rows() != m.rows() || v.cols() != m.cols()) {
      throw FormatError("optimizer moment shape mismatch in '" + path + "'");
    }
    opt.first_moments()[i] = std::move(m);
    opt.second_moments()[i] = std::move(v);
  }
}

json spec_json(const EncoderSpec& s) {
  return {{"architecture", s.architecture},
          {"rep_dim", s.rep_dim},
          {"prefix_dim", s.prefix_dim},
          {"channels", s.channels},
          {"hidden_dim", s.hidden_dim},
          {"input", {s.input.channels, s.input.height, s.input.width}},
          {"seed", s.seed}};
}

}  // namespace

json to_json(const StepMetrics& m) {
  json j = {{"type", "step"}, {"step", m.step}, {"epoch", m.epoch}, {"batch", m.batch_id}, {"phase", m.phase},
            {"ssl", m.ssl}};
  if (m.phase == "ddm") {
    j["d_var"] = m.d_var;
    j["d_invar"] = m.d_invar;
    j["gp"] = m.gp;
    j["total_encoder"] = m.total_encoder;
    j["total_critic"] = m.total_critic;
    j["critic_lr"] = m.critic_lr;
    j["anchors_skipped"] = m.anchors_skipped;
    j["ddm_skipped"] = m.ddm_skipped;
  }
  j["lr"] = m.lr;
  return j;
}

data::ColoredShapesRecipe split_recipe(const ExperimentConfig& c, Split split) {
  data::ColoredShapesRecipe r;
  r.num_classes = c.data.num_classes;
  r.image_size = c.data.image_size;
  r.noise = c.data.noise;
  const bool unseen = split == Split::kUnseenTrain || split == Split::kUnseenTest;
  r.palette = unseen ? c.data.unseen_palette : c.data.palette;
  switch (split) {
    case Split::kTrain:
      r.n = c.data.n_train;
      break;
    case Split::kTest:
      r.n = c.data.n_test;
      break;
    case Split::kUnseenTrain:
    case Split::kUnseenTest:
      r.n = c.data.n_unseen;
      break;
  }
  return r;
}

std::uint64_t split_seed(const ExperimentConfig& c, Split split) {
  if (split == Split::kTrain) return c.data.seed;
  return make_rng(c.data.seed, "split", static_cast<std::uint64_t>(split))();
}

data::MultiDomainDataset load_split(const ExperimentConfig& c, Split split) {
  const auto recipe = split_recipe(c, split);
  if (recipe.n <= 0) throw ConfigError("requested dataset split is empty");
  if (recipe.palette.empty()) throw ConfigError("requested dataset split has no colours");
  data::MultiDomainDataset ds = data::load_or_generate(c.data.cache_dir, recipe, split_seed(c, split));
  return ds;
}

// ---------------------------------------------------------------------------

struct Trainer::Forward {
  ag::Var h_a;
  ag::Var h_b;
  ag::Var l_ssl;
};

Trainer::Trainer(const ExperimentConfig& config) : config_(config), rng_(config.trainer.seed) {
  ssl_on_remainder_ = config_.ddm.enabled && (config_.ddm.losses.lambda_var > 0 || config_.ddm.losses.lambda_invar > 0);
  EncoderSpec spec = config_.encoder;
  spec.input = data::ImageShape{3, config_.data.image_size, config_.data.image_size};
  spec.seed = config_.trainer.seed;
  encoder_ = Encoder(spec, rng_.get(RngStreams::kInit));
  const int head_in = ssl_on_remainder_ ? spec.remainder_dim() : spec.rep_dim;
  head_ = ssl::SslHead(ssl::parse_baseline(config_.ssl.baseline), head_in, config_.ssl.head, rng_.get(RngStreams::kInit));
  const int m = std::max(config_.domains.num_domains, 1);
  critic_ = ddm::Critic(spec.remainder_dim(), config_.ddm.critic_hidden, m, rng_.get(RngStreams::kCriticInit),
                        config_.ddm.critic_slope);

  std::vector<Parameter*> enc_params = encoder_.parameters();
  for (Parameter* p : head_.parameters()) enc_params.push_back(p);
  optim::AdamOptions eo;
  eo.lr = config_.encoder_lr();
  eo.beta1 = config_.trainer.beta1;
  eo.beta2 = config_.trainer.beta2;
  eo.weight_decay = config_.trainer.weight_decay;
  enc_opt_ = optim::Adam(std::move(enc_params), eo);

  optim::AdamOptions co;
  co.lr = config_.ddm.critic_lr;
  co.beta1 = config_.ddm.critic_beta1;
  co.beta2 = config_.ddm.critic_beta2;
  critic_opt_ = optim::Adam(critic_.parameters(), co);

  prior_ = ddm::LabelPrior(std::vector<double>(static_cast<std::size_t>(m), 1.0));
}

double Trainer::encoder_lr_now() const { return optim::cosine_lr(enc_opt_.options().lr, step_, total_steps_); }
double Trainer::critic_lr_now() const { return optim::cosine_lr(critic_opt_.options().lr, step_, total_steps_); }

std::vector<std::vector<int>> Trainer::epoch_batches(std::span<const int> pool, int batch_size) {
  std::vector<int> order(pool.begin(), pool.end());
  std::shuffle(order.begin(), order.end(), rng_.get(RngStreams::kData));
  std::vector<std::vector<int>> out;
  if (order.size() < static_cast<std::size_t>(batch_size)) {
    if (order.size() >= 2) out.push_back(order);
    return out;
  }
  for (std::size_t start = 0; start + static_cast<std::size_t>(batch_size) <= order.size(); start += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(start + batch_size));
  }
  return out;
}

ViewBatch Trainer::make_batch(const data::MultiDomainDataset& ds, std::span<const int> ids,
                              std::span<const int> domain_labels, int epoch, std::int64_t batch_id) const {
  const std::uint64_t seed = make_rng(config_.trainer.seed, "augment", static_cast<std::uint64_t>(epoch))();
  const auto d = static_cast<Eigen::Index>(ds.shape.size());
  ViewBatch b;
  b.batch_id = batch_id;
  b.view_a.resize(static_cast<Eigen::Index>(ids.size()), d);
  b.view_b.resize(static_cast<Eigen::Index>(ids.size()), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const data::ViewPair vp = data::two_view_augment(ds, ids[i], config_.data.augment, seed);
    for (Eigen::Index j = 0; j < d; ++j) {
      b.view_a(static_cast<Eigen::Index>(i), j) = vp.view_a[static_cast<std::size_t>(j)];
      b.view_b(static_cast<Eigen::Index>(i), j) = vp.view_b[static_cast<std::size_t>(j)];
    }
    b.sample_ids.push_back(ids[i]);
    b.domain_labels.push_back(domain_labels.empty() ? -1 : domain_labels[static_cast<std::size_t>(ids[i])]);
  }
  return b;
}

Trainer::Forward Trainer::forward_views(ag::Tape& tape, const ViewBatch& batch) {
  Forward f;
  f.h_a = encoder_.forward(tape, batch.view_a);
  f.h_b = encoder_.forward(tape, batch.view_b);
  if (ssl_on_remainder_) {
    const int k = config_.encoder.prefix_dim;
    const int rest = config_.encoder.rep_dim - k;
    f.l_ssl = head_.loss(tape, ag::slice_cols(f.h_a, k, rest), ag::slice_cols(f.h_b, k, rest));
  } else {
    f.l_ssl = head_.loss(tape, f.h_a, f.h_b);
  }
  return f;
}

void Trainer::check_finite(const StepMetrics& m) const {
  if (finite(m.ssl) && finite(m.d_var) && finite(m.d_invar) && finite(m.gp) && finite(m.total_encoder) &&
      finite(m.total_critic)) {
    return;
  }
  std::ostringstream os;
  os << "non-finite loss at step " << m.step << " (batch " << m.batch_id << "): ssl=" << m.ssl << " d_var=" << m.d_var
     << " d_invar=" << m.d_invar << " gp=" << m.gp << " total_encoder=" << m.total_encoder
     << " total_critic=" << m.total_critic;
  throw NumericalError(os.str());
}

StepMetrics Trainer::ssl_only_step(const ViewBatch& batch, const char* phase) {
  if (batch.size() < 2) throw InputError("train step: batch needs at least two samples");
  StepMetrics m;
  m.step = step_;
  m.epoch = epoch_;
  m.batch_id = batch.batch_id;
  m.phase = phase;
  m.lr = encoder_lr_now();
  m.critic_lr = critic_lr_now();

  ag::Tape tape;
  Forward f = forward_views(tape, batch);
  m.ssl = f.l_ssl.item();
  m.total_encoder = m.ssl;
  check_finite(m);
  enc_opt_.zero_grad();
  tape.backward(f.l_ssl);
  enc_opt_.step(m.lr);
  ++step_;
  return m;
}

StepMetrics Trainer::baseline_step(const ViewBatch& batch) { return ssl_only_step(batch, "baseline"); }
StepMetrics Trainer::warmup_step(const ViewBatch& batch) { return ssl_only_step(batch, "warmup"); }

StepMetrics Trainer::train_step(const ViewBatch& batch) {
  if (batch.size() < 2) throw InputError("train step: batch needs at least two samples");
  if (batch.domain_labels.size() != batch.sample_ids.size()) throw InputError("train step: missing domain labels");
  StepMetrics m;
  m.step = step_;
  m.epoch = epoch_;
  m.batch_id = batch.batch_id;
  m.phase = "ddm";
  m.lr = encoder_lr_now();
  m.critic_lr = critic_lr_now();
  const auto& dc = config_.ddm.losses;
  const int k = config_.encoder.prefix_dim;
  const int rest = config_.encoder.rep_dim - k;

  ag::Tape tape;
  Forward f = forward_views(tape, batch);
  m.ssl = f.l_ssl.item();
  ag::Var h = ag::concat_rows(f.h_a, f.h_b);

  // Both views of a sample carry its label; unlabelled views sit out the
  // DDM terms.
  const int b = batch.size();
  std::vector<int> active, labels;
  std::set<int> present;
  for (int v = 0; v < 2 * b; ++v) {
    const int y = batch.domain_labels[static_cast<std::size_t>(v % b)];
    if (y < 0) continue;
    if (y >= critic_.num_domains()) throw InputError("train step: domain label out of range");
    active.push_back(v);
    labels.push_back(y);
    present.insert(y);
  }

  ag::Var total = f.l_ssl;
  if (present.size() < 2) {
    m.ddm_skipped = true;
    m.total_encoder = m.ssl;
    log_warning("batch " + std::to_string(batch.batch_id) + ": fewer than two domains, DDM terms skipped");
  } else {
    Mat hp_values(static_cast<Eigen::Index>(active.size()), rest);
    for (std::size_t i = 0; i < active.size(); ++i) {
      hp_values.row(static_cast<Eigen::Index>(i)) = h.value().row(active[i]).tail(rest);
    }
    if (config_.ddm.critic_standardize) hp_values = standardize_columns(hp_values);

    // Ascent on l_d_invar - gp_weight * gp, run as descent on its negation,
    // on representations computed before this step's encoder update.
    for (int s = 0; s < dc.critic_steps; ++s) {
      ag::Tape ct;
      ag::Var hp = ct.constant(hp_values);
      ddm::DomainInvariantLoss inv =
          ddm::loss_domain_invariant(critic_, ct, hp, labels, prior_, rng_.get(RngStreams::kYRand));
      ddm::GradientPenalty gp = ddm::gradient_penalty(critic_, ct, hp_values, labels, rng_.get(RngStreams::kGp));
      ag::Var neg = ag::sub(ag::scale(gp.value, dc.gp_weight), inv.value);
      m.gp = gp.value.item();
      m.total_critic = -neg.item();
      if (!finite(m.total_critic) || !finite(m.gp)) check_finite(m);
      critic_opt_.zero_grad();
      ct.backward(neg);
      critic_opt_.step(m.critic_lr);
    }

    ag::Var hs = ag::select_rows(h, active);
    ddm::DomainVariantLoss dv = ddm::loss_domain_variant(ag::slice_cols(hs, 0, k), labels, dc.tau);
    m.anchors_skipped = dv.anchors_skipped;
    ag::Var d_var = ag::scale(dv.value, 1.0 / static_cast<double>(2 * b));
    std::vector<int> y_rand(labels.size());
    for (int& y : y_rand) y = prior_.sample(rng_.get(RngStreams::kYRand));
    ag::Var hp = ag::slice_cols(hs, k, rest);
    if (config_.ddm.critic_standardize) hp = ag::col_standardize(hp, kStandardizeEps);
    ag::Var d_invar = ddm::loss_domain_invariant(critic_, tape, hp, labels, y_rand);
    total = ddm::combined_encoder_objective(f.l_ssl, d_var, d_invar, dc);
    m.d_var = d_var.item();
    m.d_invar = d_invar.item();
    m.total_encoder = total.item();
  }
  check_finite(m);
  enc_opt_.zero_grad();
  tape.backward(total);
  enc_opt_.step(m.lr);
  ++step_;
  return m;
}

std::optional<cluster::ClusterReport> Trainer::recluster(const data::MultiDomainDataset& ds,
                                                         std::span<const int> true_labels, std::string* warning) {
  Mat h = encoder_.encode(dataset_matrix(ds));
  const std::string& slice = config_.domains.cluster_slice;
  if (slice == "prefix" || (slice == "auto" && cluster_)) h = h.leftCols(config_.encoder.prefix_dim).eval();
  cluster::ClusterOptions opts;
  opts.num_domains = config_.domains.num_domains;
  opts.gamma = config_.domains.gamma;
  opts.gate = config_.domains.gate;
  opts.max_iters = config_.domains.kmeans_iters;
  opts.seed = rng_.get(RngStreams::kCluster)();
  cluster::ReclusterOutcome out = cluster::recluster_representations(h, cluster_ ? &*cluster_ : nullptr, opts);
  if (!out.state) {
    log_warning(out.warning);
    if (warning) *warning = out.warning;
    return std::nullopt;
  }
  cluster_ = std::move(out.state);
  prior_ = ddm::LabelPrior::from_labels(cluster_->pseudo_labels(), config_.domains.num_domains);
  return cluster::make_report(*cluster_, config_.domains.num_domains, true_labels);
}

std::vector<Parameter*> Trainer::all_parameters() {
  std::vector<Parameter*> out = encoder_.parameters();
  for (Parameter* p : head_.parameters()) out.push_back(p);
  for (Parameter* p : critic_.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Trainer::all_parameters() const {
  auto* self = const_cast<Trainer*>(this);
  std::vector<Parameter*> ps = self->all_parameters();
  return {ps.begin(), ps.end()};
}

std::uint64_t Trainer::checksum() const {
  const auto ps = all_parameters();
  return parameter_checksum(ps);
}

void Trainer::save_checkpoint(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    BinaryWriter w(tmp);
    w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.pod<std::uint32_t>(kCheckpointVersion);
    w.string(to_json(config_).dump());
    w.string(config_hash(config_));
    w.pod<std::uint64_t>(config_.trainer.seed);
    w.string(json(overrides).dump());
    w.string(spec_json(encoder_.spec()).dump());
    w.string(provenance.recipe_id);
    w.pod<std::uint64_t>(provenance.seed);
    w.pod<std::uint64_t>(provenance.checksum);

    const auto params = all_parameters();
    w.pod<std::uint64_t>(params.size());
    for (const Parameter* p : params) {
      w.string(p->name);
      w.matrix(p->value);
    }
    write_adam(w, enc_opt_);
    write_adam(w, critic_opt_);
    w.pod<std::int64_t>(step_);
    w.pod<std::int32_t>(epoch_);
    w.pod<std::int64_t>(total_steps_);

    const auto states = rng_.save();
    w.pod<std::uint64_t>(states.size());
    for (const auto& [name, state] : states) {
      w.string(name);
      w.string(state);
    }
    w.pod<std::uint8_t>(cluster_ ? 1 : 0);
    if (cluster_) {
      w.matrix(cluster_->centroids);
      w.pod<double>(cluster_->epsilon);
      w.pod<std::int32_t>(cluster_->round);
      std::vector<std::int32_t> a(cluster_->assignments.begin(), cluster_->assignments.end());
      w.array(a);
      w.array(cluster_->keep);
    }
    w.array(prior_.weights());
    w.close();
  }
  fs::rename(tmp, path);
}

std::unique_ptr<Trainer> Trainer::load_checkpoint(const std::string& path) {
  BinaryReader r(path);
  char magic[8];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw FormatError("'" + path + "' is not a checkpoint");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError("checkpoint version " + std::to_string(version) + " is not supported");

  ExperimentConfig cfg;
  try {
    cfg = parse_config(json::parse(r.string()));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  const std::string hash = r.string();
  if (hash != config_hash(cfg)) throw FormatError("checkpoint config hash mismatch in '" + path + "'");
  (void)r.pod<std::uint64_t>();
  auto t = std::make_unique<Trainer>(cfg);
  try {
    t->overrides = json::parse(r.string()).get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint overrides are malformed: ") + e.what());
  }
  (void)r.string();  // encoder spec, implied by the config
  t->provenance.recipe_id = r.string();
  t->provenance.seed = r.pod<std::uint64_t>();
  t->provenance.checksum = r.pod<std::uint64_t>();

  auto params = t->all_parameters();
  const auto n = r.pod<std::uint64_t>();
  if (n != params.size()) throw FormatError("checkpoint parameter count mismatch in '" + path + "'");
  for (Parameter* p : params) {
    const std::string name = r.string();
    Mat v = r.matrix();
    if (name != p->name || v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw FormatError("checkpoint parameter '" + name + "' does not match '" + p->name + "'");
    }
    p->value = std::move(v);
    p->zero_grad();
  }
  read_adam(r, t->enc_opt_, path);
  read_adam(r, t->critic_opt_, path);
  t->step_ = r.pod<std::int64_t>();
  t->epoch_ = r.pod<std::int32_t>();
  t->total_steps_ = r.pod<std::int64_t>();

  std::map<std::string, std::string> states;
  const auto ns = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < ns; ++i) {
    std::string name = r.string();
    states[name] = r.string();
  }
  t->rng_.restore(states);
  if (r.pod<std::uint8_t>() != 0) {
    cluster::ClusterState s;
    s.centroids = r.matrix();
    s.epsilon = r.pod<double>();
    s.round = r.pod<std::int32_t>();
    const auto a = r.array<std::int32_t>();
    s.assignments.assign(a.begin(), a.end());
    s.keep = r.array<std::uint8_t>();
    t->cluster_ = std::move(s);
  }
  t->prior_ = ddm::LabelPrior(r.array<double>());
  if (!r.at_end()) throw FormatError("trailing bytes in checkpoint '" + path + "'");
  return t;
}

// ---------------------------------------------------------------------------

JsonlWriter::JsonlWriter(const std::string& path, const json& header, bool append) : path_(path) {
  if (append && fs::exists(path)) return;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << header.dump() << "\n";
}

void JsonlWriter::write(const json& record) {
  std::ofstream out(path_, std::ios::app);
  out << record.dump() << "\n";
  if (!out) throw IoError("write failed for '" + path_ + "'");
}

json artifact_header(const ExperimentConfig& config, const std::vector<std::string>& overrides, const std::string& kind) {
  return {{"type", "header"},
          {"kind", kind},
          {"format_version", kMetricsVersion},
          {"config_hash", config_hash(config)},
          {"seed", config.trainer.seed},
          {"data_seed", config.data.seed},
          {"overrides", overrides},
          {"config", semantic_json(config)}};
}

DirectoryLock::DirectoryLock(const std::string& dir) : path_((fs::path(dir) / ".lock").string()) {
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw IoError("output directory '" + dir + "' is in use by another run (remove " + path_ + " if stale)");
    }
    throw IoError("cannot create lock file '" + path_ + "': " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  (void)!::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirectoryLock::~DirectoryLock() { ::unlink(path_.c_str()); }

// ---------------------------------------------------------------------------

namespace {

void require_valid(const ExperimentConfig& config) {
  const auto violations = validate(config);
  if (violations.empty()) return;
  std::ostringstream os;
  os << "config validation failed:";
  for (const auto& v : violations) os << "\n  " << v.path << ": " << v.message;
  throw ConfigError(os.str());
}

std::vector<std::string> palette_names(const std::vector<data::Tint>& palette) {
  std::vector<std::string> out;
  for (const auto& t : palette) out.push_back(t.name);
  return out;
}

}  // namespace

FitResult fit(const ExperimentConfig& config, const FitOptions& options) {
  require_valid(config);
  const data::MultiDomainDataset train = load_split(config, Split::kTrain);
  return fit(config, train, options);
}

FitResult fit(const ExperimentConfig& config, const data::MultiDomainDataset& train, const FitOptions& options) {
  require_valid(config);
  const bool ddm_on = config.ddm.enabled;
  const bool pseudo = ddm_on && config.domains.mode == DomainMode::kPseudo;
  if (ddm_on && !pseudo && !train.has_domain_labels()) {
    throw InputError("labeled mode needs a training set with domain labels");
  }
  if (static_cast<int>(train.size()) < config.trainer.batch_size) {
    throw ConfigError("trainer.batch_size exceeds the training set size");
  }

  FitResult result;
  result.output_dir = config.output_dir;
  fs::create_directories(config.output_dir);
  DirectoryLock lock(config.output_dir);

  std::unique_ptr<Trainer> trainer;
  if (!options.resume.empty()) {
    trainer = Trainer::load_checkpoint(options.resume);
    if (config_hash(trainer->config()) != config_hash(config)) {
      throw ConfigError("checkpoint '" + options.resume + "' was written under a different config");
    }
  } else {
    trainer = std::make_unique<Trainer>(config);
  }
  trainer->overrides = options.overrides;
  trainer->provenance = {train.provenance.recipe_id, train.provenance.seed, data::checksum(train)};

  const int n = static_cast<int>(train.size());
  const int bsz = config.trainer.batch_size;
  const std::int64_t steps_per_epoch = n / bsz;
  const std::int64_t total_steps = static_cast<std::int64_t>(config.trainer.epochs) * steps_per_epoch;
  trainer->set_total_steps(total_steps);
  const int warmup_epochs =
      pseudo ? static_cast<int>(std::ceil(config.domains.warmup_fraction * static_cast<double>(config.trainer.epochs) - 1e-9))
             : 0;

  std::vector<int> all_ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all_ids[static_cast<std::size_t>(i)] = i;
  const std::vector<int> true_domains = train.domain_labels;
  if (ddm_on && !pseudo && options.resume.empty()) {
    trainer->set_label_prior(ddm::LabelPrior::from_labels(true_domains, config.domains.num_domains));
  }

  const fs::path out_dir(config.output_dir);
  result.metrics = (out_dir / "metrics.jsonl").string();
  result.checkpoint = (out_dir / "checkpoint.bin").string();
  const bool resuming = !options.resume.empty();
  JsonlWriter metrics(result.metrics, artifact_header(config, options.overrides, "metrics"), resuming);
  std::optional<JsonlWriter> cluster_log;
  if (pseudo) {
    result.cluster_report = (out_dir / "cluster_report.jsonl").string();
    cluster_log.emplace(result.cluster_report, artifact_header(config, options.overrides, "cluster_report"), resuming);
  }

  int first_cluster_epoch = -1;
  if (pseudo && trainer->cluster_state()) first_cluster_epoch = warmup_epochs;

  for (int epoch = trainer->epoch(); epoch < config.trainer.epochs; ++epoch) {
    trainer->set_epoch(epoch);
    if (pseudo && epoch >= warmup_epochs) {
      if (first_cluster_epoch < 0) first_cluster_epoch = epoch;
      if (!trainer->cluster_state() || (epoch - first_cluster_epoch) % config.domains.recluster_interval == 0) {
        std::string warning;
        auto report = trainer->recluster(train, true_domains, &warning);
        json rec;
        if (report) {
          rec = cluster::to_json(*report);
          rec["epoch"] = epoch;
        } else {
          rec = {{"epoch", epoch}, {"aborted", true}, {"warning", warning}};
        }
        cluster_log->write(rec);
        rec["type"] = "cluster";
        metrics.write(rec);
      }
    }

    std::vector<int> labels;
    std::vector<int> pool = all_ids;
    if (ddm_on && !pseudo) {
      labels = true_domains;
    } else if (pseudo && trainer->cluster_state()) {
      labels = trainer->cluster_state()->pseudo_labels();
      if (config.domains.outlier_policy == "all") {
        pool.clear();
        for (int i = 0; i < n; ++i) {
          if (labels[static_cast<std::size_t>(i)] >= 0) pool.push_back(i);
        }
      }
    }

    const auto batches = trainer->epoch_batches(pool, bsz);
    double sums[6] = {0, 0, 0, 0, 0, 0};
    int count = 0, skipped = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const ViewBatch batch = trainer->make_batch(train, batches[bi], labels, epoch, trainer->step());
      StepMetrics m;
      try {
        if (!ddm_on) {
          m = trainer->baseline_step(batch);
        } else if (pseudo && epoch < warmup_epochs) {
          m = trainer->warmup_step(batch);
        } else {
          m = trainer->train_step(batch);
        }
      } catch (const NumericalError& e) {
        metrics.write({{"type", "failure"}, {"batch", batch.batch_id}, {"epoch", epoch}, {"error", e.what()}});
        throw;
      }
      metrics.write(to_json(m));
      if (options.on_step) options.on_step(m);
      sums[0] += m.ssl;
      sums[1] += m.d_var;
      sums[2] += m.d_invar;
      sums[3] += m.gp;
      sums[4] += m.total_encoder;
      sums[5] += m.total_critic;
      skipped += m.ddm_skipped ? 1 : 0;
      ++count;
    }
    result.skipped_batches += skipped;
    const double denom = count ? count : 1;
    json rec = {{"type", "epoch"}, {"epoch", epoch}, {"steps", count}, {"ssl", sums[0] / denom}};
    if (ddm_on && !(pseudo && epoch < warmup_epochs)) {
      rec["d_var"] = sums[1] / denom;
      rec["d_invar"] = sums[2] / denom;
      rec["gp"] = sums[3] / denom;
      rec["total_encoder"] = sums[4] / denom;
      rec["total_critic"] = sums[5] / denom;
      rec["skipped_batches"] = skipped;
    }
    rec["parameter_checksum"] = trainer->checksum();
    metrics.write(rec);

    trainer->set_epoch(epoch + 1);
    const bool last = epoch + 1 == config.trainer.epochs;
    if (last || (config.trainer.checkpoint_every > 0 && (epoch + 1) % config.trainer.checkpoint_every == 0)) {
      trainer->save_checkpoint(result.checkpoint);
    }
  }
  if (trainer->epoch() >= config.trainer.epochs && !fs::exists(result.checkpoint)) {
    trainer->save_checkpoint(result.checkpoint);
  }

  if (options.run_probes && !config.evaluation.probes.empty()) {
    eval::ProbeOptions po{config.evaluation.probe_iters, config.evaluation.probe_lr, config.evaluation.probe_l2};
    std::optional<data::MultiDomainDataset> test, unseen_train, unseen_test;
    std::vector<eval::ProbeRow> rows;
    const std::string model = ddm_on ? config.ssl.baseline + "+ddm" : config.ssl.baseline;
    for (const auto& spec : config.evaluation.probes) {
      const eval::Slice slice = eval::parse_slice(spec.slice);
      eval::ProbeResult r;
      if (spec.split == "unseen-domain") {
        if (!unseen_train) unseen_train = load_split(config, Split::kUnseenTrain);
        if (!unseen_test) unseen_test = load_split(config, Split::kUnseenTest);
        if (spec.target == "domain") throw ConfigError("domain probes on unseen-domain data are not meaningful");
        r = eval::generalization_eval(trainer->encoder(), train.provenance.recipe_id, train.provenance.seed,
                                      *unseen_train, *unseen_test, slice, po);
      } else {
        if (!test) test = load_split(config, Split::kTest);
        r = eval::probe_datasets(trainer->encoder(), train, *test, eval::parse_target(spec.target), slice, po,
                                 palette_names(config.data.palette));
      }
      json rec = eval::to_json(r);
      rec["type"] = "probe";
      rec["model"] = model;
      metrics.write(rec);
      rows.push_back({model, r});
    }
    eval::write_probe_csv((out_dir / "probe.csv").string(), rows,
                          {{"config_hash", config_hash(config)}, {"seed", std::to_string(config.trainer.seed)}});
  }

  result.steps = trainer->step();
  result.parameter_checksum = trainer->checksum();
  return result;
}

}  // namespace ddmlab::train
