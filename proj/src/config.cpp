#include "ddmlab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ddmlab/errors.hpp"
#include "ddmlab/rng.hpp"

namespace ddmlab {

using nlohmann::json;

namespace {

// Reads fields of one JSON object, remembering which keys were consumed so
// that leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) errors_.push_back(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.is_object() || !j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      errors_.push_back(field(key) + ": " + e.what());
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    if (!j_.is_object() || !j_.contains(key)) return;
    seen_.insert(key);
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  const json* child(const char* key) {
    if (!j_.is_object() || !j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  ~ObjectReader() {
    if (!j_.is_object()) return;
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) errors_.push_back(field(key) + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

std::vector<data::Tint> parse_palette(const json& j, const std::string& path, std::vector<std::string>& errors) {
  std::vector<data::Tint> out;
  if (!j.is_array()) {
    errors.push_back(path + ": expected an array");
    return out;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    const std::string p = path + "[" + std::to_string(i) + "]";
    try {
      if (e.is_string()) {
        out.push_back(data::named_tint(e.get<std::string>()));
      } else if (e.is_object()) {
        data::Tint t;
        ObjectReader r(e, p, errors);
        r.get("name", t.name);
        r.get("rgb", t.rgb);
        out.push_back(t);
      } else {
        errors.push_back(p + ": expected a colour name or {name, rgb}");
      }
    } catch (const ConfigError& err) {
      errors.push_back(p + ": " + err.what());
    }
  }
  return out;
}

json palette_json(const std::vector<data::Tint>& palette) {
  json out = json::array();
  for (const auto& t : palette) out.push_back({{"name", t.name}, {"rgb", t.rgb}});
  return out;
}

void parse_augment(const json& j, data::AugmentRecipe& a, std::vector<std::string>& errors) {
  ObjectReader r(j, "data.augment", errors);
  r.get("crop", a.crop);
  r.get("crop_min_scale", a.crop_min_scale);
  r.get("flip", a.flip);
  r.get("jitter_prob", a.jitter_prob);
  r.get("brightness", a.brightness);
  r.get("contrast", a.contrast);
  r.get("preserve_tint", a.preserve_tint);
  r.get("channel_jitter", a.channel_jitter);
  r.get("grayscale_prob", a.grayscale_prob);
  r.get("blur_prob", a.blur_prob);
  r.get("blur_sigma_min", a.blur_sigma_min);
  r.get("blur_sigma_max", a.blur_sigma_max);
}

json augment_json(const data::AugmentRecipe& a) {
  return {{"crop", a.crop},
          {"crop_min_scale", a.crop_min_scale},
          {"flip", a.flip},
          {"jitter_prob", a.jitter_prob},
          {"brightness", a.brightness},
          {"contrast", a.contrast},
          {"preserve_tint", a.preserve_tint},
          {"channel_jitter", a.channel_jitter},
          {"grayscale_prob", a.grayscale_prob},
          {"blur_prob", a.blur_prob},
          {"blur_sigma_min", a.blur_sigma_min},
          {"blur_sigma_max", a.blur_sigma_max}};
}

}  // namespace

std::string to_string(DomainMode mode) { return mode == DomainMode::kLabeled ? "labeled" : "pseudo"; }

double default_encoder_lr(ssl::Baseline baseline) {
  switch (baseline) {
    case ssl::Baseline::kSimClr:
      return 1e-3;
    case ssl::Baseline::kSimSiam:
      return 1e-3;
    case ssl::Baseline::kBarlowTwins:
      return 1e-3;
  }
  return 1e-3;
}

double ExperimentConfig::encoder_lr() const {
  if (trainer.lr) return *trainer.lr;
  return default_encoder_lr(ssl::parse_baseline(ssl.baseline));
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  std::vector<std::string> errors;
  {
    ObjectReader root(doc, "", errors);
    root.get("output_dir", c.output_dir);

    if (const json* d = root.child("data")) {
      ObjectReader r(*d, "data", errors);
      r.get("generator", c.data.generator);
      r.get("n_train", c.data.n_train);
      r.get("n_test", c.data.n_test);
      r.get("n_unseen", c.data.n_unseen);
      r.get("num_classes", c.data.num_classes);
      r.get("image_size", c.data.image_size);
      r.get("noise", c.data.noise);
      r.get("seed", c.data.seed);
      r.get("cache_dir", c.data.cache_dir);
      if (const json* p = r.child("palette")) c.data.palette = parse_palette(*p, "data.palette", errors);
      if (const json* p = r.child("unseen_palette")) {
        c.data.unseen_palette = parse_palette(*p, "data.unseen_palette", errors);
      }
      if (const json* a = r.child("augment")) parse_augment(*a, c.data.augment, errors);
    }
    if (const json* e = root.child("encoder")) {
      ObjectReader r(*e, "encoder", errors);
      r.get("architecture", c.encoder.architecture);
      r.get("rep_dim", c.encoder.rep_dim);
      r.get("prefix_dim", c.encoder.prefix_dim);
      r.get("channels", c.encoder.channels);
      r.get("hidden_dim", c.encoder.hidden_dim);
    }
    if (const json* s = root.child("ssl")) {
      ObjectReader r(*s, "ssl", errors);
      r.get("baseline", c.ssl.baseline);
      r.get("tau", c.ssl.head.tau);
      r.get("barlow_lambda", c.ssl.head.barlow_lambda);
      r.get("proj_hidden", c.ssl.head.proj_hidden);
      r.get("proj_dim", c.ssl.head.proj_dim);
      r.get("pred_hidden", c.ssl.head.pred_hidden);
    }
    if (const json* d = root.child("ddm")) {
      ObjectReader r(*d, "ddm", errors);
      r.get("enabled", c.ddm.enabled);
      r.get("lambda_var", c.ddm.losses.lambda_var);
      r.get("lambda_invar", c.ddm.losses.lambda_invar);
      r.get("tau", c.ddm.losses.tau);
      r.get("gp_weight", c.ddm.losses.gp_weight);
      r.get("critic_steps", c.ddm.losses.critic_steps);
      r.get("critic_hidden", c.ddm.critic_hidden);
      r.get("critic_lr", c.ddm.critic_lr);
      r.get("critic_slope", c.ddm.critic_slope);
      r.get("critic_beta1", c.ddm.critic_beta1);
      r.get("critic_beta2", c.ddm.critic_beta2);
      r.get("critic_standardize", c.ddm.critic_standardize);
    }
    if (const json* d = root.child("domains")) {
      ObjectReader r(*d, "domains", errors);
      std::string mode = to_string(c.domains.mode);
      r.get("mode", mode);
      if (mode == "labeled") {
        c.domains.mode = DomainMode::kLabeled;
      } else if (mode == "pseudo") {
        c.domains.mode = DomainMode::kPseudo;
      } else {
        errors.push_back("domains.mode: expected labeled or pseudo");
      }
      r.get("num_domains", c.domains.num_domains);
      r.get("warmup_fraction", c.domains.warmup_fraction);
      r.get("recluster_interval", c.domains.recluster_interval);
      r.get("gamma", c.domains.gamma);
      r.get("outlier_policy", c.domains.outlier_policy);
      r.get("cluster_slice", c.domains.cluster_slice);
      std::string gate = cluster::to_string(c.domains.gate);
      r.get("gate", gate);
      try {
        c.domains.gate = cluster::parse_gate(gate);
      } catch (const ConfigError& e) {
        errors.push_back(std::string("domains.gate: ") + e.what());
      }
      r.get("kmeans_iters", c.domains.kmeans_iters);
    }
    if (const json* t = root.child("trainer")) {
      ObjectReader r(*t, "trainer", errors);
      r.get("epochs", c.trainer.epochs);
      r.get("batch_size", c.trainer.batch_size);
      r.get_optional("lr", c.trainer.lr);
      r.get("weight_decay", c.trainer.weight_decay);
      r.get("beta1", c.trainer.beta1);
      r.get("beta2", c.trainer.beta2);
      r.get("seed", c.trainer.seed);
      r.get("checkpoint_every", c.trainer.checkpoint_every);
    }
    if (const json* e = root.child("evaluation")) {
      ObjectReader r(*e, "evaluation", errors);
      r.get("probe_iters", c.evaluation.probe_iters);
      r.get("probe_lr", c.evaluation.probe_lr);
      r.get("probe_l2", c.evaluation.probe_l2);
      r.get("heatmap_threshold", c.evaluation.heatmap_threshold);
      if (const json* probes = r.child("probes")) {
        if (!probes->is_array()) {
          errors.push_back("evaluation.probes: expected an array");
        } else {
          for (std::size_t i = 0; i < probes->size(); ++i) {
            ProbeSpec p;
            ObjectReader pr((*probes)[i], "evaluation.probes[" + std::to_string(i) + "]", errors);
            pr.get("target", p.target);
            pr.get("slice", p.slice);
            pr.get("split", p.split);
            c.evaluation.probes.push_back(p);
          }
        }
      }
    }
  }
  c.encoder.input = data::ImageShape{3, c.data.image_size, c.data.image_size};
  c.encoder.seed = c.trainer.seed;
  if (!errors.empty()) {
    std::ostringstream os;
    os << "invalid config:";
    for (const auto& e : errors) os << "\n  " << e;
    throw ConfigError(os.str());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
  json probes = json::array();
  for (const auto& p : c.evaluation.probes) probes.push_back({{"target", p.target}, {"slice", p.slice}, {"split", p.split}});
  return {
      {"output_dir", c.output_dir},
      {"data",
       {{"generator", c.data.generator},
        {"n_train", c.data.n_train},
        {"n_test", c.data.n_test},
        {"n_unseen", c.data.n_unseen},
        {"num_classes", c.data.num_classes},
        {"image_size", c.data.image_size},
        {"noise", c.data.noise},
        {"seed", c.data.seed},
        {"cache_dir", c.data.cache_dir},
        {"palette", palette_json(c.data.palette)},
        {"unseen_palette", palette_json(c.data.unseen_palette)},
        {"augment", augment_json(c.data.augment)}}},
      {"encoder",
       {{"architecture", c.encoder.architecture},
        {"rep_dim", c.encoder.rep_dim},
        {"prefix_dim", c.encoder.prefix_dim},
        {"channels", c.encoder.channels},
        {"hidden_dim", c.encoder.hidden_dim}}},
      {"ssl",
       {{"baseline", c.ssl.baseline},
        {"tau", c.ssl.head.tau},
        {"barlow_lambda", c.ssl.head.barlow_lambda},
        {"proj_hidden", c.ssl.head.proj_hidden},
        {"proj_dim", c.ssl.head.proj_dim},
        {"pred_hidden", c.ssl.head.pred_hidden}}},
      {"ddm",
       {{"enabled", c.ddm.enabled},
        {"lambda_var", c.ddm.losses.lambda_var},
        {"lambda_invar", c.ddm.losses.lambda_invar},
        {"tau", c.ddm.losses.tau},
        {"gp_weight", c.ddm.losses.gp_weight},
        {"critic_steps", c.ddm.losses.critic_steps},
        {"critic_hidden", c.ddm.critic_hidden},
        {"critic_lr", c.ddm.critic_lr},
        {"critic_slope", c.ddm.critic_slope},
        {"critic_beta1", c.ddm.critic_beta1},
        {"critic_beta2", c.ddm.critic_beta2},
        {"critic_standardize", c.ddm.critic_standardize}}},
      {"domains",
       {{"mode", to_string(c.domains.mode)},
        {"num_domains", c.domains.num_domains},
        {"warmup_fraction", c.domains.warmup_fraction},
        {"recluster_interval", c.domains.recluster_interval},
        {"gamma", c.domains.gamma},
        {"outlier_policy", c.domains.outlier_policy},
        {"cluster_slice", c.domains.cluster_slice},
        {"gate", cluster::to_string(c.domains.gate)},
        {"kmeans_iters", c.domains.kmeans_iters}}},
      {"trainer",
       {{"epochs", c.trainer.epochs},
        {"batch_size", c.trainer.batch_size},
        {"lr", c.trainer.lr ? json(*c.trainer.lr) : json(nullptr)},
        {"weight_decay", c.trainer.weight_decay},
        {"beta1", c.trainer.beta1},
        {"beta2", c.trainer.beta2},
        {"seed", c.trainer.seed},
        {"checkpoint_every", c.trainer.checkpoint_every}}},
      {"evaluation",
       {{"probe_iters", c.evaluation.probe_iters},
        {"probe_lr", c.evaluation.probe_lr},
        {"probe_l2", c.evaluation.probe_l2},
        {"heatmap_threshold", c.evaluation.heatmap_threshold},
        {"probes", probes}}},
  };
}

std::vector<Violation> validate(const ExperimentConfig& c) {
  std::vector<Violation> v;
  auto add = [&v](std::string path, std::string msg) { v.push_back({std::move(path), std::move(msg)}); };

  if (c.data.generator != "colored_shapes") add("data.generator", "only 'colored_shapes' is supported");
  if (c.data.n_train <= 0) add("data.n_train", "must be positive");
  if (c.data.n_test <= 0) add("data.n_test", "must be positive");
  if (c.data.n_unseen < 0) add("data.n_unseen", "must be >= 0");
  if (c.data.num_classes < 1 || c.data.num_classes > data::kMaxShapeClasses) add("data.num_classes", "must be in [1, 10]");
  if (c.data.image_size < 8) add("data.image_size", "must be >= 8");
  if (c.data.noise < 0) add("data.noise", "must be >= 0");
  if (c.data.palette.empty()) add("data.palette", "must list at least one colour");
  for (const auto& t : c.data.palette) {
    for (double x : t.rgb) {
      if (x < 0 || x > 1) add("data.palette", "rgb multipliers must lie in [0, 1]");
    }
  }
  for (const auto& u : c.data.unseen_palette) {
    for (const auto& t : c.data.palette) {
      if (u.rgb == t.rgb) add("data.unseen_palette", "colour '" + u.name + "' also appears in the training palette");
    }
  }
  if (c.data.augment.crop_min_scale <= 0 || c.data.augment.crop_min_scale > 1) {
    add("data.augment.crop_min_scale", "must lie in (0, 1]");
  }
  for (const auto& [name, v] : {std::pair{"jitter_prob", c.data.augment.jitter_prob},
                                std::pair{"grayscale_prob", c.data.augment.grayscale_prob},
                                std::pair{"blur_prob", c.data.augment.blur_prob}}) {
    if (v < 0 || v > 1) add(std::string("data.augment.") + name, "must lie in [0, 1]");
  }

  if (c.encoder.prefix_dim <= 0 || c.encoder.prefix_dim >= c.encoder.rep_dim) {
    add("encoder.prefix_dim", "prefix width k must satisfy 0 < k < r (encoder.rep_dim)");
  }
  if (c.encoder.architecture != "conv4" && c.encoder.architecture != "linear") {
    add("encoder.architecture", "expected conv4 or linear");
  }
  if (c.encoder.architecture == "conv4") {
    if (c.encoder.channels.size() != 4) add("encoder.channels", "conv4 needs exactly 4 channel widths");
    if (c.data.image_size % 8 != 0) add("data.image_size", "conv4 needs a multiple of 8");
  }

  try {
    (void)ssl::parse_baseline(c.ssl.baseline);
  } catch (const ConfigError& e) {
    add("ssl.baseline", e.what());
  }
  if (c.ssl.head.tau <= 0) add("ssl.tau", "must be positive");
  if (c.ssl.head.barlow_lambda < 0) add("ssl.barlow_lambda", "must be >= 0");

  const bool ddm_losses = c.ddm.enabled;
  if (c.ddm.losses.lambda_var < 0) add("ddm.lambda_var", "must be >= 0");
  if (c.ddm.losses.lambda_invar < 0) add("ddm.lambda_invar", "must be >= 0");
  if (c.ddm.losses.tau <= 0) add("ddm.tau", "must be positive");
  if (c.ddm.losses.gp_weight < 0) add("ddm.gp_weight", "must be >= 0");
  if (c.ddm.losses.critic_steps < 1) add("ddm.critic_steps", "must be >= 1");
  if (c.ddm.critic_lr < 0) add("ddm.critic_lr", "must be >= 0");
  if (c.ddm.critic_hidden < 1) add("ddm.critic_hidden", "must be >= 1");

  if (ddm_losses && c.domains.num_domains < 2) add("domains.num_domains", "M must be >= 2 when DDM losses are enabled");
  if (c.domains.mode == DomainMode::kPseudo && c.domains.num_domains < 2) {
    add("domains.num_domains", "pseudo-label mode needs M >= 2");
  }
  if (c.domains.mode == DomainMode::kLabeled && ddm_losses &&
      c.domains.num_domains != static_cast<int>(c.data.palette.size())) {
    add("domains.num_domains", "labeled mode needs M equal to the palette size");
  }
  if (c.domains.warmup_fraction < 0 || c.domains.warmup_fraction >= 1) add("domains.warmup_fraction", "must lie in [0, 1)");
  if (c.domains.recluster_interval < 1) add("domains.recluster_interval", "must be >= 1");
  if (!(c.domains.gamma > 0 && c.domains.gamma < 1)) add("domains.gamma", "must lie in (0, 1)");
  if (c.domains.outlier_policy != "ddm_only" && c.domains.outlier_policy != "all") {
    add("domains.outlier_policy", "expected ddm_only or all");
  }
  if (c.domains.cluster_slice != "full" && c.domains.cluster_slice != "prefix" && c.domains.cluster_slice != "auto") {
    add("domains.cluster_slice", "expected full, prefix or auto");
  }
  if (c.domains.kmeans_iters < 1) add("domains.kmeans_iters", "must be >= 1");

  if (c.trainer.epochs < 1) add("trainer.epochs", "must be >= 1");
  if (c.trainer.batch_size < 2) add("trainer.batch_size", "must be >= 2");
  if (c.trainer.batch_size > c.data.n_train) add("trainer.batch_size", "must not exceed data.n_train");
  if (c.trainer.lr && *c.trainer.lr < 0) add("trainer.lr", "must be >= 0");
  if (c.trainer.weight_decay < 0) add("trainer.weight_decay", "must be >= 0");
  if (c.trainer.checkpoint_every < 0) add("trainer.checkpoint_every", "must be >= 0");

  if (c.evaluation.probe_iters < 1) add("evaluation.probe_iters", "must be >= 1");
  if (c.evaluation.probe_lr <= 0) add("evaluation.probe_lr", "must be positive");
  if (c.evaluation.heatmap_threshold <= 0) add("evaluation.heatmap_threshold", "must be positive");
  for (std::size_t i = 0; i < c.evaluation.probes.size(); ++i) {
    const auto& p = c.evaluation.probes[i];
    const std::string path = "evaluation.probes[" + std::to_string(i) + "]";
    if (p.target != "class" && p.target != "domain") add(path + ".target", "expected class or domain");
    if (p.slice != "full" && p.slice != "prefix" && p.slice != "remainder") add(path + ".slice", "expected full, prefix or remainder");
    if (p.split != "train-domain" && p.split != "unseen-domain") add(path + ".split", "expected train-domain or unseen-domain");
  }
  if (c.output_dir.empty()) add("output_dir", "must not be empty");
  return v;
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not of the form key=value");
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ConfigError("override '" + o + "' has an empty path component");
      if (!node->is_object()) *node = json::object();
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
}

json semantic_json(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("output_dir");
  j["data"].erase("cache_dir");
  return j;
}

std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(semantic_json(config).dump())));
  return buf;
}

}  // namespace ddmlab
