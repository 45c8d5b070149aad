#include "ddmlab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ddmlab/errors.hpp"
#include "ddmlab/rng.hpp"

namespace ddmlab::eval {

Slice parse_slice(const std::string& name) {
  if (name == "full") return Slice::kFull;
  if (name == "prefix") return Slice::kPrefix;
  if (name == "remainder") return Slice::kRemainder;
  throw ConfigError("unknown slice '" + name + "' (expected full, prefix or remainder)");
}

std::string to_string(Slice s) {
  switch (s) {
    case Slice::kFull:
      return "full";
    case Slice::kPrefix:
      return "prefix";
    case Slice::kRemainder:
      return "remainder";
  }
  return "full";
}

Target parse_target(const std::string& name) {
  if (name == "class") return Target::kClass;
  if (name == "domain") return Target::kDomain;
  throw ConfigError("unknown probe target '" + name + "' (expected class or domain)");
}

std::string to_string(Target t) { return t == Target::kClass ? "class" : "domain"; }

Mat slice_features(const Mat& h, Slice slice, int prefix_dim) {
  if (slice == Slice::kFull) return h;
  if (prefix_dim <= 0 || prefix_dim >= h.cols()) throw InputError("slice_features: prefix width must satisfy 0 < k < r");
  if (slice == Slice::kPrefix) return h.leftCols(prefix_dim);
  return h.rightCols(h.cols() - prefix_dim);
}

nlohmann::json to_json(const ProbeResult& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& d : r.per_domain) {
    per.push_back({{"domain", d.domain}, {"name", d.name}, {"count", d.count}, {"correct", d.correct}, {"top1", d.top1}});
  }
  return {{"target", r.target},      {"slice", r.slice},     {"split", r.split},
          {"top1", r.top1},          {"evaluated", r.evaluated}, {"correct", r.correct},
          {"per_domain", per},       {"excluded_classes", r.excluded_classes}};
}

std::vector<int> LinearProbe::predict(const Mat& x) const {
  if (x.cols() != weight.rows()) throw InputError("probe: feature width mismatch");
  Mat xs = (x.rowwise() - mean).array().rowwise() * inv_std.array();
  Mat logits = (xs * weight).rowwise() + bias;
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

LinearProbe train_probe(const Mat& x, std::span<const int> labels, int num_classes, const ProbeOptions& opts) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw InputError("probe: label count mismatch");
  if (n == 0) throw InputError("probe: empty training split");
  if (num_classes < 1) throw InputError("probe: need at least one class");
  if (opts.iters < 1 || opts.lr <= 0) throw ConfigError("probe: iters and lr must be positive");

  LinearProbe p;
  p.mean = x.colwise().mean();
  Mat centered = x.rowwise() - p.mean;
  Eigen::RowVectorXd var = centered.colwise().squaredNorm() / static_cast<double>(n);
  p.inv_std = var.unaryExpr([](double v) { return v > 1e-24 ? 1.0 / std::sqrt(v) : 1.0; });
  Mat xs = centered.array().rowwise() * p.inv_std.array();

  Mat y = Mat::Zero(n, num_classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= num_classes) throw InputError("probe: label out of range");
    y(i, c) = 1.0;
  }

  p.weight = Mat::Zero(d, num_classes);
  p.bias = Eigen::RowVectorXd::Zero(num_classes);
  Mat mw = Mat::Zero(d, num_classes), vw = Mat::Zero(d, num_classes);
  Eigen::RowVectorXd mb = Eigen::RowVectorXd::Zero(num_classes), vb = Eigen::RowVectorXd::Zero(num_classes);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= opts.iters; ++t) {
    Mat logits = (xs * p.weight).rowwise() + p.bias;
    Eigen::VectorXd mx = logits.rowwise().maxCoeff();
    Mat e = (logits.colwise() - mx).array().exp();
    Eigen::VectorXd z = e.rowwise().sum();
    Mat prob = e.array().colwise() / z.array();
    double loss = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      loss -= (logits(i, labels[static_cast<std::size_t>(i)]) - mx(i) - std::log(z(i)));
    }
    loss = loss / static_cast<double>(n) + 0.5 * opts.l2 * p.weight.squaredNorm();
    p.loss_history.push_back(loss);

    Mat g = (prob - y) / static_cast<double>(n);
    Mat gw = xs.transpose() * g + opts.l2 * p.weight;
    Eigen::RowVectorXd gb = g.colwise().sum();
    const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
    mw = b1 * mw + (1 - b1) * gw;
    vw = b2 * vw + (1 - b2) * gw.cwiseProduct(gw);
    mb = b1 * mb + (1 - b1) * gb;
    vb = b2 * vb + (1 - b2) * gb.cwiseProduct(gb);
    p.weight.array() -= opts.lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
    p.bias.array() -= opts.lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);
  }
  return p;
}

ProbeResult linear_probe(const Mat& train_x, std::span<const int> train_y, const Mat& test_x,
                         std::span<const int> test_y, std::span<const int> test_domains, int num_classes,
                         const ProbeOptions& opts, const std::vector<std::string>& domain_names) {
  if (train_x.cols() != test_x.cols()) throw InputError("probe: train and test feature widths differ");
  if (static_cast<Eigen::Index>(test_y.size()) != test_x.rows()) throw InputError("probe: test label count mismatch");
  if (!test_domains.empty() && test_domains.size() != test_y.size()) throw InputError("probe: test domain count mismatch");

  ProbeResult r;
  std::vector<char> present(static_cast<std::size_t>(num_classes), 0);
  for (int c : train_y) {
    if (c >= 0 && c < num_classes) present[static_cast<std::size_t>(c)] = 1;
  }
  for (int c = 0; c < num_classes; ++c) {
    if (!present[static_cast<std::size_t>(c)]) {
      bool in_test = std::find(test_y.begin(), test_y.end(), c) != test_y.end();
      if (in_test) {
        r.excluded_classes.push_back(c);
        r.warnings.push_back("class " + std::to_string(c) + " absent from probe-train split; excluded from accuracy");
        log_warning(r.warnings.back());
      }
    }
  }

  LinearProbe probe = train_probe(train_x, train_y, num_classes, opts);
  const std::vector<int> pred = probe.predict(test_x);

  std::map<int, DomainAccuracy> per;
  for (std::size_t i = 0; i < test_y.size(); ++i) {
    const int c = test_y[i];
    if (c < 0 || c >= num_classes) throw InputError("probe: test label out of range");
    if (!present[static_cast<std::size_t>(c)]) continue;
    const bool ok = pred[i] == c;
    ++r.evaluated;
    r.correct += ok ? 1 : 0;
    if (!test_domains.empty()) {
      DomainAccuracy& d = per[test_domains[i]];
      d.domain = test_domains[i];
      ++d.count;
      d.correct += ok ? 1 : 0;
    }
  }
  r.top1 = r.evaluated ? 100.0 * r.correct / r.evaluated : 0.0;
  for (auto& [dom, d] : per) {
    d.top1 = 100.0 * d.correct / d.count;
    if (dom >= 0 && static_cast<std::size_t>(dom) < domain_names.size()) {
      d.name = domain_names[static_cast<std::size_t>(dom)];
    } else {
      d.name = "domain" + std::to_string(dom);
    }
    r.per_domain.push_back(d);
  }
  return r;
}

ProbeResult domain_probe(const Mat& train_x, std::span<const int> train_domains, const Mat& test_x,
                         std::span<const int> test_domains, int num_domains, const ProbeOptions& opts,
                         const std::vector<std::string>& domain_names) {
  ProbeResult r = linear_probe(train_x, train_domains, test_x, test_domains, test_domains, num_domains, opts, domain_names);
  r.target = "domain";
  return r;
}

ProbeResult probe_datasets(Encoder& encoder, const data::MultiDomainDataset& train, const data::MultiDomainDataset& test,
                           Target target, Slice slice, const ProbeOptions& opts,
                           const std::vector<std::string>& domain_names) {
  const int k = encoder.spec().prefix_dim;
  const Mat htr = slice_features(encoder.encode(dataset_matrix(train)), slice, k);
  const Mat hte = slice_features(encoder.encode(dataset_matrix(test)), slice, k);
  ProbeResult r;
  if (target == Target::kDomain) {
    if (!train.has_domain_labels() || !test.has_domain_labels()) throw InputError("domain probe needs domain labels");
    const int m = std::max(train.num_domains, test.num_domains);
    r = domain_probe(htr, train.domain_labels, hte, test.domain_labels, m, opts, domain_names);
  } else {
    const int c = std::max(train.num_classes, test.num_classes);
    r = linear_probe(htr, train.class_labels, hte, test.class_labels, test.domain_labels, c, opts, domain_names);
  }
  r.slice = to_string(slice);
  return r;
}

std::vector<std::uint64_t> palette_hashes(const std::string& recipe_id) {
  std::vector<std::uint64_t> out;
  const auto pos = recipe_id.find("palette=");
  if (pos == std::string::npos) return out;
  std::stringstream ss(recipe_id.substr(pos + 8));
  std::string entry;
  while (std::getline(ss, entry, ',')) {
    // name:r:g:b; identity is the colour transform, not the name
    const auto colon = entry.find(':');
    out.push_back(fnv1a(colon == std::string::npos ? entry : entry.substr(colon + 1)));
  }
  return out;
}

ProbeResult generalization_eval(Encoder& encoder, const std::string& pretrain_recipe_id, std::uint64_t pretrain_seed,
                                const data::MultiDomainDataset& unseen_train,
                                const data::MultiDomainDataset& unseen_test, Slice slice, const ProbeOptions& opts) {
  const auto seen = palette_hashes(pretrain_recipe_id);
  for (const auto* ds : {&unseen_train, &unseen_test}) {
    if (ds->provenance.recipe_hash == fnv1a(pretrain_recipe_id) && ds->provenance.seed == pretrain_seed) {
      throw InputError("generalization_eval: evaluation data is the pretraining set");
    }
    for (std::uint64_t h : palette_hashes(ds->provenance.recipe_id)) {
      if (std::find(seen.begin(), seen.end(), h) != seen.end()) {
        throw InputError("generalization_eval: evaluation domain '" + ds->provenance.recipe_id +
                         "' overlaps the pretraining domains");
      }
    }
  }
  std::vector<std::string> names;
  const auto pos = unseen_test.provenance.recipe_id.find("palette=");
  if (pos != std::string::npos) {
    std::stringstream ss(unseen_test.provenance.recipe_id.substr(pos + 8));
    std::string entry;
    while (std::getline(ss, entry, ',')) names.push_back(entry.substr(0, entry.find(':')));
  }
  ProbeResult r = probe_datasets(encoder, unseen_train, unseen_test, Target::kClass, slice, opts, names);
  r.split = "unseen-domain";
  return r;
}

void write_probe_csv(const std::string& path, const std::vector<ProbeRow>& rows,
                     const std::vector<std::pair<std::string, std::string>>& header) {
  std::vector<std::string> domains;
  for (const auto& row : rows) {
    for (const auto& d : row.result.per_domain) {
      if (std::find(domains.begin(), domains.end(), d.name) == domains.end()) domains.push_back(d.name);
    }
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write probe table '" + path + "'");
  for (const auto& [k, v] : header) out << "# " << k << "=" << v << "\n";
  out << "model,target,slice,split";
  for (const auto& d : domains) out << "," << d;
  out << ",average\n";
  char buf[32];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  for (const auto& row : rows) {
    out << row.model << "," << row.result.target << "," << row.result.slice << "," << row.result.split;
    for (const auto& name : domains) {
      auto it = std::find_if(row.result.per_domain.begin(), row.result.per_domain.end(),
                             [&name](const DomainAccuracy& d) { return d.name == name; });
      out << "," << (it == row.result.per_domain.end() ? std::string("") : fmt(it->top1));
    }
    out << "," << fmt(row.result.top1) << "\n";
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace ddmlab::eval
