// Command-line entry points: generate-data, pretrain, probe, analyze,
// cluster-report, export-embeddings.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ddmlab/config.hpp"
#include "ddmlab/diagnostics.hpp"
#include "ddmlab/errors.hpp"
#include "ddmlab/evaluation.hpp"
#include "ddmlab/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ddmlab;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
  }
  apply_overrides(doc, overrides);
  ExperimentConfig cfg = parse_config(doc);
  const auto violations = validate(cfg);
  if (!violations.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& v : violations) msg += "\n  " + v.path + ": " + v.message;
    throw ConfigError(msg);
  }
  return cfg;
}

train::Split parse_split(const std::string& s) {
  if (s == "train") return train::Split::kTrain;
  if (s == "test") return train::Split::kTest;
  if (s == "unseen-train") return train::Split::kUnseenTrain;
  if (s == "unseen-test") return train::Split::kUnseenTest;
  throw UsageError("unknown split '" + s + "'");
}

std::vector<std::pair<std::string, std::string>> header_pairs(const train::Trainer& t) {
  return {{"config_hash", config_hash(t.config())},
          {"seed", std::to_string(t.config().trainer.seed)},
          {"overrides", json(t.overrides).dump()}};
}

std::vector<std::string> names(const std::vector<data::Tint>& palette) {
  std::vector<std::string> out;
  for (const auto& t : palette) out.push_back(t.name);
  return out;
}

eval::ProbeOptions probe_options(const ExperimentConfig& c) {
  return {c.evaluation.probe_iters, c.evaluation.probe_lr, c.evaluation.probe_l2};
}

int cmd_generate(const std::string& config, const std::vector<std::string>& sets, const std::string& split_name,
                 const std::string& out_dir) {
  ExperimentConfig cfg = resolve_config(config, sets);
  const std::string dir = out_dir.empty() ? (fs::path(cfg.output_dir) / "data").string() : out_dir;
  fs::create_directories(dir);
  std::vector<std::string> splits =
      split_name == "all" ? std::vector<std::string>{"train", "test", "unseen-train", "unseen-test"}
                          : std::vector<std::string>{split_name};
  for (const auto& s : splits) {
    const train::Split sp = parse_split(s);
    const auto recipe = train::split_recipe(cfg, sp);
    if (recipe.n == 0) continue;
    data::MultiDomainDataset ds = train::load_split(cfg, sp);
    const std::string path = (fs::path(dir) / (s + ".bin")).string();
    data::save_dataset(ds, path);
    std::printf("%s: %s n=%zu domains=%d checksum=%016llx\n", s.c_str(), path.c_str(), ds.size(), ds.num_domains,
                static_cast<unsigned long long>(data::checksum(ds)));
  }
  return 0;
}

int cmd_pretrain(const std::string& config, const std::vector<std::string>& sets, const std::string& resume,
                 bool no_probes) {
  ExperimentConfig cfg = resolve_config(config, sets);
  train::FitOptions opts;
  opts.overrides = sets;
  opts.resume = resume;
  opts.run_probes = !no_probes;
  const train::FitResult r = train::fit(cfg, opts);
  std::printf("checkpoint: %s\nmetrics: %s\n", r.checkpoint.c_str(), r.metrics.c_str());
  if (!r.cluster_report.empty()) std::printf("cluster report: %s\n", r.cluster_report.c_str());
  std::printf("steps: %lld\nparameter checksum: %016llx\n", static_cast<long long>(r.steps),
              static_cast<unsigned long long>(r.parameter_checksum));
  if (r.skipped_batches) std::printf("batches without two domains: %d\n", r.skipped_batches);
  return 0;
}

int cmd_probe(const std::string& ckpt, const std::string& target, const std::string& slice_name,
              const std::string& split, const std::string& out) {
  const eval::Target tg = eval::parse_target(target);
  const eval::Slice slice = eval::parse_slice(slice_name);
  if (split != "train-domain" && split != "unseen-domain") throw UsageError("unknown probe split '" + split + "'");
  auto t = train::Trainer::load_checkpoint(ckpt);
  const ExperimentConfig& cfg = t->config();
  eval::ProbeResult r;
  if (split == "unseen-domain") {
    if (tg == eval::Target::kDomain) throw UsageError("domain probes are only defined on train-domain data");
    r = eval::generalization_eval(t->encoder(), t->provenance.recipe_id, t->provenance.seed,
                                  train::load_split(cfg, train::Split::kUnseenTrain),
                                  train::load_split(cfg, train::Split::kUnseenTest), slice, probe_options(cfg));
  } else {
    r = eval::probe_datasets(t->encoder(), train::load_split(cfg, train::Split::kTrain),
                             train::load_split(cfg, train::Split::kTest), tg, slice, probe_options(cfg),
                             names(cfg.data.palette));
  }
  const std::string model = cfg.ddm.enabled ? cfg.ssl.baseline + "+ddm" : cfg.ssl.baseline;
  const fs::path dir = fs::path(ckpt).parent_path();
  const std::string path =
      out.empty() ? (dir / ("probe-" + target + "-" + slice_name + "-" + split + ".csv")).string() : out;
  eval::write_probe_csv(path, {{model, r}}, header_pairs(*t));
  const fs::path metrics = dir / "metrics.jsonl";
  if (fs::exists(metrics)) {
    train::DirectoryLock lock(dir.string());
    json rec = eval::to_json(r);
    rec["type"] = "probe";
    rec["model"] = model;
    std::ofstream(metrics, std::ios::app) << rec.dump() << "\n";
  }
  std::printf("%s %s/%s/%s top1=%.2f\n%s\n", model.c_str(), target.c_str(), slice_name.c_str(), split.c_str(), r.top1,
              path.c_str());
  return 0;
}

int cmd_analyze(const std::string& ckpt, double threshold, const std::string& split, const std::string& out) {
  auto t = train::Trainer::load_checkpoint(ckpt);
  const ExperimentConfig& cfg = t->config();
  const double thr = threshold > 0 ? threshold : cfg.evaluation.heatmap_threshold;
  if (!(thr > 0)) throw ConfigError("threshold must be positive");
  const data::MultiDomainDataset ds = train::load_split(cfg, parse_split(split));
  const Mat h = t->encoder().encode(dataset_matrix(ds));
  const auto report = diag::class_domain_means(h, ds.class_labels, ds.domain_labels, ds.num_domains, ds.num_classes);
  const auto features = diag::most_activating_features(report, thr);
  const fs::path dir = out.empty() ? fs::path(ckpt).parent_path() : fs::path(out);
  fs::create_directories(dir);
  auto header = header_pairs(*t);
  header.emplace_back("threshold", std::to_string(thr));
  diag::write_heatmap_csv((dir / "heatmap.csv").string(), report, features, header, names(cfg.data.palette));
  const int k = cfg.encoder.prefix_dim;
  json summary = {{"config_hash", config_hash(cfg)},
                  {"seed", cfg.trainer.seed},
                  {"threshold", thr},
                  {"most_activating_features", features},
                  {"overlap_full", diag::domain_overlap_score(report, thr, eval::Slice::kFull, k)},
                  {"overlap_prefix", diag::domain_overlap_score(report, thr, eval::Slice::kPrefix, k)},
                  {"overlap_remainder", diag::domain_overlap_score(report, thr, eval::Slice::kRemainder, k)},
                  {"warnings", report.warnings}};
  std::ofstream((dir / "analysis.json").string()) << summary.dump(2) << "\n";
  std::printf("%s\n", summary.dump(2).c_str());
  return 0;
}

int cmd_cluster_report(const std::string& run) {
  const fs::path path = fs::path(run) / "cluster_report.jsonl";
  std::ifstream in(path);
  if (!in) throw IoError("no cluster report at '" + path.string() + "' (was the run in pseudo mode?)");
  std::string line;
  std::printf("%6s %6s %12s %10s %10s  %s\n", "round", "epoch", "epsilon", "kept", "accuracy", "sizes");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (j.value("type", "") == "header") continue;
    if (j.value("aborted", false)) {
      std::printf("%6s %6d  aborted: %s\n", "-", j.value("epoch", -1), j.value("warning", "").c_str());
      continue;
    }
    const auto r = cluster::report_from_json(j);
    std::string sizes;
    for (int s : r.cluster_sizes) sizes += (sizes.empty() ? "" : "/") + std::to_string(s);
    char acc[32] = "-";
    if (r.accuracy) std::snprintf(acc, sizeof(acc), "%.4f", *r.accuracy);
    std::printf("%6d %6d %12.6g %10.4f %10s  %s\n", r.round, j.value("epoch", -1), r.epsilon, r.non_outlier_fraction,
                acc, sizes.c_str());
  }
  return 0;
}

int cmd_export(const std::string& ckpt, const std::string& slice_name, const std::string& split, const std::string& out) {
  auto t = train::Trainer::load_checkpoint(ckpt);
  const ExperimentConfig& cfg = t->config();
  const eval::Slice slice = eval::parse_slice(slice_name);
  const data::MultiDomainDataset ds = train::load_split(cfg, parse_split(split));
  const Mat h = t->encoder().encode(dataset_matrix(ds));
  const std::string path =
      out.empty() ? (fs::path(ckpt).parent_path() / ("embeddings-" + split + "-" + slice_name + ".csv")).string() : out;
  auto header = header_pairs(*t);
  header.emplace_back("split", split);
  diag::export_embeddings(path, h, ds.class_labels, ds.domain_labels, slice, cfg.encoder.prefix_dim, header);
  std::printf("%s (%zu rows)\n", path.c_str(), ds.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ddmlab: domain disentanglement for multi-domain self-supervised pretraining"};
  app.require_subcommand(1);

  std::string config, resume, checkpoint, target, slice, export_slice, out, run;
  std::string gen_split, probe_split, analyze_split, export_split;
  std::vector<std::string> sets;
  bool no_probes = false;
  double threshold = 0;

  auto* gen = app.add_subcommand("generate-data", "generate and cache dataset splits");
  gen->add_option("--config", config, "experiment config (JSON)");
  gen->add_option("--set", sets, "override a config field: path=value");
  gen->add_option("--split", gen_split, "train | test | unseen-train | unseen-test | all")->default_val("all");
  gen->add_option("--out", out, "output directory (default: <output_dir>/data)");

  auto* pre = app.add_subcommand("pretrain", "train an encoder");
  pre->add_option("--config", config, "experiment config (JSON)");
  pre->add_option("--set", sets, "override a config field: path=value");
  pre->add_option("--resume", resume, "continue from a checkpoint");
  pre->add_flag("--no-probes", no_probes, "skip the configured probes");

  auto* probe = app.add_subcommand("probe", "linear probe on frozen features");
  probe->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  probe->add_option("--target", target, "class | domain")->default_val("class");
  probe->add_option("--slice", slice, "full | prefix | remainder")->default_val("full");
  probe->add_option("--split", probe_split, "train-domain | unseen-domain")->default_val("train-domain");
  probe->add_option("--out", out, "CSV path");

  auto* analyze = app.add_subcommand("analyze", "most-activating-feature heatmap and overlap scores");
  analyze->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  analyze->add_option("--threshold", threshold, "deviation threshold in standard deviations");
  analyze->add_option("--split", analyze_split, "dataset split")->default_val("test");
  analyze->add_option("--out", out, "output directory");

  auto* cr = app.add_subcommand("cluster-report", "per-round epsilon and pseudo-label accuracy");
  cr->add_option("--run", run, "run output directory")->required();

  auto* exp = app.add_subcommand("export-embeddings", "write representations for external visualization");
  exp->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  exp->add_option("--slice", export_slice, "full | prefix | remainder")->default_val("full");
  exp->add_option("--split", export_split, "dataset split")->default_val("test");
  exp->add_option("--out", out, "CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_generate(config, sets, gen_split, out);
    if (*pre) return cmd_pretrain(config, sets, resume, no_probes);
    if (*probe) return cmd_probe(checkpoint, target, slice, probe_split, out);
    if (*analyze) return cmd_analyze(checkpoint, threshold, analyze_split, out);
    if (*cr) return cmd_cluster_report(run);
    if (*exp) return cmd_export(checkpoint, export_slice, export_split, out);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
