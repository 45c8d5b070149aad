#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "ddmlab/clustering.hpp"
#include "ddmlab/config.hpp"
#include "ddmlab/datagen.hpp"
#include "ddmlab/ddm.hpp"
#include "ddmlab/diagnostics.hpp"
#include "ddmlab/errors.hpp"
#include "ddmlab/evaluation.hpp"
#include "ddmlab/ssl_losses.hpp"
#include "ddmlab/trainer.hpp"

namespace py = pybind11;
using namespace ddmlab;
using nlohmann::json;

namespace {

ExperimentConfig config_from(const std::string& text, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!text.empty()) {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  apply_overrides(doc, overrides);
  return parse_config(doc);
}

py::dict dataset_dict(const data::MultiDomainDataset& ds) {
  py::array_t<float> pixels({static_cast<py::ssize_t>(ds.size()), static_cast<py::ssize_t>(ds.shape.channels),
                             static_cast<py::ssize_t>(ds.shape.height), static_cast<py::ssize_t>(ds.shape.width)});
  std::copy(ds.pixels.begin(), ds.pixels.end(), pixels.mutable_data());
  py::dict d;
  d["pixels"] = pixels;
  d["class_labels"] = ds.class_labels;
  d["domain_labels"] = ds.domain_labels;
  d["num_domains"] = ds.num_domains;
  d["num_classes"] = ds.num_classes;
  d["recipe_id"] = ds.provenance.recipe_id;
  d["checksum"] = data::checksum(ds);
  return d;
}

py::dict probe_dict(const eval::ProbeResult& r) { return py::module_::import("json").attr("loads")(eval::to_json(r).dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Domain disentanglement for multi-domain self-supervised pretraining";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "colored_shapes",
      [](int n, const std::vector<std::string>& palette, int num_classes, int image_size, double noise,
         std::uint64_t seed) {
        data::ColoredShapesRecipe r;
        r.n = n;
        r.num_classes = num_classes;
        r.image_size = image_size;
        r.noise = noise;
        for (const auto& p : palette) r.palette.push_back(data::named_tint(p));
        return dataset_dict(data::make_colored_shapes(r, seed));
      },
      py::arg("n"), py::arg("palette") = std::vector<std::string>{"red", "green"}, py::arg("num_classes") = 10,
      py::arg("image_size") = 16, py::arg("noise") = 0.1, py::arg("seed") = 0);

  m.def(
      "gaussian_domains",
      [](int num_domains, int n_per_domain, int dim, double separation, std::uint64_t seed) {
        auto g = data::synth_gaussian_domains(num_domains, n_per_domain, dim, separation, seed);
        return py::make_tuple(g.points, g.labels, g.means);
      },
      py::arg("num_domains"), py::arg("n_per_domain"), py::arg("dim"), py::arg("separation"), py::arg("seed") = 0);

  m.def(
      "sim", [](const Eigen::VectorXd& a, const Eigen::VectorXd& b, double tau) {
        return ddm::sim({a.data(), static_cast<std::size_t>(a.size())}, {b.data(), static_cast<std::size_t>(b.size())}, tau);
      },
      py::arg("a"), py::arg("b"), py::arg("tau") = 0.5);

  m.def(
      "loss_domain_variant",
      [](const Mat& prefixes, const std::vector<int>& labels, double tau) {
        ag::Tape tape;
        auto r = ddm::loss_domain_variant(tape.constant(prefixes), labels, tau);
        return py::make_tuple(r.value.item(), r.anchors_used, r.anchors_skipped);
      },
      py::arg("prefixes"), py::arg("labels"), py::arg("tau") = 0.5);

  m.def(
      "nt_xent",
      [](const Mat& za, const Mat& zb, double tau) {
        ag::Tape tape;
        return ssl::nt_xent(tape.constant(za), tape.constant(zb), tau).item();
      },
      py::arg("z_a"), py::arg("z_b"), py::arg("tau") = 0.5);

  m.def(
      "barlow_twins_loss",
      [](const Mat& za, const Mat& zb, double lambda_off) {
        ag::Tape tape;
        return ssl::barlow_twins_loss(tape.constant(za), tape.constant(zb), lambda_off).item();
      },
      py::arg("z_a"), py::arg("z_b"), py::arg("lambda_off") = 5e-3);

  m.def(
      "kmeans",
      [](const Mat& points, int k, std::uint64_t seed, int max_iters) {
        auto r = cluster::kmeans(points, k, seed, max_iters);
        return py::make_tuple(r.centroids, r.assignments, r.objective);
      },
      py::arg("points"), py::arg("k"), py::arg("seed") = 0, py::arg("max_iters") = 100);

  m.def(
      "outlier_mask",
      [](const Mat& points, const Mat& centroids, double epsilon, const std::string& gate) {
        auto mask = cluster::outlier_mask(points, centroids, epsilon, cluster::parse_gate(gate));
        return std::vector<bool>(mask.begin(), mask.end());
      },
      py::arg("points"), py::arg("centroids"), py::arg("epsilon"), py::arg("gate") = "literal");

  m.def("epsilon_schedule", &cluster::epsilon_schedule, py::arg("round"), py::arg("gamma") = 0.5);

  m.def(
      "validate_config",
      [](const std::string& text, const std::vector<std::string>& overrides) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& v : validate(config_from(text, overrides))) out.emplace_back(v.path, v.message);
        return out;
      },
      py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "config_hash", [](const std::string& text, const std::vector<std::string>& overrides) {
        return config_hash(config_from(text, overrides));
      },
      py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "pretrain",
      [](const std::string& text, const std::vector<std::string>& overrides, bool run_probes) {
        ExperimentConfig cfg = config_from(text, overrides);
        train::FitOptions opts;
        opts.overrides = overrides;
        opts.run_probes = run_probes;
        train::FitResult r;
        {
          py::gil_scoped_release release;
          r = train::fit(cfg, opts);
        }
        py::dict d;
        d["checkpoint"] = r.checkpoint;
        d["metrics"] = r.metrics;
        d["cluster_report"] = r.cluster_report;
        d["steps"] = r.steps;
        d["parameter_checksum"] = r.parameter_checksum;
        return d;
      },
      py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{}, py::arg("run_probes") = true);

  m.def(
      "encode",
      [](const std::string& checkpoint, const Mat& images) {
        auto t = train::Trainer::load_checkpoint(checkpoint);
        return t->encoder().encode(images);
      },
      py::arg("checkpoint"), py::arg("images"), "Representations of N x (C*H*W) images under a checkpoint.");

  m.def(
      "probe",
      [](const std::string& checkpoint, const std::string& target, const std::string& slice) {
        auto t = train::Trainer::load_checkpoint(checkpoint);
        const auto& c = t->config();
        std::vector<std::string> names;
        for (const auto& p : c.data.palette) names.push_back(p.name);
        auto r = eval::probe_datasets(t->encoder(), train::load_split(c, train::Split::kTrain),
                                      train::load_split(c, train::Split::kTest), eval::parse_target(target),
                                      eval::parse_slice(slice),
                                      {c.evaluation.probe_iters, c.evaluation.probe_lr, c.evaluation.probe_l2}, names);
        return probe_dict(r);
      },
      py::arg("checkpoint"), py::arg("target") = "class", py::arg("slice") = "full");

  m.def(
      "linear_probe",
      [](const Mat& train_x, const std::vector<int>& train_y, const Mat& test_x, const std::vector<int>& test_y,
         int num_classes, int iters) {
        eval::ProbeOptions o;
        o.iters = iters;
        return probe_dict(eval::linear_probe(train_x, train_y, test_x, test_y, {}, num_classes, o));
      },
      py::arg("train_x"), py::arg("train_y"), py::arg("test_x"), py::arg("test_y"), py::arg("num_classes"),
      py::arg("iters") = 300);

  m.def(
      "load_embeddings",
      [](const std::string& path) {
        auto e = diag::load_embeddings(path);
        py::dict d;
        d["version"] = e.version;
        d["header"] = e.header;
        d["ids"] = e.ids;
        d["class_labels"] = e.class_labels;
        d["domain_labels"] = e.domain_labels;
        d["values"] = e.values;
        return d;
      },
      py::arg("path"));
}
