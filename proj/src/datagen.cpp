#include "ddmlab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>

#include "ddmlab/binary_io.hpp"
#include "ddmlab/errors.hpp"
#include "ddmlab/rng.hpp"

namespace ddmlab::data {

namespace {

constexpr char kMagic[8] = {'D', 'D', 'M', 'D', 'S', 'E', 'T', '1'};

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Intensity in [0, 1] of shape class `cls` at canonical coordinates (x, y)
// in roughly [-1, 1]^2.
struct ShapeParams {
  int cls = 0;
  double freq = 2.5;
  double phase = 0.0;
  double radius = 0.5;
  double width = 0.15;
  double diag_sign = 1.0;
};

double shape_value(const ShapeParams& p, double x, double y) {
  const double pi = std::numbers::pi;
  const double r = std::hypot(x, y);
  switch (p.cls) {
    case 0:  // horizontal bars
      return std::cos(2 * pi * p.freq * 0.5 * y + p.phase) > 0 ? 1.0 : 0.0;
    case 1:  // vertical bars
      return std::cos(2 * pi * p.freq * 0.5 * x + p.phase) > 0 ? 1.0 : 0.0;
    case 2:  // diagonal stripes, either orientation
      return std::cos(2 * pi * p.freq * 0.5 * (x + p.diag_sign * y) / std::numbers::sqrt2 + p.phase) > 0 ? 1.0 : 0.0;
    case 3:  // ring
      return std::abs(r - p.radius) < p.width ? 1.0 : 0.0;
    case 4:  // disk
      return r < p.radius ? 1.0 : 0.0;
    case 5: {  // square outline
      const double m = std::max(std::abs(x), std::abs(y));
      return (m < p.radius && m > p.radius - 1.5 * p.width) ? 1.0 : 0.0;
    }
    case 6:  // plus
      return ((std::abs(x) < p.width || std::abs(y) < p.width) && std::max(std::abs(x), std::abs(y)) < p.radius + 0.2)
                 ? 1.0
                 : 0.0;
    case 7: {  // X
      const double d1 = std::abs(x - y) / std::numbers::sqrt2;
      const double d2 = std::abs(x + y) / std::numbers::sqrt2;
      return ((d1 < p.width || d2 < p.width) && std::max(std::abs(x), std::abs(y)) < p.radius + 0.2) ? 1.0 : 0.0;
    }
    case 8:  // checkerboard
      return std::cos(pi * p.freq * x + p.phase) * std::cos(pi * p.freq * y + p.phase) > 0 ? 1.0 : 0.0;
    case 9:  // dot grid
      return std::cos(pi * p.freq * x + p.phase) * std::cos(pi * p.freq * y + p.phase) > 0.5 ? 1.0 : 0.0;
    default:
      return 0.0;
  }
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

Tint named_tint(const std::string& name) {
  static const std::pair<const char*, std::array<double, 3>> kTable[] = {
      {"red", {1.0, 0.0, 0.0}},    {"green", {0.0, 1.0, 0.0}},  {"blue", {0.0, 0.0, 1.0}},
      {"yellow", {1.0, 1.0, 0.0}}, {"cyan", {0.0, 1.0, 1.0}},   {"magenta", {1.0, 0.0, 1.0}},
      {"orange", {1.0, 0.5, 0.0}}, {"purple", {0.5, 0.0, 1.0}}, {"olive", {0.5, 0.5, 0.0}},
      {"white", {1.0, 1.0, 1.0}},
  };
  for (const auto& [n, rgb] : kTable) {
    if (name == n) return Tint{name, rgb};
  }
  throw ConfigError("unknown palette colour '" + name + "'");
}

MultiDomainDataset MultiDomainDataset::without_domain_labels() const {
  MultiDomainDataset out = *this;
  out.domain_labels.clear();
  return out;
}

BaseImageSet make_shape_images(int n, int num_classes, int image_size, double noise, std::uint64_t seed) {
  if (n <= 0) throw ConfigError("make_shape_images: n must be positive");
  if (num_classes < 1 || num_classes > kMaxShapeClasses) {
    throw ConfigError("make_shape_images: num_classes must be in [1, " + std::to_string(kMaxShapeClasses) + "]");
  }
  if (image_size < 4) throw ConfigError("make_shape_images: image_size must be >= 4");
  if (noise < 0) throw ConfigError("make_shape_images: noise must be >= 0");

  BaseImageSet out;
  out.shape = ImageShape{1, image_size, image_size};
  out.num_classes = num_classes;
  out.pixels.resize(static_cast<std::size_t>(n) * out.shape.size());
  out.labels.resize(static_cast<std::size_t>(n));
  {
    std::ostringstream id;
    id << "shapes/v1/c=" << num_classes << "/s=" << image_size << "/noise=" << noise;
    out.recipe_id = id.str();
  }

  const double pi = std::numbers::pi;
  for (int i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, "shape", static_cast<std::uint64_t>(i));
    ShapeParams p;
    p.cls = i % num_classes;
    p.freq = uniform(rng, 2.0, 3.2);
    p.phase = uniform(rng, 0.0, 2 * pi);
    p.radius = uniform(rng, 0.45, 0.7);
    p.width = uniform(rng, 0.12, 0.22);
    p.diag_sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    const double dx = uniform(rng, -0.2, 0.2);
    const double dy = uniform(rng, -0.2, 0.2);
    const double sc = uniform(rng, 0.8, 1.2);
    const double rot = uniform(rng, -0.2, 0.2);
    const double fg = uniform(rng, 0.6, 1.0);
    const double bg = uniform(rng, 0.0, 0.25);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double c = std::cos(rot), s = std::sin(rot);

    float* img = out.pixels.data() + static_cast<std::size_t>(i) * out.shape.size();
    for (int py = 0; py < image_size; ++py) {
      for (int px = 0; px < image_size; ++px) {
        // 2x2 supersampling
        double acc = 0.0;
        for (int sy = 0; sy < 2; ++sy) {
          for (int sx = 0; sx < 2; ++sx) {
            const double u = ((px + 0.25 + 0.5 * sx) / image_size) * 2.0 - 1.0 - dx;
            const double v = ((py + 0.25 + 0.5 * sy) / image_size) * 2.0 - 1.0 - dy;
            const double x = (c * u + s * v) / sc;
            const double y = (-s * u + c * v) / sc;
            acc += shape_value(p, x, y);
          }
        }
        const double val = bg + (fg - bg) * acc / 4.0 + noise * gauss(rng);
        img[py * image_size + px] = clamp01(val);
      }
    }
    out.labels[static_cast<std::size_t>(i)] = p.cls;
  }
  return out;
}

MultiDomainDataset generate_colored(const BaseImageSet& base, std::span<const Tint> palette, std::uint64_t seed) {
  if (palette.empty()) throw ConfigError("generate_colored: palette is empty");
  const ImageShape& in = base.shape;
  if (in.channels != 1 && in.channels != 3) throw FormatError("generate_colored: base images must have 1 or 3 channels");
  if (in.height <= 0 || in.width <= 0) throw FormatError("generate_colored: empty image shape");
  if (base.pixels.size() != base.labels.size() * in.size()) {
    throw FormatError("generate_colored: pixel buffer does not match label count and image shape");
  }
  for (float v : base.pixels) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) throw FormatError("generate_colored: pixel values must lie in [0, 1]");
  }
  for (int y : base.labels) {
    if (y < 0 || y >= base.num_classes) throw FormatError("generate_colored: class label out of range");
  }

  MultiDomainDataset out;
  out.shape = ImageShape{3, in.height, in.width};
  out.num_domains = static_cast<int>(palette.size());
  out.num_classes = base.num_classes;
  out.class_labels = base.labels;
  out.domain_labels.resize(base.size());
  out.pixels.resize(base.size() * out.shape.size());

  std::ostringstream id;
  id << "colored/v1/" << base.recipe_id << "/palette=";
  for (std::size_t m = 0; m < palette.size(); ++m) {
    id << (m ? "," : "") << palette[m].name;
  }
  out.provenance.recipe_id = id.str();
  out.provenance.seed = seed;
  out.provenance.recipe_hash = fnv1a(out.provenance.recipe_id);

  const std::size_t plane = static_cast<std::size_t>(in.height) * in.width;
  for (std::size_t i = 0; i < base.size(); ++i) {
    Rng rng = make_rng(seed, "palette", i);
    const int m = std::uniform_int_distribution<int>(0, out.num_domains - 1)(rng);
    out.domain_labels[i] = m;
    const float* src = base.pixels.data() + i * in.size();
    float* dst = out.pixels.data() + i * out.shape.size();
    for (std::size_t k = 0; k < plane; ++k) {
      double g = src[k];
      if (in.channels == 3) g = 0.299 * src[k] + 0.587 * src[plane + k] + 0.114 * src[2 * plane + k];
      for (int ch = 0; ch < 3; ++ch) dst[ch * plane + k] = clamp01(g * palette[m].rgb[ch]);
    }
  }
  return out;
}

GaussianDomains synth_gaussian_domains(int num_domains, int n_per_domain, int dim, double separation,
                                       std::uint64_t seed) {
  if (num_domains < 1) throw ConfigError("synth_gaussian_domains: M must be >= 1");
  if (n_per_domain <= 0) throw ConfigError("synth_gaussian_domains: n_per_domain must be positive");
  if (separation < 0) throw ConfigError("synth_gaussian_domains: separation must be >= 0");
  if (dim < num_domains && num_domains > 1) throw ConfigError("synth_gaussian_domains: dim must be >= M");
  if (dim < 1) throw ConfigError("synth_gaussian_domains: dim must be >= 1");

  GaussianDomains out;
  out.means = Mat::Zero(num_domains, dim);
  // Scaled standard basis vectors: pairwise distance sqrt(2) * scale.
  if (num_domains > 1) {
    for (int m = 0; m < num_domains; ++m) out.means(m, m) = separation / std::numbers::sqrt2;
  }
  out.points.resize(static_cast<Eigen::Index>(num_domains) * n_per_domain, dim);
  out.labels.resize(static_cast<std::size_t>(num_domains) * n_per_domain);
  Rng rng = make_rng(seed, "gaussian_domains");
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int m = 0; m < num_domains; ++m) {
    for (int i = 0; i < n_per_domain; ++i) {
      const Eigen::Index row = static_cast<Eigen::Index>(m) * n_per_domain + i;
      for (int d = 0; d < dim; ++d) out.points(row, d) = out.means(m, d) + gauss(rng);
      out.labels[static_cast<std::size_t>(row)] = m;
    }
  }
  return out;
}

AugmentRecipe AugmentRecipe::identity() {
  AugmentRecipe r;
  r.crop = false;
  r.flip = false;
  r.jitter_prob = 0.0;
  r.brightness = 0.0;
  r.contrast = 0.0;
  r.channel_jitter = 0.0;
  r.grayscale_prob = 0.0;
  r.blur_prob = 0.0;
  return r;
}

std::vector<float> augment_image(std::span<const float> image, const ImageShape& shape, const AugmentRecipe& recipe,
                                 std::uint64_t seed, std::uint64_t sample_id, std::uint64_t view) {
  if (image.size() != shape.size()) throw InputError("augment_image: image size does not match shape");
  const int C = shape.channels, H = shape.height, W = shape.width;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  Rng rng = make_rng(seed, "augment", sample_id, view);
  std::vector<float> img(image.begin(), image.end());

  if (recipe.crop) {
    const double area = uniform(rng, std::clamp(recipe.crop_min_scale, 0.01, 1.0), 1.0);
    const double side_h = std::max(1.0, std::round(H * std::sqrt(area)));
    const double side_w = std::max(1.0, std::round(W * std::sqrt(area)));
    const double oy = uniform(rng, 0.0, H - side_h);
    const double ox = uniform(rng, 0.0, W - side_w);
    std::vector<float> out(img.size());
    for (int y = 0; y < H; ++y) {
      const double sy = std::clamp(oy + (y + 0.5) * side_h / H - 0.5, 0.0, H - 1.0);
      const int y0 = static_cast<int>(std::floor(sy));
      const int y1 = std::min(y0 + 1, H - 1);
      const double fy = sy - y0;
      for (int x = 0; x < W; ++x) {
        const double sx = std::clamp(ox + (x + 0.5) * side_w / W - 0.5, 0.0, W - 1.0);
        const int x0 = static_cast<int>(std::floor(sx));
        const int x1 = std::min(x0 + 1, W - 1);
        const double fx = sx - x0;
        for (int ch = 0; ch < C; ++ch) {
          const float* p = img.data() + ch * plane;
          const double v = (1 - fy) * ((1 - fx) * p[y0 * W + x0] + fx * p[y0 * W + x1]) +
                           fy * ((1 - fx) * p[y1 * W + x0] + fx * p[y1 * W + x1]);
          out[ch * plane + static_cast<std::size_t>(y) * W + x] = static_cast<float>(v);
        }
      }
    }
    img = std::move(out);
  }

  if (recipe.flip && uniform(rng, 0.0, 1.0) < 0.5) {
    for (int ch = 0; ch < C; ++ch) {
      for (int y = 0; y < H; ++y) {
        float* row = img.data() + ch * plane + static_cast<std::size_t>(y) * W;
        std::reverse(row, row + W);
      }
    }
  }

  if (recipe.jitter_prob > 0 && uniform(rng, 0.0, 1.0) < recipe.jitter_prob) {
    const double b = 1.0 + uniform(rng, -recipe.brightness, recipe.brightness);
    const double k = 1.0 + uniform(rng, -recipe.contrast, recipe.contrast);
    std::array<double, 4> gains{1.0, 1.0, 1.0, 1.0};
    if (!recipe.preserve_tint) {
      for (int ch = 0; ch < std::min(C, 4); ++ch) {
        gains[ch] = 1.0 + uniform(rng, -recipe.channel_jitter, recipe.channel_jitter);
      }
    }
    for (int ch = 0; ch < C; ++ch) {
      float* p = img.data() + ch * plane;
      // Per-channel means keep an all-zero channel at zero, so the tint survives.
      double mean = 0.0;
      for (std::size_t i = 0; i < plane; ++i) mean += p[i];
      mean /= static_cast<double>(plane);
      const double gain = ch < 4 ? gains[ch] : 1.0;
      for (std::size_t i = 0; i < plane; ++i) {
        p[i] = clamp01(((p[i] - mean) * k + mean) * b * gain);
      }
    }
  }

  if (C == 3 && recipe.grayscale_prob > 0 && uniform(rng, 0.0, 1.0) < recipe.grayscale_prob) {
    for (std::size_t i = 0; i < plane; ++i) {
      const float l = clamp01(0.299 * img[i] + 0.587 * img[plane + i] + 0.114 * img[2 * plane + i]);
      img[i] = img[plane + i] = img[2 * plane + i] = l;
    }
  }

  if (recipe.blur_prob > 0 && uniform(rng, 0.0, 1.0) < recipe.blur_prob) {
    const double sigma = uniform(rng, recipe.blur_sigma_min, recipe.blur_sigma_max);
    std::array<double, 3> k{std::exp(-1.0 / (2 * sigma * sigma)), 1.0, std::exp(-1.0 / (2 * sigma * sigma))};
    const double norm = k[0] + k[1] + k[2];
    for (double& v : k) v /= norm;
    std::vector<float> tmp(img.size());
    for (int pass = 0; pass < 2; ++pass) {
      for (int ch = 0; ch < C; ++ch) {
        const float* src = img.data() + ch * plane;
        float* dst = tmp.data() + ch * plane;
        for (int y = 0; y < H; ++y) {
          for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int d = -1; d <= 1; ++d) {
              const int yy = pass == 0 ? y : std::clamp(y + d, 0, H - 1);
              const int xx = pass == 0 ? std::clamp(x + d, 0, W - 1) : x;
              acc += k[d + 1] * src[yy * W + xx];
            }
            dst[y * W + x] = static_cast<float>(acc);
          }
        }
      }
      img.swap(tmp);
    }
  }

  for (float& v : img) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

ViewPair two_view_augment(const MultiDomainDataset& ds, int sample_id, const AugmentRecipe& recipe,
                          std::uint64_t seed) {
  if (sample_id < 0 || static_cast<std::size_t>(sample_id) >= ds.size()) throw InputError("two_view_augment: bad sample id");
  ViewPair pair;
  pair.sample_id = sample_id;
  pair.domain_label = ds.has_domain_labels() ? ds.domain_labels[static_cast<std::size_t>(sample_id)] : -1;
  const auto img = ds.image(static_cast<std::size_t>(sample_id));
  pair.view_a = augment_image(img, ds.shape, recipe, seed, static_cast<std::uint64_t>(sample_id), 0);
  pair.view_b = augment_image(img, ds.shape, recipe, seed, static_cast<std::uint64_t>(sample_id), 1);
  return pair;
}

std::string ColoredShapesRecipe::id() const {
  std::ostringstream os;
  os << "colored_shapes/v1/n=" << n << "/c=" << num_classes << "/s=" << image_size << "/noise=" << noise
     << "/palette=";
  for (std::size_t m = 0; m < palette.size(); ++m) {
    os << (m ? "," : "") << palette[m].name << ":" << palette[m].rgb[0] << ":" << palette[m].rgb[1] << ":"
       << palette[m].rgb[2];
  }
  return os.str();
}

MultiDomainDataset make_colored_shapes(const ColoredShapesRecipe& recipe, std::uint64_t seed) {
  BaseImageSet base = make_shape_images(recipe.n, recipe.num_classes, recipe.image_size, recipe.noise, seed);
  MultiDomainDataset ds = generate_colored(base, recipe.palette, seed);
  ds.provenance.recipe_id = recipe.id();
  ds.provenance.recipe_hash = fnv1a(ds.provenance.recipe_id);
  return ds;
}

void save_dataset(const MultiDomainDataset& ds, const std::string& path) {
  BinaryWriter w(path);
  w.bytes(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kDatasetFormatVersion);
  w.pod<std::uint64_t>(ds.provenance.recipe_hash);
  w.pod<std::uint64_t>(ds.provenance.seed);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ds.has_domain_labels() ? ds.num_domains : 0));
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ds.num_classes));
  w.pod<std::uint64_t>(ds.size());
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ds.shape.channels));
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ds.shape.height));
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ds.shape.width));
  w.pod<std::uint8_t>(ds.has_domain_labels() ? 1 : 0);
  w.string(ds.provenance.recipe_id);
  w.bytes(ds.pixels.data(), ds.pixels.size() * sizeof(float));
  std::vector<std::int32_t> labels(ds.class_labels.begin(), ds.class_labels.end());
  w.bytes(labels.data(), labels.size() * sizeof(std::int32_t));
  if (ds.has_domain_labels()) {
    std::vector<std::int32_t> dl(ds.domain_labels.begin(), ds.domain_labels.end());
    w.bytes(dl.data(), dl.size() * sizeof(std::int32_t));
  }
  w.close();
}

MultiDomainDataset load_dataset(const std::string& path) {
  BinaryReader r(path);
  char magic[8];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw FormatError("'" + path + "' is not a dataset cache file");
  const auto version = r.pod<std::uint32_t>();
  if (version != kDatasetFormatVersion) {
    throw FormatError("dataset cache version " + std::to_string(version) + " is not supported");
  }
  MultiDomainDataset ds;
  ds.provenance.recipe_hash = r.pod<std::uint64_t>();
  ds.provenance.seed = r.pod<std::uint64_t>();
  ds.num_domains = static_cast<int>(r.pod<std::uint32_t>());
  ds.num_classes = static_cast<int>(r.pod<std::uint32_t>());
  const auto n = r.pod<std::uint64_t>();
  ds.shape.channels = static_cast<int>(r.pod<std::uint32_t>());
  ds.shape.height = static_cast<int>(r.pod<std::uint32_t>());
  ds.shape.width = static_cast<int>(r.pod<std::uint32_t>());
  const bool has_domains = r.pod<std::uint8_t>() != 0;
  ds.provenance.recipe_id = r.string(1 << 16);
  if (fnv1a(ds.provenance.recipe_id) != ds.provenance.recipe_hash) throw FormatError("recipe hash mismatch in '" + path + "'");
  if (n > (1ULL << 28) || ds.shape.size() > (1ULL << 24)) throw FormatError("implausible dataset dimensions");
  ds.pixels.resize(n * ds.shape.size());
  r.read(ds.pixels.data(), ds.pixels.size() * sizeof(float));
  std::vector<std::int32_t> labels(n);
  r.read(labels.data(), n * sizeof(std::int32_t));
  ds.class_labels.assign(labels.begin(), labels.end());
  if (has_domains) {
    r.read(labels.data(), n * sizeof(std::int32_t));
    ds.domain_labels.assign(labels.begin(), labels.end());
  }
  if (!r.at_end()) throw FormatError("trailing bytes in '" + path + "'");
  return ds;
}

MultiDomainDataset load_or_generate(const std::string& cache_dir, const ColoredShapesRecipe& recipe,
                                    std::uint64_t seed) {
  if (cache_dir.empty()) return make_colored_shapes(recipe, seed);
  const std::string id = recipe.id();
  char name[64];
  std::snprintf(name, sizeof(name), "dataset-%016llx.bin",
                static_cast<unsigned long long>(fnv1a(id + "#" + std::to_string(seed))));
  const std::filesystem::path path = std::filesystem::path(cache_dir) / name;
  if (std::filesystem::exists(path)) {
    try {
      MultiDomainDataset ds = load_dataset(path.string());
      if (ds.provenance.recipe_id == id && ds.provenance.seed == seed) return ds;
    } catch (const FormatError& e) {
      log_warning(std::string("ignoring unreadable dataset cache: ") + e.what());
    }
  }
  MultiDomainDataset ds = make_colored_shapes(recipe, seed);
  std::filesystem::create_directories(cache_dir);
  save_dataset(ds, path.string());
  return ds;
}

std::uint64_t checksum(std::span<const float> values) {
  return fnv1a(std::string_view(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float)));
}

std::uint64_t checksum(const MultiDomainDataset& ds) {
  std::uint64_t h = checksum(std::span<const float>(ds.pixels));
  h = fnv1a(std::string_view(reinterpret_cast<const char*>(ds.class_labels.data()), ds.class_labels.size() * sizeof(int)), h);
  h = fnv1a(std::string_view(reinterpret_cast<const char*>(ds.domain_labels.data()), ds.domain_labels.size() * sizeof(int)), h);
  return h;
}

}  // namespace ddmlab::data
