#pragma once

// Synthetic multi-domain image data: procedurally drawn grayscale shape
// classes, tinted per sample with one colour of a palette (one palette
// entry = one domain), plus two-view augmentation for joint-embedding SSL.
//
// Dataset cache file layout (little-endian):
//   char[8]  magic "DDMDSET1"
//   u32      format version (kDatasetFormatVersion)
//   u64      recipe hash (FNV-1a of recipe id)
//   u64      seed
//   u32      M (number of domains, 0 when absent)
//   u32      C_cls (number of classes)
//   u64      N (number of samples)
//   u32 x3   channels, height, width
//   u8       has_domain_labels
//   u64+str  recipe id
//   f32[N*C*H*W]  pixels, sample-major, CHW within a sample
//   i32[N]   class labels
//   i32[N]   domain labels (only when has_domain_labels)

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ddmlab/autograd.hpp"

namespace ddmlab::data {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;
inline constexpr int kMaxShapeClasses = 10;

struct ImageShape {
  int channels = 3;
  int height = 16;
  int width = 16;
  std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
  bool operator==(const ImageShape&) const = default;
};

/// Colour transform: a grayscale pixel g becomes (g*r, g*g', g*b).
struct Tint {
  std::string name;
  std::array<double, 3> rgb{1.0, 1.0, 1.0};
};

/// Named palette colours: red, green, blue, yellow, cyan, magenta, orange,
/// purple, olive, white. Unknown names are a ConfigError.
Tint named_tint(const std::string& name);

struct Provenance {
  std::string recipe_id;
  std::uint64_t seed = 0;
  std::uint64_t recipe_hash = 0;
};

/// Grayscale class-labelled base images (channels == 1) or RGB images that
/// are converted to luminance before tinting.
struct BaseImageSet {
  ImageShape shape{1, 16, 16};
  std::vector<float> pixels;
  std::vector<int> labels;
  int num_classes = 0;
  std::string recipe_id;

  std::size_t size() const { return labels.size(); }
};

struct MultiDomainDataset {
  ImageShape shape;
  std::vector<float> pixels;
  std::vector<int> class_labels;
  std::vector<int> domain_labels;  // empty when domain labels are absent
  int num_domains = 0;
  int num_classes = 0;
  Provenance provenance;

  std::size_t size() const { return class_labels.size(); }
  bool has_domain_labels() const { return !domain_labels.empty(); }
  std::span<const float> image(std::size_t i) const {
    return {pixels.data() + i * shape.size(), shape.size()};
  }
  /// Copy of the dataset with domain labels removed.
  MultiDomainDataset without_domain_labels() const;
};

/// Procedural shape classes (bars, stripes, rings, disks, ...) with random
/// placement, scale, contrast and additive noise.
BaseImageSet make_shape_images(int n, int num_classes, int image_size, double noise, std::uint64_t seed);

/// Tints every base image with a palette entry drawn uniformly at random
/// under `seed`; the palette index becomes the domain label.
MultiDomainDataset generate_colored(const BaseImageSet& base, std::span<const Tint> palette, std::uint64_t seed);

struct GaussianDomains {
  Mat points;               // (M * n_per_domain) x dim
  std::vector<int> labels;  // domain of each row
  Mat means;                // M x dim
};

/// M isotropic unit-variance Gaussians whose means sit on a regular simplex
/// with pairwise distance `separation`.
GaussianDomains synth_gaussian_domains(int num_domains, int n_per_domain, int dim, double separation,
                                       std::uint64_t seed);

struct AugmentRecipe {
  bool crop = true;
  double crop_min_scale = 0.5;  // fraction of the image area kept
  bool flip = true;
  double jitter_prob = 0.8;
  double brightness = 0.4;
  double contrast = 0.4;
  // Per-channel gain jitter changes the tint itself; only applied when
  // preserve_tint is false.
  bool preserve_tint = true;
  double channel_jitter = 0.2;
  // Replaces all channels by the luminance 0.299 R + 0.587 G + 0.114 B.
  double grayscale_prob = 0.0;
  double blur_prob = 0.5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 1.0;

  static AugmentRecipe identity();
};

struct ViewPair {
  std::vector<float> view_a;
  std::vector<float> view_b;
  int sample_id = 0;
  int domain_label = -1;  // -1 when absent
};

/// Two independently augmented views of one sample, deterministic in
/// (seed, sample_id). Values are clamped to [0, 1].
ViewPair two_view_augment(const MultiDomainDataset& ds, int sample_id, const AugmentRecipe& recipe,
                          std::uint64_t seed);

/// Single augmented view; exposed for tests and tooling.
std::vector<float> augment_image(std::span<const float> image, const ImageShape& shape, const AugmentRecipe& recipe,
                                 std::uint64_t seed, std::uint64_t sample_id, std::uint64_t view);

/// Full description of a colored-shapes dataset; `id()` is a stable string.
struct ColoredShapesRecipe {
  int n = 0;
  int num_classes = 10;
  int image_size = 16;
  double noise = 0.1;
  std::vector<Tint> palette;

  std::string id() const;
};

MultiDomainDataset make_colored_shapes(const ColoredShapesRecipe& recipe, std::uint64_t seed);

void save_dataset(const MultiDomainDataset& ds, const std::string& path);
MultiDomainDataset load_dataset(const std::string& path);

/// Loads `<cache_dir>/dataset-<hash>.bin` when present and matching,
/// otherwise generates and writes it. An empty cache_dir disables caching.
MultiDomainDataset load_or_generate(const std::string& cache_dir, const ColoredShapesRecipe& recipe,
                                    std::uint64_t seed);

/// FNV-1a over raw pixel bytes and labels.
std::uint64_t checksum(const MultiDomainDataset& ds);
std::uint64_t checksum(std::span<const float> values);

}  // namespace ddmlab::data
