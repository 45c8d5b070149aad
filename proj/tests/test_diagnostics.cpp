#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ddmlab/diagnostics.hpp"
#include "ddmlab/errors.hpp"
#include "oracles.hpp"

using namespace ddmlab;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ClassDomainMeans, NormalizedMeansAndEmptyCells) {
  Mat reps(5, 2);
  reps << 3, 4, 3, 4, 0, 2, 1, 0, 1, 0;
  const std::vector<int> cls{0, 0, 1, 0, 0};
  const std::vector<int> dom{0, 0, 0, 1, 1};
  const auto r = diag::class_domain_means(reps, cls, dom, 2, 2);
  ASSERT_EQ(r.cells.size(), 3u);  // (1, 1) is empty
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.cells[0].count, 2);
  EXPECT_NEAR(r.means(0, 0), 0.6, 1e-12);
  EXPECT_NEAR(r.means(0, 1), 0.8, 1e-12);
  EXPECT_EQ(r.cells[2].domain, 1);
  EXPECT_THROW(diag::class_domain_means(reps, cls, std::vector<int>{0, 0, 0, 2, 1}, 2, 2), InputError);
}

TEST(ActivatingFeatures, ThresholdOnStandardDeviations) {
  diag::FeatureActivationReport r;
  r.means = Mat::Zero(4, 3);
  r.means(0, 1) = 1.0;  // one outlying entry in column 1
  r.cells.resize(4);
  const auto rows = diag::row_activating_features(r, 1.5);
  EXPECT_EQ(rows[0], (std::vector<int>{1}));
  EXPECT_TRUE(rows[1].empty());
  EXPECT_EQ(diag::most_activating_features(r, 1.5), (std::vector<int>{1}));
  EXPECT_TRUE(diag::most_activating_features(r, 2.0).empty());  // |dev| / sigma = sqrt(3)
  EXPECT_THROW(diag::most_activating_features(r, 0.0), ConfigError);
}

TEST(Jaccard, Basics) {
  EXPECT_EQ(diag::jaccard(std::vector<int>{}, std::vector<int>{}), 1.0);
  EXPECT_EQ(diag::jaccard(std::vector<int>{1, 2}, std::vector<int>{2, 3}), 1.0 / 3.0);
  EXPECT_EQ(diag::jaccard(std::vector<int>{1}, std::vector<int>{2}), 0.0);
}

TEST(Overlap, SharedClassPatternsScoreOne) {
  // Three domains coded in features 0..2, three classes in features 3..5.
  Mat reps(9, 6);
  std::vector<int> cls, dom;
  for (int d = 0; d < 3; ++d) {
    for (int c = 0; c < 3; ++c) {
      const Eigen::Index row = static_cast<Eigen::Index>(cls.size());
      reps.row(row).setZero();
      reps(row, d) = 1.0;
      reps(row, 3 + c) = 1.0;
      cls.push_back(c);
      dom.push_back(d);
    }
  }
  const auto r = diag::class_domain_means(reps, cls, dom, 3, 3);
  EXPECT_NEAR(diag::domain_overlap_score(r, 1.0, eval::Slice::kRemainder, 3), 1.0, 1e-12);
  EXPECT_NEAR(diag::domain_overlap_score(r, 1.0, eval::Slice::kPrefix, 3), 0.0, 1e-12);
}

TEST(Heatmap, WritesCellsByFeatures) {
  diag::FeatureActivationReport r;
  r.means = Mat::Identity(2, 3);
  r.cells = {{0, 0, 1}, {1, 0, 1}};
  const fs::path p = fs::temp_directory_path() / "ddmlab_heatmap.csv";
  diag::write_heatmap_csv(p.string(), r, std::vector<int>{0, 2}, {{"slice", "full"}}, {"red", "green"});
  const std::string text = read_file(p);
  EXPECT_NE(text.find("# slice=full"), std::string::npos);
  EXPECT_NE(text.find("f0"), std::string::npos);
  EXPECT_NE(text.find("f2"), std::string::npos);
  EXPECT_NE(text.find("green"), std::string::npos);
  EXPECT_THROW(diag::write_heatmap_csv(p.string(), r, std::vector<int>{7}, {}), InputError);
}

TEST(Embeddings, ExportReloadsBitExact) {
  const Mat reps = oracle::random_matrix(5, 6, 3) * 1e3;
  const std::vector<int> cls{0, 1, 2, 0, 1}, dom{1, 0, 1, 0, 1};
  const fs::path p = fs::temp_directory_path() / "ddmlab_emb.csv";
  diag::export_embeddings(p.string(), reps, cls, dom, eval::Slice::kRemainder, 2, {{"config_hash", "x"}});
  const auto e = diag::load_embeddings(p.string());
  EXPECT_EQ(e.version, diag::kEmbeddingVersion);
  EXPECT_EQ(e.values, reps.rightCols(4));
  EXPECT_EQ(e.class_labels, cls);
  EXPECT_EQ(e.domain_labels, dom);
  EXPECT_EQ(e.ids, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(Embeddings, RejectsUnknownVersionAndGarbage) {
  const fs::path p = fs::temp_directory_path() / "ddmlab_emb_bad.csv";
  {
    std::ofstream(p) << "# ddmlab-embeddings v9\nid,class,domain,f0\n0,0,0,1\n";
  }
  EXPECT_THROW(diag::load_embeddings(p.string()), FormatError);
  {
    std::ofstream(p) << "hello\n";
  }
  EXPECT_THROW(diag::load_embeddings(p.string()), FormatError);
  EXPECT_THROW(diag::load_embeddings((p.string() + ".missing")), IoError);
}
