#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using kae::Aggregate;
using kae::MetricRecord;
using kae::Task;

namespace {

MetricRecord rec(Task t, std::string family, unsigned p, double lr, double wd, std::uint64_t seed, double v,
                 std::size_t n = 0) {
  MetricRecord r;
  r.task = t;
  r.recall_n = n;
  r.dataset = "mnist";
  r.d_latent = 16;
  r.family = std::move(family);
  r.p = p;
  r.lr = lr;
  r.wd = wd;
  r.seed = seed;
  r.value = v;
  return r;
}

// Two families on a 2-point grid, two seeds, reconstruction and classification.
std::vector<MetricRecord> grid_records() {
  std::vector<MetricRecord> rs;
  for (std::uint64_t s : {1, 2}) {
    const double j = s == 1 ? -0.001 : 0.001;
    rs.push_back(rec(Task::Reconstruction, "affine", 0, 1e-4, 0, s, 0.060 + j));
    rs.push_back(rec(Task::Reconstruction, "affine", 0, 1e-5, 0, s, 0.070 + j));
    rs.push_back(rec(Task::Reconstruction, "polynomial", 3, 1e-4, 0, s, 0.035 + j));
    rs.push_back(rec(Task::Reconstruction, "polynomial", 3, 1e-5, 0, s, 0.030 + j));
    rs.push_back(rec(Task::Classification, "affine", 0, 1e-4, 0, s, 0.85 + j));
    rs.push_back(rec(Task::Classification, "affine", 0, 1e-5, 0, s, 0.80 + j));
    rs.push_back(rec(Task::Classification, "polynomial", 3, 1e-4, 0, s, 0.93 + j));
    rs.push_back(rec(Task::Classification, "polynomial", 3, 1e-5, 0, s, 0.90 + j));
  }
  return rs;
}

const Aggregate* find(const std::vector<Aggregate>& v, Task t, const std::string& fam) {
  for (const auto& a : v)
    if (a.task == t && a.family == fam) return &a;
  return nullptr;
}

}  // namespace

TEST(Aggregate, MeanAndSampleStdByHand) {
  const std::vector<MetricRecord> rs{rec(Task::Reconstruction, "polynomial", 2, 1e-4, 1e-5, 1, 0.1),
                                     rec(Task::Reconstruction, "polynomial", 2, 1e-4, 1e-5, 2, 0.2),
                                     rec(Task::Reconstruction, "polynomial", 2, 1e-4, 1e-5, 3, 0.3)};
  const auto aggs = kae::aggregate(rs);
  ASSERT_EQ(aggs.size(), 1u);
  EXPECT_NEAR(aggs[0].mean, 0.2, 1e-15);
  EXPECT_NEAR(aggs[0].std, 0.1, 1e-15);  // sqrt((0.01 + 0 + 0.01) / 2)
  EXPECT_EQ(aggs[0].n_seeds, 3u);
  EXPECT_EQ(aggs[0].task_label, "reconstruction");
}

TEST(Aggregate, SingleSeedHasZeroStd) {
  const auto aggs = kae::aggregate({rec(Task::Classification, "affine", 0, 1e-4, 0, 9, 0.5)});
  ASSERT_EQ(aggs.size(), 1u);
  EXPECT_EQ(aggs[0].std, 0.0);
}

TEST(Aggregate, RetrievalCutoffsAreSeparateGroups) {
  const auto aggs = kae::aggregate({rec(Task::Retrieval, "affine", 0, 1e-4, 0, 1, 0.3, 10),
                                    rec(Task::Retrieval, "affine", 0, 1e-4, 0, 1, 0.6, 20)});
  ASSERT_EQ(aggs.size(), 2u);
  EXPECT_EQ(aggs[0].task_label, "retrieval@10");
  EXPECT_EQ(aggs[1].task_label, "retrieval@20");
}

TEST(Aggregate, MeanInsideSeedRangeProperty) {
  std::mt19937 g(1);
  std::uniform_real_distribution<double> U(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MetricRecord> rs;
    double lo = 1, hi = 0;
    for (std::uint64_t s = 0; s < static_cast<std::uint64_t>(2 + trial % 5); ++s) {
      const double v = U(g);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      rs.push_back(rec(Task::DenoisingGaussian, "fourier", 0, 1e-3, 0, s, v));
    }
    const auto a = kae::aggregate(rs).at(0);
    EXPECT_GE(a.mean, lo - 1e-15);
    EXPECT_LE(a.mean, hi + 1e-15);
    EXPECT_GE(a.std, 0.0);
  }
}

TEST(Csv, EmptySetIsHeaderOnly) {
  EXPECT_EQ(kae::records_to_csv({}), std::string(kae::kRecordsHeader) + "\n");
  EXPECT_TRUE(kae::records_from_csv(kae::records_to_csv({})).empty());
  EXPECT_EQ(kae::aggregates_to_csv({}), std::string(kae::kAggregateHeader) + "\n");
}

TEST(Csv, RoundTripThroughJsonIsLossless) {
  auto rs = grid_records();
  rs.push_back(rec(Task::Retrieval, "wavelet", 0, 1e-5, 1e-4, 2030, 0.1 + 0.2, 70));
  rs.push_back(rec(Task::DenoisingSaltPepper, "bspline", 0, 1e-4, 1e-5, 7, 1.0 / 3.0));
  const auto csv = kae::records_to_csv(rs);
  const auto back = kae::records_from_csv(csv);
  EXPECT_EQ(back, rs);

  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : back) arr.push_back(kae::record_to_json(r));
  std::vector<MetricRecord> from_json;
  for (std::size_t i = 0; i < arr.size(); ++i)
    from_json.push_back(kae::record_from_json(nlohmann::json::parse(arr[i].dump()), i));
  EXPECT_EQ(kae::records_to_csv(from_json), csv);
}

TEST(Csv, MalformedLineReportsLineNumber) {
  const std::string text = std::string(kae::kRecordsHeader) + "\n" +
                           "reconstruction,mnist,16,affine,0,0.0001,0,1,0.05\n" +
                           "reconstruction,mnist,16,affine,0,0.0001,0,2,abc\n";
  try {
    kae::records_from_csv(text);
    FAIL() << "expected a parse error";
  } catch (const kae::Error& e) {
    EXPECT_EQ(e.kind(), kae::ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Csv, RejectsWrongHeaderFieldCountAndUnknownTask) {
  EXPECT_THROW(kae::records_from_csv("a,b\n"), kae::Error);
  const std::string h = std::string(kae::kRecordsHeader) + "\n";
  EXPECT_THROW(kae::records_from_csv(h + "reconstruction,mnist,16,affine,0,0.0001,0,1\n"), kae::Error);
  EXPECT_THROW(kae::records_from_csv(h + "sharpness,mnist,16,affine,0,0.0001,0,1,0.1\n"), kae::Error);
  EXPECT_THROW(kae::records_from_csv(h + "reconstruction,mnist,16,affine,0,0.0001,0,1,nan\n"), kae::Error);
}

TEST(Selection, PerTaskUsesEachMetricsDirection) {
  const auto sel = kae::select_best(kae::aggregate(grid_records()), kae::SelectionMode::PerTask);
  ASSERT_EQ(sel.size(), 4u);
  EXPECT_EQ(find(sel, Task::Reconstruction, "affine")->lr, 1e-4);
  EXPECT_EQ(find(sel, Task::Reconstruction, "polynomial")->lr, 1e-5);
  EXPECT_NEAR(find(sel, Task::Reconstruction, "polynomial")->mean, 0.030, 1e-15);
  EXPECT_EQ(find(sel, Task::Classification, "affine")->lr, 1e-4);
  EXPECT_EQ(find(sel, Task::Classification, "polynomial")->lr, 1e-4);
  EXPECT_NEAR(find(sel, Task::Classification, "polynomial")->mean, 0.93, 1e-15);
}

TEST(Selection, ReconstructionModeReportsEveryTaskAtOnePoint) {
  const auto sel = kae::select_best(kae::aggregate(grid_records()), kae::SelectionMode::ReconstructionOnly);
  ASSERT_EQ(sel.size(), 4u);
  EXPECT_EQ(find(sel, Task::Classification, "polynomial")->lr, 1e-5);
  EXPECT_NEAR(find(sel, Task::Classification, "polynomial")->mean, 0.90, 1e-15);
  EXPECT_EQ(find(sel, Task::Classification, "affine")->lr, 1e-4);
  EXPECT_FALSE(kae::parse_selection("best").has_value());
}

TEST(Selection, SelectedIsNoWorseThanAnyGridPointProperty) {
  std::mt19937 g(2);
  std::uniform_real_distribution<double> U(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<MetricRecord> rs;
    for (double lr : {1e-3, 1e-4, 1e-5})
      for (std::uint64_t s = 0; s < 3; ++s) {
        rs.push_back(rec(Task::Reconstruction, "polynomial", 1, lr, 0, s, U(g)));
        rs.push_back(rec(Task::Retrieval, "polynomial", 1, lr, 0, s, U(g), 10));
      }
    const auto aggs = kae::aggregate(rs);
    const auto sel = kae::select_best(aggs);
    for (const auto& a : aggs) {
      const auto* s = find(sel, a.task, a.family);
      if (kae::lower_is_better(a.task))
        EXPECT_LE(s->mean, a.mean);
      else
        EXPECT_GE(s->mean, a.mean);
    }
  }
}

TEST(Improvement, SignFollowsMetricDirection) {
  const auto imp = kae::improvements(kae::select_best(kae::aggregate(grid_records())));
  ASSERT_EQ(imp.size(), 2u);
  for (const auto& i : imp) {
    const double want = i.task_label == "reconstruction" ? 0.060 - 0.030 : 0.93 - 0.85;
    EXPECT_NEAR(i.value, want, 1e-15);
    EXPECT_GT(i.value, 0.0);
  }
}

TEST(Report, MarkdownBoldsTheBestCell) {
  const auto md = kae::report_to_markdown(grid_records());
  EXPECT_NE(md.find("### reconstruction"), std::string::npos);
  EXPECT_NE(md.find("| Model | mnist (16) |"), std::string::npos);
  EXPECT_NE(md.find("| KAE (p=3) | **0.030 ± 0.001** |"), std::string::npos) << md;
  EXPECT_NE(md.find("| AE | 0.060 ± 0.001 |"), std::string::npos) << md;
  EXPECT_NE(md.find("| KAE (p=3) | **0.930 ± 0.001** |"), std::string::npos) << md;
  EXPECT_NE(md.find("| Improve | 0.030 |"), std::string::npos) << md;
}

TEST(Report, RetrievalTablesInNumericOrder) {
  std::vector<MetricRecord> rs;
  for (std::size_t n : {100, 20, 10}) rs.push_back(rec(Task::Retrieval, "affine", 0, 1e-4, 0, 1, n / 100.0, n));
  const auto md = kae::report_to_markdown(rs);
  const auto a = md.find("### retrieval@10\n"), b = md.find("### retrieval@20\n"), c = md.find("### retrieval@100\n");
  ASSERT_NE(c, std::string::npos);
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
}

TEST(Report, EmptyInputGivesHeadersOnly) {
  const auto md = kae::report_to_markdown({});
  EXPECT_NE(md.find("|---"), std::string::npos);
  EXPECT_EQ(std::count(md.begin(), md.end(), '\n'), 2);
  const auto j = kae::report_to_json({});
  EXPECT_TRUE(j["records"].empty());
  EXPECT_TRUE(j["selected"].empty());
}

TEST(Report, JsonHoldsAllSections) {
  const auto j = kae::report_to_json(grid_records());
  EXPECT_EQ(j["records"].size(), 16u);
  EXPECT_EQ(j["aggregates"].size(), 8u);
  EXPECT_EQ(j["selected"].size(), 4u);
  EXPECT_EQ(j["improvement"].size(), 2u);
}

TEST(Files, ReadRecordsAcceptsCsvAndJson) {
  kae::test::TempDir dir("records");
  const auto rs = grid_records();
  kae::write_text(dir.path() / "r.csv", kae::records_to_csv(rs));
  kae::write_text(dir.path() / "r.json", kae::report_to_json(rs).dump());
  EXPECT_EQ(kae::read_records(dir.path() / "r.csv"), rs);
  EXPECT_EQ(kae::read_records(dir.path() / "r.json"), rs);
  EXPECT_THROW(kae::read_records(dir.path() / "missing.csv"), kae::Error);
}
