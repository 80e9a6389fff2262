#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "probekit/rng.hpp"
#include "probekit/robustness.hpp"

using namespace probekit;

namespace {

RobustnessRecord rec(const std::string& model, const std::string& lang, const std::string& pert,
                     double a_perturbed, size_t n, int layer = 0, double a_clean = 0.5,
                     const std::string& task = "SentLen") {
  return make_record(task, model, lang, layer, pert, a_clean, a_perturbed, n);
}

// Three models by two languages by two perturbations; a_clean = 0.5 so each
// score is 2 * a_perturbed.
std::vector<RobustnessRecord> grid() {
  return {
      rec("A", "hi", "DropF", 0.25, 10),    rec("A", "hi", "Shuffle", 0.375, 30),
      rec("A", "ta", "DropF", 0.5, 20),     rec("A", "ta", "Shuffle", 0.125, 20),
      rec("B", "hi", "DropF", 0.4375, 10),  rec("B", "hi", "Shuffle", 0.3125, 10),
      rec("B", "ta", "DropF", 0.5625, 40),  rec("B", "ta", "Shuffle", 0.25, 10),
      rec("C", "hi", "DropF", 0.0625, 50),  rec("C", "hi", "Shuffle", 0.5, 50),
      rec("C", "ta", "DropF", 0.375, 5),    rec("C", "ta", "Shuffle", 0.4375, 15),
  };
}

ProbeResult result(const std::string& variant, double acc, int layer = 0, size_t n = 10,
                   const std::string& model = "m") {
  ProbeResult r;
  r.task = "SubjNum";
  r.model_name = model;
  r.layer = layer;
  r.variant = variant;
  r.language = "hi";
  r.fold_accuracies = {acc};
  r.mean_accuracy = acc;
  r.termination_reason = "converged";
  r.n_examples = n;
  return r;
}

std::vector<RobustnessRecord> random_records(Rng& rng, size_t n) {
  const char* models[] = {"m1", "m2", "m3"};
  const char* langs[] = {"hi", "kn", "te", "ur"};
  const char* perts[] = {"DropF", "Shuffle", "KeepN"};
  const char* tasks[] = {"SentLen", "VerbGen"};
  std::vector<RobustnessRecord> out;
  for (size_t i = 0; i < n; ++i) {
    const double ac = 0.05 + 0.95 * rng.uniform01();
    out.push_back(make_record(tasks[rng.below(2)], models[rng.below(3)], langs[rng.below(4)],
                              static_cast<int>(rng.below(13)), perts[rng.below(3)], ac,
                              rng.uniform01(), 1 + rng.below(500)));
  }
  return out;
}

}  // namespace

TEST(Score, Examples) {
  EXPECT_EQ(robustness_score(0.8, 0.8), 1.0);
  EXPECT_EQ(robustness_score(0.8, 0.4), 0.5);
  const double s = robustness_score(0.8, 0.88);
  // The quotient is not representable; stay within a couple of ulps of 1.1.
  EXPECT_LE(std::abs(s - 1.1), 2 * std::nextafter(1.1, 2.0) - 2 * 1.1);
  EXPECT_TRUE(improves_under_perturbation(s));
  EXPECT_FALSE(improves_under_perturbation(robustness_score(0.8, 0.8)));
}

TEST(Score, ZeroCleanIsUndefined) {
  EXPECT_THROW(robustness_score(0.0, 0.3), UndefinedForZeroClean);
  EXPECT_THROW(robustness_score(-0.1, 0.3), std::domain_error);
  EXPECT_THROW(robustness_score(std::nan(""), 0.3), std::domain_error);
}

TEST(Score, StrictlyIncreasingInPerturbed) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double ac = 0.01 + rng.uniform01();
    const double a = rng.uniform01();
    const double b = a + 1e-6 + rng.uniform01() * 1e-3;
    EXPECT_LT(robustness_score(ac, a), robustness_score(ac, b));
  }
}

TEST(Dims, Parsing) {
  EXPECT_EQ(parse_dims("model,language"), (std::vector<Dim>{Dim::kModel, Dim::kLanguage}));
  EXPECT_EQ(parse_dims("perturbation"), std::vector<Dim>{Dim::kPerturbation});
  EXPECT_THROW(parse_dims("model,color"), std::invalid_argument);
  EXPECT_THROW(parse_dims("model,model"), std::invalid_argument);
  for (Dim d : {Dim::kTask, Dim::kModel, Dim::kLanguage, Dim::kLayer, Dim::kPerturbation}) {
    EXPECT_EQ(dim_from_name(dim_name(d)), d);
  }
}

TEST(Aggregate, WeightedMeanOfTwo) {
  const std::vector<RobustnessRecord> rs = {rec("A", "hi", "DropF", 0.5, 1),
                                            rec("A", "hi", "Shuffle", 0.25, 3)};
  const RobustnessTable t = aggregate(rs, {Dim::kModel});
  ASSERT_EQ(t.cells.size(), 1u);
  EXPECT_EQ(t.cells[0].score, 0.625);
  EXPECT_EQ(t.cells[0].weight, 4.0);
  EXPECT_EQ(t.cells[0].n_records, 2u);
  EXPECT_THROW(aggregate({}, {Dim::kModel}), std::invalid_argument);
}

TEST(Aggregate, SpreadsheetOracle) {
  const auto rs = grid();
  // Worked out by hand from the grid above.
  const std::map<std::vector<std::string>, std::pair<double, double>> by_model_lang = {
      {{"A", "hi"}, {27.5 / 40, 40}},  {{"A", "ta"}, {25.0 / 40, 40}},
      {{"B", "hi"}, {15.0 / 20, 20}},  {{"B", "ta"}, {50.0 / 50, 50}},
      {{"C", "hi"}, {56.25 / 100, 100}}, {{"C", "ta"}, {16.875 / 20, 20}},
  };
  const RobustnessTable t = aggregate(rs, {Dim::kModel, Dim::kLanguage});
  ASSERT_EQ(t.cells.size(), 6u);
  for (const auto& [key, want] : by_model_lang) {
    const TableCell* c = t.find(key);
    ASSERT_NE(c, nullptr);
    EXPECT_NEAR(c->score, want.first, 1e-12) << key[0] << key[1];
    EXPECT_EQ(c->weight, want.second);
  }
  const RobustnessTable m = aggregate(rs, {Dim::kModel});
  EXPECT_NEAR(m.find({"A"})->score, 52.5 / 80, 1e-12);
  EXPECT_NEAR(m.find({"B"})->score, 65.0 / 70, 1e-12);
  EXPECT_NEAR(m.find({"C"})->score, 73.125 / 120, 1e-12);
  const RobustnessTable l = aggregate(rs, {Dim::kLanguage});
  EXPECT_NEAR(l.find({"hi"})->score, 98.75 / 160, 1e-12);
  EXPECT_NEAR(l.find({"ta"})->score, 91.875 / 110, 1e-12);
  const RobustnessTable p = aggregate(rs, {Dim::kPerturbation});
  EXPECT_NEAR(p.find({"DropF"})->score, 88.75 / 135, 1e-12);
  EXPECT_NEAR(p.find({"Shuffle"})->score, 101.875 / 135, 1e-12);
  EXPECT_EQ(p.find({"KeepN"}), nullptr);
}

TEST(Aggregate, IdentityGrouping) {
  const auto rs = grid();
  const RobustnessTable t = aggregate(
      rs, {Dim::kTask, Dim::kModel, Dim::kLanguage, Dim::kLayer, Dim::kPerturbation});
  ASSERT_EQ(t.cells.size(), rs.size());
  for (const RobustnessRecord& r : rs) {
    const TableCell* c = t.find({r.task, r.model, r.language, "0", r.perturbation});
    ASSERT_NE(c, nullptr);
    EXPECT_EQ(c->score, r.score);
    EXPECT_EQ(c->weight, static_cast<double>(r.n_examples));
  }
}

TEST(Aggregate, LayersSortNumerically) {
  const std::vector<RobustnessRecord> rs = {rec("A", "hi", "DropF", 0.5, 1, 10),
                                            rec("A", "hi", "DropF", 0.5, 1, 2)};
  const RobustnessTable t = aggregate(rs, {Dim::kLayer});
  ASSERT_EQ(t.cells.size(), 2u);
  EXPECT_EQ(t.cells[0].key, std::vector<std::string>{"2"});
  EXPECT_EQ(t.cells[1].key, std::vector<std::string>{"10"});
}

TEST(AggregateProperties, BoundsAndMarginalization) {
  Rng rng(5);
  const std::vector<std::vector<Dim>> pairs = {
      {Dim::kModel, Dim::kLanguage}, {Dim::kTask, Dim::kPerturbation},
      {Dim::kLayer, Dim::kModel}, {Dim::kLanguage, Dim::kPerturbation, Dim::kTask}};
  for (int trial = 0; trial < 50; ++trial) {
    const auto rs = random_records(rng, 5 + rng.below(200));
    for (const auto& dims : pairs) {
      const RobustnessTable t = aggregate(rs, dims);
      double total = 0;
      for (const TableCell& c : t.cells) {
        EXPECT_GT(c.weight, 0.0);
        EXPECT_GE(c.score, c.min_score);
        EXPECT_LE(c.score, c.max_score);
        total += c.weight;
      }
      double n = 0;
      for (const auto& r : rs) n += static_cast<double>(r.n_examples);
      EXPECT_EQ(total, n);
      for (const Dim d : dims) {
        const RobustnessTable direct = aggregate(rs, {d});
        const RobustnessTable via = reaggregate(t, {d});
        ASSERT_EQ(direct.cells.size(), via.cells.size());
        for (size_t i = 0; i < direct.cells.size(); ++i) {
          EXPECT_EQ(direct.cells[i].key, via.cells[i].key);
          EXPECT_NEAR(direct.cells[i].score, via.cells[i].score, 1e-12);
          EXPECT_EQ(direct.cells[i].weight, via.cells[i].weight);
        }
      }
    }
  }
}

TEST(Layers, LowestFirst) {
  const std::vector<RobustnessRecord> rs = {rec("A", "hi", "DropF", 0.2, 1, 1),
                                            rec("A", "hi", "DropF", 0.45, 1, 2),
                                            rec("A", "hi", "DropF", 0.45, 1, 3)};
  const LayerRanking r = most_affected_layers(rs, 1);
  EXPECT_FALSE(r.equal);
  EXPECT_EQ(r.most_affected, std::vector<int>{1});
  EXPECT_THROW(most_affected_layers({rs[0]}, 1), std::invalid_argument);
}

TEST(Layers, EqualWithinThreshold) {
  std::vector<RobustnessRecord> rs;
  for (int layer = 0; layer < 12; ++layer) {
    rs.push_back(make_record("SentLen", "A", "hi", layer, "DropF", 1.0, 0.9 + 0.0004 * layer, 7));
  }
  const LayerRanking r = most_affected_layers(rs, 3);
  EXPECT_TRUE(r.equal);
  EXPECT_TRUE(r.most_affected.empty());
  EXPECT_EQ(r.ranking.size(), 12u);
}

TEST(Layers, TwelveLayerHandSort) {
  const double profile[12] = {0.91, 0.88, 0.95, 0.70, 0.82, 0.77,
                              0.99, 0.64, 0.85, 0.73, 0.90, 0.96};
  std::vector<RobustnessRecord> rs;
  for (int layer = 0; layer < 12; ++layer) {
    rs.push_back(make_record("SentLen", "A", "hi", layer, "Shuffle", 1.0, profile[layer], 10));
  }
  const LayerRanking r = most_affected_layers(rs, 4);
  const std::vector<int> hand = {7, 3, 9, 5, 4, 8, 1, 10, 0, 2, 11, 6};
  std::vector<int> got;
  for (const auto& [layer, score] : r.ranking) got.push_back(layer);
  EXPECT_EQ(got, hand);
  EXPECT_EQ(r.most_affected, (std::vector<int>{7, 3, 9, 5}));
}

TEST(Layers, RankingScaleInvariant) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<RobustnessRecord> rs;
    for (int layer = 0; layer < 13; ++layer) {
      for (int m = 0; m < 3; ++m) {
        rs.push_back(make_record("VerbNum", "m" + std::to_string(m), "hi", layer, "DropN",
                                 0.5 + 0.5 * rng.uniform01(), rng.uniform01(), 1 + rng.below(50)));
      }
    }
    const double k = 0.1 + 3 * rng.uniform01();
    auto scaled = rs;
    for (auto& r : scaled) r.score *= k;
    const LayerRanking a = most_affected_layers(rs, 13, 0.0);
    const LayerRanking b = most_affected_layers(scaled, 13, 0.0);
    EXPECT_EQ(a.most_affected, b.most_affected);
  }
}

TEST(Layers, TablePerTaskAndLanguage) {
  std::vector<RobustnessRecord> rs;
  for (int layer = 0; layer < 3; ++layer) {
    rs.push_back(make_record("SentLen", "A", "hi", layer, "DropF", 1.0, layer == 1 ? 0.5 : 0.9, 1));
    rs.push_back(make_record("SentLen", "A", "ta", layer, "DropF", 1.0, 0.8, 1));
  }
  rs.push_back(make_record("VerbGen", "A", "hi", 0, "DropF", 1.0, 0.8, 1));
  const auto rows = most_affected_table(rs, 1);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].language, "hi");
  EXPECT_EQ(rows[0].ranking.most_affected, std::vector<int>{1});
  EXPECT_TRUE(rows[1].ranking.equal);
  EXPECT_EQ(affected_to_csv(rows),
            "task,language,most_affected_layers\nSentLen,hi,1\nSentLen,ta,Equal\n");
}

TEST(Records, JoinCleanAndPerturbed) {
  const std::vector<ProbeResult> results = {
      result("clean", 0.8, 0), result("DropF", 0.4, 0, 12), result("Shuffle", 0.88, 0),
      result("clean", 0.0, 1), result("DropF", 0.3, 1),     result("DropF", 0.5, 2)};
  const RecordSet set = build_records(results);
  ASSERT_EQ(set.records.size(), 2u);
  EXPECT_EQ(set.excluded_zero_clean, 1u);
  EXPECT_EQ(set.unmatched, 1u);
  EXPECT_EQ(set.records[0].perturbation, "DropF");
  EXPECT_EQ(set.records[0].score, 0.5);
  EXPECT_EQ(set.records[0].n_examples, 12u);
  EXPECT_TRUE(improves_under_perturbation(set.records[1].score));
}

TEST(Writers, PivotAndSvg) {
  const RobustnessTable t = aggregate(grid(), {Dim::kModel, Dim::kLanguage});
  const std::string pivot = table_to_pivot_csv(t);
  EXPECT_EQ(pivot.substr(0, pivot.find('\n')), "model\\language,hi,ta");
  EXPECT_NE(pivot.find("\nB,0.75,1\n"), std::string::npos) << pivot;
  EXPECT_THROW(table_to_pivot_csv(aggregate(grid(), {Dim::kModel})), std::invalid_argument);
  const std::string svg = table_to_svg_heatmap(t, "model x language");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  const std::string csv = table_to_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,language,score,weight,n_records");
}
