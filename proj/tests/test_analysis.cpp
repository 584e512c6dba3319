#include <doctest.h>

#include <sstream>

#include "blade/analysis.hpp"
#include "blade/metrics.hpp"
#include "blade/rng.hpp"

using namespace blade;

namespace {

Candidate lineage_entry(int id, std::vector<int> parents, double fitness,
                        CandidateStatus status = CandidateStatus::Evaluated) {
  Candidate c;
  c.id = id;
  c.name = "cand" + std::to_string(id);
  c.payload = SolverConfig{};
  c.parent_ids = std::move(parents);
  c.fitness = fitness;
  c.status = status;
  return c;
}

}  // namespace

TEST_CASE("static feature fixtures") {
  SUBCASE("empty text") {
    const auto f = static_features("");
    CHECK(f.token_count == 0);
    CHECK(f.line_count == 0);
    CHECK(f.char_count == 0);
    CHECK(f.distinct_identifier_count == 0);
    CHECK(f.comment_stripped_token_count == 0);
  }
  SUBCASE("x = x + 1") {
    const auto f = static_features("x = x + 1");
    CHECK(f.token_count == 5);
    CHECK(f.distinct_identifier_count == 1);
    CHECK(f.line_count == 1);
    CHECK(f.char_count == 9);
    CHECK(f.comment_stripped_token_count == 5);
  }
  SUBCASE("comments strip to end of line") {
    const auto f = static_features("a = 1 # set a\nb = 2 // set b\n");
    // full scan: a = 1 # set a (6) and b = 2 / / set b (7)
    CHECK(f.token_count == 13);
    CHECK(f.comment_stripped_token_count == 6);  // a = 1 b = 2
    CHECK(f.distinct_identifier_count == 3);     // a, b, set
    CHECK(f.line_count == 2);
  }
  SUBCASE("numeric literals are single tokens") {
    const auto f = static_features("y = 10e-3 + 2.5 + 7");
    // y = 10e-3 + 2.5 + 7 -> y, =, 10e-3, +, 2.5, +, 7
    CHECK(f.token_count == 7);
    CHECK(f.distinct_identifier_count == 1);
  }
}

TEST_CASE("static features match a constructed 50-line golden record") {
  // Each line is built from pieces with hand-counted token contributions:
  //   "v<i> = v<i> * 3 ; # note <i>"
  // full text: v<i>, =, v<i>, *, 3, ;, #, note, <i>  = 9 tokens
  // stripped:  v<i>, =, v<i>, *, 3, ;                = 6 tokens
  std::string text;
  for (int i = 0; i < 50; ++i) {
    text += "v" + std::to_string(i) + " = v" + std::to_string(i) + " * 3 ; # note " +
            std::to_string(i) + "\n";
  }
  const auto f = static_features(text);
  CHECK(f.line_count == 50);
  CHECK(f.token_count == 50 * 9);
  CHECK(f.comment_stripped_token_count == 50 * 6);
  CHECK(f.distinct_identifier_count == 51);  // v0..v49 and "note"
  CHECK(f.char_count == static_cast<long>(text.size()));

  // idempotent, and trailing blank lines change only line/char counts
  const auto again = static_features(text);
  CHECK(again.token_count == f.token_count);
  const auto padded = static_features(text + "\n\n");
  CHECK(padded.token_count == f.token_count);
  CHECK(padded.distinct_identifier_count == f.distinct_identifier_count);
  CHECK(padded.comment_stripped_token_count == f.comment_stripped_token_count);
  CHECK(padded.line_count == 52);
  CHECK(padded.char_count == f.char_count + 2);
}

TEST_CASE("ceg structure from lineages") {
  SUBCASE("no parents, no edges") {
    RunLineage lineage;
    for (int i = 1; i <= 6; ++i) lineage.candidates.push_back(lineage_entry(i, {}, 0.1 * i));
    const auto graph = build_ceg(lineage, "token_count");
    CHECK(graph.nodes.size() == 6);
    CHECK(graph.edges.empty());
    CHECK(graph.excluded_ids.empty());
  }
  SUBCASE("out-degree counts direct offspring") {
    RunLineage lineage;
    lineage.candidates.push_back(lineage_entry(1, {}, 0.5));
    for (int i = 2; i <= 13; ++i) lineage.candidates.push_back(lineage_entry(i, {1}, 0.3));
    const auto graph = build_ceg(lineage, "token_count");
    REQUIRE(!graph.nodes.empty());
    CHECK(graph.nodes.front().out_degree == 12);
    CHECK(graph.edges.size() == 12);
  }
  SUBCASE("failed candidates are excluded but accounted for") {
    RunLineage lineage;
    for (int i = 1; i <= 20; ++i) {
      const bool failed = i % 7 == 0;  // ids 7 and 14: failed with penalty fitness
      lineage.candidates.push_back(lineage_entry(
          i, i > 2 ? std::vector<int>{1} : std::vector<int>{}, failed ? -1.0 : 0.4,
          failed ? CandidateStatus::Failed : CandidateStatus::Evaluated));
    }
    lineage.candidates[4].fitness = -0.25;  // partially failed, negative mean
    const auto graph = build_ceg(lineage, "char_count");
    CHECK(graph.excluded_ids.size() == 3);
    CHECK(graph.nodes.size() == 17);
    CHECK(graph.nodes.size() + graph.excluded_ids.size() == lineage.candidates.size());
  }
  SUBCASE("unknown feature names are rejected") {
    RunLineage lineage;
    lineage.candidates.push_back(lineage_entry(1, {}, 0.5));
    CHECK_THROWS_AS(build_ceg(lineage, "nonsense_feature"), ConfigError);
  }
}

TEST_CASE("ceg exports carry nodes, edges and exclusions") {
  RunLineage lineage;
  lineage.candidates.push_back(lineage_entry(1, {}, 0.9));
  lineage.candidates.push_back(lineage_entry(2, {1}, 0.7));
  lineage.candidates.push_back(lineage_entry(3, {1}, -1.0, CandidateStatus::Failed));
  const auto graph = build_ceg(lineage, "token_count");

  const std::string dot = ceg_to_dot(graph);
  CHECK(dot.find("digraph ceg") != std::string::npos);
  CHECK(dot.find("c1 -> c2;") != std::string::npos);
  CHECK(dot.find("excluded") != std::string::npos);
  CHECK(dot.find("out_degree=1") != std::string::npos);

  CHECK(ceg_nodes_csv(graph).find("id,index,token_count,fitness,out_degree,name") == 0);
  CHECK(ceg_edges_csv(graph) == "parent,child\n1,2\n");
}

TEST_CASE("report bolds exactly the significantly best method") {
  SUBCASE("clearly separated fixtures") {
    ReportSamples samples;
    samples["f13"]["alpha"] = {0.70, 0.74, 0.71, 0.73, 0.72};
    samples["f13"]["beta"] = {0.50, 0.52, 0.51, 0.49, 0.53};
    samples["f13"]["gamma"] = {0.29, 0.30, 0.28, 0.31, 0.27};
    samples["f13"]["delta"] = {0.24, 0.23, 0.25, 0.22, 0.26};
    const auto table = render_report(samples);

    const auto* best = table.cell("f13", "alpha");
    REQUIRE(best);
    CHECK(best->best);
    CHECK(best->significant);
    CHECK(best->p_max < 0.05);
    // the reported p is the worst pairwise comparison, here against beta
    const double expected =
        welch_t_test(samples["f13"]["alpha"], samples["f13"]["beta"]);
    CHECK(best->p_max == doctest::Approx(expected).epsilon(1e-12));
    for (const auto& other : {"beta", "gamma", "delta"}) {
      CHECK(!table.cell("f13", other)->best);
      CHECK(!table.cell("f13", other)->significant);
    }

    const std::string text = report_to_text(table);
    CHECK(text.find("**0.72") != std::string::npos);
    CHECK(text.find("(p=") != std::string::npos);
  }
  SUBCASE("identical samples bold nothing") {
    ReportSamples samples;
    samples["f2"]["a"] = {0.4, 0.5, 0.6};
    samples["f2"]["b"] = {0.4, 0.5, 0.6};
    const auto table = render_report(samples);
    CHECK(!table.cell("f2", "a")->best);
    CHECK(!table.cell("f2", "b")->best);
    CHECK(report_to_text(table).find("**") == std::string::npos);
  }
  SUBCASE("near-threshold separation is not marked significant") {
    ReportSamples samples;
    samples["f5"]["a"] = {0.50, 0.60, 0.40, 0.55, 0.45};
    samples["f5"]["b"] = {0.48, 0.58, 0.38, 0.53, 0.43};
    const auto table = render_report(samples);
    const auto* best = table.cell("f5", "a");
    CHECK(best->best);
    CHECK(!best->significant);
    CHECK(report_to_text(table).find("**") == std::string::npos);
  }
  SUBCASE("two separated methods bold the higher mean") {
    ReportSamples samples;
    samples["f1"]["low"] = {0.10, 0.12, 0.11, 0.13};
    samples["f1"]["high"] = {0.90, 0.92, 0.91, 0.93};
    const auto table = render_report(samples);
    CHECK(table.cell("f1", "high")->best);
    CHECK(table.cell("f1", "high")->significant);
    CHECK(!table.cell("f1", "low")->best);
  }
  SUBCASE("single-method cells carry no significance marks") {
    ReportSamples samples;
    samples["f21"]["only"] = {0.5, 0.6};
    const auto table = render_report(samples);
    CHECK(!table.cell("f21", "only")->best);
    CHECK(!table.cell("f21", "only")->significant);
  }
}

TEST_CASE("report csv lists every populated cell") {
  ReportSamples samples;
  samples["p1"]["a"] = {0.1, 0.2};
  samples["p1"]["b"] = {0.3, 0.4};
  samples["p2"]["a"] = {0.5, 0.6};
  const auto csv = report_to_csv(render_report(samples));
  CHECK(csv.find("problem,method,mean,std,n,best,significant,p_max") == 0);
  CHECK(csv.find("p1,a,") != std::string::npos);
  CHECK(csv.find("p2,a,") != std::string::npos);
  // p2 has no "b" row
  CHECK(csv.find("p2,b,") == std::string::npos);
}
