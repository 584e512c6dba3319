#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "blade/aad.hpp"

namespace blade {

/// Language-agnostic lexical counts over a candidate payload. Tokens are
/// maximal identifier runs, numeric literals, or single punctuation glyphs;
/// comments run from '#' or '//' to end of line.
struct StaticFeatures {
  long token_count = 0;
  long line_count = 0;
  long char_count = 0;
  long distinct_identifier_count = 0;
  long comment_stripped_token_count = 0;
};

StaticFeatures static_features(const std::string& payload);

const std::vector<std::string>& static_feature_names();
long feature_value(const StaticFeatures& features, const std::string& name);

struct CegNode {
  int id = 0;
  int index = 0;       // position on the generation axis (candidate id)
  double feature = 0;  // selected static feature
  double fitness = 0;
  int out_degree = 0;
  std::string name;
};

struct CegEdge {
  int parent = 0;
  int child = 0;
};

/// Code evolution graph of one run: a node per rendered candidate, edges for
/// parent-offspring relations, failed (negative-fitness) candidates kept in
/// the excluded list instead of the drawing.
struct CodeGraph {
  std::string feature_name;
  std::vector<CegNode> nodes;
  std::vector<CegEdge> edges;
  std::vector<int> excluded_ids;
};

CodeGraph build_ceg(const RunLineage& lineage, const std::string& feature_name);

std::string ceg_to_dot(const CodeGraph& graph);
std::string ceg_nodes_csv(const CodeGraph& graph);
std::string ceg_edges_csv(const CodeGraph& graph);

/// problem -> method -> final-score samples (one per validation run).
using ReportSamples = std::map<std::string, std::map<std::string, std::vector<double>>>;

struct ReportCell {
  double mean = 0.0;
  double stddev = 0.0;
  int n = 0;
  bool best = false;         // strictly greatest mean in its problem column
  bool significant = false;  // Welch p < 0.05 against every other method
  double p_max = 1.0;        // largest pairwise p against the other methods
};

/// Mean +- std per (method, problem) with the best method bold-marked iff it
/// is significantly better than every competitor at the 0.05 threshold.
struct ReportTable {
  std::vector<std::string> problems;
  std::vector<std::string> methods;
  std::map<std::pair<std::string, std::string>, ReportCell> cells;  // (problem, method)

  const ReportCell* cell(const std::string& problem, const std::string& method) const;
};

ReportTable render_report(const ReportSamples& samples);
std::string report_to_text(const ReportTable& table);
std::string report_to_csv(const ReportTable& table);

}  // namespace blade
