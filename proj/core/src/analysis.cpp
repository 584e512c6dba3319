#include "blade/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "blade/metrics.hpp"

namespace blade {
namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }

std::string strip_comments(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      in_comment = false;
      out.push_back(c);
      continue;
    }
    if (in_comment) continue;
    if (c == '#' || (c == '/' && i + 1 < text.size() && text[i + 1] == '/')) {
      in_comment = true;
      continue;
    }
    out.push_back(c);
  }
  return out;
}

long count_tokens(const std::string& text, std::set<std::string>* identifiers) {
  long tokens = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (is_ident_start(c)) {
      const std::size_t start = i;
      while (i < text.size() && is_ident_char(text[i])) ++i;
      if (identifiers) identifiers->insert(text.substr(start, i - start));
      ++tokens;
      continue;
    }
    if (is_digit(c)) {
      while (i < text.size() && is_digit(text[i])) ++i;
      if (i + 1 < text.size() && text[i] == '.' && is_digit(text[i + 1])) {
        ++i;
        while (i < text.size() && is_digit(text[i])) ++i;
      }
      if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
        if (j < text.size() && is_digit(text[j])) {
          i = j;
          while (i < text.size() && is_digit(text[i])) ++i;
        }
      }
      ++tokens;
      continue;
    }
    ++i;  // single punctuation glyph
    ++tokens;
  }
  return tokens;
}

std::string escape_dot(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c == '\n' ? ' ' : c);
  }
  return out;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else if (c == '\n') out += ' ';
    else out.push_back(c);
  }
  out += '"';
  return out;
}

}  // namespace

StaticFeatures static_features(const std::string& payload) {
  StaticFeatures f;
  f.char_count = static_cast<long>(payload.size());
  for (char c : payload)
    if (c == '\n') ++f.line_count;
  if (!payload.empty() && payload.back() != '\n') ++f.line_count;

  std::set<std::string> identifiers;
  f.token_count = count_tokens(payload, &identifiers);
  f.distinct_identifier_count = static_cast<long>(identifiers.size());
  f.comment_stripped_token_count = count_tokens(strip_comments(payload), nullptr);
  return f;
}

const std::vector<std::string>& static_feature_names() {
  static const std::vector<std::string> names = {
      "token_count", "line_count", "char_count", "distinct_identifier_count",
      "comment_stripped_token_count"};
  return names;
}

long feature_value(const StaticFeatures& features, const std::string& name) {
  if (name == "token_count") return features.token_count;
  if (name == "line_count") return features.line_count;
  if (name == "char_count") return features.char_count;
  if (name == "distinct_identifier_count") return features.distinct_identifier_count;
  if (name == "comment_stripped_token_count") return features.comment_stripped_token_count;
  throw ConfigError("unknown static feature '" + name + "'");
}

CodeGraph build_ceg(const RunLineage& lineage, const std::string& feature_name) {
  CodeGraph graph;
  graph.feature_name = feature_name;

  std::set<int> rendered;
  for (const auto& c : lineage.candidates) {
    if (c.fitness.value_or(kFailurePenaltyFitness) < 0.0) {
      graph.excluded_ids.push_back(c.id);
      continue;
    }
    rendered.insert(c.id);
    CegNode node;
    node.id = c.id;
    node.index = c.id;
    node.feature =
        static_cast<double>(feature_value(static_features(c.payload_text()), feature_name));
    node.fitness = c.fitness.value();
    node.name = c.name;
    graph.nodes.push_back(std::move(node));
  }

  std::map<int, int> out_degree;
  for (const auto& c : lineage.candidates) {
    if (!rendered.count(c.id)) continue;
    for (int parent : c.parent_ids) {
      if (!rendered.count(parent)) continue;
      graph.edges.push_back({parent, c.id});
      ++out_degree[parent];
    }
  }
  for (auto& node : graph.nodes) node.out_degree = out_degree[node.id];
  return graph;
}

std::string ceg_to_dot(const CodeGraph& graph) {
  std::ostringstream os;
  os << "digraph ceg {\n";
  os << "  // x: candidate index, y: " << graph.feature_name
     << ", color: fitness, size: out-degree\n";
  os << "  rankdir=LR;\n  node [shape=circle];\n";
  for (const auto& n : graph.nodes) {
    os << "  c" << n.id << " [label=\"" << escape_dot(n.name) << "\", index=" << n.index
       << ", feature=" << fmt_double(n.feature) << ", fitness=" << fmt_double(n.fitness)
       << ", out_degree=" << n.out_degree << "];\n";
  }
  for (const auto& e : graph.edges) os << "  c" << e.parent << " -> c" << e.child << ";\n";
  if (!graph.excluded_ids.empty()) {
    os << "  // excluded (failed) candidates:";
    for (int id : graph.excluded_ids) os << " c" << id;
    os << "\n";
  }
  os << "}\n";
  return os.str();
}

std::string ceg_nodes_csv(const CodeGraph& graph) {
  std::ostringstream os;
  os << "id,index," << graph.feature_name << ",fitness,out_degree,name\n";
  for (const auto& n : graph.nodes) {
    os << n.id << ',' << n.index << ',' << fmt_double(n.feature) << ',' << fmt_double(n.fitness)
       << ',' << n.out_degree << ',' << csv_quote(n.name) << '\n';
  }
  return os.str();
}

std::string ceg_edges_csv(const CodeGraph& graph) {
  std::ostringstream os;
  os << "parent,child\n";
  for (const auto& e : graph.edges) os << e.parent << ',' << e.child << '\n';
  return os.str();
}

const ReportCell* ReportTable::cell(const std::string& problem, const std::string& method) const {
  const auto it = cells.find({problem, method});
  return it == cells.end() ? nullptr : &it->second;
}

ReportTable render_report(const ReportSamples& samples) {
  ReportTable table;
  std::set<std::string> method_set;
  for (const auto& [problem, by_method] : samples) {
    table.problems.push_back(problem);
    for (const auto& [method, values] : by_method) method_set.insert(method);
  }
  table.methods.assign(method_set.begin(), method_set.end());

  for (const auto& [problem, by_method] : samples) {
    // means and stds
    std::string best_method;
    double best_mean = -std::numeric_limits<double>::infinity();
    bool best_unique = false;
    for (const auto& [method, values] : by_method) {
      if (values.empty()) throw InputError("report: empty sample for " + method);
      ReportCell cell;
      cell.n = static_cast<int>(values.size());
      double sum = 0.0;
      for (double v : values) sum += v;
      cell.mean = sum / cell.n;
      double sq = 0.0;
      for (double v : values) sq += (v - cell.mean) * (v - cell.mean);
      cell.stddev = cell.n > 1 ? std::sqrt(sq / (cell.n - 1)) : 0.0;
      table.cells[{problem, method}] = cell;

      if (cell.mean > best_mean) {
        best_mean = cell.mean;
        best_method = method;
        best_unique = true;
      } else if (cell.mean == best_mean) {
        best_unique = false;
      }
    }
    if (!best_unique || by_method.size() < 2) continue;

    auto& best_cell = table.cells[{problem, best_method}];
    best_cell.best = true;
    const auto& best_values = by_method.at(best_method);
    if (best_values.size() < 2) continue;

    double p_max = 0.0;
    bool comparable = true;
    for (const auto& [method, values] : by_method) {
      if (method == best_method) continue;
      if (values.size() < 2) {
        comparable = false;
        break;
      }
      p_max = std::max(p_max, welch_t_test(best_values, values));
    }
    if (!comparable) continue;
    best_cell.p_max = p_max;
    best_cell.significant = p_max < 0.05;
  }
  return table;
}

std::string report_to_text(const ReportTable& table) {
  std::ostringstream os;
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header = {"method"};
  for (const auto& p : table.problems) header.push_back(p);
  grid.push_back(header);

  for (const auto& method : table.methods) {
    std::vector<std::string> row = {method};
    for (const auto& problem : table.problems) {
      const auto* cell = table.cell(problem, method);
      if (!cell) {
        row.push_back("-");
        continue;
      }
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%.2f \xc2\xb1 %.2f", cell->mean, cell->stddev);
      std::string text = buf;
      if (cell->best && cell->significant) {
        char pb[32];
        std::snprintf(pb, sizeof(pb), "%.3g", cell->p_max);
        text = "**" + text + "** (p=" + pb + ")";
      }
      row.push_back(text);
    }
    grid.push_back(row);
  }

  std::vector<std::size_t> widths(grid.front().size(), 0);
  for (const auto& row : grid)
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  for (std::size_t r = 0; r < grid.size(); ++r) {
    for (std::size_t i = 0; i < grid[r].size(); ++i) {
      os << grid[r][i] << std::string(widths[i] - grid[r][i].size() + 2, ' ');
    }
    os << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : widths) total += w + 2;
      os << std::string(total, '-') << '\n';
    }
  }
  return os.str();
}

std::string report_to_csv(const ReportTable& table) {
  std::ostringstream os;
  os << "problem,method,mean,std,n,best,significant,p_max\n";
  for (const auto& problem : table.problems) {
    for (const auto& method : table.methods) {
      const auto* cell = table.cell(problem, method);
      if (!cell) continue;
      os << csv_quote(problem) << ',' << csv_quote(method) << ',' << fmt_double(cell->mean) << ','
         << fmt_double(cell->stddev) << ',' << cell->n << ',' << (cell->best ? 1 : 0) << ','
         << (cell->significant ? 1 : 0) << ',' << fmt_double(cell->p_max) << '\n';
    }
  }
  return os.str();
}

}  // namespace blade
