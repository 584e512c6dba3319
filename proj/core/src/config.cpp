#include "blade/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace blade {
namespace {

[[noreturn]] void fail(int line, const std::string& message) {
  throw ConfigError("config line " + std::to_string(line) + ": " + message);
}

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

// strips a trailing comment that is not inside a string literal
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::string parse_basic_string(std::string_view body, int line) {
  std::string out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c != '\\') {
      out.push_back(c);
      continue;
    }
    if (++i >= body.size()) fail(line, "dangling escape in string");
    switch (body[i]) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      default: fail(line, std::string("unsupported escape \\") + body[i]);
    }
  }
  return out;
}

ConfigValue parse_scalar(std::string_view token, int line);

ConfigValue parse_value(std::string_view raw, int line) {
  const std::string_view token = trim(raw);
  if (token.empty()) fail(line, "missing value");

  if (token.front() == '[') {
    if (token.back() != ']') fail(line, "unterminated array");
    ConfigValue value;
    value.kind = ConfigValue::Kind::Array;
    value.line = line;
    std::string_view body = trim(token.substr(1, token.size() - 2));
    if (body.empty()) return value;
    // split on commas outside strings
    std::size_t start = 0;
    bool in_string = false;
    for (std::size_t i = 0; i <= body.size(); ++i) {
      if (i < body.size() && body[i] == '"' && (i == 0 || body[i - 1] != '\\'))
        in_string = !in_string;
      if (i == body.size() || (body[i] == ',' && !in_string)) {
        const auto piece = trim(body.substr(start, i - start));
        if (piece.empty()) fail(line, "empty array element");
        value.array.push_back(parse_scalar(piece, line));
        start = i + 1;
      }
    }
    return value;
  }
  return parse_scalar(token, line);
}

ConfigValue parse_scalar(std::string_view token, int line) {
  ConfigValue value;
  value.line = line;
  if (token.size() >= 2 && token.front() == '"' && token.back() == '"') {
    value.kind = ConfigValue::Kind::String;
    value.text = parse_basic_string(token.substr(1, token.size() - 2), line);
    return value;
  }
  if (token == "true" || token == "false") {
    value.kind = ConfigValue::Kind::Boolean;
    value.boolean = token == "true";
    return value;
  }
  const std::string text(token);
  const bool looks_float = text.find_first_of(".eE") != std::string::npos;
  if (!looks_float) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(text, &used);
      if (used == text.size()) {
        value.kind = ConfigValue::Kind::Integer;
        value.integer = v;
        value.number = static_cast<double>(v);
        return value;
      }
    } catch (const std::exception&) {
      // fall through to the float path
    }
  }
  try {
    value.number = parse_double(text);
    value.kind = ConfigValue::Kind::Float;
    return value;
  } catch (const InputError&) {
    fail(line, "cannot parse value '" + text + "'");
  }
}

std::vector<std::string> parse_header_path(std::string_view body, int line) {
  std::vector<std::string> path;
  for (const auto& part : split(body, '.')) {
    const auto key = trim(part);
    if (key.empty()) fail(line, "empty table name component");
    for (char c : key)
      if (!is_bare_key_char(c)) fail(line, "invalid table name '" + std::string(key) + "'");
    path.emplace_back(key);
  }
  return path;
}

}  // namespace

std::string ConfigValue::as_string() const {
  if (kind != Kind::String) fail(line, "expected a string value");
  return text;
}

long long ConfigValue::as_int() const {
  if (kind != Kind::Integer) fail(line, "expected an integer value");
  return integer;
}

double ConfigValue::as_double() const {
  if (kind != Kind::Float && kind != Kind::Integer) fail(line, "expected a number");
  return number;
}

bool ConfigValue::as_bool() const {
  if (kind != Kind::Boolean) fail(line, "expected true or false");
  return boolean;
}

const std::vector<ConfigValue>& ConfigValue::as_array() const {
  if (kind != Kind::Array) fail(line, "expected an array");
  return array;
}

const ConfigValue* ConfigTable::find(const std::string& key) const {
  const auto it = values.find(key);
  return it == values.end() ? nullptr : &it->second;
}

const ConfigTable* ConfigTable::table(const std::string& key) const {
  const auto it = tables.find(key);
  return it == tables.end() ? nullptr : &it->second;
}

const std::vector<ConfigTable>* ConfigTable::table_array(const std::string& key) const {
  const auto it = table_arrays.find(key);
  return it == table_arrays.end() ? nullptr : &it->second;
}

std::string ConfigTable::get_string(const std::string& key, const std::string& fallback) const {
  const auto* v = find(key);
  return v ? v->as_string() : fallback;
}

long long ConfigTable::get_int(const std::string& key, long long fallback) const {
  const auto* v = find(key);
  return v ? v->as_int() : fallback;
}

double ConfigTable::get_double(const std::string& key, double fallback) const {
  const auto* v = find(key);
  return v ? v->as_double() : fallback;
}

bool ConfigTable::get_bool(const std::string& key, bool fallback) const {
  const auto* v = find(key);
  return v ? v->as_bool() : fallback;
}

std::vector<long long> ConfigTable::get_int_array(const std::string& key) const {
  const auto* v = find(key);
  if (!v) return {};
  std::vector<long long> out;
  for (const auto& item : v->as_array()) out.push_back(item.as_int());
  return out;
}

std::vector<std::string> ConfigTable::get_string_array(const std::string& key) const {
  const auto* v = find(key);
  if (!v) return {};
  std::vector<std::string> out;
  for (const auto& item : v->as_array()) out.push_back(item.as_string());
  return out;
}

const ConfigValue& ConfigTable::require(const std::string& key) const {
  const auto* v = find(key);
  if (!v) fail(line, "missing required key '" + key + "'");
  return *v;
}

ConfigTable parse_config(const std::string& text) {
  ConfigTable root;
  root.line = 1;
  ConfigTable* current = &root;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      const bool is_array = line.size() >= 2 && line[1] == '[';
      const std::string_view closer = is_array ? "]]" : "]";
      if (line.substr(line.size() - closer.size()) != closer)
        fail(line_no, "unterminated table header");
      const auto body = line.substr(is_array ? 2 : 1,
                                    line.size() - (is_array ? 4 : 2));
      const auto path = parse_header_path(body, line_no);
      if (path.empty()) fail(line_no, "empty table header");

      ConfigTable* node = &root;
      for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        node = &node->tables[path[i]];
        if (node->line == 0) node->line = line_no;
      }
      if (is_array) {
        auto& list = node->table_arrays[path.back()];
        list.emplace_back();
        list.back().line = line_no;
        current = &list.back();
      } else {
        auto& child = node->tables[path.back()];
        if (child.line != 0) fail(line_no, "table [" + std::string(body) + "] redefined");
        child.line = line_no;
        current = &child;
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) fail(line_no, "empty key");
    for (char c : key)
      if (!is_bare_key_char(c)) fail(line_no, "invalid key '" + std::string(key) + "'");
    const std::string key_str(key);
    if (current->values.count(key_str)) fail(line_no, "key '" + key_str + "' redefined");
    current->values[key_str] = parse_value(line.substr(eq + 1), line_no);
  }
  return root;
}

ConfigTable parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace blade
