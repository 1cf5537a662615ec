#include "mpep/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "mpep/errors.hpp"

namespace mpep {

namespace {

using json = nlohmann::ordered_json;

class Parser {
 public:
  Parser(const std::string &text, const std::string &source)
      : text_(text), source_(source) {}

  json parse() {
    json root = json::object();
    json *table = &root;
    skip_blank();
    while (!at_end()) {
      if (peek() == '[') {
        table = parse_table_header(root);
      } else {
        parse_key_value(*table);
      }
      end_of_line();
      skip_blank();
    }
    return root;
  }

 private:
  const std::string &text_;
  const std::string &source_;
  std::size_t pos_ = 0;
  int line_ = 1;

  [[noreturn]] void fail(const std::string &what) const {
    throw validation_error(source_ + ":" + std::to_string(line_) + ": " + what);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  char advance() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  // Skips spaces/tabs and comments on the current line.
  void skip_inline() {
    while (!at_end()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
      } else if (c == '#') {
        while (!at_end() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }

  // Skips whitespace, comments, and newlines.
  void skip_blank() {
    while (!at_end()) {
      skip_inline();
      if (!at_end() && peek() == '\n')
        advance();
      else
        break;
    }
  }

  void end_of_line() {
    skip_inline();
    if (!at_end() && peek() != '\n') fail("unexpected trailing content");
  }

  static bool is_bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::string parse_key() {
    skip_inline();
    if (at_end()) fail("expected a key");
    if (peek() == '"') return parse_basic_string();
    std::string key;
    while (!at_end() && is_bare_key_char(peek())) key += advance();
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> parse_dotted_key() {
    std::vector<std::string> parts{parse_key()};
    skip_inline();
    while (!at_end() && peek() == '.') {
      advance();
      parts.push_back(parse_key());
      skip_inline();
    }
    return parts;
  }

  json *descend(json &root, const std::vector<std::string> &parts,
                std::size_t stop) {
    json *node = &root;
    for (std::size_t i = 0; i < stop; ++i) {
      json &child = (*node)[parts[i]];
      if (child.is_null()) child = json::object();
      if (child.is_array()) {
        if (child.empty()) fail("cannot extend empty table array");
        node = &child.back();
      } else if (child.is_object()) {
        node = &child;
      } else {
        fail("key '" + parts[i] + "' is already a value");
      }
    }
    return node;
  }

  json *parse_table_header(json &root) {
    advance();  // '['
    const bool array_of_tables = !at_end() && peek() == '[';
    if (array_of_tables) advance();
    const std::vector<std::string> parts = parse_dotted_key();
    if (at_end() || advance() != ']') fail("expected ']' closing table header");
    if (array_of_tables && (at_end() || advance() != ']'))
      fail("expected ']]' closing table-array header");
    json *parent = descend(root, parts, parts.size() - 1);
    json &slot = (*parent)[parts.back()];
    if (array_of_tables) {
      if (slot.is_null()) slot = json::array();
      if (!slot.is_array()) fail("table array conflicts with existing key");
      slot.push_back(json::object());
      return &slot.back();
    }
    if (slot.is_null()) slot = json::object();
    if (!slot.is_object()) fail("table conflicts with existing key");
    return &slot;
  }

  void parse_key_value(json &table) {
    const std::vector<std::string> parts = parse_dotted_key();
    skip_inline();
    if (at_end() || advance() != '=') fail("expected '=' after key");
    json *node = descend(table, parts, parts.size() - 1);
    if (node->contains(parts.back()) && !(*node)[parts.back()].is_null())
      fail("duplicate key '" + parts.back() + "'");
    (*node)[parts.back()] = parse_value();
  }

  json parse_value() {
    skip_inline();
    if (at_end()) fail("expected a value");
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    if (text_.compare(pos_, 4, "true") == 0 &&
        (pos_ + 4 >= text_.size() || !is_bare_key_char(text_[pos_ + 4]))) {
      pos_ += 4;
      return true;
    }
    if (text_.compare(pos_, 5, "false") == 0 &&
        (pos_ + 5 >= text_.size() || !is_bare_key_char(text_[pos_ + 5]))) {
      pos_ += 5;
      return false;
    }
    return parse_number();
  }

  std::string parse_basic_string() {
    advance();  // opening quote
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = advance();
      if (c == '"') return out;
      if (c == '\\') {
        if (at_end()) fail("unterminated escape");
        const char e = advance();
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
  }

  json parse_array() {
    advance();  // '['
    json array = json::array();
    skip_blank();
    while (true) {
      if (at_end()) fail("unterminated array");
      if (peek() == ']') {
        advance();
        return array;
      }
      array.push_back(parse_value());
      skip_blank();
      if (!at_end() && peek() == ',') {
        advance();
        skip_blank();
      } else if (!at_end() && peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json parse_inline_table() {
    advance();  // '{'
    json table = json::object();
    skip_inline();
    if (!at_end() && peek() == '}') {
      advance();
      return table;
    }
    while (true) {
      parse_key_value(table);
      skip_inline();
      if (at_end()) fail("unterminated inline table");
      const char c = advance();
      if (c == '}') return table;
      if (c != ',') fail("expected ',' or '}' in inline table");
      skip_inline();
    }
  }

  json parse_number() {
    std::string token;
    while (!at_end()) {
      const char c = peek();
      if (c == ',' || c == ']' || c == '}' || c == '#' || c == '\n' ||
          c == ' ' || c == '\t' || c == '\r')
        break;
      if (c != '_') token += c;
      advance();
    }
    if (token.empty()) fail("expected a value");
    const bool looks_float = token.find_first_of(".eE") != std::string::npos ||
                             token == "inf" || token == "-inf" || token == "nan";
    if (!looks_float) {
      long long value = 0;
      const auto [ptr, ec] =
          std::from_chars(token.data(), token.data() + token.size(), value);
      if (ec == std::errc{} && ptr == token.data() + token.size()) return value;
    }
    try {
      std::size_t consumed = 0;
      const double value = std::stod(token, &consumed);
      if (consumed == token.size()) return value;
    } catch (const std::exception &) {
    }
    fail("malformed value '" + token + "'");
  }
};

void write_value(std::ostream &out, const json &value) {
  switch (value.type()) {
    case json::value_t::string:
      out << '"';
      for (char c : value.get<std::string>()) {
        if (c == '"' || c == '\\') out << '\\';
        out << c;
      }
      out << '"';
      break;
    case json::value_t::array: {
      out << '[';
      bool first = true;
      for (const json &item : value) {
        if (!first) out << ", ";
        first = false;
        write_value(out, item);
      }
      out << ']';
      break;
    }
    case json::value_t::object: {
      out << "{ ";
      bool first = true;
      for (const auto &[key, item] : value.items()) {
        if (!first) out << ", ";
        first = false;
        out << key << " = ";
        write_value(out, item);
      }
      out << " }";
      break;
    }
    default:
      out << value.dump();
  }
}

bool is_table(const json &value) { return value.is_object(); }

bool is_table_array(const json &value) {
  if (!value.is_array() || value.empty()) return false;
  for (const json &item : value)
    if (!item.is_object()) return false;
  return true;
}

void write_table(std::ostream &out, const json &table, const std::string &prefix) {
  // Plain key/value pairs first, then sub-tables, matching TOML conventions.
  for (const auto &[key, value] : table.items())
    if (!is_table(value) && !is_table_array(value)) {
      out << key << " = ";
      write_value(out, value);
      out << "\n";
    }
  for (const auto &[key, value] : table.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (is_table(value)) {
      out << "\n[" << path << "]\n";
      write_table(out, value, path);
    } else if (is_table_array(value)) {
      for (const json &item : value) {
        out << "\n[[" << path << "]]\n";
        write_table(out, item, path);
      }
    }
  }
}

}  // namespace

json parse_toml(const std::string &text, const std::string &source_name) {
  return Parser(text, source_name).parse();
}

json parse_toml_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_toml(buffer.str(), path);
}

std::string to_toml(const json &root) {
  std::ostringstream out;
  write_table(out, root, "");
  return out.str();
}

}  // namespace mpep
