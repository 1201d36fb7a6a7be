#include "prefprog/dsl/syntax.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <vector>

#include "prefprog/error.hpp"

namespace prefprog::dsl {

namespace {

enum class TokenKind { kLParen, kRParen, kNumber, kString, kHole, kIdent, kEnd };

struct Token {
  TokenKind kind = TokenKind::kEnd;
  std::string text;
  double number = 0.0;
  double lo = kDefaultHoleLo;
  double hi = kDefaultHoleHi;
  SourceSpan span;
};

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '<' || c == '>' ||
         c == '=' || c == '+' || c == '-' || c == '*' || c == '/' || c == '.' || c == '!';
}

std::optional<double> to_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::string_view body = text;
  if (body.front() == '+') body.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (ec != std::errc() || ptr != body.data() + body.size()) return std::nullopt;
  return value;
}

bool looks_numeric(std::string_view text) {
  std::size_t i = 0;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) ++i;
  if (i < text.size() && text[i] == '.') ++i;
  return i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])) != 0;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token tok;
      tok.span = {line_, col_};
      if (pos_ >= src_.size()) {
        tok.kind = TokenKind::kEnd;
        out.push_back(tok);
        return out;
      }
      char c = src_[pos_];
      if (c == '(') {
        tok.kind = TokenKind::kLParen;
        advance();
      } else if (c == ')') {
        tok.kind = TokenKind::kRParen;
        advance();
      } else if (c == '"') {
        tok.kind = TokenKind::kString;
        tok.text = read_string(tok.span);
      } else if (c == '?' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '?') {
        advance();
        advance();
        read_hole(tok);
      } else if (is_ident_char(c)) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) advance();
        tok.text = std::string(src_.substr(start, pos_ - start));
        if (looks_numeric(tok.text)) {
          auto value = to_number(tok.text);
          if (!value) throw SyntaxError(tok.span.line, tok.span.column, "bad number '" + tok.text + "'");
          tok.kind = TokenKind::kNumber;
          tok.number = *value;
        } else {
          tok.kind = TokenKind::kIdent;
        }
      } else {
        throw SyntaxError(line_, col_, std::string("unexpected character '") + c + "'");
      }
      out.push_back(std::move(tok));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ';') {  // comment to end of line
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c)) != 0) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string read_string(SourceSpan span) {
    advance();  // opening quote
    std::string out;
    while (pos_ < src_.size() && src_[pos_] != '"') {
      if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) advance();
      out.push_back(src_[pos_]);
      advance();
    }
    if (pos_ >= src_.size()) throw SyntaxError(span.line, span.column, "unterminated string");
    advance();
    return out;
  }

  void read_hole(Token& tok) {
    tok.kind = TokenKind::kHole;
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) != 0 || src_[pos_] == '_')) {
      advance();
    }
    tok.text = std::string(src_.substr(start, pos_ - start));
    if (tok.text.empty()) throw SyntaxError(tok.span.line, tok.span.column, "hole without a name");
    if (pos_ < src_.size() && src_[pos_] == '[') {
      advance();
      std::size_t close = src_.find(']', pos_);
      if (close == std::string_view::npos) {
        throw SyntaxError(tok.span.line, tok.span.column, "unterminated hole bounds");
      }
      std::string_view inside = src_.substr(pos_, close - pos_);
      std::size_t comma = inside.find(',');
      auto lo = comma == std::string_view::npos ? std::nullopt : to_number(inside.substr(0, comma));
      auto hi = comma == std::string_view::npos ? std::nullopt : to_number(inside.substr(comma + 1));
      if (!lo || !hi || *lo > *hi) {
        throw SyntaxError(tok.span.line, tok.span.column,
                          "bad hole bounds '[" + std::string(inside) + "]'");
      }
      tok.lo = *lo;
      tok.hi = *hi;
      while (pos_ <= close) advance();
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

bool is_keyword(std::string_view s) {
  static constexpr std::array<std::string_view, 7> kKeywords = {"if",  "leaf", "and",  "or",
                                                                "not", "true", "false"};
  for (auto k : kKeywords) {
    if (k == s) return true;
  }
  return false;
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, const LabelSet* labels)
      : toks_(std::move(tokens)), labels_(labels) {}

  NodePtr node() {
    const Token& open = expect(TokenKind::kLParen, "'('");
    const Token& kw = expect(TokenKind::kIdent, "'leaf' or 'if'");
    if (kw.text == "leaf") {
      const Token& label = expect(TokenKind::kIdent, "label");
      if (labels_ != nullptr && !labels_->contains(label.text)) {
        throw Error(ErrorCode::kUnknownLabel,
                    std::to_string(label.span.line) + ":" + std::to_string(label.span.column) +
                        ": unknown label '" + label.text + "'");
      }
      expect(TokenKind::kRParen, "')'");
      return std::make_shared<Node>(Node{Leaf{label.text}, open.span});
    }
    if (kw.text == "if") {
      auto c = cond();
      auto then_branch = node();
      auto else_branch = node();
      expect(TokenKind::kRParen, "')'");
      return std::make_shared<Node>(Node{Branch{c, then_branch, else_branch}, open.span});
    }
    throw SyntaxError(kw.span.line, kw.span.column, "expected 'leaf' or 'if', got '" + kw.text + "'");
  }

  CondPtr cond() {
    const Token& t = peek();
    if (t.kind == TokenKind::kIdent && (t.text == "true" || t.text == "false")) {
      ++pos_;
      return std::make_shared<Cond>(Cond{BoolLit{t.text == "true"}, t.span});
    }
    const Token& open = expect(TokenKind::kLParen, "condition");
    const Token& head = expect(TokenKind::kIdent, "condition head");
    if (head.text == "not") {
      auto inner = cond();
      expect(TokenKind::kRParen, "')'");
      return std::make_shared<Cond>(Cond{Not{inner}, open.span});
    }
    if (head.text == "and" || head.text == "or") {
      std::vector<CondPtr> args;
      while (peek().kind != TokenKind::kRParen) args.push_back(cond());
      if (args.empty()) {
        throw SyntaxError(head.span.line, head.span.column, "'" + head.text + "' needs operands");
      }
      ++pos_;
      if (head.text == "and") return std::make_shared<Cond>(Cond{And{std::move(args)}, open.span});
      return std::make_shared<Cond>(Cond{Or{std::move(args)}, open.span});
    }
    if (is_keyword(head.text)) {
      throw SyntaxError(head.span.line, head.span.column, "unexpected keyword '" + head.text + "'");
    }
    std::vector<TermPtr> args;
    while (peek().kind != TokenKind::kRParen) args.push_back(term());
    ++pos_;
    return std::make_shared<Cond>(Cond{Atom{head.text, std::move(args)}, open.span});
  }

  TermPtr term() {
    const Token& t = peek();
    ++pos_;
    switch (t.kind) {
      case TokenKind::kNumber:
        return std::make_shared<Term>(Term{NumberLit{t.number}, t.span});
      case TokenKind::kString:
        return std::make_shared<Term>(Term{StringLit{t.text}, t.span});
      case TokenKind::kHole:
        return std::make_shared<Term>(Term{Hole{t.text, t.lo, t.hi}, t.span});
      case TokenKind::kIdent:
        if (t.text == "q") return std::make_shared<Term>(Term{QueryRef{}, t.span});
        if (is_keyword(t.text)) {
          throw SyntaxError(t.span.line, t.span.column, "keyword '" + t.text + "' in term position");
        }
        return std::make_shared<Term>(Term{EntityRef{t.text}, t.span});
      case TokenKind::kLParen: {
        const Token& name = expect(TokenKind::kIdent, "function name");
        if (is_keyword(name.text)) {
          throw SyntaxError(name.span.line, name.span.column,
                            "keyword '" + name.text + "' in term position");
        }
        std::vector<TermPtr> args;
        while (peek().kind != TokenKind::kRParen) args.push_back(term());
        ++pos_;
        return std::make_shared<Term>(Term{Call{name.text, std::move(args)}, t.span});
      }
      default:
        throw SyntaxError(t.span.line, t.span.column, "expected a term");
    }
  }

  void finish() {
    const Token& t = peek();
    if (t.kind != TokenKind::kEnd) throw SyntaxError(t.span.line, t.span.column, "trailing input");
  }

 private:
  const Token& peek() const { return toks_[pos_]; }

  const Token& expect(TokenKind kind, const char* what) {
    const Token& t = toks_[pos_];
    if (t.kind != kind) {
      std::string got = t.kind == TokenKind::kEnd ? "end of input" : "'" + describe(t) + "'";
      throw SyntaxError(t.span.line, t.span.column, std::string("expected ") + what + ", got " + got);
    }
    ++pos_;
    return t;
  }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case TokenKind::kLParen: return "(";
      case TokenKind::kRParen: return ")";
      case TokenKind::kHole: return "??" + t.text;
      default: return t.text;
    }
  }

  std::vector<Token> toks_;
  const LabelSet* labels_;
  std::size_t pos_ = 0;
};

void print_node(const Node& node, int indent, std::string& out) {
  if (const auto* l = std::get_if<Leaf>(&node.node)) {
    out += "(leaf " + l->label + ")";
    return;
  }
  const auto& b = std::get<Branch>(node.node);
  std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  out += "(if " + print_condition(*b.cond) + "\n" + pad;
  print_node(*b.then_branch, indent + 2, out);
  out += "\n" + pad;
  print_node(*b.else_branch, indent + 2, out);
  out += ")";
}

}  // namespace

Sketch parse_program(std::string_view text, const LabelSet& labels) {
  Parser p(Lexer(text).run(), &labels);
  Sketch s{p.node()};
  p.finish();
  hole_bounds(s);  // rejects conflicting bounds for one hole name
  return s;
}

CondPtr parse_condition(std::string_view text) {
  Parser p(Lexer(text).run(), nullptr);
  auto c = p.cond();
  p.finish();
  return c;
}

TermPtr parse_term(std::string_view text) {
  Parser p(Lexer(text).run(), nullptr);
  auto t = p.term();
  p.finish();
  return t;
}

std::string format_number(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  std::string s(buf.data(), ptr);
  if (std::isfinite(value) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string print_term(const Term& term) {
  return std::visit(
      [](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          return format_number(n.value);
        } else if constexpr (std::is_same_v<T, StringLit>) {
          std::string out = "\"";
          for (char c : n.value) {
            if (c == '"' || c == '\\') out.push_back('\\');
            out.push_back(c);
          }
          return out + "\"";
        } else if constexpr (std::is_same_v<T, Hole>) {
          std::string out = "??" + n.name;
          if (n.lo != kDefaultHoleLo || n.hi != kDefaultHoleHi) {
            out += "[" + format_number(n.lo) + "," + format_number(n.hi) + "]";
          }
          return out;
        } else if constexpr (std::is_same_v<T, QueryRef>) {
          return "q";
        } else if constexpr (std::is_same_v<T, EntityRef>) {
          return n.name;
        } else {
          std::string out = "(" + n.name;
          for (const auto& a : n.args) out += " " + print_term(*a);
          return out + ")";
        }
      },
      term.node);
}

std::string print_condition(const Cond& cond) {
  return std::visit(
      [](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, BoolLit>) {
          return n.value ? "true" : "false";
        } else if constexpr (std::is_same_v<T, Atom>) {
          std::string out = "(" + n.head;
          for (const auto& a : n.args) out += " " + print_term(*a);
          return out + ")";
        } else if constexpr (std::is_same_v<T, Not>) {
          return "(not " + print_condition(*n.arg) + ")";
        } else {
          std::string out = std::is_same_v<T, And> ? "(and" : "(or";
          for (const auto& a : n.args) out += " " + print_condition(*a);
          return out + ")";
        }
      },
      cond.node);
}

std::string print_program(const Sketch& sketch) {
  std::string out;
  print_node(*sketch.root, 0, out);
  return out;
}

}  // namespace prefprog::dsl
