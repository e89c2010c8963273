#include "stlfmp/stl.hpp"

#include <cctype>
#include <string>

namespace stlfmp {

namespace {

struct Token {
  enum class Kind { Ident, Bang, Amp, Pipe, LParen, RParen, F, G, U, End };
  Kind kind;
  std::string text;
  double a = 0.0, b = 0.0; // interval for F/G/U
  size_t pos = 0;
};

class Lexer {
public:
  explicit Lexer(const std::string &s) : s_(s) { advance(); }
  const Token &peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

private:
  [[noreturn]] void fail(const std::string &msg, size_t pos) const {
    throw ParseError("syntax error at position " + std::to_string(pos) + ": " +
                     msg);
  }

  double number(size_t &i) {
    size_t start = i;
    while (i < s_.size() &&
           (std::isdigit(static_cast<unsigned char>(s_[i])) || s_[i] == '.' ||
            s_[i] == '-' || s_[i] == '+' || s_[i] == 'e' || s_[i] == 'E'))
      ++i;
    if (i == start) fail("expected number", start);
    try {
      return std::stod(s_.substr(start, i - start));
    } catch (...) {
      fail("bad number '" + s_.substr(start, i - start) + "'", start);
    }
  }

  void interval(size_t &i, Token &t) {
    if (i >= s_.size() || s_[i] != '[') fail("expected '[' after operator", i);
    ++i;
    t.a = number(i);
    if (i >= s_.size() || s_[i] != ',') fail("expected ',' in interval", i);
    ++i;
    t.b = number(i);
    if (i >= s_.size() || s_[i] != ']') fail("expected ']' in interval", i);
    ++i;
    if (t.a < 0.0 || t.b < t.a)
      fail("interval must satisfy 0 <= a <= b", t.pos);
  }

  void advance() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_])))
      ++i_;
    tok_ = Token{Token::Kind::End, "", 0, 0, i_};
    if (i_ >= s_.size()) return;
    const char c = s_[i_];
    const size_t pos = i_;
    auto single = [&](Token::Kind k) {
      tok_ = Token{k, std::string(1, c), 0, 0, pos};
      ++i_;
    };
    switch (c) {
    case '!': single(Token::Kind::Bang); return;
    case '&': single(Token::Kind::Amp); return;
    case '|': single(Token::Kind::Pipe); return;
    case '(': single(Token::Kind::LParen); return;
    case ')': single(Token::Kind::RParen); return;
    default: break;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i_;
      while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) ||
                               s_[j] == '_'))
        ++j;
      std::string word = s_.substr(i_, j - i_);
      // F/G/U followed by '[' are temporal operators, otherwise identifiers
      if ((word == "F" || word == "G" || word == "U") && j < s_.size() &&
          s_[j] == '[') {
        Token t;
        t.kind = word == "F"   ? Token::Kind::F
                 : word == "G" ? Token::Kind::G
                               : Token::Kind::U;
        t.text = word;
        t.pos = pos;
        i_ = j;
        interval(i_, t);
        tok_ = t;
        return;
      }
      tok_ = Token{Token::Kind::Ident, word, 0, 0, pos};
      i_ = j;
      return;
    }
    fail("unexpected character '" + std::string(1, c) + "'", pos);
  }

  const std::string &s_;
  size_t i_ = 0;
  Token tok_;
};

class Parser {
public:
  Parser(const std::string &text, const std::map<std::string, Predicate> &b)
      : lex_(text), bindings_(b) {}

  FormulaPtr parse() {
    FormulaPtr f = parse_or();
    if (lex_.peek().kind != Token::Kind::End)
      throw ParseError("syntax error at position " +
                       std::to_string(lex_.peek().pos) +
                       ": unexpected trailing input");
    return f;
  }

private:
  // or := and ('|' and)*
  FormulaPtr parse_or() {
    std::vector<FormulaPtr> cs{parse_and()};
    while (lex_.peek().kind == Token::Kind::Pipe) {
      lex_.take();
      cs.push_back(parse_and());
    }
    return cs.size() == 1 ? cs[0] : Formula::lor(std::move(cs));
  }

  // and := until ('&' until)*
  FormulaPtr parse_and() {
    std::vector<FormulaPtr> cs{parse_until()};
    while (lex_.peek().kind == Token::Kind::Amp) {
      lex_.take();
      cs.push_back(parse_until());
    }
    return cs.size() == 1 ? cs[0] : Formula::land(std::move(cs));
  }

  // until := unary ('U[a,b]' unary)?
  FormulaPtr parse_until() {
    FormulaPtr l = parse_unary();
    if (lex_.peek().kind == Token::Kind::U) {
      Token t = lex_.take();
      FormulaPtr r = parse_unary();
      return Formula::until(t.a, t.b, std::move(l), std::move(r));
    }
    return l;
  }

  FormulaPtr parse_unary() {
    const Token t = lex_.peek();
    switch (t.kind) {
    case Token::Kind::Bang:
      lex_.take();
      return Formula::lnot(parse_unary());
    case Token::Kind::F:
      lex_.take();
      return Formula::eventually(t.a, t.b, parse_unary());
    case Token::Kind::G:
      lex_.take();
      return Formula::always(t.a, t.b, parse_unary());
    case Token::Kind::LParen: {
      lex_.take();
      FormulaPtr f = parse_or();
      if (lex_.peek().kind != Token::Kind::RParen)
        throw ParseError("syntax error at position " +
                         std::to_string(lex_.peek().pos) + ": expected ')'");
      lex_.take();
      return f;
    }
    case Token::Kind::Ident: {
      lex_.take();
      const auto it = bindings_.find(t.text);
      if (it == bindings_.end())
        throw ParseError("unbound predicate name '" + t.text +
                         "' at position " + std::to_string(t.pos));
      return Formula::atom(it->second, t.text);
    }
    default:
      throw ParseError("syntax error at position " + std::to_string(t.pos) +
                       ": expected formula");
    }
  }

  Lexer lex_;
  const std::map<std::string, Predicate> &bindings_;
};

} // namespace

FormulaPtr parse_formula(const std::string &text,
                         const std::map<std::string, Predicate> &bindings) {
  return Parser(text, bindings).parse();
}

} // namespace stlfmp
