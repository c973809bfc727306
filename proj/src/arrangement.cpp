#include "codh/arrangement.hpp"

#include <cctype>
#include <optional>
#include <utility>

namespace codh {

namespace {

const char* kind_name(RelationKind k) { return k == RelationKind::afe ? "AFE" : "CCR"; }

std::string element_text(const SlotElement& e) {
  switch (e.form) {
    case SlotElement::Form::single: {
      std::string s = kind_name(e.members.at(0));
      if (e.repeat > 1) s += "x" + std::to_string(e.repeat);
      return s;
    }
    case SlotElement::Form::parallel: {
      std::string s = "{";
      for (std::size_t i = 0; i < e.members.size(); ++i) {
        if (i) s += ",";
        s += kind_name(e.members[i]);
      }
      return s + "}";
    }
    case SlotElement::Form::split:
      return std::string("{") + kind_name(e.members.at(0)) + "_cls," + kind_name(e.members.at(1)) +
             "_reg}";
  }
  return {};
}

// Normalized text with a map back to byte offsets in the original.
struct Normalized {
  std::string text;
  std::vector<std::size_t> origin;

  std::size_t at(std::size_t i) const { return i < origin.size() ? origin[i] : end; }
  std::size_t end = 0;
};

Normalized normalize(std::string_view in) {
  Normalized out;
  out.end = in.size();
  auto push = [&](char c, std::size_t pos) {
    out.text.push_back(c);
    out.origin.push_back(pos);
  };
  for (std::size_t i = 0; i < in.size();) {
    const auto c = static_cast<unsigned char>(in[i]);
    if (std::isspace(c) || c == '$') {
      ++i;
    } else if (in.substr(i, 6) == "\\times") {
      push('X', i);
      i += 6;
    } else if (c == '\\' && i + 1 < in.size() &&
               (in[i + 1] == '{' || in[i + 1] == '}' || in[i + 1] == '_')) {
      push(in[i + 1], i);
      i += 2;
    } else if (c == 0xC3 && i + 1 < in.size() && static_cast<unsigned char>(in[i + 1]) == 0x97) {
      push('X', i);  // U+00D7 multiplication sign
      i += 2;
    } else if (c == '*') {
      push('X', i);
      ++i;
    } else {
      push(static_cast<char>(std::toupper(c)), i);
      ++i;
    }
  }
  return out;
}

class Parser {
 public:
  explicit Parser(Normalized n) : n_(std::move(n)) {}

  Arrangement run() {
    Arrangement result;
    bool seen_fc2 = false;
    bool first = true;
    while (first || accept('-')) {
      first = false;
      const std::size_t start = pos_;
      if (accept_word("FC2")) {
        if (seen_fc2) fail("second FC2 token", start);
        seen_fc2 = true;
        continue;
      }
      SlotElement e = element();
      auto& slot = seen_fc2 ? result.post : result.pre;
      if (!slot.empty() && slot.back().form == SlotElement::Form::split) {
        fail("split group must be the last element", start);
      }
      if (e.form == SlotElement::Form::split && !seen_fc2) {
        fail("cls/reg split is only valid after FC2", start);
      }
      slot.push_back(std::move(e));
    }
    if (pos_ != n_.text.size()) fail(std::string("unexpected '") + n_.text[pos_] + "'", pos_);
    if (!seen_fc2) fail("missing FC2 token", pos_);
    return result;
  }

 private:
  [[noreturn]] void fail(const std::string& what, std::size_t norm_pos) const {
    throw ArrangementParseError(what, n_.at(norm_pos));
  }

  bool accept(char c) {
    if (pos_ < n_.text.size() && n_.text[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool accept_word(std::string_view w) {
    if (n_.text.compare(pos_, w.size(), w) == 0) {
      pos_ += w.size();
      return true;
    }
    return false;
  }

  RelationKind kind() {
    if (accept_word("AFE")) return RelationKind::afe;
    if (accept_word("CCR")) return RelationKind::ccr;
    if (pos_ >= n_.text.size()) fail("expected AFE, CCR or FC2 but input ended", pos_);
    fail("unknown token", pos_);
  }

  SlotElement element() {
    SlotElement e;
    if (accept('{')) {
      enum class Tag { none, cls, reg };
      std::vector<std::pair<RelationKind, Tag>> members;
      const std::size_t open = pos_ - 1;
      do {
        const RelationKind k = kind();
        Tag tag = Tag::none;
        if (accept_word("_CLS")) {
          tag = Tag::cls;
        } else if (accept_word("_REG")) {
          tag = Tag::reg;
        }
        members.emplace_back(k, tag);
      } while (accept(','));
      if (!accept('}')) fail("expected '}'", pos_);
      if (members.size() < 2) fail("group needs at least two members", open);

      const bool tagged = members.front().second != Tag::none;
      for (const auto& m : members) {
        if ((m.second != Tag::none) != tagged) fail("mixed tagged and untagged group members", open);
      }
      if (!tagged) {
        e.form = SlotElement::Form::parallel;
        for (const auto& m : members) e.members.push_back(m.first);
        return e;
      }
      if (members.size() != 2 || members[0].second == members[1].second) {
        fail("split group needs exactly one _cls and one _reg member", open);
      }
      e.form = SlotElement::Form::split;
      if (members[0].second == Tag::cls) {
        e.members = {members[0].first, members[1].first};
      } else {
        e.members = {members[1].first, members[0].first};
      }
      return e;
    }
    e.form = SlotElement::Form::single;
    e.members.push_back(kind());
    if (accept('X')) {
      const std::size_t digits = pos_;
      int n = 0;
      while (pos_ < n_.text.size() && std::isdigit(static_cast<unsigned char>(n_.text[pos_]))) {
        n = n * 10 + (n_.text[pos_++] - '0');
        if (n > 64) fail("repeat count too large", digits);
      }
      if (pos_ == digits) fail("expected repeat count", digits);
      if (n < 1) fail("repeat count must be positive", digits);
      e.repeat = n;
    }
    return e;
  }

  Normalized n_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string Arrangement::canonical() const {
  std::string s;
  auto append = [&s](const std::string& part) {
    if (!s.empty()) s += "-";
    s += part;
  };
  for (const auto& e : pre) append(element_text(e));
  append("FC2");
  for (const auto& e : post) append(element_text(e));
  return s;
}

int Arrangement::count(RelationKind kind) const {
  int n = 0;
  for (const auto* slot : {&pre, &post}) {
    for (const auto& e : *slot) {
      for (RelationKind m : e.members) {
        if (m == kind) n += e.form == SlotElement::Form::single ? e.repeat : 1;
      }
    }
  }
  return n;
}

bool Arrangement::has(RelationKind kind) const { return count(kind) > 0; }

Arrangement parse_arrangement(std::string_view text) { return Parser(normalize(text)).run(); }

const std::vector<std::string>& table6_arrangements() {
  static const std::vector<std::string> forms = {
      "FC2-AFE-CCR",     "FC2-CCR-AFE",           "AFE-CCR-FC2",           "CCR-AFE-FC2",
      "AFE-FC2-CCR",     "CCR-FC2-AFE",           "AFE-FC2-AFE",           "CCR-FC2-CCR",
      "FC2-{AFE,CCR}",   "FC2-{CCR_cls,AFE_reg}", "FC2-{AFE_cls,CCR_reg}", "AFEx2-FC2-CCRx2",
      "{AFE,AFE}-FC2-{CCR,CCR}",
  };
  return forms;
}

}  // namespace codh
