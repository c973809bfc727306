#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace codh {

enum class RelationKind { afe, ccr };

/// One position in a slot sequence around FC2.
struct SlotElement {
  enum class Form {
    single,    // members[0], applied `repeat` times in series
    parallel,  // all members on the same input; residual branches summed
    split,     // members[0] feeds the cls branch, members[1] the reg branch
  };
  Form form = Form::single;
  std::vector<RelationKind> members;
  int repeat = 1;

  friend bool operator==(const SlotElement&, const SlotElement&) = default;
};

/// Relation-module placement relative to the second shared FC layer, e.g.
/// "AFE-FC2-CCR" or "FC2-{AFE,CCR}".
struct Arrangement {
  std::vector<SlotElement> pre;
  std::vector<SlotElement> post;

  /// Canonical text: upper-case modules, "xN" repeats, lower-case
  /// "_cls"/"_reg" tags, cls member first.
  std::string canonical() const;
  bool has(RelationKind kind) const;
  /// Number of relation-module instances of `kind` (repeats and group members
  /// counted individually).
  int count(RelationKind kind) const;
  bool empty() const { return pre.empty() && post.empty(); }

  friend bool operator==(const Arrangement&, const Arrangement&) = default;
};

class ArrangementParseError : public std::invalid_argument {
 public:
  ArrangementParseError(const std::string& message, std::size_t position)
      : std::invalid_argument(message + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Accepts ASCII and table-style spellings ("AFE×2", "$\times2$", "\{", "\_"),
/// ignores whitespace and case. Positions in errors index the original text.
Arrangement parse_arrangement(std::string_view text);

/// The thirteen arrangement labels compared in the ablation of slot placement.
const std::vector<std::string>& table6_arrangements();

}  // namespace codh
