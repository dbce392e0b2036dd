// Featured hard-negative caption generation: one relation swap plus three
// mask-and-fill perturbations (attribute, action, object) per caption.
#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cecl/rng.hpp"
#include "cecl/textproc.hpp"

namespace cecl::hardneg {

using textproc::Lexicon;
using textproc::PosClass;
using textproc::TaggedCaption;
using textproc::Tagger;

enum class NegType { REL = 0, ATT = 1, ACT = 2, OBJ = 3 };
inline constexpr std::size_t kNumNegTypes = 4;
inline constexpr std::array<NegType, kNumNegTypes> kAllNegTypes = {
    NegType::REL, NegType::ATT, NegType::ACT, NegType::OBJ};

inline const char* to_string(NegType t) {
  switch (t) {
    case NegType::REL: return "REL";
    case NegType::ATT: return "ATT";
    case NegType::ACT: return "ACT";
    case NegType::OBJ: return "OBJ";
  }
  return "REL";
}

inline NegType neg_type_from_string(const std::string& s) {
  if (s == "REL") return NegType::REL;
  if (s == "ATT") return NegType::ATT;
  if (s == "ACT") return NegType::ACT;
  if (s == "OBJ") return NegType::OBJ;
  throw std::runtime_error("unknown negative type: " + s);
}

// Sentinel emitted when a perturbation type does not apply to a caption.
inline constexpr const char* kPlaceholder = "<HN_PLACEHOLDER>";

// Either a caption string or the placeholder sentinel.
struct CaptionOrPlaceholder {
  std::optional<std::string> text;

  static CaptionOrPlaceholder placeholder() { return {}; }
  static CaptionOrPlaceholder caption(std::string s) { return {std::move(s)}; }
  bool is_placeholder() const { return !text.has_value(); }
  // Serialized form: placeholders appear verbatim as the sentinel string.
  std::string str() const { return text ? *text : std::string(kPlaceholder); }
};

struct HardNegativeSet {
  std::array<CaptionOrPlaceholder, kNumNegTypes> by_type;

  const CaptionOrPlaceholder& rel() const { return by_type[0]; }
  const CaptionOrPlaceholder& att() const { return by_type[1]; }
  const CaptionOrPlaceholder& act() const { return by_type[2]; }
  const CaptionOrPlaceholder& obj() const { return by_type[3]; }
  const CaptionOrPlaceholder& of(NegType t) const {
    return by_type[static_cast<std::size_t>(t)];
  }
};

struct FillerViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Produces the replacement word for a masked position. Implementations must
// return a word of the requested class that differs from the masked word.
class MaskFiller {
 public:
  virtual ~MaskFiller() = default;
  virtual std::string fill(const TaggedCaption& tagged, std::size_t mask_index,
                           PosClass pos_class, RngStream& rng) const = 0;
};

// Default filler: uniform draw from lexicon words of the same class,
// excluding the masked word itself.
class LexiconFiller final : public MaskFiller {
 public:
  explicit LexiconFiller(const Lexicon& lexicon) : lexicon_(&lexicon) {}

  std::string fill(const TaggedCaption& tagged, std::size_t mask_index,
                   PosClass pos_class, RngStream& rng) const override {
    const std::string& masked = tagged.tokens.at(mask_index).token.surface;
    std::vector<std::string> pool = lexicon_->words_of_class(pos_class);
    std::erase(pool, masked);
    if (pool.empty())
      throw FillerViolation("no replacement candidates for class " +
                            std::string(textproc::to_string(pos_class)));
    return pool[rng.next_below(pool.size())];
  }

 private:
  const Lexicon* lexicon_;
};

inline PosClass mask_class_of(NegType t) {
  switch (t) {
    case NegType::ATT: return PosClass::ADJ;
    case NegType::ACT: return PosClass::VERB;
    case NegType::OBJ: return PosClass::NOUN;
    default: throw std::runtime_error("gen_masked does not handle REL");
  }
}

namespace detail {
inline std::string render(const TaggedCaption& tagged) {
  std::string s;
  for (std::size_t i = 0; i < tagged.tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tagged.tokens[i].token.surface;
  }
  return s;
}
}  // namespace detail

// Swap the first and last NOUN tokens in place; placeholder with <2 nouns.
inline CaptionOrPlaceholder gen_relation(const TaggedCaption& tagged) {
  int first = -1, last = -1;
  for (std::size_t i = 0; i < tagged.tokens.size(); ++i) {
    if (tagged.tokens[i].pos == PosClass::NOUN) {
      if (first < 0) first = static_cast<int>(i);
      last = static_cast<int>(i);
    }
  }
  if (first < 0 || first == last) return CaptionOrPlaceholder::placeholder();
  TaggedCaption swapped = tagged;
  std::swap(swapped.tokens[first].token.surface,
            swapped.tokens[last].token.surface);
  return CaptionOrPlaceholder::caption(detail::render(swapped));
}

// Mask one token of the type's class (uniform over occurrences) and replace
// it with the filler's output. Placeholder when the class is absent.
inline CaptionOrPlaceholder gen_masked(const TaggedCaption& tagged,
                                       NegType neg_type,
                                       const MaskFiller& filler,
                                       RngStream& rng,
                                       const Lexicon& lexicon) {
  const PosClass target = mask_class_of(neg_type);
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < tagged.tokens.size(); ++i)
    if (tagged.tokens[i].pos == target) positions.push_back(i);
  if (positions.empty()) return CaptionOrPlaceholder::placeholder();

  const std::size_t mask_index = positions[rng.next_below(positions.size())];
  const std::string masked = tagged.tokens[mask_index].token.surface;
  const std::string word = filler.fill(tagged, mask_index, target, rng);
  if (word == masked)
    throw FillerViolation("filler returned the masked word: " + word);
  if (lexicon.class_of(word) != target)
    throw FillerViolation("filler word outside requested class: " + word);

  TaggedCaption filled = tagged;
  filled.tokens[mask_index].token.surface = word;
  return CaptionOrPlaceholder::caption(detail::render(filled));
}

// All four negative types for one caption. Consumes rng in fixed order
// (ATT, ACT, OBJ) so the result is a pure function of (caption, seed).
inline HardNegativeSet gen_all(const std::string& caption, const Tagger& tagger,
                               const MaskFiller& filler, RngStream& rng,
                               const Lexicon& lexicon) {
  const TaggedCaption tagged = tagger.tag(textproc::tokenize(caption));
  HardNegativeSet out;
  out.by_type[static_cast<std::size_t>(NegType::REL)] = gen_relation(tagged);
  for (NegType t : {NegType::ATT, NegType::ACT, NegType::OBJ})
    out.by_type[static_cast<std::size_t>(t)] =
        gen_masked(tagged, t, filler, rng, lexicon);
  return out;
}

}  // namespace cecl::hardneg
