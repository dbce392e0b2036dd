// Tokenization and closed-lexicon part-of-speech tagging.
#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace cecl::textproc {

enum class PosClass { NOUN, ADJ, VERB, RELWORD, OTHER };

inline const char* to_string(PosClass c) {
  switch (c) {
    case PosClass::NOUN: return "NOUN";
    case PosClass::ADJ: return "ADJ";
    case PosClass::VERB: return "VERB";
    case PosClass::RELWORD: return "RELWORD";
    case PosClass::OTHER: return "OTHER";
  }
  return "OTHER";
}

inline PosClass pos_class_from_string(const std::string& s) {
  if (s == "NOUN") return PosClass::NOUN;
  if (s == "ADJ") return PosClass::ADJ;
  if (s == "VERB") return PosClass::VERB;
  if (s == "RELWORD") return PosClass::RELWORD;
  if (s == "OTHER") return PosClass::OTHER;
  throw std::runtime_error("unknown POS class: " + s);
}

struct Token {
  std::string surface;  // lowercase, no whitespace
  std::size_t index = 0;
};

struct TaggedToken {
  Token token;
  PosClass pos = PosClass::OTHER;
};

struct TaggedCaption {
  std::vector<TaggedToken> tokens;
};

// Lowercase, whitespace-split, punctuation stripped from token edges.
inline std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0, e = cur.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(cur[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(cur[e - 1]))) --e;
    if (e > b) out.push_back(Token{cur.substr(b, e - b), out.size()});
    cur.clear();
  };
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  flush();
  return out;
}

inline std::string join_tokens(const std::vector<Token>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i].surface;
  }
  return s;
}

// Word -> PosClass map, total over a closed vocabulary. Also fixes the
// token-id order used by the encoder: ids follow insertion order.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::string version) : version_(std::move(version)) {}

  void add(const std::string& word, PosClass c) {
    auto it = class_of_.find(word);
    if (it == class_of_.end()) {
      class_of_.emplace(word, c);
      index_of_.emplace(word, words_.size());
      words_.push_back(word);
    } else {
      it->second = c;
    }
  }

  PosClass class_of(const std::string& word) const {
    auto it = class_of_.find(word);
    return it == class_of_.end() ? PosClass::OTHER : it->second;
  }

  bool contains(const std::string& word) const { return class_of_.count(word) != 0; }

  // Token id, or -1 if the word is not in the vocabulary.
  int id_of(const std::string& word) const {
    auto it = index_of_.find(word);
    return it == index_of_.end() ? -1 : static_cast<int>(it->second);
  }

  const std::vector<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }
  const std::string& version() const { return version_; }
  void set_version(std::string v) { version_ = std::move(v); }

  std::vector<std::string> words_of_class(PosClass c) const {
    std::vector<std::string> out;
    for (const auto& w : words_)
      if (class_of_.at(w) == c) out.push_back(w);
    return out;
  }

 private:
  std::unordered_map<std::string, PosClass> class_of_;
  std::unordered_map<std::string, std::size_t> index_of_;
  std::vector<std::string> words_;
  std::string version_ = "unversioned";
};

// File format: one `word<TAB>CLASS` per line, `#` starts a comment line.
// A leading `# version: tag` comment sets the version tag.
inline Lexicon load_lexicon(std::istream& in) {
  Lexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# version:";
      if (line.rfind(key, 0) == 0) {
        std::string v = line.substr(key.size());
        std::size_t b = v.find_first_not_of(" \t");
        if (b != std::string::npos) lex.set_version(v.substr(b));
      }
      continue;
    }
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("lexicon line missing tab: " + line);
    lex.add(line.substr(0, tab), pos_class_from_string(line.substr(tab + 1)));
  }
  return lex;
}

inline Lexicon load_lexicon_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon file: " + path);
  return load_lexicon(in);
}

inline void save_lexicon(const Lexicon& lex, std::ostream& out) {
  out << "# version: " << lex.version() << "\n";
  for (const auto& w : lex.words())
    out << w << '\t' << to_string(lex.class_of(w)) << '\n';
}

inline void save_lexicon_file(const Lexicon& lex, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write lexicon file: " + path);
  save_lexicon(lex, out);
}

// Swappable tagging interface; the default implementation is a pure lexicon
// lookup. External taggers can be plugged in behind the same interface.
class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual TaggedCaption tag(const std::vector<Token>& tokens) const = 0;
};

class LexiconTagger final : public Tagger {
 public:
  explicit LexiconTagger(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

  TaggedCaption tag(const std::vector<Token>& tokens) const override {
    TaggedCaption tc;
    tc.tokens.reserve(tokens.size());
    for (const auto& t : tokens)
      tc.tokens.push_back(TaggedToken{t, lexicon_.class_of(t.surface)});
    return tc;
  }

  const Lexicon& lexicon() const { return lexicon_; }

 private:
  Lexicon lexicon_;
};

}  // namespace cecl::textproc
