#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cmsa::codeswitch {

class TranslatorClient;
class TranslationCache;

/// Script normalization for mixed Persian/Latin text: NFC, Arabic yeh and
/// kaf folded to their Persian forms, tatweel and harakat removed, ZWNJ
/// trimmed at word edges, Latin letters case-folded. Idempotent.
std::string normalize_text(std::string_view text);

enum class TokenClass {
  Word,  // not yet classified by detect_non_persian
  PersianWord,
  NonPersianCandidate,
  Mention,
  Url,
  Hashtag,
  Other,
};

std::string_view to_string(TokenClass c) noexcept;
std::optional<TokenClass> parse_token_class(std::string_view s) noexcept;

struct Token {
  std::string surface;
  std::size_t begin = 0;  // byte offsets into the tokenized text
  std::size_t end = 0;
  TokenClass cls = TokenClass::Other;
  std::optional<std::string> translation;

  bool is_word() const noexcept {
    return cls == TokenClass::Word || cls == TokenClass::PersianWord ||
           cls == TokenClass::NonPersianCandidate;
  }
  bool operator==(const Token&) const = default;
};

struct TokenizedText {
  std::vector<Token> tokens;
  bool operator==(const TokenizedText&) const = default;
};

/// Whitespace split with punctuation detached. "@USERMENTION" becomes a
/// Mention, scheme:// strings become Url, '#'-prefixed words Hashtag.
TokenizedText tokenize(std::string_view text);

class PersianLexicon {
 public:
  explicit PersianLexicon(std::uint64_t min_freq = 1) : min_freq_(min_freq) {}

  /// Adds `count` to the normalized form of `word`.
  void add(std::string_view word, std::uint64_t count);

  bool contains(std::string_view normalized_word) const;
  std::uint64_t count(std::string_view normalized_word) const;
  std::size_t size() const noexcept { return entries_.size(); }
  std::uint64_t min_freq() const noexcept { return min_freq_; }

 private:
  std::unordered_map<std::string, std::uint64_t> entries_;
  std::uint64_t min_freq_;
};

/// Reads UTF-8 "word<TAB>count" lines. Keys that normalize to the same
/// form are merged by summing their counts.
PersianLexicon load_lexicon(const std::filesystem::path& path,
                            std::uint64_t min_freq = 1);

/// Marks word tokens as PersianWord (lexicon member) or
/// NonPersianCandidate. Other classes are left untouched.
TokenizedText detect_non_persian(TokenizedText tt, const PersianLexicon& lex);

enum class GlossSource { FinglishList, SlangList, ExternalCache };

struct Gloss {
  std::string text;
  GlossSource source;
};

class TranslationDict {
 public:
  /// source must be FinglishList or SlangList; a later add for the same
  /// (surface, source) replaces the earlier one.
  void add(std::string_view surface, std::string gloss, GlossSource source);

  /// Slang entries win over Finglish entries.
  std::optional<Gloss> lookup(std::string_view normalized_surface) const;
  std::size_t size() const noexcept { return slang_.size() + finglish_.size(); }

 private:
  std::unordered_map<std::string, std::string> slang_;
  std::unordered_map<std::string, std::string> finglish_;
};

/// Reads "surface<TAB>gloss<TAB>source" lines, source in {finglish, slang}.
void load_dictionary(const std::filesystem::path& path, TranslationDict& into);

struct Miss {
  std::string word;
  std::string reason;
};

struct TranslateOptions {
  std::string src = "fa";
  std::string dst = "en";
  bool offline = true;
};

/// Resolves NonPersianCandidate tokens through slang list, Finglish list,
/// the persistent cache and finally the remote client. Failures never
/// throw; they are appended to `misses` when it is non-null.
TokenizedText translate_candidates(TokenizedText tt, const TranslationDict& dict,
                                   TranslationCache* cache,
                                   TranslatorClient* client,
                                   const TranslateOptions& opts,
                                   std::vector<Miss>* misses = nullptr);

/// The offline-capable preprocessing chain applied to every record:
/// redact, normalize, tokenize, detect, translate.
class Preprocessor {
 public:
  Preprocessor(std::shared_ptr<const PersianLexicon> lexicon,
               std::shared_ptr<const TranslationDict> dict,
               TranslateOptions opts = {},
               std::shared_ptr<TranslationCache> cache = nullptr,
               std::shared_ptr<TranslatorClient> client = nullptr);

  TokenizedText run(std::string_view raw_text,
                    std::vector<Miss>* misses = nullptr) const;

 private:
  std::shared_ptr<const PersianLexicon> lexicon_;
  std::shared_ptr<const TranslationDict> dict_;
  TranslateOptions opts_;
  std::shared_ptr<TranslationCache> cache_;
  std::shared_ptr<TranslatorClient> client_;
};

/// NDJSON round-trip of tokenized text (used by `preprocess` output).
std::string tokens_to_json(const TokenizedText& tt);
TokenizedText tokens_from_json(std::string_view json);

}  // namespace cmsa::codeswitch
