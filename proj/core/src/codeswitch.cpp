#include "cmsa/codeswitch.hpp"

#include <unicode/uchar.h>

#include <charconv>
#include <fstream>
#include <regex>
#include <string>

#include "cmsa/corpus.hpp"
#include "cmsa/error.hpp"
#include "cmsa/translator.hpp"
#include "io_util.hpp"
#include "json.hpp"
#include "utf8_util.hpp"

namespace cmsa::codeswitch {

std::string_view to_string(TokenClass c) noexcept {
  switch (c) {
    case TokenClass::Word: return "word";
    case TokenClass::PersianWord: return "persian";
    case TokenClass::NonPersianCandidate: return "candidate";
    case TokenClass::Mention: return "mention";
    case TokenClass::Url: return "url";
    case TokenClass::Hashtag: return "hashtag";
    case TokenClass::Other: return "other";
  }
  return "other";
}

std::optional<TokenClass> parse_token_class(std::string_view s) noexcept {
  for (auto c : {TokenClass::Word, TokenClass::PersianWord, TokenClass::NonPersianCandidate,
                 TokenClass::Mention, TokenClass::Url, TokenClass::Hashtag,
                 TokenClass::Other}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

namespace {

constexpr UChar32 kZwj = 0x200D;

bool is_space(UChar32 c) { return u_isUWhiteSpace(c); }

bool is_mark(UChar32 c) { return (U_GET_GC_MASK(c) & U_GC_M_MASK) != 0; }

bool is_punct_or_symbol(UChar32 c) {
  if (c == '_') return false;
  const auto mask = U_GET_GC_MASK(c);
  return (mask & (U_GC_P_MASK | U_GC_S_MASK)) != 0;
}

bool is_word_cp(UChar32 c) { return !is_space(c) && !is_punct_or_symbol(c); }

bool starts_with_mention(std::string_view s) {
  if (s.size() < corpus::kMentionToken.size()) return false;
  for (std::size_t i = 0; i < corpus::kMentionToken.size(); ++i) {
    char a = s[i];
    if (a >= 'a' && a <= 'z') a = static_cast<char>(a - 'a' + 'A');
    if (a != corpus::kMentionToken[i]) return false;
  }
  return true;
}

bool is_url(std::string_view chunk) {
  static const std::regex kUrl(R"(^[A-Za-z][A-Za-z0-9+.\-]*://\S+$)");
  return std::regex_match(chunk.begin(), chunk.end(), kUrl);
}

std::size_t word_run_end(std::string_view s, std::size_t i) {
  while (i < s.size()) {
    std::size_t next = i;
    if (!is_word_cp(detail::next_code_point(s, next))) break;
    i = next;
  }
  return i;
}

void tokenize_chunk(std::string_view text, std::size_t base, std::size_t len,
                    std::vector<Token>& out) {
  const std::string_view chunk = text.substr(base, len);
  auto emit = [&](std::size_t b, std::size_t e, TokenClass cls) {
    out.push_back(Token{std::string(chunk.substr(b, e - b)), base + b, base + e, cls, {}});
  };
  if (is_url(chunk)) {
    emit(0, chunk.size(), TokenClass::Url);
    return;
  }
  std::size_t i = 0;
  while (i < chunk.size()) {
    if (chunk[i] == '@' && starts_with_mention(chunk.substr(i))) {
      const std::size_t e = i + corpus::kMentionToken.size();
      emit(i, e, TokenClass::Mention);
      i = e;
      continue;
    }
    std::size_t next = i;
    const UChar32 c = detail::next_code_point(chunk, next);
    if (c == '#') {
      const std::size_t e = word_run_end(chunk, next);
      if (e > next) {
        emit(i, e, TokenClass::Hashtag);
        i = e;
        continue;
      }
    }
    if (is_word_cp(c)) {
      const std::size_t e = word_run_end(chunk, i);
      emit(i, e, TokenClass::Word);
      i = e;
      continue;
    }
    // One symbol plus trailing marks, variation selectors and ZWJ joins.
    std::size_t e = next;
    while (e < chunk.size()) {
      std::size_t peek = e;
      const UChar32 d = detail::next_code_point(chunk, peek);
      if (d == kZwj) {
        e = peek;
        if (e < chunk.size()) detail::next_code_point(chunk, e);
      } else if (is_mark(d) || (d >= 0xFE00 && d <= 0xFE0F)) {
        e = peek;
      } else {
        break;
      }
    }
    emit(i, e, TokenClass::Other);
    i = e;
  }
}

}  // namespace

TokenizedText tokenize(std::string_view text) {
  TokenizedText tt;
  std::size_t i = 0;
  std::size_t chunk_start = 0;
  bool in_chunk = false;
  while (i < text.size()) {
    std::size_t next = i;
    const UChar32 c = detail::next_code_point(text, next);
    if (is_space(c)) {
      if (in_chunk) tokenize_chunk(text, chunk_start, i - chunk_start, tt.tokens);
      in_chunk = false;
    } else if (!in_chunk) {
      in_chunk = true;
      chunk_start = i;
    }
    i = next;
  }
  if (in_chunk) tokenize_chunk(text, chunk_start, text.size() - chunk_start, tt.tokens);
  return tt;
}

void PersianLexicon::add(std::string_view word, std::uint64_t count) {
  entries_[normalize_text(word)] += count;
}

std::uint64_t PersianLexicon::count(std::string_view normalized_word) const {
  auto it = entries_.find(std::string(normalized_word));
  return it == entries_.end() ? 0 : it->second;
}

bool PersianLexicon::contains(std::string_view normalized_word) const {
  const auto c = count(normalized_word);
  return c > 0 && c >= min_freq_;
}

PersianLexicon load_lexicon(const std::filesystem::path& path, std::uint64_t min_freq) {
  auto in = detail::open_input(path, std::ios::in | std::ios::binary);
  PersianLexicon lex(min_freq);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto text = detail::strip_cr(raw);
    if (text.empty()) continue;
    const auto fields = detail::split(text, '\t');
    if (fields.size() != 2 || fields[0].empty()) {
      throw DataError("expected \"word<TAB>count\"", line);
    }
    std::uint64_t count = 0;
    const auto* first = fields[1].data();
    const auto* last = first + fields[1].size();
    const auto [ptr, ec] = std::from_chars(first, last, count);
    if (ec != std::errc() || ptr != last) {
      throw DataError("non-numeric count \"" + std::string(fields[1]) + "\"", line);
    }
    if (normalize_text(fields[0]).empty()) throw DataError("word is empty after normalization", line);
    lex.add(fields[0], count);
  }
  return lex;
}

TokenizedText detect_non_persian(TokenizedText tt, const PersianLexicon& lex) {
  for (auto& tok : tt.tokens) {
    if (!tok.is_word()) continue;
    tok.cls = lex.contains(tok.surface) ? TokenClass::PersianWord
                                        : TokenClass::NonPersianCandidate;
    if (tok.cls != TokenClass::NonPersianCandidate) tok.translation.reset();
  }
  return tt;
}

void TranslationDict::add(std::string_view surface, std::string gloss, GlossSource source) {
  if (gloss.empty()) throw DataError("empty gloss for \"" + std::string(surface) + "\"");
  auto key = normalize_text(surface);
  switch (source) {
    case GlossSource::SlangList: slang_[std::move(key)] = std::move(gloss); break;
    case GlossSource::FinglishList: finglish_[std::move(key)] = std::move(gloss); break;
    case GlossSource::ExternalCache:
      throw std::invalid_argument("TranslationDict holds only hand-built lists");
  }
}

std::optional<Gloss> TranslationDict::lookup(std::string_view normalized_surface) const {
  const std::string key(normalized_surface);
  if (auto it = slang_.find(key); it != slang_.end()) {
    return Gloss{it->second, GlossSource::SlangList};
  }
  if (auto it = finglish_.find(key); it != finglish_.end()) {
    return Gloss{it->second, GlossSource::FinglishList};
  }
  return std::nullopt;
}

void load_dictionary(const std::filesystem::path& path, TranslationDict& into) {
  auto in = detail::open_input(path, std::ios::in | std::ios::binary);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto text = detail::strip_cr(raw);
    if (text.empty()) continue;
    const auto fields = detail::split(text, '\t');
    if (fields.size() != 3 || fields[0].empty()) {
      throw DataError("expected \"surface<TAB>gloss<TAB>source\"", line);
    }
    GlossSource source;
    if (fields[2] == "finglish") {
      source = GlossSource::FinglishList;
    } else if (fields[2] == "slang") {
      source = GlossSource::SlangList;
    } else {
      throw DataError("unknown dictionary source \"" + std::string(fields[2]) + "\"", line);
    }
    if (fields[1].empty()) throw DataError("empty gloss", line);
    into.add(fields[0], std::string(fields[1]), source);
  }
}

TokenizedText translate_candidates(TokenizedText tt, const TranslationDict& dict,
                                   TranslationCache* cache, TranslatorClient* client,
                                   const TranslateOptions& opts, std::vector<Miss>* misses) {
  auto miss = [&](const std::string& word, std::string reason) {
    if (misses) misses->push_back(Miss{word, std::move(reason)});
  };
  for (auto& tok : tt.tokens) {
    if (tok.cls != TokenClass::NonPersianCandidate) continue;
    if (auto g = dict.lookup(tok.surface)) {
      tok.translation = g->text;
      continue;
    }
    if (cache) {
      if (auto g = cache->get(tok.surface, opts.src, opts.dst)) {
        tok.translation = *g;
        continue;
      }
    }
    if (opts.offline || client == nullptr) {
      miss(tok.surface, opts.offline ? "offline" : "no translator configured");
      continue;
    }
    try {
      auto gloss = client->translate(tok.surface, opts.src, opts.dst);
      if (cache && !cache->get(tok.surface, opts.src, opts.dst)) {
        cache->put(tok.surface, opts.src, opts.dst, gloss);
      }
      tok.translation = std::move(gloss);
    } catch (const TransientError& e) {
      miss(tok.surface, std::string("transient: ") + e.what());
    } catch (const ProtocolError& e) {
      miss(tok.surface, std::string("protocol: ") + e.what());
    } catch (const std::exception& e) {
      miss(tok.surface, std::string("error: ") + e.what());
    }
  }
  return tt;
}

Preprocessor::Preprocessor(std::shared_ptr<const PersianLexicon> lexicon,
                           std::shared_ptr<const TranslationDict> dict, TranslateOptions opts,
                           std::shared_ptr<TranslationCache> cache,
                           std::shared_ptr<TranslatorClient> client)
    : lexicon_(std::move(lexicon)),
      dict_(std::move(dict)),
      opts_(std::move(opts)),
      cache_(std::move(cache)),
      client_(std::move(client)) {
  if (!lexicon_) lexicon_ = std::make_shared<PersianLexicon>();
  if (!dict_) dict_ = std::make_shared<TranslationDict>();
}

TokenizedText Preprocessor::run(std::string_view raw_text, std::vector<Miss>* misses) const {
  auto tt = tokenize(normalize_text(corpus::redact_mentions(raw_text)));
  tt = detect_non_persian(std::move(tt), *lexicon_);
  return translate_candidates(std::move(tt), *dict_, cache_.get(), client_.get(), opts_,
                              misses);
}

std::string tokens_to_json(const TokenizedText& tt) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& tok : tt.tokens) {
    nlohmann::ordered_json j;
    j["surface"] = tok.surface;
    j["begin"] = tok.begin;
    j["end"] = tok.end;
    j["class"] = std::string(to_string(tok.cls));
    j["translation"] = tok.translation ? nlohmann::ordered_json(*tok.translation)
                                       : nlohmann::ordered_json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

TokenizedText tokens_from_json(std::string_view text) {
  TokenizedText tt;
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed token list: ") + e.what());
  }
  if (!arr.is_array()) throw DataError("token list must be an array");
  for (const auto& j : arr) {
    try {
      Token tok;
      tok.surface = j.at("surface").get<std::string>();
      tok.begin = j.at("begin").get<std::size_t>();
      tok.end = j.at("end").get<std::size_t>();
      const auto cls = parse_token_class(j.at("class").get<std::string>());
      if (!cls) throw DataError("unknown token class");
      tok.cls = *cls;
      if (j.contains("translation") && !j["translation"].is_null()) {
        tok.translation = j["translation"].get<std::string>();
      }
      tt.tokens.push_back(std::move(tok));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed token: ") + e.what());
    }
  }
  return tt;
}

}  // namespace cmsa::codeswitch
