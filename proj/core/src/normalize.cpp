#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/uscript.h>
#include <unicode/unistr.h>

#include <string>

#include "cmsa/codeswitch.hpp"
#include "cmsa/error.hpp"

namespace cmsa::codeswitch {

namespace {

constexpr UChar32 kArabicYeh = 0x064A;
constexpr UChar32 kPersianYeh = 0x06CC;
constexpr UChar32 kArabicKaf = 0x0643;
constexpr UChar32 kPersianKaf = 0x06A9;
constexpr UChar32 kTatweel = 0x0640;
constexpr UChar32 kZwnj = 0x200C;

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw Error("ICU NFC normalizer unavailable");
  return *n;
}

icu::UnicodeString to_nfc(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc().normalize(s, status);
  if (U_FAILURE(status)) throw Error("ICU normalization failed");
  return out;
}

bool is_harakat(UChar32 c) { return c >= 0x064B && c <= 0x0652; }

bool is_latin(UChar32 c) {
  UErrorCode status = U_ZERO_ERROR;
  return uscript_getScript(c, &status) == USCRIPT_LATIN && U_SUCCESS(status);
}

// Drops ZWNJ at the start and end of every whitespace-delimited word.
icu::UnicodeString trim_zwnj(const icu::UnicodeString& s) {
  icu::UnicodeString out;
  icu::UnicodeString word;
  auto flush = [&] {
    int32_t begin = 0;
    int32_t end = word.length();
    while (begin < end && word.charAt(begin) == kZwnj) ++begin;
    while (end > begin && word.charAt(end - 1) == kZwnj) --end;
    out.append(word, begin, end - begin);
    word.remove();
  };
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      flush();
      out.append(c);
    } else {
      word.append(c);
    }
  }
  flush();
  return out;
}

}  // namespace

std::string normalize_text(std::string_view text) {
  const auto input = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  const icu::UnicodeString composed = to_nfc(input);

  icu::UnicodeString mapped;
  for (int32_t i = 0; i < composed.length();) {
    UChar32 c = composed.char32At(i);
    i += U16_LENGTH(c);
    if (c == kTatweel || is_harakat(c)) continue;
    if (c == kArabicYeh) {
      c = kPersianYeh;
    } else if (c == kArabicKaf) {
      c = kPersianKaf;
    } else if (is_latin(c)) {
      c = u_foldCase(c, U_FOLD_CASE_DEFAULT);
    }
    mapped.append(c);
  }
  // Removing tatweel can bring a base letter and a combining mark together,
  // so compose once more to keep the result a fixed point.
  const icu::UnicodeString result = to_nfc(trim_zwnj(mapped));
  std::string out;
  result.toUTF8String(out);
  return out;
}

}  // namespace cmsa::codeswitch
