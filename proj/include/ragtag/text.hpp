#pragma once

// Unicode plumbing shared by the KB store, the inverted index and the
// retrieval matchers: UTF-8 codec, NFKC case-folding (ICU) and the
// word splitter used for both index terms and context tokens.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

namespace ragtag::text {

/// Decodes UTF-8 into codepoints; malformed byte sequences become U+FFFD.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 >> 5) == 0x6 && i + 1 < s.size()) {
      const unsigned char b1 = static_cast<unsigned char>(s[i + 1]);
      if ((b1 >> 6) == 0x2) {
        cp = (char32_t(b0 & 0x1F) << 6) | (b1 & 0x3F);
        len = 2;
        if (cp < 0x80) cp = 0xFFFD;
      }
    } else if ((b0 >> 4) == 0xE && i + 2 < s.size()) {
      const unsigned char b1 = static_cast<unsigned char>(s[i + 1]);
      const unsigned char b2 = static_cast<unsigned char>(s[i + 2]);
      if ((b1 >> 6) == 0x2 && (b2 >> 6) == 0x2) {
        cp = (char32_t(b0 & 0x0F) << 12) | (char32_t(b1 & 0x3F) << 6) | (b2 & 0x3F);
        len = 3;
        if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
      }
    } else if ((b0 >> 3) == 0x1E && i + 3 < s.size()) {
      const unsigned char b1 = static_cast<unsigned char>(s[i + 1]);
      const unsigned char b2 = static_cast<unsigned char>(s[i + 2]);
      const unsigned char b3 = static_cast<unsigned char>(s[i + 3]);
      if ((b1 >> 6) == 0x2 && (b2 >> 6) == 0x2 && (b3 >> 6) == 0x2) {
        cp = (char32_t(b0 & 0x07) << 18) | (char32_t(b1 & 0x3F) << 12) |
             (char32_t(b2 & 0x3F) << 6) | (b3 & 0x3F);
        len = 4;
        if (cp < 0x10000 || cp > 0x10FFFF) cp = 0xFFFD;
      }
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode_utf8(const std::u32string& cps) {
  std::string out;
  out.reserve(cps.size() * 2);
  for (char32_t cp : cps) append_utf8(out, cp);
  return out;
}

/// NFKC + case fold in one ICU pass (nfkc_casefold).
inline std::string nfkc_casefold(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFKCCasefoldInstance(status);
  if (U_FAILURE(status) || norm == nullptr)
    throw std::runtime_error("ICU nfkc_casefold unavailable");
  icu::UnicodeString in = icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  icu::UnicodeString folded = norm->normalize(in, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU normalize failed");
  std::string out;
  folded.toUTF8String(out);
  return out;
}

inline bool is_space_cp(char32_t cp) {
  return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0;
}

inline bool is_han(char32_t cp) {
  return u_hasBinaryProperty(static_cast<UChar32>(cp), UCHAR_IDEOGRAPHIC) != 0;
}

// Word characters for segmentation: letters, digits and combining marks.
inline bool is_word_cp(char32_t cp) {
  const UChar32 c = static_cast<UChar32>(cp);
  if (u_hasBinaryProperty(c, UCHAR_ALPHABETIC)) return true;
  if (u_isdigit(c)) return true;
  const int8_t t = u_charType(c);
  return t == U_NON_SPACING_MARK || t == U_COMBINING_SPACING_MARK;
}

/// Surface normalization for lookup keys: NFKC + case fold, collapse
/// internal whitespace runs to one space, trim the ends.
inline std::string normalize_surface(std::string_view s) {
  const std::u32string cps = decode_utf8(nfkc_casefold(s));
  std::string out;
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (is_space_cp(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    append_utf8(out, cp);
  }
  return out;
}

/// Splits into word segments: runs of word characters, except that Han
/// ideographs always stand alone (one character, one segment). Everything
/// else (punctuation, symbols, whitespace) is a boundary and is dropped.
inline std::vector<std::string> word_tokens(std::string_view s) {
  std::vector<std::string> out;
  const std::u32string cps = decode_utf8(s);
  std::string run;
  auto flush = [&] {
    if (!run.empty()) {
      out.push_back(run);
      run.clear();
    }
  };
  for (char32_t cp : cps) {
    if (is_han(cp)) {
      flush();
      std::string one;
      append_utf8(one, cp);
      out.push_back(std::move(one));
    } else if (is_word_cp(cp)) {
      append_utf8(run, cp);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

/// Index terms: NFKC case fold first, then the word splitter. Used for
/// BM25 postings, queries and all normalized token matching.
inline std::vector<std::string> index_terms(std::string_view s) {
  return word_tokens(nfkc_casefold(s));
}

/// Per-token fold for matching already-segmented tokens against terms.
inline std::string fold_token(std::string_view token) {
  std::string f = normalize_surface(token);
  return f;
}

}  // namespace ragtag::text
