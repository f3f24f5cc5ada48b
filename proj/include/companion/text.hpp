#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace companion {

struct TokenizerOptions {
    bool stem = false; ///< light English plural stemmer, off by default
};

namespace detail {

inline bool is_ascii_alnum(char32_t cp) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}

// Word code points: ASCII alphanumerics plus every code point above U+007F.
// Punctuation, whitespace and malformed bytes all act as separators.
inline bool is_word_cp(char32_t cp) { return is_ascii_alnum(cp) || cp >= 0x80; }

// ASCII A-Z and the Latin-1 uppercase block map to lowercase; everything
// else passes through unchanged.
inline char32_t lower_cp(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    return cp;
}

// Decodes one UTF-8 code point at pos; on malformed input consumes a single
// byte and reports it as U+FFFD so tokenization stays total.
inline char32_t next_cp(std::string_view s, std::size_t& pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) {
        ++pos;
        return b0;
    }
    int extra = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        extra = 1;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        extra = 2;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        extra = 3;
        cp = b0 & 0x07;
    } else {
        ++pos;
        return 0xFFFD;
    }
    if (pos + static_cast<std::size_t>(extra) >= s.size()) {
        ++pos;
        return 0xFFFD;
    }
    for (int i = 1; i <= extra; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + static_cast<std::size_t>(i)]);
        if ((b & 0xC0) != 0x80) {
            ++pos;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    pos += static_cast<std::size_t>(extra) + 1;
    return cp;
}

inline void append_cp(std::string& out, char32_t cp) {
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

// Strips common plural suffixes: "ies" -> "y", "sses" -> "ss", trailing "s"
// except "ss"/"us"/"is". ASCII only; short tokens are left alone.
inline std::string stem_token(std::string t) {
    const auto n = t.size();
    auto ends = [&](std::string_view suf) {
        return n >= suf.size() && std::string_view(t).substr(n - suf.size()) == suf;
    };
    if (n > 4 && ends("ies")) {
        t.resize(n - 3);
        t.push_back('y');
    } else if (n > 4 && ends("sses")) {
        t.resize(n - 2);
    } else if (n > 3 && t.back() == 's' && !ends("ss") && !ends("us") && !ends("is")) {
        t.resize(n - 1);
    }
    return t;
}

} // namespace detail

/// Lowercased word segmentation: tokens are maximal runs of word code points
/// (see detail::is_word_cp). "USB-C Charger 65W" -> ["usb","c","charger","65w"].
inline std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& opts = {}) {
    std::vector<std::string> tokens;
    std::string cur;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t cp = detail::next_cp(text, pos);
        if (detail::is_word_cp(cp)) {
            detail::append_cp(cur, detail::lower_cp(cp));
        } else if (!cur.empty()) {
            tokens.push_back(opts.stem ? detail::stem_token(std::move(cur)) : std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        tokens.push_back(opts.stem ? detail::stem_token(std::move(cur)) : std::move(cur));
    }
    return tokens;
}

inline std::string to_lower_ascii(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c + 0x20) : c);
    }
    return out;
}

/// Lowercase + collapse every whitespace run to a single space + trim.
/// The canonical form used for containment checks by the oracle judges.
inline std::string normalize_for_match(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true; // swallow leading whitespace
    for (char c : s) {
        const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
        if (ws) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c + 0x20) : c);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

inline bool contains_normalized(std::string_view haystack_normalized, std::string_view needle_raw) {
    const std::string needle = normalize_for_match(needle_raw);
    if (needle.empty()) return false;
    return haystack_normalized.find(needle) != std::string_view::npos;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && static_cast<unsigned char>(s[b]) <= ' ') ++b;
    while (e > b && static_cast<unsigned char>(s[e - 1]) <= ' ') --e;
    return std::string(s.substr(b, e - b));
}

/// First sentence of a turn: everything up to and including the first
/// '.', '!' or '?'; the whole text when no terminator exists.
inline std::string first_sentence(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '.' || c == '!' || c == '?') {
            return std::string(text.substr(0, i + 1));
        }
    }
    return std::string(text);
}

/// Keeps at most max_words whitespace-delimited words.
inline std::string truncate_words(std::string_view text, std::size_t max_words) {
    std::string out;
    std::size_t words = 0;
    std::size_t i = 0;
    while (i < text.size() && words < max_words) {
        while (i < text.size() && static_cast<unsigned char>(text[i]) <= ' ') ++i;
        if (i >= text.size()) break;
        std::size_t start = i;
        while (i < text.size() && static_cast<unsigned char>(text[i]) > ' ') ++i;
        if (!out.empty()) out.push_back(' ');
        out.append(text.substr(start, i - start));
        ++words;
    }
    return out;
}

inline std::size_t count_words(std::string_view text) {
    std::size_t words = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && static_cast<unsigned char>(text[i]) <= ' ') ++i;
        if (i >= text.size()) break;
        while (i < text.size() && static_cast<unsigned char>(text[i]) > ' ') ++i;
        ++words;
    }
    return words;
}

} // namespace companion
