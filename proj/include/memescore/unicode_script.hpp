#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memescore {

// Coarse Unicode Script property classes relevant to Singaporean OCR text.
// Everything that is not Han, Tamil or Latin (Common, Inherited, other
// scripts, unassigned) is kOther.
enum class ScriptClass { kHan, kTamil, kLatin, kOther };

// Script property lookup (Unicode 14 Scripts.txt ranges).
ScriptClass script_of(char32_t cp) noexcept;

bool is_unicode_whitespace(char32_t cp) noexcept;

std::string_view script_name(ScriptClass script) noexcept;
// Case-insensitive; accepts "han", "tamil", "latin". Throws DataError otherwise.
ScriptClass parse_script_name(std::string_view name);

// Decodes UTF-8. Ill-formed sequences decode to U+FFFD one byte at a time so
// the function is total.
std::vector<char32_t> decode_utf8(std::string_view text);
void append_utf8(std::string& out, char32_t cp);

// Splits on runs of White_Space codepoints, returning the byte slices of the
// non-empty tokens.
std::vector<std::string_view> split_whitespace(std::string_view text);

}  // namespace memescore
