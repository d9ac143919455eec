#include "densenote/tokenizer.hpp"

#include <cctype>

namespace densenote {

namespace {
// FNV-1a 64-bit.
std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}
}  // namespace

Tokenizer::Tokenizer(std::uint32_t term_vocab) : term_vocab_(term_vocab) {
    if (term_vocab_ < 2) throw ConfigError("tokenizer term vocab too small");
}

TokenId Tokenizer::term_id(std::string_view term) const {
    if (term.empty()) return special(Special::Unk);
    return static_cast<TokenId>(fnv1a(term) % term_vocab_);
}

std::vector<std::string> Tokenizer::split_terms(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(static_cast<char>(
                std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<TokenId> Tokenizer::encode_terms(std::string_view text) const {
    std::vector<TokenId> ids;
    for (const auto& t : split_terms(text)) ids.push_back(term_id(t));
    return ids;
}

}  // namespace densenote
