#pragma once

// Whitespace tokenizer with a fixed hashed term vocabulary plus the special
// placeholder tokens used by the document and query prompts.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "densenote/common.hpp"

namespace densenote {

using TokenId = std::uint32_t;

enum class Special : int {
    TitleQuery = 0,  // [TITLE_QUERY]
    ContentQuery,    // [CONTENT_QUERY]
    Emb,             // [EMB]
    Eos,             // [EOS]
    Cls,             // [CLS]
    Pad,             // [PAD]
    Unk,             // [UNK]
};
inline constexpr int kNumSpecials = 7;

class Tokenizer {
public:
    explicit Tokenizer(std::uint32_t term_vocab = 10000);

    std::uint32_t term_vocab() const { return term_vocab_; }
    // Total id space: term vocab followed by the specials.
    std::uint32_t vocab_total() const { return term_vocab_ + kNumSpecials; }

    TokenId special(Special s) const {
        return term_vocab_ + static_cast<TokenId>(s);
    }
    bool is_special(TokenId t) const { return t >= term_vocab_; }

    // Hash a single whitespace-free term into the term id space.
    TokenId term_id(std::string_view term) const;

    // Whitespace split then hash. Empty input yields an empty sequence.
    std::vector<TokenId> encode_terms(std::string_view text) const;

    // Lowercased whitespace split (shared with the corpus statistics).
    static std::vector<std::string> split_terms(std::string_view text);

private:
    std::uint32_t term_vocab_;
};

}  // namespace densenote
