#pragma once

// Prompt rendering. Documents are rendered into the three-placeholder
// template; queries get either the [EOS]-terminated teacher form or the
// [CLS]-prefixed student form.

#include <cstddef>
#include <string>
#include <vector>

#include "densenote/corpus.hpp"
#include "densenote/tokenizer.hpp"

namespace densenote {

struct RenderedPrompt {
    std::vector<TokenId> tokens;
    // Extraction points: for documents, the index of the token immediately
    // preceding each of [TITLE_QUERY], [CONTENT_QUERY], [EMB] in that order;
    // for queries, a single index. Strictly increasing.
    std::vector<std::size_t> positions;
};

// Truncation shortens content tokens only and never drops a placeholder.
// Throws PromptOverflow when the skeleton alone exceeds max_len.
RenderedPrompt render_document_prompt(const corpus::Document& d,
                                      const Tokenizer& tok,
                                      std::size_t max_len);

enum class QueryRenderMode {
    TeacherEos,  // tokens + [EOS]; extraction at the final position
    StudentCls,  // [CLS] + tokens; extraction at the [CLS] position
};

RenderedPrompt render_query(const corpus::Query& q, const Tokenizer& tok,
                            QueryRenderMode mode);

}  // namespace densenote
