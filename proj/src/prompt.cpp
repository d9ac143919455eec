#include "densenote/prompt.hpp"

namespace densenote {

namespace {

void append_terms(std::vector<TokenId>& out, const Tokenizer& tok,
                  const std::string& text) {
    for (auto id : tok.encode_terms(text)) out.push_back(id);
}

// Template fragments surrounding the three placeholders. Rendered as ordinary
// terms so the towers see a stable lexical frame around the fields.
const char* kTitleHead = "document: {'title':";
const char* kTitleTail = "}. predict a query term:";
const char* kBodyHead = "document: {'topic':";
const char* kContentKey = ", 'content':";
const char* kBodyTail = "}. predict a query term:";
const char* kInductive =
    ", combine the predicted query terms, and compress the above content into one word:";

}  // namespace

RenderedPrompt render_document_prompt(const corpus::Document& d,
                                      const Tokenizer& tok,
                                      std::size_t max_len) {
    if (d.title.empty() || d.topic.empty() || d.content.empty())
        throw DomainError("document " + std::to_string(d.id) +
                          " violates the non-empty field invariant");

    std::vector<TokenId> head;  // everything before the content tokens
    append_terms(head, tok, kTitleHead);
    append_terms(head, tok, d.title);
    append_terms(head, tok, kTitleTail);
    const std::size_t title_q_pos = head.size();
    head.push_back(tok.special(Special::TitleQuery));
    append_terms(head, tok, kBodyHead);
    append_terms(head, tok, d.topic);
    append_terms(head, tok, kContentKey);

    std::vector<TokenId> content = tok.encode_terms(d.content);

    std::vector<TokenId> tail;  // everything after the content tokens
    append_terms(tail, tok, kBodyTail);
    const std::size_t content_q_off = tail.size();
    tail.push_back(tok.special(Special::ContentQuery));
    append_terms(tail, tok, kInductive);
    const std::size_t emb_off = tail.size();
    tail.push_back(tok.special(Special::Emb));

    const std::size_t skeleton = head.size() + tail.size();
    if (skeleton > max_len)
        throw PromptOverflow("document prompt skeleton needs " +
                             std::to_string(skeleton) + " tokens, max_len=" +
                             std::to_string(max_len));
    if (head.size() + content.size() + tail.size() > max_len)
        content.resize(max_len - skeleton);

    RenderedPrompt p;
    p.tokens = std::move(head);
    p.tokens.insert(p.tokens.end(), content.begin(), content.end());
    const std::size_t tail_base = p.tokens.size();
    p.tokens.insert(p.tokens.end(), tail.begin(), tail.end());

    p.positions = {title_q_pos - 1, tail_base + content_q_off - 1,
                   tail_base + emb_off - 1};
    return p;
}

RenderedPrompt render_query(const corpus::Query& q, const Tokenizer& tok,
                            QueryRenderMode mode) {
    const auto ids = tok.encode_terms(q.text);
    if (ids.empty()) throw EmptyQuery("query " + std::to_string(q.id) + " is empty");

    RenderedPrompt p;
    if (mode == QueryRenderMode::TeacherEos) {
        p.tokens = ids;
        p.tokens.push_back(tok.special(Special::Eos));
        p.positions = {p.tokens.size() - 1};
    } else {
        p.tokens.push_back(tok.special(Special::Cls));
        p.tokens.insert(p.tokens.end(), ids.begin(), ids.end());
        p.positions = {0};
    }
    return p;
}

}  // namespace densenote
