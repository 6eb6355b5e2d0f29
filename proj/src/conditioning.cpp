#include "a2i/conditioning.hpp"

namespace a2i {

TokenPosition token_position_from_string(const std::string& s) {
    if (s == "after_prompt") return TokenPosition::kAfterPrompt;
    if (s == "sequence_end") return TokenPosition::kSequenceEnd;
    fail("unknown token_position: " + s + " (expected after_prompt or sequence_end)");
}

std::string to_string(TokenPosition pos) {
    return pos == TokenPosition::kAfterPrompt ? "after_prompt" : "sequence_end";
}

ConditioningSequence build_conditioning(const AudioToken& token, const std::string& prompt,
                                        const TextEncoder& text_encoder, TokenPosition position) {
    const std::vector<int> ids = text_encoder.tokenize(prompt);
    if (ids.empty()) fail("build_conditioning: prompt has no content tokens");
    const TextEmbeddingSequence seq = text_encoder.encode(ids);
    if (token.values.size() != seq.embeddings.cols())
        fail("build_conditioning: audio token width " + std::to_string(token.values.size()) +
             " does not match text embedding width " + std::to_string(seq.embeddings.cols()));

    // insertion point: after the last content row, or after everything
    int insert_at = seq.tokens();
    if (position == TokenPosition::kAfterPrompt) {
        for (int i = seq.tokens() - 1; i >= 0; --i) {
            if (!seq.special_token_mask[i]) {
                insert_at = i + 1;
                break;
            }
        }
    }

    ConditioningSequence cond;
    cond.audio_token_position = insert_at;
    cond.embeddings.resize(seq.tokens() + 1, seq.embeddings.cols());
    cond.embeddings.topRows(insert_at) = seq.embeddings.topRows(insert_at);
    cond.embeddings.row(insert_at)     = token.values.transpose();
    cond.embeddings.bottomRows(seq.tokens() - insert_at) =
        seq.embeddings.bottomRows(seq.tokens() - insert_at);
    return cond;
}

LabelEmbedding encode_label(const std::string& label_text, const TextEncoder& text_encoder) {
    if (label_text.empty()) fail("encode_label: empty label");
    const std::vector<int> ids = text_encoder.tokenize(label_text);
    if (ids.empty()) fail("encode_label: label tokenizes to zero content tokens: " + label_text);
    const TextEmbeddingSequence seq = text_encoder.encode(ids);

    LabelEmbedding out;
    out.label_text = label_text;
    out.values     = VectorXd::Zero(seq.embeddings.cols());
    for (int i = 0; i < seq.tokens(); ++i) {
        if (!seq.special_token_mask[i]) {
            out.values += seq.embeddings.row(i).transpose();
            ++out.n_l;
        }
    }
    out.values /= static_cast<double>(out.n_l);
    return out;
}

}  // namespace a2i
