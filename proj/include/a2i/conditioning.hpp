#pragma once

#include <string>

#include "a2i/backbones.hpp"
#include "a2i/embedder.hpp"

namespace a2i {

enum class TokenPosition {
    kAfterPrompt,   // right after the last content token, before the end special
    kSequenceEnd,   // after every row, including specials
};

TokenPosition token_position_from_string(const std::string& s);
std::string to_string(TokenPosition pos);

// Prompt rows from the frozen text encoder with the audio token injected at
// audio_token_position. Every row except that one is frozen-encoder output.
struct ConditioningSequence {
    MatrixXd embeddings;           // (n_content + 1 + n_special) x d_a
    int audio_token_position = 0;
};

ConditioningSequence build_conditioning(const AudioToken& token, const std::string& prompt,
                                        const TextEncoder& text_encoder,
                                        TokenPosition position = TokenPosition::kAfterPrompt);

// Label embedding for the classification loss: mean over the label's
// content-token embeddings (specials excluded).
struct LabelEmbedding {
    VectorXd values;
    std::string label_text;
    int n_l = 0;  // content-token length of the label
};

LabelEmbedding encode_label(const std::string& label_text, const TextEncoder& text_encoder);

}  // namespace a2i
