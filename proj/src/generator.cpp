#include "lang2face/generator.hpp"

namespace lang2face {

namespace {
std::atomic<int64_t> g_attention_calls{0};
}

int64_t word_attention_calls() { return g_attention_calls.load(); }
void reset_word_attention_calls() { g_attention_calls.store(0); }
void bump_word_attention_calls() { g_attention_calls.fetch_add(1); }

}  // namespace lang2face
