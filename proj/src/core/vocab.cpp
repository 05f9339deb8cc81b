#include "core/vocab.hpp"

#include <algorithm>

namespace mc {

Vocabulary Vocabulary::make(int64_t n_real) {
  MC_CHECK(n_real >= 1, "vocabulary needs at least one real token");
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<size_t>(n_real));
  for (int64_t i = 0; i < n_real; ++i) tokens.push_back("t" + std::to_string(i));
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> real_tokens) {
  MC_CHECK(!real_tokens.empty(), "vocabulary needs at least one real token");
  for (const auto& t : real_tokens) {
    MC_CHECK(!t.empty() && t != "<blank>" && t != "<mask>" && t != "<pad>",
             "reserved or empty token name: '" + t + "'");
    MC_CHECK(t.find(' ') == std::string::npos && t.find('\n') == std::string::npos,
             "token names may not contain whitespace: '" + t + "'");
  }
  auto sorted = real_tokens;
  std::sort(sorted.begin(), sorted.end());
  MC_CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
           "duplicate token name in vocabulary");

  Vocabulary v;
  v.n_real_ = static_cast<int64_t>(real_tokens.size());
  v.tokens_ = std::move(real_tokens);
  v.tokens_.push_back("<blank>");
  v.tokens_.push_back("<mask>");
  v.tokens_.push_back("<pad>");
  return v;
}

const std::string& Vocabulary::token(int64_t id) const {
  MC_CHECK(id >= 0 && id < size(), "token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<size_t>(id)];
}

int64_t Vocabulary::id_of(const std::string& token) const {
  for (size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i] == token) return static_cast<int64_t>(i);
  throw data_error("unknown token: '" + token + "'");
}

std::vector<std::string> Vocabulary::real_tokens() const {
  return {tokens_.begin(), tokens_.begin() + static_cast<size_t>(n_real_)};
}

}  // namespace mc
