#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace mc {

// Token inventory with dense ids: real tokens first (0..n_real-1), then the
// three specials. The CTC head emits over real tokens + blank, so blank_id
// doubles as the blank column index; the MLM token head emits real tokens
// only. Mask and pad appear only on the decoder input side.
class Vocabulary {
 public:
  Vocabulary() = default;

  // n_real synthetic tokens named "t0".."t{n-1}".
  static Vocabulary make(int64_t n_real);
  static Vocabulary from_tokens(std::vector<std::string> real_tokens);

  int64_t size() const { return static_cast<int64_t>(tokens_.size()); }
  int64_t n_real() const { return n_real_; }
  int64_t blank_id() const { return n_real_; }
  int64_t mask_id() const { return n_real_ + 1; }
  int64_t pad_id() const { return n_real_ + 2; }
  bool is_real(int64_t id) const { return id >= 0 && id < n_real_; }

  const std::string& token(int64_t id) const;
  int64_t id_of(const std::string& token) const;  // data_error if unknown

  // Real-token names only (specials are implied by the layout).
  std::vector<std::string> real_tokens() const;

 private:
  std::vector<std::string> tokens_;  // real tokens then <blank>, <mask>, <pad>
  int64_t n_real_ = 0;
};

}  // namespace mc
