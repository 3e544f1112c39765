#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tokaudit/toymodel.hpp"

namespace tokaudit::testing {

inline std::shared_ptr<const Vocabulary> vocab_of(std::vector<std::string> tokens) {
  return std::make_shared<const Vocabulary>(std::move(tokens));
}

inline ModelSpec small_model(std::vector<std::string> tokens, std::size_t max_len,
                             std::uint64_t seed = 7, double temperature = 1.0,
                             double eos_boost = 0.15) {
  ModelSpec spec;
  spec.seed = seed;
  spec.vocab = vocab_of(std::move(tokens));
  spec.temperature = temperature;
  spec.eos_boost = eos_boost;
  spec.max_len = max_len;
  return spec;
}

inline TokenSeq seq_of(std::initializer_list<const char*> strs, const Vocabulary& vocab) {
  TokenSeq s;
  for (const char* t : strs) s.ids.push_back(*vocab.find(t));
  return s;
}

}  // namespace tokaudit::testing
