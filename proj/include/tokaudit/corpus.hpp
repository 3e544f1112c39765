#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tokaudit {

// Prompts sampled uniformly by the audit. Ids are list positions.
struct PromptCorpus {
  std::vector<std::string> prompts;
  std::string digest;  // hex FNV-1a over the retained prompts

  std::size_t size() const noexcept { return prompts.size(); }
  bool empty() const noexcept { return prompts.empty(); }

  static PromptCorpus from_prompts(std::vector<std::string> prompts);
};

// One prompt per line; blank lines are skipped, CR before LF is dropped.
// Throws InputError for a missing or unreadable file, a line that is not valid
// UTF-8, or a file with no prompts.
PromptCorpus load_corpus(const std::filesystem::path& path);

bool disjoint(const PromptCorpus& a, const PromptCorpus& b);

}  // namespace tokaudit
