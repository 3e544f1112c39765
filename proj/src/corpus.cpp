#include "tokaudit/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "tokaudit/errors.hpp"
#include "tokaudit/toymodel.hpp"

namespace tokaudit {

namespace {

bool valid_utf8(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

std::string hex_digest(const std::vector<std::string>& prompts) {
  std::string joined;
  for (const auto& p : prompts) {
    joined += p;
    joined += '\n';
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(prompt_digest(joined)));
  return buf;
}

}  // namespace

PromptCorpus PromptCorpus::from_prompts(std::vector<std::string> prompts) {
  if (prompts.empty()) throw InputError("prompt corpus is empty");
  PromptCorpus corpus;
  corpus.digest = hex_digest(prompts);
  corpus.prompts = std::move(prompts);
  return corpus;
}

PromptCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open prompt file " + path.string());
  std::vector<std::string> prompts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!valid_utf8(line)) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": invalid UTF-8");
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    prompts.push_back(line);
  }
  if (in.bad()) throw InputError("error reading " + path.string());
  if (prompts.empty()) throw InputError(path.string() + ": no prompts");
  return PromptCorpus::from_prompts(std::move(prompts));
}

bool disjoint(const PromptCorpus& a, const PromptCorpus& b) {
  const std::set<std::string> seen(a.prompts.begin(), a.prompts.end());
  for (const auto& p : b.prompts) {
    if (seen.contains(p)) return false;
  }
  return true;
}

}  // namespace tokaudit
