#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "zcap/microworld.hpp"

namespace zcap {

// Whole-word vocabulary with the four special ids every sequence layout uses.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kSpecialCount = 4;

  std::vector<std::string> words;  // id = index + kSpecialCount
  std::unordered_map<std::string, int> index;

  size_t size() const { return words.size() + kSpecialCount; }

  int id(const std::string& word) const;          // throws on unknown word
  int id_or_unk(const std::string& word) const;   // maps unknown words to kUnk
  const std::string& word(int id) const;
  static bool is_special(int id) { return id >= 0 && id < kSpecialCount; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;  // skips specials
};

// Deterministic: lexicographic over the distinct corpus words.
Vocab build_vocab(const std::vector<world::CaptionText>& corpus);

void save_vocab(const Vocab& vocab, const std::filesystem::path& file);
Vocab load_vocab(const std::filesystem::path& file);

}  // namespace zcap
