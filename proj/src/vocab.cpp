#include "zcap/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "zcap/checkpoint.hpp"

namespace zcap {

namespace {
const std::string kSpecialNames[] = {"[pad]", "[unk]", "[cls]", "[sep]"};
}

int Vocab::id(const std::string& w) const {
  auto it = index.find(w);
  if (it == index.end()) throw std::out_of_range("vocab: unknown token: " + w);
  return it->second;
}

int Vocab::id_or_unk(const std::string& w) const {
  auto it = index.find(w);
  return it == index.end() ? kUnk : it->second;
}

const std::string& Vocab::word(int id) const {
  if (id < 0 || static_cast<size_t>(id) >= size()) throw std::out_of_range("vocab: id out of range");
  if (id < kSpecialCount) return kSpecialNames[id];
  return words[static_cast<size_t>(id - kSpecialCount)];
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocab::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  for (int id : ids) {
    if (is_special(id)) continue;
    out.push_back(word(id));
  }
  return out;
}

Vocab build_vocab(const std::vector<world::CaptionText>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::set<std::string> distinct;
  for (const auto& cap : corpus)
    for (const auto& tok : cap.tokens) distinct.insert(tok);
  Vocab v;
  v.words.assign(distinct.begin(), distinct.end());
  for (size_t i = 0; i < v.words.size(); ++i)
    v.index[v.words[i]] = static_cast<int>(i) + Vocab::kSpecialCount;
  return v;
}

void save_vocab(const Vocab& vocab, const std::filesystem::path& file) {
  std::string out;
  for (const auto& w : vocab.words) out += w + "\n";
  atomic_write_text(file, out);
}

Vocab load_vocab(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open vocab: " + file.string());
  Vocab v;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) v.words.push_back(line);
  for (size_t i = 0; i < v.words.size(); ++i)
    v.index[v.words[i]] = static_cast<int>(i) + Vocab::kSpecialCount;
  return v;
}

}  // namespace zcap
