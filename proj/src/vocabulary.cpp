#include "ffgan/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "ffgan/errors.hpp"

namespace ffgan {

TokenList tokenize(std::string_view text) {
  TokenList out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

int64_t Vocabulary::add(const std::string& token) {
  if (auto it = token_to_id_.find(token); it != token_to_id_.end()) return it->second;
  const auto next = static_cast<int64_t>(id_to_token_.size());
  token_to_id_.emplace(token, next);
  id_to_token_.push_back(token);
  return next;
}

int64_t Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int64_t id) const {
  if (id < 0 || id >= size()) throw LookupError("vocabulary id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const { return token_to_id_.contains(token); }

std::string Vocabulary::serialize() const {
  std::ostringstream os;
  for (size_t i = 0; i < id_to_token_.size(); ++i) os << id_to_token_[i] << '\t' << i << '\n';
  return os.str();
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary: " + path.string());
  out << serialize();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary: " + path.string());
  std::vector<std::pair<int64_t, std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError("malformed vocabulary line: " + line);
    rows.emplace_back(std::stoll(line.substr(tab + 1)), line.substr(0, tab));
  }
  std::sort(rows.begin(), rows.end());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<int64_t>(i)) throw IoError("vocabulary ids are not contiguous");
  }
  if (rows.size() < 2 || rows[0].second != kPadToken || rows[1].second != kUnkToken) {
    throw IoError("vocabulary is missing reserved tokens");
  }
  Vocabulary vocab;
  for (size_t i = 2; i < rows.size(); ++i) {
    if (vocab.add(rows[i].second) != static_cast<int64_t>(i)) throw IoError("duplicate vocabulary token");
  }
  return vocab;
}

Vocabulary build_vocabulary(const std::vector<TokenList>& corpus, int min_count) {
  if (corpus.empty()) throw ConfigurationError("build_vocabulary: empty corpus");
  std::unordered_map<std::string, int> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) ++counts[tok];
  }
  std::vector<std::pair<std::string, int>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && tok != Vocabulary::kPadToken && tok != Vocabulary::kUnkToken) {
      ranked.emplace_back(tok, n);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary vocab;
  for (const auto& [tok, n] : ranked) vocab.add(tok);
  return vocab;
}

Caption encode_caption(const TokenList& tokens, const Vocabulary& vocab, int64_t max_length) {
  if (tokens.empty()) throw PreconditionError("encode_caption: empty token list");
  if (max_length < 1) throw ConfigurationError("encode_caption: max_length must be positive");
  Caption c;
  c.length = std::min<int64_t>(max_length, static_cast<int64_t>(tokens.size()));
  c.ids.assign(static_cast<size_t>(max_length), vocab.pad_id());
  c.mask.assign(static_cast<size_t>(max_length), false);
  for (int64_t i = 0; i < c.length; ++i) {
    c.ids[static_cast<size_t>(i)] = vocab.id(tokens[static_cast<size_t>(i)]);
    c.mask[static_cast<size_t>(i)] = true;
  }
  return c;
}

}  // namespace ffgan
