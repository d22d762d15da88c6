#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ffgan {

using TokenList = std::vector<std::string>;

// Lowercases and splits on whitespace and ASCII punctuation.
TokenList tokenize(std::string_view text);

// Token <-> id map. Ids are contiguous from 0; 0 is padding, 1 is unknown.
class Vocabulary {
 public:
  static constexpr int64_t kPadId = 0;
  static constexpr int64_t kUnkId = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  // Appends a token, returning its id. Existing tokens keep their id.
  int64_t add(const std::string& token);

  int64_t id(const std::string& token) const;  // kUnkId when absent
  const std::string& token(int64_t id) const;
  bool contains(const std::string& token) const;
  int64_t size() const { return static_cast<int64_t>(id_to_token_.size()); }

  int64_t pad_id() const { return kPadId; }
  int64_t unk_id() const { return kUnkId; }

  // "token<TAB>id" per line, in id order.
  void save(const std::filesystem::path& path) const;
  std::string serialize() const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary&) const = default;

 private:
  std::map<std::string, int64_t> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Frequency-ordered vocabulary; ties broken lexicographically. Tokens seen
// fewer than min_count times are left out (they encode to unk).
Vocabulary build_vocabulary(const std::vector<TokenList>& corpus, int min_count = 1);

struct Caption {
  std::vector<int64_t> ids;   // length max_length, padded with pad_id
  std::vector<bool> mask;     // true at real tokens (a prefix)
  int64_t length = 0;

  int64_t max_length() const { return static_cast<int64_t>(ids.size()); }
};

// Truncates to max_length and pads. Throws PreconditionError on empty input.
Caption encode_caption(const TokenList& tokens, const Vocabulary& vocab, int64_t max_length);

}  // namespace ffgan
