#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcdrop/error.hpp"

namespace mcdrop {

using TokenId = std::int32_t;

// The 22 proteinogenic residues in vocabulary order.
inline constexpr std::string_view kResidueAlphabet = "ACDEFGHIKLMNPQRSTVWYUO";
// The 20 canonical residues (no selenocysteine/pyrrolysine).
inline constexpr std::string_view kCanonicalResidues = "ACDEFGHIKLMNPQRSTVWY";

struct TokenSequence {
  std::vector<TokenId> ids;

  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }
  TokenId operator[](std::size_t i) const { return ids[i]; }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

enum class EncodeMode { kStrict, kLenient };

// Fixed token table: five special tokens followed by the residue alphabet.
// Immutable once built.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kMask = 1;
  static constexpr TokenId kBos = 2;
  static constexpr TokenId kEos = 3;
  static constexpr TokenId kUnk = 4;
  static constexpr TokenId kFirstResidue = 5;

  Vocabulary() : Vocabulary(default_glyphs()) {}

  // `special_glyphs` is how PAD, MASK, BOS, EOS and UNK render in decode().
  explicit Vocabulary(const std::array<std::string, 5>& special_glyphs) {
    id_to_token_.assign(special_glyphs.begin(), special_glyphs.end());
    residue_ids_.fill(-1);
    for (char c : kResidueAlphabet) {
      residue_ids_[static_cast<unsigned char>(c)] = static_cast<TokenId>(id_to_token_.size());
      id_to_token_.emplace_back(1, c);
    }
  }

  std::size_t size() const noexcept { return id_to_token_.size(); }

  // Id of a residue letter (case-insensitive), or nullopt.
  std::optional<TokenId> token_to_id(char c) const noexcept {
    const TokenId id = residue_ids_[static_cast<unsigned char>(
        std::toupper(static_cast<unsigned char>(c)))];
    if (id < 0) return std::nullopt;
    return id;
  }

  const std::string& id_to_token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) throw InvalidTokenId(id);
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  bool is_residue(TokenId id) const noexcept {
    return id >= kFirstResidue && static_cast<std::size_t>(id) < id_to_token_.size();
  }

 private:
  static std::array<std::string, 5> default_glyphs() {
    return {"<pad>", "<mask>", "<bos>", "<eos>", "<unk>"};
  }

  std::vector<std::string> id_to_token_;
  std::array<TokenId, 256> residue_ids_{};
};

inline const Vocabulary& default_vocabulary() {
  static const Vocabulary vocab;
  return vocab;
}

// Residue tokens only; no BOS/EOS are added.
inline TokenSequence encode(std::string_view seq, const Vocabulary& vocab = default_vocabulary(),
                            EncodeMode mode = EncodeMode::kStrict) {
  if (seq.empty()) throw EmptyInput("cannot encode an empty sequence");
  TokenSequence out;
  out.ids.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (auto id = vocab.token_to_id(seq[i])) {
      out.ids.push_back(*id);
    } else if (mode == EncodeMode::kLenient) {
      out.ids.push_back(Vocabulary::kUnk);
    } else {
      throw InvalidResidue(i, seq[i]);
    }
  }
  return out;
}

inline std::string decode(std::span<const TokenId> ids, const Vocabulary& vocab = default_vocabulary()) {
  std::string out;
  out.reserve(ids.size());
  for (TokenId id : ids) out += vocab.id_to_token(id);
  return out;
}

inline std::string decode(const TokenSequence& tokens, const Vocabulary& vocab = default_vocabulary()) {
  return decode(std::span<const TokenId>(tokens.ids), vocab);
}

}  // namespace mcdrop
