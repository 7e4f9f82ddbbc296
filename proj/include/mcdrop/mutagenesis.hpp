#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mcdrop/error.hpp"
#include "mcdrop/text.hpp"
#include "mcdrop/tokenizer.hpp"

namespace mcdrop {

// One substitution; `position` is 1-indexed into the wildtype.
struct Mutation {
  std::size_t position = 0;
  char from_aa = 0;
  char to_aa = 0;

  friend bool operator==(const Mutation&, const Mutation&) = default;
};

struct MutantRecord {
  std::string code;  // "" is the wildtype itself
  double fitness = 0.0;
};

struct FamilyDataset {
  std::string family_id;
  std::string wildtype;
  std::vector<MutantRecord> records;
  // Rows dropped while loading in lenient mode.
  std::size_t skipped_rows = 0;
};

namespace detail {

inline bool is_residue_letter(char c) {
  return kResidueAlphabet.find(static_cast<char>(std::toupper(static_cast<unsigned char>(c)))) !=
         std::string_view::npos;
}

inline char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

}  // namespace detail

// "" -> {}, "A24G" -> {(24, A, G)}, "A24G:L30V" -> two substitutions.
inline std::vector<Mutation> parse_mutation_code(std::string_view code) {
  code = text::trim(code);
  std::vector<Mutation> out;
  if (code.empty()) return out;

  std::set<std::size_t> seen;
  for (std::string_view part : text::split(code, ':')) {
    if (part.size() < 3) throw MalformedCode("malformed mutation '" + std::string(part) + "'");
    const char from = part.front();
    const char to = part.back();
    const std::string_view digits = part.substr(1, part.size() - 2);
    if (!detail::is_residue_letter(from) || !detail::is_residue_letter(to) ||
        !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw MalformedCode("malformed mutation '" + std::string(part) + "'");
    if (digits.size() > 9) throw MalformedCode("position out of range in '" + std::string(part) + "'");
    const std::size_t position = std::stoul(std::string(digits));
    if (position == 0) throw MalformedCode("positions are 1-indexed in '" + std::string(part) + "'");
    Mutation m{position, detail::upper(from), detail::upper(to)};
    if (m.from_aa == m.to_aa)
      throw MalformedCode("substitution '" + std::string(part) + "' does not change the residue");
    if (!seen.insert(position).second) throw DuplicatePosition(position);
    out.push_back(m);
  }
  return out;
}

inline std::string format_mutation_code(const std::vector<Mutation>& mutations) {
  std::string out;
  for (std::size_t i = 0; i < mutations.size(); ++i) {
    if (i != 0) out += ':';
    out += mutations[i].from_aa;
    out += std::to_string(mutations[i].position);
    out += mutations[i].to_aa;
  }
  return out;
}

inline std::string apply_mutations(std::string_view wildtype, const std::vector<Mutation>& mutations) {
  std::string out(wildtype);
  std::set<std::size_t> seen;
  for (const Mutation& m : mutations) {
    if (m.position < 1 || m.position > out.size()) throw PositionOutOfRange(m.position, out.size());
    if (!seen.insert(m.position).second) throw DuplicatePosition(m.position);
    const char found = detail::upper(wildtype[m.position - 1]);
    if (found != detail::upper(m.from_aa)) throw WildtypeMismatch(m.position, m.from_aa, found);
    out[m.position - 1] = detail::upper(m.to_aa);
  }
  return out;
}

inline std::string mutant_sequence(const FamilyDataset& family, const MutantRecord& record) {
  return apply_mutations(family.wildtype, parse_mutation_code(record.code));
}

// ---- FASTA -----------------------------------------------------------------

struct FastaRecord {
  std::string header;  // text after '>' up to the first whitespace
  std::string sequence;
};

inline std::vector<FastaRecord> parse_fasta(std::istream& in) {
  std::vector<FastaRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view t = text::trim(line);
    if (t.empty() || t.front() == ';') continue;
    if (t.front() == '>') {
      std::string_view h = text::trim(t.substr(1));
      h = h.substr(0, h.find_first_of(" \t"));
      out.push_back({std::string(h), {}});
      continue;
    }
    if (out.empty()) out.push_back({});
    for (char c : t)
      if (!std::isspace(static_cast<unsigned char>(c))) out.back().sequence += c;
  }
  return out;
}

inline std::vector<FastaRecord> read_fasta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open FASTA '" + path.string() + "'");
  return parse_fasta(in);
}

inline void write_fasta(const std::filesystem::path& path, const std::vector<FastaRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& r : records) out << '>' << r.header << '\n' << r.sequence << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// Uppercases and checks every residue.
inline std::string normalize_wildtype(std::string_view seq) {
  if (seq.empty()) throw EmptyInput("wildtype sequence is empty");
  std::string out(seq);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!detail::is_residue_letter(out[i])) throw InvalidResidue(i, out[i]);
    out[i] = detail::upper(out[i]);
  }
  return out;
}

// ---- family CSV ------------------------------------------------------------

struct LoadOptions {
  // Overrides every other wildtype source.
  std::optional<std::string> wildtype;
  // Skip rows whose code does not fit the wildtype instead of failing.
  bool lenient = false;
};

// Reads a DMS table with (at least) the columns `mutant` and `DMS_score`.
// The wildtype comes from, in order: options.wildtype; a leading
// "#wildtype=<SEQ>" line; a companion <stem>.fasta / <stem>.fa file.
// The family id is the file stem.
inline FamilyDataset load_family_csv(const std::filesystem::path& path, const LoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open family file '" + path.string() + "'");

  FamilyDataset ds;
  ds.family_id = path.stem().string();
  std::optional<std::string> wildtype = options.wildtype;

  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> code_col, score_col;
  std::size_t n_cols = 0;
  std::vector<std::pair<std::size_t, MutantRecord>> rows;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = text::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      constexpr std::string_view key = "wildtype";
      std::string_view meta = text::trim(t.substr(1));
      if (meta.substr(0, key.size()) == key) {
        meta = text::trim(meta.substr(key.size()));
        if (!meta.empty() && (meta.front() == '=' || meta.front() == ':')) meta.remove_prefix(1);
        if (!options.wildtype) wildtype = std::string(text::trim(meta));
      }
      continue;
    }
    const auto fields = text::split(t, ',');
    if (!code_col) {
      n_cols = fields.size();
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "mutant") code_col = i;
        if (fields[i] == "DMS_score") score_col = i;
      }
      if (!code_col) throw MissingColumn("mutant");
      if (!score_col) throw MissingColumn("DMS_score");
      continue;
    }
    if (fields.size() != n_cols)
      throw ParseError(line_no, "expected " + std::to_string(n_cols) + " fields, found " +
                                    std::to_string(fields.size()));
    const auto fitness = text::parse_double(fields[*score_col]);
    if (!fitness || !std::isfinite(*fitness))
      throw ParseError(line_no, "DMS_score '" + std::string(fields[*score_col]) + "' is not a finite number");
    rows.push_back({line_no, {std::string(fields[*code_col]), *fitness}});
  }
  if (!code_col) throw MissingColumn("mutant");

  if (!wildtype) {
    for (const char* ext : {".fasta", ".fa"}) {
      auto companion = path;
      companion.replace_extension(ext);
      if (std::filesystem::exists(companion)) {
        const auto records = read_fasta(companion);
        if (!records.empty()) wildtype = records.front().sequence;
        break;
      }
    }
  }
  if (!wildtype) throw DataError("no wildtype sequence available for '" + path.string() + "'");
  ds.wildtype = normalize_wildtype(*wildtype);

  for (auto& [row_line, record] : rows) {
    std::vector<Mutation> muts;
    try {
      muts = parse_mutation_code(record.code);
    } catch (const DataError& e) {
      throw ParseError(row_line, e.what());
    }
    try {
      apply_mutations(ds.wildtype, muts);
    } catch (const WildtypeMismatch& e) {
      if (options.lenient) {
        ++ds.skipped_rows;
        continue;
      }
      throw WildtypeMismatch(e.position(), e.expected(), e.found(), row_line);
    } catch (const PositionOutOfRange& e) {
      if (options.lenient) {
        ++ds.skipped_rows;
        continue;
      }
      throw ParseError(row_line, e.what());
    }
    record.code = format_mutation_code(muts);
    ds.records.push_back(std::move(record));
  }
  if (ds.records.size() < 2)
    throw EmptyDataset("family '" + ds.family_id + "' has " + std::to_string(ds.records.size()) +
                       " usable records; at least 2 are required");
  return ds;
}

inline std::string family_csv_text(const FamilyDataset& ds) {
  std::string out = "mutant,DMS_score\n";
  for (const auto& r : ds.records) {
    out += r.code;
    out += ',';
    out += text::format_double(r.fitness);
    out += '\n';
  }
  return out;
}

inline void write_family_csv(const FamilyDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << family_csv_text(ds);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace mcdrop
