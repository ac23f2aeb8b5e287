#ifndef DDLAB_INGEST_HPP
#define DDLAB_INGEST_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ddlab/errors.hpp"
#include "ddlab/ood_scores.hpp"

namespace ddlab {

/// Binary feature table ("DDFT", version 1), all integers and floats
/// little-endian:
///
///   magic    4 bytes  "DDFT"
///   version  u32      1
///   n        u64      rows
///   q        u64      feature columns
///   flags    u8       bit0 labels, bit1 logits, bit2 head
///   C        u32      classes, present iff bit1 or bit2
///   features n*q f64  row-major
///   labels   n   u32  (bit0)
///   logits   n*C f64  row-major (bit1)
///   head W   C*q f64  row-major, then b C f64 (bit2)
///
/// The file length must equal the declared payload exactly.
struct FeatureTable {
    ModelOutputs outputs;
    std::optional<ClassifierHead> head;
};

inline constexpr std::uint32_t kTableVersion = 1;
inline constexpr std::uint8_t kFlagLabels = 1u << 0;
inline constexpr std::uint8_t kFlagLogits = 1u << 1;
inline constexpr std::uint8_t kFlagHead = 1u << 2;

/// Throws FormatError (bad magic, version, flags), CorruptFile (length
/// mismatch, naming the first incomplete block) or DataError (non-finite
/// value with its row/column, label out of range).
FeatureTable read_table(const std::filesystem::path& path);
FeatureTable decode_table(const std::vector<std::uint8_t>& bytes);

void write_table(const ModelOutputs& outputs, const std::optional<ClassifierHead>& head,
                 const std::filesystem::path& path);
std::vector<std::uint8_t> encode_table(const ModelOutputs& outputs,
                                       const std::optional<ClassifierHead>& head);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// Comma-separated table with header f0..f{q-1}, optional `label`, and
/// l0..l{C-1}, in any column order. Lines starting with '#' are comments.
/// Throws FormatError (ragged row or unknown column, with line number) or
/// DataError (empty table, unparsable or non-finite value).
ModelOutputs read_csv(const std::filesystem::path& path);
/// Emits columns f*, label, l* with shortest round-trip floats and LF endings.
void write_csv(const ModelOutputs& outputs, const std::filesystem::path& path);

/// Generic numeric CSV (header row, then values); used for score files.
struct NumericCsv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    /// Column by name; throws DataError when absent.
    const std::vector<double>& column(const std::string& name) const;
};
NumericCsv read_numeric_csv(const std::filesystem::path& path);

}  // namespace ddlab

#endif  // DDLAB_INGEST_HPP
