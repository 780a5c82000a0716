// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace uala {

enum class Dataset { HotpotQA, StrategyQA, MMLU };

std::string_view to_string(Dataset d) noexcept;
Dataset dataset_from_string(std::string_view name);

struct QAItem {
  std::string id;
  std::string question;
  std::vector<std::string> choices;  // exactly four for MMLU, empty otherwise
  std::string gold;
  Dataset dataset = Dataset::HotpotQA;
  std::string task;  // MMLU subject; empty elsewhere
};

/// On-disk layouts accepted by load_dataset.
///   Canonical:      line-delimited JSON QAItem records (what write_canonical emits)
///   HotpotQAJson:   JSON array of {_id, question, answer}
///   StrategyQAJson: JSON array of {qid, question, answer: bool}
///   MMLUCsvDir:     directory of <task>_{dev,test}.csv files, rows
///                   question,A,B,C,D,answer-letter (no header)
enum class SourceFormat { Canonical, HotpotQAJson, StrategyQAJson, MMLUCsvDir };

SourceFormat source_format_from_string(std::string_view name);

struct SamplingSpec {
  std::uint64_t seed = 233;
  std::size_t count = 0;     // 0 keeps every item in file order
  std::size_t per_task = 0;  // MMLU: items drawn from each task; 0 disables stratification
};

/// Deterministic selection: a pure function of (file bytes, seed, counts).
/// Throws DatasetFormatError naming the offending record.
std::vector<QAItem> load_dataset(const std::filesystem::path& path, Dataset kind,
                                 SourceFormat format, const SamplingSpec& sampling = {});

void write_canonical_dataset(const std::vector<QAItem>& items, const std::filesystem::path& path);

/// Checks the per-dataset invariants (StrategyQA yes/no, MMLU letters + 4 choices).
void validate_item(const QAItem& item);

/// k distinct indices from [0, n) in draw order (partial Fisher-Yates on
/// mt19937_64 output, which the standard fixes bit-for-bit).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

/// Maps free text onto the comparison space of a dataset: option letters for
/// MMLU, yes/no for StrategyQA, unchanged text for HotpotQA.
std::string canonical_answer(Dataset d, std::string_view text);

/// canonical_answer followed by normalize_answer: the key two answers must
/// share to count as the same answer.
std::string comparison_key(Dataset d, std::string_view text);

/// Exact match after dataset canonicalisation and answer normalisation.
bool answers_match(Dataset d, const std::optional<std::string>& pred, std::string_view gold);

}  // namespace uala
