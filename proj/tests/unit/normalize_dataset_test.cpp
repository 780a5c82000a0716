// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "support/test_util.hpp"
#include "uala/canonical_json.hpp"
#include "uala/dataset.hpp"
#include "uala/normalize.hpp"

namespace uala {
namespace {

using testing::expect_error;
using testing::TempDir;

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

TEST(Normalize, SquadRules) {
  EXPECT_EQ(normalize_answer("The  Richard Nixon!"), "richard nixon");
  EXPECT_EQ(normalize_answer("an apple, a pear"), "apple pear");
  EXPECT_EQ(normalize_answer("1,800 to 7,000 ft"), "1800 to 7000 ft");
  EXPECT_EQ(normalize_answer("theatre"), "theatre");
  EXPECT_EQ(normalize_answer("   "), "");
}

TEST(Normalize, IdempotentAndSymmetric) {
  std::mt19937_64 rng(4);
  const std::string alphabet = "aAtTheHn ,.!-'";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 20);
  for (int i = 0; i < 500; ++i) {
    std::string a, b;
    for (std::size_t k = len(rng); k > 0; --k) a.push_back(alphabet[pick(rng)]);
    for (std::size_t k = len(rng); k > 0; --k) b.push_back(alphabet[pick(rng)]);
    EXPECT_EQ(normalize_answer(normalize_answer(a)), normalize_answer(a));
    EXPECT_EQ(exact_match(a, b), exact_match(b, a));
    EXPECT_TRUE(exact_match(a, a));
  }
  EXPECT_FALSE(exact_match(std::nullopt, ""));
}

TEST(Canonical, PerDatasetAnswerSpace) {
  EXPECT_EQ(canonical_answer(Dataset::MMLU, "(b) Saturn"), "B");
  EXPECT_EQ(canonical_answer(Dataset::MMLU, " C"), "C");
  EXPECT_EQ(canonical_answer(Dataset::MMLU, "Banana"), "Banana");
  EXPECT_EQ(canonical_answer(Dataset::StrategyQA, "Yes, because"), "yes");
  EXPECT_EQ(canonical_answer(Dataset::StrategyQA, "maybe"), "maybe");
  EXPECT_TRUE(answers_match(Dataset::MMLU, std::string("b."), "B"));
  EXPECT_TRUE(answers_match(Dataset::StrategyQA, std::string("No."), "no"));
  EXPECT_EQ(comparison_key(Dataset::HotpotQA, "The Lanse"), "lanse");
}

TEST(Sampling, DeterministicDistinctIndices) {
  const auto a = sample_indices(100, 10, 233);
  EXPECT_EQ(a, sample_indices(100, 10, 233));
  EXPECT_NE(a, sample_indices(100, 10, 234));
  std::vector<std::size_t> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::unique(sorted.begin(), sorted.end()), sorted.end());
  EXPECT_EQ(sample_indices(3, 10, 1).size(), 3u);
}

TEST(Loaders, HotpotStrategyMmluAndCanonicalRoundTrip) {
  TempDir dir("datasets");
  write_file(dir.path() / "hotpot.json",
             R"([{"_id":"h1","question":"Q1?","answer":"A1"},{"_id":"h2","question":"Q2?","answer":"A2"}])");
  write_file(dir.path() / "strategy.json", R"([{"qid":"s1","question":"Is it?","answer":true}])");
  std::filesystem::create_directories(dir.path() / "mmlu");
  write_file(dir.path() / "mmlu" / "astronomy_test.csv",
             "\"What is, in fact, the largest planet?\",Mars,Jupiter,Venus,Earth,B\nSecond?,a,b,c,d,D\n");

  const auto h = load_dataset(dir.path() / "hotpot.json", Dataset::HotpotQA, SourceFormat::HotpotQAJson);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[1].gold, "A2");
  const auto s = load_dataset(dir.path() / "strategy.json", Dataset::StrategyQA, SourceFormat::StrategyQAJson);
  EXPECT_EQ(s[0].gold, "yes");
  const auto m = load_dataset(dir.path() / "mmlu", Dataset::MMLU, SourceFormat::MMLUCsvDir);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].question, "What is, in fact, the largest planet?");
  EXPECT_EQ(m[0].task, "astronomy");
  EXPECT_EQ(m[0].choices[1], "Jupiter");

  write_canonical_dataset(m, dir.path() / "mmlu.jsonl");
  const auto back = load_dataset(dir.path() / "mmlu.jsonl", Dataset::MMLU, SourceFormat::Canonical);
  ASSERT_EQ(back.size(), m.size());
  EXPECT_EQ(back[0].choices, m[0].choices);
  EXPECT_EQ(back[1].gold, "D");
}

TEST(Loaders, ErrorsNameTheRecord) {
  TempDir dir("bad-datasets");
  write_file(dir.path() / "s.json", R"([{"qid":"s9","question":"Is it?","answer":"yes"}])");
  try {
    load_dataset(dir.path() / "s.json", Dataset::StrategyQA, SourceFormat::StrategyQAJson);
    FAIL();
  } catch (const DatasetFormatError& e) {
    EXPECT_EQ(e.record_id(), "s9");
  }
  write_file(dir.path() / "c.jsonl", R"({"id":"x1","question":"Q","gold":"E","dataset":"mmlu","choices":["a","b","c","d"]})"
                                     "\n");
  expect_error(ErrorCode::DatasetFormatError,
               [&] { load_dataset(dir.path() / "c.jsonl", Dataset::MMLU, SourceFormat::Canonical); });
  expect_error(ErrorCode::DatasetFormatError,
               [&] { load_dataset(dir.path() / "c.jsonl", Dataset::HotpotQA, SourceFormat::Canonical); });
}

TEST(Loaders, StratifiedSamplingPerTask) {
  TempDir dir("mmlu-strat");
  std::string a, b;
  for (int i = 0; i < 6; ++i) a += "qa" + std::to_string(i) + ",1,2,3,4,A\n";
  for (int i = 0; i < 6; ++i) b += "qb" + std::to_string(i) + ",1,2,3,4,C\n";
  write_file(dir.path() / "alpha_test.csv", a);
  write_file(dir.path() / "beta_test.csv", b);
  SamplingSpec spec;
  spec.per_task = 2;
  const auto items = load_dataset(dir.path(), Dataset::MMLU, SourceFormat::MMLUCsvDir, spec);
  ASSERT_EQ(items.size(), 4u);
  EXPECT_EQ(items[0].task, "alpha");
  EXPECT_EQ(items[3].task, "beta");
  const auto again = load_dataset(dir.path(), Dataset::MMLU, SourceFormat::MMLUCsvDir, spec);
  for (std::size_t i = 0; i < items.size(); ++i) EXPECT_EQ(items[i].id, again[i].id);
}

TEST(CanonicalJson, SortedCompactAndHashed) {
  const nlohmann::json j = {{"b", 1}, {"a", {{"d", 0.1}, {"c", "x"}}}};
  EXPECT_EQ(canonical_dump(j), R"({"a":{"c":"x","d":0.1},"b":1})");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace uala
