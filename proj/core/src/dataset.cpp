// SPDX-License-Identifier: Apache-2.0
#include "uala/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "uala/error.hpp"
#include "uala/normalize.hpp"

namespace uala {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// FNV-1a, used to derive per-task seeds.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string string_field(const json& rec, const char* key, const std::string& id) {
  const auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    throw DatasetFormatError(id, fmt::format("missing string field '{}'", key));
  }
  return it->get<std::string>();
}

std::string record_id(const json& rec, const char* key, std::size_t index) {
  const auto it = rec.find(key);
  if (it != rec.end() && it->is_string()) return it->get<std::string>();
  if (it != rec.end() && it->is_number_integer()) return std::to_string(it->get<long long>());
  return fmt::format("#{}", index);
}

QAItem item_from_canonical(const json& rec, std::size_t index) {
  const std::string id = record_id(rec, "id", index);
  if (!rec.is_object()) throw DatasetFormatError(id, "record is not a JSON object");
  QAItem item;
  item.id = id;
  item.question = string_field(rec, "question", id);
  item.gold = string_field(rec, "gold", id);
  try {
    item.dataset = dataset_from_string(string_field(rec, "dataset", id));
  } catch (const DatasetFormatError&) {
    throw;
  } catch (const Error& e) {
    throw DatasetFormatError(id, e.what());
  }
  if (auto it = rec.find("choices"); it != rec.end()) {
    if (!it->is_array()) throw DatasetFormatError(id, "'choices' must be an array");
    for (const auto& c : *it) {
      if (!c.is_string()) throw DatasetFormatError(id, "choices must be strings");
      item.choices.push_back(c.get<std::string>());
    }
  }
  if (auto it = rec.find("task"); it != rec.end() && it->is_string()) item.task = it->get<std::string>();
  return item;
}

std::vector<QAItem> parse_canonical(const std::string& text) {
  std::vector<QAItem> items;
  std::istringstream lines(text);
  std::size_t index = 0;
  for (std::string line; std::getline(lines, line); ++index) {
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DatasetFormatError(fmt::format("line {}", index + 1), e.what());
    }
    items.push_back(item_from_canonical(rec, index));
  }
  return items;
}

json parse_json_array(const std::string& text, const fs::path& path) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DatasetFormatError(path.filename().string(), e.what());
  }
  if (!doc.is_array()) throw DatasetFormatError(path.filename().string(), "expected a JSON array");
  return doc;
}

std::vector<QAItem> parse_hotpotqa(const std::string& text, const fs::path& path) {
  std::vector<QAItem> items;
  const json doc = parse_json_array(text, path);
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& rec = doc[i];
    const std::string id = record_id(rec, "_id", i);
    QAItem item;
    item.id = id;
    item.question = string_field(rec, "question", id);
    item.gold = string_field(rec, "answer", id);
    item.dataset = Dataset::HotpotQA;
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<QAItem> parse_strategyqa(const std::string& text, const fs::path& path) {
  std::vector<QAItem> items;
  const json doc = parse_json_array(text, path);
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& rec = doc[i];
    const std::string id = record_id(rec, "qid", i);
    QAItem item;
    item.id = id;
    item.question = string_field(rec, "question", id);
    const auto it = rec.find("answer");
    if (it == rec.end() || !it->is_boolean()) throw DatasetFormatError(id, "'answer' must be a boolean");
    item.gold = it->get<bool>() ? "yes" : "no";
    item.dataset = Dataset::StrategyQA;
    items.push_back(std::move(item));
  }
  return items;
}

// RFC 4180 rows: quoted fields may hold commas, doubled quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        any = false;
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string task_name(const fs::path& file) {
  std::string stem = file.stem().string();
  for (std::string_view suffix : {"_test", "_dev", "_val"}) {
    if (stem.size() > suffix.size() && stem.ends_with(suffix)) {
      stem.resize(stem.size() - suffix.size());
      break;
    }
  }
  return stem;
}

std::vector<QAItem> parse_mmlu_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, fmt::format("{} is not a directory", dir.string()));
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<QAItem> items;
  for (const auto& file : files) {
    const std::string task = task_name(file);
    const auto rows = parse_csv(read_file(file));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string id = fmt::format("{}-{}", task, r);
      if (rows[r].size() != 6) throw DatasetFormatError(id, fmt::format("expected 6 columns, got {}", rows[r].size()));
      QAItem item;
      item.id = id;
      item.question = rows[r][0];
      item.choices.assign(rows[r].begin() + 1, rows[r].begin() + 5);
      item.gold = trim(rows[r][5]);
      item.dataset = Dataset::MMLU;
      item.task = task;
      items.push_back(std::move(item));
    }
  }
  return items;
}

}  // namespace

std::string_view to_string(Dataset d) noexcept {
  switch (d) {
    case Dataset::HotpotQA: return "hotpotqa";
    case Dataset::StrategyQA: return "strategyqa";
    case Dataset::MMLU: return "mmlu";
  }
  return "unknown";
}

Dataset dataset_from_string(std::string_view name) {
  const std::string lower = to_lower_ascii(name);
  if (lower == "hotpotqa") return Dataset::HotpotQA;
  if (lower == "strategyqa") return Dataset::StrategyQA;
  if (lower == "mmlu") return Dataset::MMLU;
  throw Error(ErrorCode::ConfigError, fmt::format("unknown dataset '{}'", name));
}

SourceFormat source_format_from_string(std::string_view name) {
  if (name == "canonical") return SourceFormat::Canonical;
  if (name == "hotpotqa-json") return SourceFormat::HotpotQAJson;
  if (name == "strategyqa-json") return SourceFormat::StrategyQAJson;
  if (name == "mmlu-csv") return SourceFormat::MMLUCsvDir;
  throw Error(ErrorCode::ConfigError, fmt::format("unknown dataset format '{}'", name));
}

void validate_item(const QAItem& item) {
  if (item.question.empty()) throw DatasetFormatError(item.id, "empty question");
  if (item.gold.empty()) throw DatasetFormatError(item.id, "empty gold answer");
  switch (item.dataset) {
    case Dataset::StrategyQA:
      if (item.gold != "yes" && item.gold != "no") {
        throw DatasetFormatError(item.id, fmt::format("StrategyQA gold must be yes/no, got '{}'", item.gold));
      }
      break;
    case Dataset::MMLU:
      if (item.gold.size() != 1 || item.gold[0] < 'A' || item.gold[0] > 'D') {
        throw DatasetFormatError(item.id, fmt::format("MMLU gold must be A-D, got '{}'", item.gold));
      }
      if (item.choices.size() != 4) throw DatasetFormatError(item.id, "MMLU item needs four choices");
      break;
    case Dataset::HotpotQA:
      break;
  }
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, n);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::vector<QAItem> load_dataset(const fs::path& path, Dataset kind, SourceFormat format,
                                 const SamplingSpec& sampling) {
  std::vector<QAItem> all;
  switch (format) {
    case SourceFormat::Canonical: all = parse_canonical(read_file(path)); break;
    case SourceFormat::HotpotQAJson: all = parse_hotpotqa(read_file(path), path); break;
    case SourceFormat::StrategyQAJson: all = parse_strategyqa(read_file(path), path); break;
    case SourceFormat::MMLUCsvDir: all = parse_mmlu_dir(path); break;
  }
  for (const auto& item : all) {
    if (item.dataset != kind) {
      throw DatasetFormatError(item.id, fmt::format("dataset is {}, expected {}", to_string(item.dataset),
                                                    to_string(kind)));
    }
    validate_item(item);
  }

  std::vector<QAItem> selected;
  if (sampling.per_task > 0) {
    std::map<std::string, std::vector<std::size_t>> by_task;
    for (std::size_t i = 0; i < all.size(); ++i) by_task[all[i].task].push_back(i);
    for (const auto& [task, members] : by_task) {
      for (std::size_t pick : sample_indices(members.size(), sampling.per_task, sampling.seed ^ fnv1a(task))) {
        selected.push_back(all[members[pick]]);
      }
    }
    if (sampling.count > 0 && sampling.count < selected.size()) selected.resize(sampling.count);
  } else if (sampling.count > 0) {
    for (std::size_t pick : sample_indices(all.size(), sampling.count, sampling.seed)) selected.push_back(all[pick]);
  } else {
    selected = std::move(all);
  }
  return selected;
}

void write_canonical_dataset(const std::vector<QAItem>& items, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write {}", path.string()));
  for (const auto& item : items) {
    json rec = {{"id", item.id}, {"question", item.question}, {"gold", item.gold},
                {"dataset", std::string(to_string(item.dataset))}};
    if (!item.choices.empty()) rec["choices"] = item.choices;
    if (!item.task.empty()) rec["task"] = item.task;
    out << rec.dump() << '\n';
  }
}

std::string canonical_answer(Dataset d, std::string_view text) {
  std::string t = trim(text);
  switch (d) {
    case Dataset::MMLU: {
      std::string_view v = t;
      if (!v.empty() && v.front() == '(') v.remove_prefix(1);
      if (!v.empty()) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(v.front())));
        const bool alone = v.size() == 1 || !std::isalnum(static_cast<unsigned char>(v[1]));
        if (c >= 'A' && c <= 'D' && alone) return std::string(1, c);
      }
      return t;
    }
    case Dataset::StrategyQA: {
      const std::string norm = normalize_answer(t);
      const std::string first = norm.substr(0, norm.find(' '));
      if (first == "yes" || first == "no") return first;
      return t;
    }
    case Dataset::HotpotQA:
      break;
  }
  return t;
}

std::string comparison_key(Dataset d, std::string_view text) { return normalize_answer(canonical_answer(d, text)); }

bool answers_match(Dataset d, const std::optional<std::string>& pred, std::string_view gold) {
  if (!pred) return false;
  return exact_match(canonical_answer(d, *pred), canonical_answer(d, gold));
}

}  // namespace uala
