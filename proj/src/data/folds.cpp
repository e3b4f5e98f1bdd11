#include <fstream>

#include "mgnet/dataset.hpp"
#include "mgnet/errors.hpp"
#include "mgnet/random.hpp"

namespace mgnet {

std::size_t FoldAssignment::fold(const std::string& subject_id) const {
  const auto it = fold_of.find(subject_id);
  if (it == fold_of.end()) throw ArgumentError("subject " + subject_id + " has no fold");
  return it->second;
}

std::vector<std::size_t> FoldAssignment::test_indices(const Manifest& m, std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    if (fold(m.records[i].subject_id) == f) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(const Manifest& m, std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    if (fold(m.records[i].subject_id) != f) out.push_back(i);
  }
  return out;
}

FoldAssignment stratified_group_kfold(const Manifest& manifest, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("fold count k must be >= 2");
  const auto labels = manifest.subject_labels();
  std::vector<std::string> by_class[2];
  for (const auto& [subject, label] : labels) by_class[label].push_back(subject);

  FoldAssignment out;
  out.k = k;
  std::size_t start = 0;
  for (int label = 0; label < 2; ++label) {
    auto& subjects = by_class[label];
    if (subjects.size() < k) {
      throw ArgumentError("class " + std::to_string(label) + " has " +
                          std::to_string(subjects.size()) + " subjects, fewer than k = " +
                          std::to_string(k));
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(label)));
    rng.shuffle(std::span<std::string>(subjects));
    // Dealing round-robin keeps per-class fold sizes within one; rotating
    // the start by the previous class's remainder evens out fold totals.
    for (std::size_t i = 0; i < subjects.size(); ++i) out.fold_of[subjects[i]] = (start + i) % k;
    start = (start + subjects.size()) % k;
  }
  return out;
}

void write_folds(const FoldAssignment& folds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "subject_id,fold\n";
  for (const auto& [subject, f] : folds.fold_of) os << subject << ',' << f << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

FoldAssignment read_folds(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open folds file " + path.string());
  std::string line;
  std::getline(is, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "subject_id,fold") {
    throw FormatError(path.string() + ": folds header must be `subject_id,fold`");
  }
  FoldAssignment out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected subject_id,fold");
    }
    const std::string subject = line.substr(0, comma);
    std::size_t f = 0;
    try {
      std::size_t used = 0;
      f = std::stoul(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad fold index");
    }
    if (!out.fold_of.emplace(subject, f).second) {
      throw FormatError(path.string() + ": subject " + subject + " listed twice");
    }
    out.k = std::max(out.k, f + 1);
  }
  if (out.fold_of.empty()) throw FormatError(path.string() + ": no fold rows");
  return out;
}

}  // namespace mgnet
