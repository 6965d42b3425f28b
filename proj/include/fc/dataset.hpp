// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/core.hpp"
#include "fc/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fc {

/// One subject: T x R ROI time series (rows are time points) and a binary
/// diagnosis label (1 = ASD, 0 = control).
struct SubjectRecord {
  std::string id;
  Matrix series;
  int label = 0;
};

/// Checks the per-subject invariants shared by every connectivity estimator.
inline void validate_subject(const SubjectRecord& s) {
  const auto where = "subject '" + s.id + "'";
  if (s.label != 0 && s.label != 1) throw DataError(where + ": label must be 0 or 1");
  if (s.series.rows() < 3) throw DataError(where + ": need at least 3 time points");
  if (s.series.cols() < 2) throw DataError(where + ": need at least 2 ROIs");
  if (!s.series.allFinite()) throw DataError(where + ": non-finite value in series");
  for (Index j = 0; j < s.series.cols(); ++j) {
    const auto col = s.series.col(j);
    const double mean = col.mean();
    if ((col.array() - mean).abs().maxCoeff() == 0.0) {
      throw DataError(where + ": column " + std::to_string(j) + " is constant (zero variance)");
    }
  }
}

/// Ordered, validated collection of subjects sharing one (T, R) shape.
/// Immutable after construction.
class Cohort {
 public:
  explicit Cohort(std::vector<SubjectRecord> subjects) : subjects_(std::move(subjects)) {
    if (subjects_.size() < 2) throw DataError("cohort needs at least 2 subjects");
    std::set<std::string> ids;
    for (const auto& s : subjects_) {
      validate_subject(s);
      if (!ids.insert(s.id).second) throw DataError("duplicate subject id '" + s.id + "'");
      if (s.series.rows() != time_points() || s.series.cols() != rois()) {
        throw DataError("subject '" + s.id + "': shape " + std::to_string(s.series.rows()) + "x" +
                        std::to_string(s.series.cols()) + " differs from cohort shape " +
                        std::to_string(time_points()) + "x" + std::to_string(rois()));
      }
    }
    labels_.reserve(subjects_.size());
    for (const auto& s : subjects_) labels_.push_back(s.label);
    if (!both_classes_present(labels_)) throw DataError("cohort must contain both labels");
  }

  std::size_t size() const { return subjects_.size(); }
  Index time_points() const { return subjects_.front().series.rows(); }
  Index rois() const { return subjects_.front().series.cols(); }
  const SubjectRecord& operator[](std::size_t i) const { return subjects_[i]; }
  const std::vector<SubjectRecord>& subjects() const { return subjects_; }
  const Labels& labels() const { return labels_; }

  std::size_t count(int label) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& s : subjects_) out.push_back(s.id);
    return out;
  }

 private:
  std::vector<SubjectRecord> subjects_;
  Labels labels_;
};

inline std::string summary(const Cohort& c) {
  std::ostringstream os;
  os << "subjects: " << c.size() << '\n'
     << "time_points: " << c.time_points() << '\n'
     << "rois: " << c.rois() << '\n'
     << "label_1: " << c.count(1) << '\n'
     << "label_0: " << c.count(0) << '\n';
  return os.str();
}

/// Reads `id,label` rows (header required).
inline std::map<std::string, int> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labels file " + path.string());
  std::map<std::string, int> labels;
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = io::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto fields = io::split(body, body.find('\t') != std::string_view::npos ? '\t' : ',');
    if (!header_seen) {
      if (fields.size() < 2 || fields[0] != "id" || fields[1] != "label") {
        throw DataError(path.string() + ": expected header 'id,label'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() < 2) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected id,label");
    int label = -1;
    if (fields[1] == "0") label = 0;
    else if (fields[1] == "1") label = 1;
    else throw DataError(path.string() + ":" + std::to_string(lineno) + ": label must be 0 or 1");
    if (!labels.emplace(fields[0], label).second) {
      throw DataError(path.string() + ": duplicate id '" + fields[0] + "'");
    }
  }
  return labels;
}

/// Loads every `<id>.csv` / `<id>.tsv` matrix in `series_dir` and attaches
/// labels. Subjects are ordered by id. `delim` applies to files whose
/// extension does not determine the separator.
inline Cohort load_cohort(const std::filesystem::path& series_dir,
                          const std::filesystem::path& labels_file, char delim = ',') {
  namespace fs = std::filesystem;
  if (!fs::is_directory(series_dir)) throw DataError("not a directory: " + series_dir.string());
  const auto labels = read_labels(labels_file);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(series_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext != ".csv" && ext != ".tsv" && ext != ".txt") continue;
    if (fs::exists(labels_file) && fs::equivalent(entry.path(), labels_file)) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });
  std::vector<SubjectRecord> subjects;
  subjects.reserve(files.size());
  for (const auto& f : files) {
    SubjectRecord s;
    s.id = f.stem().string();
    const auto it = labels.find(s.id);
    if (it == labels.end()) throw DataError("subject '" + s.id + "': missing label");
    s.label = it->second;
    try {
      s.series = io::read_table(f, f.extension() == ".txt" ? delim : io::delimiter_for(f, delim)).values;
    } catch (const DataError& e) {
      throw DataError("subject '" + s.id + "': " + e.what());
    }
    subjects.push_back(std::move(s));
  }
  return Cohort(std::move(subjects));
}

/// Writes one `<id>.csv` per subject plus `labels.csv`.
inline void save_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream labels(dir / "labels.csv");
  if (!labels) throw Error("cannot write " + (dir / "labels.csv").string());
  labels << "id,label\n";
  for (const auto& s : cohort.subjects()) {
    io::write_table(dir / (s.id + ".csv"), io::Table{{}, s.series}, ',');
    labels << s.id << ',' << s.label << '\n';
  }
}

/// ROIs forming the class-1 network in synthetic cohorts: the first max(2, r/2).
inline Index synthetic_block_size(Index r) { return std::max<Index>(2, r / 2); }

/// ROI pairs whose coupling differs between classes in synthetic cohorts:
/// every pair inside the network block.
inline std::vector<std::pair<Index, Index>> synthetic_signal_pairs(Index r) {
  std::vector<std::pair<Index, Index>> pairs;
  const Index b = synthetic_block_size(r);
  for (Index i = 0; i < b; ++i)
    for (Index j = i + 1; j < b; ++j) pairs.emplace_back(i, j);
  return pairs;
}

/// Draws a labeled cohort of ROI series. Every ROI mixes a weak global signal
/// (shared variance fraction 0.1) with independent noise. In class 1 the
/// ROIs of the network block also share a network signal carrying a
/// fraction 0.75 * effect of their local variance, which raises every
/// within-block correlation by 0.675 * effect.
/// Subjects are emitted class 0 first, then class 1; ids sort in that order.
inline Cohort generate_synthetic_cohort(std::size_t n_per_class, Index t, Index r, double effect,
                                        std::uint64_t seed) {
  if (n_per_class < 1) throw DataError("synthetic cohort: n_per_class must be >= 1");
  if (t < 3) throw DataError("synthetic cohort: t must be >= 3");
  if (r < 2) throw DataError("synthetic cohort: r must be >= 2");
  if (!(effect >= 0.0 && effect <= 1.0)) throw DataError("synthetic cohort: effect must be in [0,1]");

  constexpr double kGlobalShare = 0.1;
  const double network_share = 0.75 * effect;
  const double global_scale = std::sqrt(kGlobalShare);
  const double local_scale = std::sqrt(1.0 - kGlobalShare);
  const Index block = synthetic_block_size(r);

  Rng rng(seed);
  std::vector<SubjectRecord> subjects;
  subjects.reserve(2 * n_per_class);
  const auto width = std::to_string(2 * n_per_class).size();
  for (std::size_t n = 0; n < 2 * n_per_class; ++n) {
    SubjectRecord s;
    auto num = std::to_string(n);
    s.id = "sub" + std::string(width > num.size() ? width - num.size() : 0, '0') + num;
    s.label = n < n_per_class ? 0 : 1;
    s.series.resize(t, r);
    for (Index i = 0; i < t; ++i) {
      const double global = rng.normal();
      const double network = rng.normal();
      RowVector local(r);
      for (Index j = 0; j < r; ++j) local(j) = rng.normal();
      if (s.label == 1) {
        for (Index j = 0; j < block; ++j) {
          local(j) = std::sqrt(network_share) * network + std::sqrt(1.0 - network_share) * local(j);
        }
      }
      s.series.row(i) = global_scale * global * RowVector::Ones(r) + local_scale * local;
    }
    subjects.push_back(std::move(s));
  }
  return Cohort(std::move(subjects));
}

/// Disjoint index partitions into a cohort.
struct SplitPlan {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
  std::uint64_t seed = 0;
};

struct SplitFractions {
  double train = 0.8;
  double val = 0.0;
  double test = 0.2;
};

/// Shuffles each class with `seed` and cuts it into train/val/test so that
/// class proportions are preserved within one subject per partition. With
/// `stratify == false` the whole index set is treated as one class.
inline SplitPlan split_stratified(const Labels& labels, SplitFractions f, std::uint64_t seed,
                                  bool stratify = true) {
  require_binary(labels, "split_stratified");
  if (!(f.train > 0.0) || !(f.test > 0.0) || f.val < 0.0) {
    throw DataError("split fractions: train and test must be positive, val non-negative");
  }
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw DataError("split fractions must sum to 1");
  }
  std::vector<std::vector<std::size_t>> groups(stratify ? 2 : 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    groups[stratify ? static_cast<std::size_t>(labels[i]) : 0].push_back(i);
  }
  const int required = f.val > 0.0 ? 3 : 2;
  Rng rng(seed);
  SplitPlan plan;
  plan.seed = seed;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& members = groups[g];
    const auto n = members.size();
    if (n < static_cast<std::size_t>(required)) {
      throw DataError("split_stratified: " +
                      (stratify ? "class " + std::to_string(g) : std::string("index set")) + " has " +
                      std::to_string(n) + " subjects but " + std::to_string(required) +
                      " partitions need it");
    }
    rng.shuffle(members);
    auto n_test = static_cast<std::size_t>(std::lround(f.test * static_cast<double>(n)));
    auto n_val = static_cast<std::size_t>(std::lround(f.val * static_cast<double>(n)));
    n_test = std::max<std::size_t>(n_test, 1);
    if (f.val > 0.0) n_val = std::max<std::size_t>(n_val, 1);
    while (n_test + n_val >= n) {
      // Keep at least one training subject; shrink the larger holdout.
      if (n_val > 1 && n_val >= n_test) --n_val;
      else --n_test;
    }
    auto it = members.begin();
    plan.test_idx.insert(plan.test_idx.end(), it, it + static_cast<std::ptrdiff_t>(n_test));
    it += static_cast<std::ptrdiff_t>(n_test);
    plan.val_idx.insert(plan.val_idx.end(), it, it + static_cast<std::ptrdiff_t>(n_val));
    it += static_cast<std::ptrdiff_t>(n_val);
    plan.train_idx.insert(plan.train_idx.end(), it, members.end());
  }
  std::sort(plan.train_idx.begin(), plan.train_idx.end());
  std::sort(plan.val_idx.begin(), plan.val_idx.end());
  std::sort(plan.test_idx.begin(), plan.test_idx.end());
  return plan;
}

inline SplitPlan split_stratified(const Cohort& cohort, SplitFractions f, std::uint64_t seed,
                                  bool stratify = true) {
  return split_stratified(cohort.labels(), f, seed, stratify);
}

}  // namespace fc
