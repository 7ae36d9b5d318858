#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "adfl/csv.hpp"
#include "adfl/error.hpp"
#include "adfl/rng.hpp"

namespace adfl {

/// Feature matrix plus labels. `classes == 0` marks a real-valued target.
struct Dataset {
  Eigen::MatrixXd features;  // n x d
  Eigen::VectorXd labels;    // n
  int classes = 0;
  std::string id;

  Eigen::Index size() const noexcept { return features.rows(); }
  Eigen::Index dim() const noexcept { return features.cols(); }
  int label(Eigen::Index j) const { return static_cast<int>(labels[j]); }

  void validate() const {
    if (size() < 1) throw Error("dataset " + id + " is empty");
    if (labels.size() != size()) throw Error("dataset " + id + ": label count mismatch");
    if (!features.allFinite() || !labels.allFinite()) throw Error("dataset " + id + ": non-finite entry");
    if (classes > 0)
      for (Eigen::Index j = 0; j < size(); ++j) {
        const double y = labels[j];
        if (y != std::floor(y) || y < 0 || y >= classes)
          throw Error("dataset " + id + ": label outside [0, " + std::to_string(classes) + ")");
      }
  }
};

inline Dataset subset(const Dataset& d, const std::vector<int>& rows, std::string id = {}) {
  Dataset out;
  out.classes = d.classes;
  out.id = id.empty() ? d.id : std::move(id);
  out.features.resize(static_cast<Eigen::Index>(rows.size()), d.dim());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = d.features.row(rows[r]);
    out.labels[static_cast<Eigen::Index>(r)] = d.labels[rows[r]];
  }
  return out;
}

enum class SyntheticTask { quadratic, blobs_classification };

struct SyntheticOptions {
  int classes = 2;          // blobs only
  double separation = 5.0;  // expected distance between blob centres
  double noise = 1.0;       // per-coordinate noise std (blobs) or target noise (quadratic)
};

/// Quadratic: Gaussian design with a linear target plus noise.
/// Blobs: uniform labels, Gaussian clouds around random centres.
inline Dataset make_synthetic(SyntheticTask task, int n, int d, std::uint64_t seed,
                              const SyntheticOptions& opt = {}) {
  if (n < 1 || d < 1) throw Error("synthetic data needs n >= 1 and d >= 1");
  Rng rng{seed};
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset out;
  out.features.resize(n, d);
  out.labels.resize(n);
  if (task == SyntheticTask::quadratic) {
    out.id = "quadratic";
    Eigen::VectorXd w(d);
    for (int c = 0; c < d; ++c) w[c] = gauss(rng);
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < d; ++c) out.features(j, c) = gauss(rng);
    for (int j = 0; j < n; ++j) out.labels[j] = out.features.row(j).dot(w) + opt.noise * gauss(rng);
    return out;
  }
  if (opt.classes < 2) throw Error("blobs need at least 2 classes");
  out.id = "blobs";
  out.classes = opt.classes;
  const double scale = opt.separation / std::sqrt(2.0 * d);
  Eigen::MatrixXd centres(opt.classes, d);
  for (int k = 0; k < opt.classes; ++k)
    for (int c = 0; c < d; ++c) centres(k, c) = scale * gauss(rng);
  std::uniform_int_distribution<int> pick(0, opt.classes - 1);
  for (int j = 0; j < n; ++j) {
    const int y = pick(rng);
    out.labels[j] = y;
    for (int c = 0; c < d; ++c) out.features(j, c) = centres(y, c) + opt.noise * gauss(rng);
  }
  return out;
}

/// Splits off the last `fraction` of a shuffled copy as a held-out set.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double fraction,
                                                    std::uint64_t seed) {
  if (!(fraction >= 0) || !(fraction < 1)) throw Error("test fraction must be in [0, 1)");
  std::vector<int> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng{seed};
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::floor(fraction * d.size()));
  std::vector<int> train(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_test));
  std::vector<int> test(idx.end() - static_cast<std::ptrdiff_t>(n_test), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {subset(d, train, d.id + "/train"), subset(d, test, d.id + "/test")};
}

enum class PartitionMode { iid, shard, dirichlet };

inline std::optional<PartitionMode> parse_partition_mode(std::string_view s) {
  if (s == "iid") return PartitionMode::iid;
  if (s == "shard") return PartitionMode::shard;
  if (s == "dirichlet") return PartitionMode::dirichlet;
  return std::nullopt;
}

inline std::string_view to_string(PartitionMode m) {
  switch (m) {
    case PartitionMode::iid: return "iid";
    case PartitionMode::shard: return "shard";
    case PartitionMode::dirichlet: return "dirichlet";
  }
  return "?";
}

/// Row indices owned by each device. Every row lands on exactly one device.
inline std::vector<std::vector<int>> partition_indices(const Dataset& d, int devices,
                                                       PartitionMode mode, std::uint64_t seed,
                                                       double dirichlet_alpha = 1.0) {
  const int n = static_cast<int>(d.size());
  if (devices < 1) throw Error("need at least one device");
  if (devices > n)
    throw Error("cannot split " + std::to_string(n) + " samples across " + std::to_string(devices) +
                " devices");
  Rng rng{seed};
  std::vector<std::vector<int>> out(devices);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);

  switch (mode) {
    case PartitionMode::iid: {
      std::shuffle(idx.begin(), idx.end(), rng);
      if (d.classes > 0)  // stratify: deal each class round-robin, continuing the rotation
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return d.label(a) < d.label(b); });
      for (int r = 0; r < n; ++r) out[r % devices].push_back(idx[r]);
      break;
    }
    case PartitionMode::shard: {
      if (d.classes > 0)
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return d.label(a) < d.label(b); });
      else
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return d.labels[a] < d.labels[b]; });
      for (int k = 0; k < devices; ++k) {
        const auto lo = static_cast<std::size_t>(static_cast<long long>(n) * k / devices);
        const auto hi = static_cast<std::size_t>(static_cast<long long>(n) * (k + 1) / devices);
        out[k].assign(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                      idx.begin() + static_cast<std::ptrdiff_t>(hi));
      }
      break;
    }
    case PartitionMode::dirichlet: {
      if (d.classes < 1) throw Error("dirichlet partition needs class labels");
      if (!(dirichlet_alpha > 0)) throw Error("dirichlet alpha must be positive");
      std::gamma_distribution<double> gamma(dirichlet_alpha, 1.0);
      for (int c = 0; c < d.classes; ++c) {
        std::vector<int> members;
        for (int j = 0; j < n; ++j)
          if (d.label(j) == c) members.push_back(j);
        std::shuffle(members.begin(), members.end(), rng);
        std::vector<double> p(devices);
        double total = 0.0;
        for (auto& x : p) total += (x = gamma(rng));
        if (!(total > 0)) std::fill(p.begin(), p.end(), 1.0), total = devices;
        double acc = 0.0;
        std::size_t start = 0;
        for (int k = 0; k < devices; ++k) {
          acc += p[k] / total;
          const auto end = k + 1 == devices
                               ? members.size()
                               : std::min(members.size(),
                                          static_cast<std::size_t>(std::llround(acc * members.size())));
          for (auto r = start; r < end; ++r) out[k].push_back(members[r]);
          start = std::max(start, end);
        }
      }
      break;
    }
  }
  for (int k = 0; k < devices; ++k) {
    if (out[k].empty())
      throw Error("partition left device " + std::to_string(k + 1) + " with no samples");
    std::sort(out[k].begin(), out[k].end());
  }
  return out;
}

inline std::vector<Dataset> partition(const Dataset& d, int devices, PartitionMode mode,
                                      std::uint64_t seed, double dirichlet_alpha = 1.0) {
  std::vector<Dataset> parts;
  int k = 0;
  for (const auto& rows : partition_indices(d, devices, mode, seed, dirichlet_alpha))
    parts.push_back(subset(d, rows, d.id + "/" + std::to_string(++k)));
  return parts;
}

// ---------------------------------------------------------------------------
// Loaders

namespace detail {

inline std::uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("IDX file truncated");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

inline std::vector<std::uint32_t> read_idx_header(std::istream& in, int& type) {
  const auto magic = read_be32(in);
  if ((magic >> 16) != 0) throw Error("not an IDX file");
  type = static_cast<int>((magic >> 8) & 0xFF);
  if (type != 0x08) throw Error("only unsigned-byte IDX files are supported");
  std::vector<std::uint32_t> dims(magic & 0xFF);
  for (auto& x : dims) x = read_be32(in);
  return dims;
}

}  // namespace detail

/// Unsigned-byte IDX images and labels (MNIST layout). Pixels scaled to [0, 1].
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::size_t max_rows = 0) {
  std::ifstream fi(images_path, std::ios::binary), fl(labels_path, std::ios::binary);
  if (!fi) throw Error("cannot open " + images_path);
  if (!fl) throw Error("cannot open " + labels_path);
  int ti = 0, tl = 0;
  const auto di = detail::read_idx_header(fi, ti);
  const auto dl = detail::read_idx_header(fl, tl);
  if (di.empty() || dl.size() != 1 || di[0] != dl[0]) throw Error("IDX image/label counts differ");
  std::size_t n = di[0];
  if (max_rows > 0) n = std::min(n, max_rows);
  std::size_t d = 1;
  for (std::size_t k = 1; k < di.size(); ++k) d *= di[k];
  Dataset out;
  out.id = images_path;
  out.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  out.labels.resize(static_cast<Eigen::Index>(n));
  std::vector<unsigned char> row(d);
  int max_label = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!fi.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(d)))
      throw Error("IDX images truncated");
    for (std::size_t c = 0; c < d; ++c)
      out.features(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = row[c] / 255.0;
    char lab = 0;
    if (!fl.read(&lab, 1)) throw Error("IDX labels truncated");
    const int y = static_cast<unsigned char>(lab);
    out.labels[static_cast<Eigen::Index>(j)] = y;
    max_label = std::max(max_label, y);
  }
  out.classes = max_label + 1;
  out.validate();
  return out;
}

/// CSV with a header row and the label in the first column. `classes == 0`
/// keeps labels real-valued; otherwise labels must be integers in range.
inline Dataset load_csv(const std::string& path, int classes) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": missing header row");
  const auto width = csv::split(line).size();
  if (width < 2) throw Error(path + ": need a label column and at least one feature");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    auto cells = csv::split(line);
    if (cells.size() != width) throw Error(path + ":" + std::to_string(lineno) + ": wrong column count");
    std::vector<double> r;
    for (const auto& c : cells) {
      try {
        r.push_back(std::stod(std::string(csv::trim(c))));
      } catch (const std::exception&) {
        throw Error(path + ":" + std::to_string(lineno) + ": not a number");
      }
    }
    rows.push_back(std::move(r));
  }
  Dataset out;
  out.id = path;
  out.classes = classes;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    out.labels[static_cast<Eigen::Index>(j)] = rows[j][0];
    for (std::size_t c = 1; c < width; ++c)
      out.features(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c - 1)) = rows[j][c];
  }
  out.validate();
  return out;
}

}  // namespace adfl
