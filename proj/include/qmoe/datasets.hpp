// Copyright 2026 The qmoe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dataset generation and ingestion: Two Moons, IDX files, binary class
// filtering, PCA and the [0, pi] angle scaler. Anything fitted (PCA basis,
// scaler) only ever sees rows tagged Split::Train.

#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qmoe/error.hpp"
#include "qmoe/random.hpp"

namespace qmoe {

enum class Split : std::uint8_t { Train, Val, Test };

struct Dataset {
  Eigen::MatrixXd X;  // samples x d
  std::vector<int> labels;
  std::vector<Split> split;
  int n_classes = 2;
  std::string provenance;

  std::size_t rows() const { return labels.size(); }
  int d() const { return static_cast<int>(X.cols()); }

  std::size_t count(Split s) const { return static_cast<std::size_t>(std::count(split.begin(), split.end(), s)); }
};

inline void validate(const Dataset& ds) {
  if (static_cast<std::size_t>(ds.X.rows()) != ds.labels.size() || ds.split.size() != ds.labels.size()) {
    throw DataError("dataset: row counts of features, labels and split tags disagree");
  }
  for (int y : ds.labels) {
    if (y < 0 || y >= ds.n_classes) throw DataError("dataset: label " + std::to_string(y) + " out of range");
  }
  if (!ds.X.allFinite()) throw DataError("dataset: non-finite feature value");
}

inline Dataset select_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), ds.X.cols());
  out.n_classes = ds.n_classes;
  out.provenance = ds.provenance;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(ds.labels[rows[i]]);
    out.split.push_back(ds.split[rows[i]]);
  }
  return out;
}

inline Dataset subset(const Dataset& ds, Split s) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (ds.split[i] == s) rows.push_back(i);
  }
  return select_rows(ds, rows);
}

/// Upper arc (cos t, sin t) labelled 0, lower arc (1 - cos t, 0.5 - sin t)
/// labelled 1, t ~ U[0, pi], plus isotropic Gaussian noise. The first
/// ceil(n/2) rows are class 0. All rows are tagged Train.
inline Dataset make_two_moons(std::size_t n_samples, double noise_sd, std::uint64_t seed) {
  if (n_samples < 2) throw DataError("make_two_moons: need at least 2 samples");
  if (!(noise_sd >= 0.0)) throw DataError("make_two_moons: noise_sd must be >= 0");
  Rng rng = make_rng(seed, Stream::Data);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t upper = n_samples - n_samples / 2;
  Dataset ds;
  ds.X.resize(static_cast<Eigen::Index>(n_samples), 2);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double t = angle(rng);
    const bool first = i < upper;
    double x0 = first ? std::cos(t) : 1.0 - std::cos(t);
    double x1 = first ? std::sin(t) : 0.5 - std::sin(t);
    if (noise_sd > 0.0) {
      x0 += noise_sd * noise(rng);
      x1 += noise_sd * noise(rng);
    }
    ds.X(static_cast<Eigen::Index>(i), 0) = x0;
    ds.X(static_cast<Eigen::Index>(i), 1) = x1;
    ds.labels.push_back(first ? 0 : 1);
  }
  ds.split.assign(n_samples, Split::Train);
  std::ostringstream prov;
  prov << std::setprecision(17) << "two_moons(n=" << n_samples << ", noise_sd=" << noise_sd << ", seed=" << seed
       << ")";
  ds.provenance = prov.str();
  return ds;
}

/// Tags round(fraction * class_count) rows of each class as Test, chosen by
/// a seeded shuffle; the rest keep their tag.
inline Dataset assign_test_split(Dataset ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw DataError("test_fraction must lie in [0, 1)");
  Rng rng = make_rng(seed, Stream::Split);
  for (int c = 0; c < ds.n_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      if (ds.labels[i] == c && ds.split[i] == Split::Train) members.push_back(i);
    }
    const auto perm = permutation(members.size(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < n_test; ++k) ds.split[members[perm[k]]] = Split::Test;
  }
  ds.provenance += " | stratified test split fraction=" + std::to_string(test_fraction);
  return ds;
}

// ---------------------------------------------------------------------------
// IDX

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                              static_cast<char>(v)};
  out.write(b.data(), 4);
}

inline std::string hex32(std::uint32_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
  return s.str();
}

}  // namespace detail

/// Raw IDX contents: images as bytes, one row per image.
struct IdxData {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<unsigned char> pixels;  // count x (rows * cols)
  std::vector<unsigned char> labels;
};

inline IdxData read_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = detail::read_file_bytes(images_path);
  const auto lab = detail::read_file_bytes(labels_path);
  if (img.size() < 4) throw DataError("truncated IDX image file '" + images_path + "': missing header");
  if (lab.size() < 4) throw DataError("truncated IDX label file '" + labels_path + "': missing header");
  const std::uint32_t img_magic = detail::read_be32(img, 0);
  if (img_magic != kIdxImagesMagic) {
    throw DataError("bad IDX magic " + detail::hex32(img_magic) + " in image file '" + images_path + "' (expected " +
                    detail::hex32(kIdxImagesMagic) + ")");
  }
  const std::uint32_t lab_magic = detail::read_be32(lab, 0);
  if (lab_magic != kIdxLabelsMagic) {
    throw DataError("bad IDX magic " + detail::hex32(lab_magic) + " in label file '" + labels_path + "' (expected " +
                    detail::hex32(kIdxLabelsMagic) + ")");
  }
  if (img.size() < 16) throw DataError("truncated IDX image file '" + images_path + "': incomplete header");
  if (lab.size() < 8) throw DataError("truncated IDX label file '" + labels_path + "': incomplete header");
  IdxData out;
  const std::size_t n_images = detail::read_be32(img, 4);
  out.n_rows = detail::read_be32(img, 8);
  out.n_cols = detail::read_be32(img, 12);
  const std::size_t n_labels = detail::read_be32(lab, 4);
  if (n_images != n_labels) {
    throw DataError("IDX count mismatch: " + std::to_string(n_images) + " images vs " + std::to_string(n_labels) +
                    " labels");
  }
  const std::size_t pixels = n_images * out.n_rows * out.n_cols;
  if (img.size() < 16 + pixels) {
    throw DataError("truncated IDX image file '" + images_path + "': expected " + std::to_string(pixels) +
                    " pixel bytes, found " + std::to_string(img.size() - 16));
  }
  if (lab.size() < 8 + n_labels) {
    throw DataError("truncated IDX label file '" + labels_path + "': expected " + std::to_string(n_labels) +
                    " label bytes, found " + std::to_string(lab.size() - 8));
  }
  out.pixels.assign(img.begin() + 16, img.begin() + static_cast<std::ptrdiff_t>(16 + pixels));
  out.labels.assign(lab.begin() + 8, lab.begin() + static_cast<std::ptrdiff_t>(8 + n_labels));
  return out;
}

inline void write_idx(const IdxData& data, const std::string& images_path, const std::string& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw DataError("cannot write IDX files");
  detail::write_be32(img, kIdxImagesMagic);
  detail::write_be32(img, static_cast<std::uint32_t>(data.labels.size()));
  detail::write_be32(img, static_cast<std::uint32_t>(data.n_rows));
  detail::write_be32(img, static_cast<std::uint32_t>(data.n_cols));
  img.write(reinterpret_cast<const char*>(data.pixels.data()), static_cast<std::streamsize>(data.pixels.size()));
  detail::write_be32(lab, kIdxLabelsMagic);
  detail::write_be32(lab, static_cast<std::uint32_t>(data.labels.size()));
  lab.write(reinterpret_cast<const char*>(data.labels.data()), static_cast<std::streamsize>(data.labels.size()));
}

/// IDX image/label pair as a Dataset with pixels mapped to [0, 1]. Labels
/// keep their raw digit values (n_classes = 10) until filter_binary remaps them.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const IdxData raw = read_idx(images_path, labels_path);
  const std::size_t n = raw.labels.size();
  const std::size_t d = raw.n_rows * raw.n_cols;
  Dataset ds;
  ds.n_classes = 10;
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = raw.pixels[i * d + j] / 255.0;
    }
    ds.labels.push_back(raw.labels[i]);
    ds.n_classes = std::max(ds.n_classes, static_cast<int>(raw.labels[i]) + 1);
  }
  ds.split.assign(n, Split::Train);
  ds.provenance = "idx(images=" + images_path + ", labels=" + labels_path + ")";
  return ds;
}

/// Seeded, class-stratified subsample of classes a and b, remapped to 0/1.
/// Each class contributes n/2 rows (the first class takes the odd one).
/// Test rows are tagged Split::Test and drawn disjointly from train rows.
inline Dataset filter_binary(const Dataset& ds, int class_a, int class_b, std::size_t n_train, std::size_t n_test,
                             std::uint64_t seed) {
  if (class_a == class_b) throw DataError("filter_binary: classes must differ");
  Rng rng = make_rng(seed, Stream::Split);
  std::vector<std::size_t> rows;
  std::vector<Split> tags;
  std::vector<int> remap;
  const std::array<int, 2> classes{class_a, class_b};
  for (int which = 0; which < 2; ++which) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      if (ds.labels[i] == classes[static_cast<std::size_t>(which)]) members.push_back(i);
    }
    const std::size_t want_train = which == 0 ? n_train - n_train / 2 : n_train / 2;
    const std::size_t want_test = which == 0 ? n_test - n_test / 2 : n_test / 2;
    if (members.size() < want_train + want_test) {
      throw DataError("filter_binary: class " + std::to_string(classes[static_cast<std::size_t>(which)]) + " has " +
                      std::to_string(members.size()) + " samples, " + std::to_string(want_train + want_test) +
                      " requested");
    }
    const auto perm = permutation(members.size(), rng);
    for (std::size_t k = 0; k < want_train + want_test; ++k) {
      rows.push_back(members[perm[k]]);
      tags.push_back(k < want_train ? Split::Train : Split::Test);
      remap.push_back(which);
    }
  }
  Dataset out = select_rows(ds, rows);
  out.labels = std::move(remap);
  out.split = std::move(tags);
  out.n_classes = 2;
  out.provenance += " | binary(" + std::to_string(class_a) + " vs " + std::to_string(class_b) +
                    ", train=" + std::to_string(n_train) + ", test=" + std::to_string(n_test) +
                    ", seed=" + std::to_string(seed) + ")";
  return out;
}

inline Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  if (a.X.cols() != b.X.cols()) throw DataError("concat: feature dimensions differ");
  Dataset out;
  out.X.resize(a.X.rows() + b.X.rows(), a.X.cols());
  out.X << a.X, b.X;
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.split = a.split;
  out.split.insert(out.split.end(), b.split.begin(), b.split.end());
  out.n_classes = std::max(a.n_classes, b.n_classes);
  out.provenance = a.provenance + " + " + b.provenance;
  return out;
}

// ---------------------------------------------------------------------------
// PCA

struct PcaBasis {
  Eigen::VectorXd mean;        // d
  Eigen::MatrixXd components;  // k x d, rows ordered by descending singular value
  Eigen::VectorXd singular_values;

  Eigen::MatrixXd project(const Eigen::MatrixXd& X) const {
    return (X.rowwise() - mean.transpose()) * components.transpose();
  }
  Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& Z) const {
    return (Z * components).rowwise() + mean.transpose();
  }
};

/// Top-k right singular vectors of the centered matrix. Each component is
/// sign-fixed so that its largest-magnitude entry is positive.
inline PcaBasis fit_pca(const Eigen::MatrixXd& train_X, int k) {
  const auto n = train_X.rows();
  const auto d = train_X.cols();
  if (k < 1 || k > std::min(n, d)) {
    throw DataError("pca: k=" + std::to_string(k) + " out of range [1, " + std::to_string(std::min(n, d)) + "]");
  }
  PcaBasis basis;
  basis.mean = train_X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = train_X.rowwise() - basis.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  basis.components = svd.matrixV().leftCols(k).transpose();
  basis.singular_values = svd.singularValues().head(k);
  for (Eigen::Index r = 0; r < basis.components.rows(); ++r) {
    Eigen::Index arg = 0;
    basis.components.row(r).cwiseAbs().maxCoeff(&arg);
    if (basis.components(r, arg) < 0.0) basis.components.row(r) *= -1.0;
  }
  return basis;
}

inline std::pair<Dataset, PcaBasis> pca_reduce(const Dataset& ds, int k) {
  const Dataset train = subset(ds, Split::Train);
  PcaBasis basis = fit_pca(train.X, k);
  Dataset out = ds;
  out.X = basis.project(ds.X);
  out.provenance += " | pca(k=" + std::to_string(k) + ", fit on train)";
  return {std::move(out), std::move(basis)};
}

// ---------------------------------------------------------------------------
// Angle scaler

/// Per-feature affine map taking the training range [min, max] onto
/// [0, pi]; values outside the training range are clipped. Constant
/// training features map to pi/2.
struct Scaler {
  std::vector<double> offset;
  std::vector<double> gain;
  std::vector<bool> constant;

  std::size_t dims() const { return offset.size(); }

  double apply(std::size_t j, double v) const {
    if (constant[j]) return std::numbers::pi / 2.0;
    return std::clamp((v - offset[j]) * gain[j], 0.0, std::numbers::pi);
  }
};

inline Scaler fit_scaler(const Eigen::MatrixXd& train_X) {
  if (train_X.rows() == 0) throw DataError("fit_scaler: empty training matrix");
  Scaler s;
  for (Eigen::Index j = 0; j < train_X.cols(); ++j) {
    const double lo = train_X.col(j).minCoeff();
    const double hi = train_X.col(j).maxCoeff();
    const bool flat = !(hi > lo);
    s.offset.push_back(lo);
    s.gain.push_back(flat ? 1.0 : std::numbers::pi / (hi - lo));
    s.constant.push_back(flat);
  }
  return s;
}

inline Eigen::MatrixXd apply_scaler(const Scaler& s, const Eigen::MatrixXd& X) {
  detail::require_dims(static_cast<std::size_t>(X.cols()) == s.dims(), "apply_scaler: feature dimension mismatch");
  Eigen::MatrixXd out(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) out(i, j) = s.apply(static_cast<std::size_t>(j), X(i, j));
  }
  return out;
}

/// Fits on Train rows, applies to every row.
inline std::pair<Dataset, Scaler> scale_to_angles(const Dataset& ds) {
  Scaler s = fit_scaler(subset(ds, Split::Train).X);
  Dataset out = ds;
  out.X = apply_scaler(s, ds.X);
  out.provenance += " | scale to [0, pi] (fit on train)";
  return {std::move(out), std::move(s)};
}

inline void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (int j = 0; j < ds.d(); ++j) out << 'f' << j << ',';
  out << "label\n" << std::setprecision(17);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (int j = 0; j < ds.d(); ++j) out << ds.X(static_cast<Eigen::Index>(i), j) << ',';
    out << ds.labels[i] << '\n';
  }
}

}  // namespace qmoe
