#include "xview/datagen.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "xview/binary_io.hpp"

namespace xview {

namespace {

constexpr std::uint32_t kFeatureVersion = 1;

Matrix orthonormal_columns(Index rows, Index cols, Rng& rng) {
  const Eigen::MatrixXd g = random_normal(rows, cols, 1.0, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  // Fix column signs so the result does not depend on QR conventions.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Index j = 0; j < cols; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace

Corpus::Corpus(TwoViewData data, std::optional<GroundTruth> truth)
    : data_(std::move(data)), truth_(std::move(truth)) {
  if (truth_) {
    require(static_cast<Index>(truth_->drone.size()) == data_.drone.rows() &&
                static_cast<Index>(truth_->satellite.size()) == data_.satellite.rows(),
            ErrorCode::kShapeMismatch, "corpus: ground truth size mismatch");
  }
}

const GroundTruth& Corpus::ground_truth_for_evaluation() const {
  if (!truth_) fail(ErrorCode::kInvalidArgument, "corpus has no ground truth labels");
  return *truth_;
}

ViewMaps make_view_maps(const SyntheticSpec& spec, Rng& rng) {
  const double c = spec.view_overlap;
  require(c >= 0.0 && c <= 1.0, ErrorCode::kInvalidArgument,
          "synthetic: view_overlap must lie in [0, 1]");
  const bool identical = c == 1.0;
  const Index needed = identical ? spec.latent_dim : 2 * spec.latent_dim;
  require(spec.input_dim >= needed, ErrorCode::kInvalidArgument,
          "synthetic: input_dim too small for the requested view overlap");
  const Matrix basis = orthonormal_columns(spec.input_dim, needed, rng);
  ViewMaps maps;
  maps.drone = basis.leftCols(spec.latent_dim);
  if (identical) {
    maps.satellite = maps.drone;
  } else {
    maps.satellite = c * maps.drone + std::sqrt(1.0 - c * c) * basis.middleCols(spec.latent_dim, spec.latent_dim);
  }
  return maps;
}

Corpus generate(const SyntheticSpec& spec) {
  require(spec.num_locations >= 1 && spec.latent_dim >= 1 && spec.drone_per_loc >= 1 &&
              spec.sat_per_loc >= 1,
          ErrorCode::kInvalidArgument, "synthetic: counts must be positive");
  require(spec.input_dim >= spec.latent_dim, ErrorCode::kInvalidArgument,
          "synthetic: input_dim must be >= latent_dim");
  require(spec.noise_std >= 0.0, ErrorCode::kInvalidArgument,
          "synthetic: noise_std must be non-negative");

  Rng rng(spec.seed);
  const ViewMaps maps = make_view_maps(spec, rng);
  const Matrix latents = l2_normalize_rows(random_normal(spec.num_locations, spec.latent_dim, 1.0, rng));

  TwoViewData data;
  GroundTruth truth;
  data.drone.resize(spec.num_locations * spec.drone_per_loc, spec.input_dim);
  data.satellite.resize(spec.num_locations * spec.sat_per_loc, spec.input_dim);
  Rng noise_rng = rng.split();
  auto noise = [&](Index dim) {
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = spec.noise_std == 0.0 ? 0.0 : noise_rng.normal(0.0, spec.noise_std);
    return v;
  };
  for (Index p = 0; p < spec.num_locations; ++p) {
    const Vector z = latents.row(p).transpose();
    const Vector xd = maps.drone * z;
    const Vector xs = maps.satellite * z;
    for (Index j = 0; j < spec.drone_per_loc; ++j) {
      data.drone.row(p * spec.drone_per_loc + j) = (xd + noise(spec.input_dim)).transpose();
      truth.drone.push_back(static_cast<int>(p));
    }
    for (Index j = 0; j < spec.sat_per_loc; ++j) {
      data.satellite.row(p * spec.sat_per_loc + j) = (xs + noise(spec.input_dim)).transpose();
      truth.satellite.push_back(static_cast<int>(p));
    }
  }
  return Corpus(std::move(data), std::move(truth));
}

void write_feature_stream(std::ostream& out, const FeatureFile& file) {
  binary::put_magic(out, "DMFV");
  binary::put_le<std::uint32_t>(out, kFeatureVersion);
  binary::put_le<std::uint8_t>(out, file.view == View::kDrone ? 0 : 1);
  binary::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(file.features.rows()));
  binary::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(file.features.cols()));
  for (Index i = 0; i < file.features.rows(); ++i)
    for (Index j = 0; j < file.features.cols(); ++j)
      binary::put_le<float>(out, static_cast<float>(file.features(i, j)));
  if (file.labels) {
    require(static_cast<Index>(file.labels->size()) == file.features.rows(),
            ErrorCode::kShapeMismatch, "feature file: label count mismatch");
    binary::put_magic(out, "LBLS");
    for (int l : *file.labels) binary::put_le<std::int32_t>(out, l);
  }
}

FeatureFile read_feature_stream(std::istream& in) {
  char tag[4];
  if (!binary::read_tag(in, tag)) fail(ErrorCode::kTruncated, "feature file: missing magic");
  if (std::string(tag, 4) != "DMFV") fail(ErrorCode::kBadMagic, "feature file: bad magic");
  if (binary::get_le<std::uint32_t>(in, "version") != kFeatureVersion)
    fail(ErrorCode::kBadVersion, "feature file: unsupported version");
  FeatureFile file;
  const auto view = binary::get_le<std::uint8_t>(in, "view tag");
  if (view > 1) fail(ErrorCode::kBadVersion, "feature file: unknown view tag");
  file.view = view == 0 ? View::kDrone : View::kSatellite;
  const auto count = binary::get_le<std::uint32_t>(in, "count");
  const auto dim = binary::get_le<std::uint32_t>(in, "dim");
  Matrix features(count, dim);
  for (Index i = 0; i < features.rows(); ++i) {
    for (Index j = 0; j < features.cols(); ++j) {
      const float v = binary::get_le<float>(in, "payload");
      if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, "feature file: non-finite entry");
      features(i, j) = v;
    }
  }
  file.features = std::move(features);

  if (!binary::read_tag(in, tag)) {
    if (in.gcount() != 0) fail(ErrorCode::kTruncated, "feature file: truncated label marker");
    return file;
  }
  if (std::string(tag, 4) != "LBLS") fail(ErrorCode::kBadMagic, "feature file: bad label marker");
  std::vector<int> labels(count);
  for (auto& l : labels) l = binary::get_le<std::int32_t>(in, "labels");
  file.labels = std::move(labels);
  return file;
}

void write_feature_file(const std::string& path, const FeatureFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open feature file for writing: " + path);
  write_feature_stream(out, file);
  if (!out) fail(ErrorCode::kIo, "failed writing feature file: " + path);
}

FeatureFile read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open feature file: " + path);
  return read_feature_stream(in);
}

Corpus load_features(const std::string& drone_path, const std::string& sat_path) {
  FeatureFile d = read_feature_file(drone_path);
  FeatureFile s = read_feature_file(sat_path);
  if (d.view != View::kDrone) fail(ErrorCode::kInvalidArgument, drone_path + ": not a drone feature file");
  if (s.view != View::kSatellite) fail(ErrorCode::kInvalidArgument, sat_path + ": not a satellite feature file");
  if (d.features.cols() != s.features.cols())
    fail(ErrorCode::kShapeMismatch, "feature files disagree on dimension");
  std::optional<GroundTruth> truth;
  if (d.labels && s.labels) truth = GroundTruth{*d.labels, *s.labels};
  return Corpus(TwoViewData{std::move(d.features), std::move(s.features)}, std::move(truth));
}

void save_corpus(const Corpus& corpus, const std::string& drone_path, const std::string& sat_path) {
  FeatureFile d{View::kDrone, corpus.views().drone, std::nullopt};
  FeatureFile s{View::kSatellite, corpus.views().satellite, std::nullopt};
  if (corpus.has_ground_truth()) {
    d.labels = corpus.ground_truth_for_evaluation().drone;
    s.labels = corpus.ground_truth_for_evaluation().satellite;
  }
  write_feature_file(drone_path, d);
  write_feature_file(sat_path, s);
}

}  // namespace xview
