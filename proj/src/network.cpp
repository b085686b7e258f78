#include "hjinr/network.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "hjinr/error.hpp"
#include "hjinr/tape.hpp"
#include "mlp_core.hpp"

namespace hjinr {

NetworkConfig NetworkConfig::for_dimension(std::size_t spatial_dim, std::size_t depth,
                                           std::size_t width, double beta) {
  NetworkConfig c;
  c.input_dim = spatial_dim + 1;
  c.depth = depth;
  c.width = width;
  c.beta = beta;
  return c;
}

std::size_t NetworkConfig::param_count() const {
  std::size_t n = width * input_dim + width;
  n += (depth - 1) * (width * width + width);
  n += width + 1;
  return n;
}

void NetworkConfig::validate() const {
  if (input_dim < 2) {
    throw ConfigError("network input_dim must be at least 2 (space + time)");
  }
  if (depth < 1) {
    throw ConfigError("network depth must be >= 1");
  }
  if (width < 1) {
    throw ConfigError("network width must be >= 1");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ConfigError("softplus beta must be positive");
  }
  if (activation != Activation::Softplus && activation != Activation::Identity) {
    throw ConfigError("unknown activation tag");
  }
}

MlpParams::MlpParams(NetworkConfig config) : config_(config) {
  config_.validate();
  data_.assign(config_.param_count(), 0.0);
}

std::size_t MlpParams::layer_rows(std::size_t layer) const {
  return layer < config_.depth ? config_.width : 1;
}

std::size_t MlpParams::layer_cols(std::size_t layer) const {
  return layer == 0 ? config_.input_dim : config_.width;
}

std::size_t MlpParams::weight_offset(std::size_t layer) const {
  if (layer > config_.depth) {
    throw ContractViolation("layer index out of range");
  }
  const std::size_t w = config_.width;
  if (layer == 0) {
    return 0;
  }
  return (w * config_.input_dim + w) + (layer - 1) * (w * w + w);
}

std::size_t MlpParams::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + layer_rows(layer) * layer_cols(layer);
}

RowMatrixMap MlpParams::weight(std::size_t layer) {
  return {data_.data() + weight_offset(layer), static_cast<Eigen::Index>(layer_rows(layer)),
          static_cast<Eigen::Index>(layer_cols(layer))};
}

ConstRowMatrixMap MlpParams::weight(std::size_t layer) const {
  return {data_.data() + weight_offset(layer), static_cast<Eigen::Index>(layer_rows(layer)),
          static_cast<Eigen::Index>(layer_cols(layer))};
}

VectorMap MlpParams::bias(std::size_t layer) {
  return {data_.data() + bias_offset(layer), static_cast<Eigen::Index>(layer_rows(layer))};
}

ConstVectorMap MlpParams::bias(std::size_t layer) const {
  return {data_.data() + bias_offset(layer), static_cast<Eigen::Index>(layer_rows(layer))};
}

bool MlpParams::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

MlpParams init_network(const NetworkConfig& config, std::uint64_t seed) {
  MlpParams params(config);
  std::mt19937_64 rng(seed);
  for (std::size_t layer = 0; layer <= config.depth; ++layer) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(params.layer_cols(layer)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = params.weight(layer);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = dist(rng);
      }
    }
  }
  return params;
}

namespace activation {

double value(Activation a, double beta, double z) {
  return detail::activation_jet(a, beta, z).value;
}

double slope(Activation a, double beta, double z) {
  return detail::activation_jet(a, beta, z).slope;
}

double curvature(Activation a, double beta, double z) {
  return detail::activation_jet(a, beta, z).curvature;
}

}  // namespace activation

namespace detail {

Eigen::MatrixXd affine(const MlpParams& params, std::size_t layer, const Eigen::MatrixXd& in) {
  Eigen::MatrixXd z = params.weight(layer) * in;
  z.colwise() += params.bias(layer);
  return z;
}

void check_finite(const Eigen::MatrixXd& m, std::size_t layer, const char* what) {
  if (!m.allFinite()) {
    throw NumericalError(std::string("non-finite ") + what + " at layer " + std::to_string(layer));
  }
}

}  // namespace detail

Eigen::RowVectorXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& points) {
  const NetworkConfig& cfg = params.config();
  if (static_cast<std::size_t>(points.rows()) != cfg.input_dim) {
    throw ConfigError("forward: point dimension " + std::to_string(points.rows()) +
                      " does not match network input " + std::to_string(cfg.input_dim));
  }
  Eigen::MatrixXd a = points;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    Eigen::MatrixXd z = detail::affine(params, l, a);
    detail::activate(cfg.activation, cfg.beta, z, a);
    detail::check_finite(a, l, "activation");
  }
  Eigen::MatrixXd u = detail::affine(params, cfg.depth, a);
  detail::check_finite(u, cfg.depth, "output");
  return u.row(0);
}

double forward(const MlpParams& params, std::span<const double> x, double t) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(x.size() + 1), 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    p(static_cast<Eigen::Index>(i), 0) = x[i];
  }
  p(static_cast<Eigen::Index>(x.size()), 0) = t;
  return forward_batch(params, p)(0);
}

double lipschitz_bound(const MlpParams& params) {
  const NetworkConfig& cfg = params.config();
  // Frobenius norms bound the operator norms; both activations have slope <= 1.
  double bound = 1.0;
  for (std::size_t l = 0; l <= cfg.depth; ++l) {
    bound *= params.weight(l).norm();
  }
  return bound;
}

// ---------------------------------------------------------------------------
// Checkpoint encoding

namespace {

constexpr char kMagic[4] = {'H', 'J', 'I', 'N'};

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    }
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    }
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw CorruptCheckpoint("checkpoint truncated");
    }
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const MlpParams& params, const CheckpointMeta& meta) {
  const NetworkConfig& cfg = params.config();
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(cfg.spatial_dim()));
  w.u32(static_cast<std::uint32_t>(cfg.depth));
  w.u32(static_cast<std::uint32_t>(cfg.width));
  w.u32(static_cast<std::uint32_t>(cfg.activation));
  w.f64(cfg.beta);
  w.u64(params.size());
  for (double v : params.flat()) {
    w.f64(v);
  }
  w.u64(meta.epoch);
  w.f64(meta.final_loss);
  w.u64(meta.seed);
  w.u32(static_cast<std::uint32_t>(meta.problem_id.size()));
  w.bytes(meta.problem_id.data(), meta.problem_id.size());
  return w.take();
}

std::pair<MlpParams, CheckpointMeta> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw CorruptCheckpoint("bad checkpoint magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CorruptCheckpoint("unsupported checkpoint version " + std::to_string(version));
  }
  NetworkConfig cfg;
  cfg.input_dim = static_cast<std::size_t>(r.u32()) + 1;
  cfg.depth = r.u32();
  cfg.width = r.u32();
  cfg.activation = static_cast<Activation>(r.u32());
  cfg.beta = r.f64();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw CorruptCheckpoint(std::string("invalid embedded config: ") + e.what());
  }
  const std::uint64_t count = r.u64();
  if (count != cfg.param_count()) {
    throw CorruptCheckpoint("parameter count " + std::to_string(count) +
                            " inconsistent with embedded config");
  }
  MlpParams params(cfg);
  for (double& v : params.flat()) {
    v = r.f64();
  }
  CheckpointMeta meta;
  meta.epoch = r.u64();
  meta.final_loss = r.f64();
  meta.seed = r.u64();
  const std::uint32_t len = r.u32();
  const auto id = r.bytes(len);
  meta.problem_id.assign(id.begin(), id.end());
  if (!r.done()) {
    throw CorruptCheckpoint("trailing bytes after checkpoint metadata");
  }
  return {std::move(params), std::move(meta)};
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params,
                     const CheckpointMeta& meta) {
  const auto bytes = encode_checkpoint(params, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open checkpoint for writing: " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("failed writing checkpoint: " + path.string());
  }
}

std::pair<MlpParams, CheckpointMeta> load_checkpoint(const std::filesystem::path& path,
                                                     const std::optional<NetworkConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint: " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  auto result = decode_checkpoint(bytes);
  if (expected && !(result.first.config() == *expected)) {
    const NetworkConfig& got = result.first.config();
    throw ShapeMismatch("checkpoint network (d=" + std::to_string(got.spatial_dim()) +
                        ", depth=" + std::to_string(got.depth) +
                        ", width=" + std::to_string(got.width) +
                        ") does not match requested (d=" + std::to_string(expected->spatial_dim()) +
                        ", depth=" + std::to_string(expected->depth) +
                        ", width=" + std::to_string(expected->width) + ")");
  }
  return result;
}

}  // namespace hjinr
