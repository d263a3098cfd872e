#include "flipquad/policy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

namespace flipquad {

void ObservationScales::validate() const {
  for (double s : {position, velocity, rates, action})
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("observation scales must be positive");
}

PolicyAction interpret_action(const RawAction& raw, double limit) {
  const RawAction c = raw.cwiseMax(-1.0).cwiseMin(1.0);
  PolicyAction a;
  a.modulation = limit * c.head<3>();
  a.eta_raw = c[3];
  return a;
}

RawAction to_raw(const PolicyAction& a, double limit) {
  RawAction r;
  r.head<3>() = limit > 0.0 ? Vec3(a.modulation / limit) : Vec3::Zero();
  r[3] = a.eta_raw;
  return r;
}

void ActionHistory::clear() {
  for (auto& a : items_) a.setZero();
}

void ActionHistory::push(const RawAction& a) {
  for (std::size_t i = items_.size() - 1; i > 0; --i) items_[i] = items_[i - 1];
  items_[0] = a;
}

Eigen::Matrix<double, kHistoryLength * kActDim, 1> ActionHistory::flattened() const {
  Eigen::Matrix<double, kHistoryLength * kActDim, 1> out;
  for (int i = 0; i < kHistoryLength; ++i) out.segment<kActDim>(kActDim * i) = items_[static_cast<std::size_t>(i)];
  return out;
}

Observation build_observation(const QuadState& x, const ActionHistory& hist, const ObservationScales& scales) {
  Observation o;
  o.segment<3>(0) = x.position / scales.position;
  o.segment<3>(3) = x.velocity / scales.velocity;
  const Mat3 r = so3::to_rotation(x.attitude);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) o[6 + 3 * i + j] = r(i, j);
  o.segment<3>(15) = x.body_rates / scales.rates;
  o.segment<kHistoryLength * kActDim>(18) = hist.flattened() / scales.action;
  return o;
}

DecodedObservation decode_observation(const Observation& obs, const ObservationScales& scales) {
  DecodedObservation d;
  d.position = obs.segment<3>(0) * scales.position;
  d.velocity = obs.segment<3>(3) * scales.velocity;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d.rotation(i, j) = obs[6 + 3 * i + j];
  d.body_rates = obs.segment<3>(15) * scales.rates;
  for (int i = 0; i < kHistoryLength; ++i)
    d.history[static_cast<std::size_t>(i)] = obs.segment<kActDim>(18 + kActDim * i) * scales.action;
  return d;
}

// ---------------------------------------------------------------- Mlp

template <typename Scalar>
Mlp<Scalar>::Mlp(const std::vector<int>& widths, bool squash_output) : squash_(squash_output) {
  if (widths.size() < 2) throw std::invalid_argument("mlp needs at least input and output widths");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("mlp widths must be positive");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers_.push_back({Matrix::Zero(widths[i + 1], widths[i]), Vector::Zero(widths[i + 1])});
}

template <typename Scalar>
void Mlp<Scalar>::init(std::mt19937_64& rng, Scalar output_gain) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& layer = layers_[l];
    const Eigen::Index rows = layer.w.rows(), cols = layer.w.cols();
    const Eigen::Index n = std::max(rows, cols);
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    // sign fix so the distribution is uniform over orthogonal matrices
    const Eigen::VectorXd d = qr.matrixQR().diagonal();
    for (Eigen::Index j = 0; j < n; ++j)
      if (d[j] < 0.0) q.col(j) = -q.col(j);
    const double gain = l + 1 == layers_.size() ? static_cast<double>(output_gain) : std::numbers::sqrt2;
    layer.w = (gain * q.topLeftCorner(rows, cols)).template cast<Scalar>();
    layer.b.setZero();
  }
}

template <typename Scalar>
Mlp<Scalar> Mlp<Scalar>::zeros_like() const {
  Mlp out = *this;
  for (auto& l : out.layers_) {
    l.w.setZero();
    l.b.setZero();
  }
  return out;
}

template <typename Scalar>
typename Mlp<Scalar>::Matrix Mlp<Scalar>::forward(const Matrix& x) const {
  Cache c;
  return forward(x, c);
}

template <typename Scalar>
typename Mlp<Scalar>::Matrix Mlp<Scalar>::forward(const Matrix& x, Cache& cache) const {
  if (x.rows() != input_dim())
    throw std::invalid_argument("mlp input has " + std::to_string(x.rows()) + " rows, expected " +
                                std::to_string(input_dim()));
  cache.act.resize(layers_.size() + 1);
  cache.act[0] = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = layers_[l].w * cache.act[l];
    z.colwise() += layers_[l].b;
    const bool last = l + 1 == layers_.size();
    if (!last || squash_) z = z.array().tanh().matrix();
    cache.act[l + 1] = std::move(z);
  }
  return cache.act.back();
}

template <typename Scalar>
typename Mlp<Scalar>::Matrix Mlp<Scalar>::backward(const Cache& cache, const Matrix& grad_out, Mlp& grads) const {
  Matrix delta = grad_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const bool last = k + 1 == layers_.size();
    if (!last || squash_) delta = (delta.array() * (Scalar(1) - cache.act[k + 1].array().square())).matrix();
    grads.layers_[k].w.noalias() += delta * cache.act[k].transpose();
    grads.layers_[k].b += delta.rowwise().sum();
    delta = layers_[k].w.transpose() * delta;
  }
  return delta;
}

template <typename Scalar>
std::vector<int> Mlp<Scalar>::widths() const {
  std::vector<int> w;
  if (layers_.empty()) return w;
  w.push_back(static_cast<int>(layers_.front().w.cols()));
  for (const auto& l : layers_) w.push_back(static_cast<int>(l.w.rows()));
  return w;
}

template <typename Scalar>
int Mlp<Scalar>::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().w.cols());
}

template <typename Scalar>
int Mlp<Scalar>::output_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().w.rows());
}

template <typename Scalar>
Eigen::Index Mlp<Scalar>::num_params() const {
  Eigen::Index n = 0;
  for (const auto& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

template <typename Scalar>
typename Mlp<Scalar>::Vector Mlp<Scalar>::flat() const {
  Vector v(num_params());
  Eigen::Index k = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.w.rows(); ++i)
      for (Eigen::Index j = 0; j < l.w.cols(); ++j) v[k++] = l.w(i, j);
    v.segment(k, l.b.size()) = l.b;
    k += l.b.size();
  }
  return v;
}

template <typename Scalar>
void Mlp<Scalar>::set_flat(const Vector& v) {
  if (v.size() != num_params()) throw std::invalid_argument("mlp parameter vector has the wrong length");
  Eigen::Index k = 0;
  for (auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.w.rows(); ++i)
      for (Eigen::Index j = 0; j < l.w.cols(); ++j) l.w(i, j) = v[k++];
    l.b = v.segment(k, l.b.size());
    k += l.b.size();
  }
}

template class Mlp<float>;
template class Mlp<double>;

template <typename Scalar>
GaussianPolicy<Scalar> GaussianPolicy<Scalar>::make(const std::vector<int>& hidden, std::mt19937_64& rng,
                                                    double init_log_std) {
  std::vector<int> widths{kObsDim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(kActDim);
  GaussianPolicy p;
  p.mean = Mlp<Scalar>(widths, true);
  p.mean.init(rng, Scalar(0.01));
  p.log_std.setConstant(Scalar(init_log_std));
  return p;
}

template struct GaussianPolicy<float>;
template struct GaussianPolicy<double>;

double gaussian_log_prob(const RawAction& a, const RawAction& mean, const RawAction& log_std) {
  const RawAction z = (a - mean).cwiseQuotient(log_std.array().exp().matrix());
  return -0.5 * z.squaredNorm() - log_std.sum() - 0.5 * kActDim * std::log(2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------- weight files

namespace {

static_assert(std::endian::native == std::endian::little, "weight files assume a little-endian host");

void write_floats(std::ofstream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

nlohmann::json layer_json(const Mlp<float>& net) {
  nlohmann::json layers = nlohmann::json::array();
  const auto& ls = net.layers();
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const bool last = i + 1 == ls.size();
    layers.push_back({{"in", ls[i].w.cols()},
                      {"out", ls[i].w.rows()},
                      {"activation", (!last || net.squash_output()) ? "tanh" : "linear"}});
  }
  return layers;
}

std::vector<float> mlp_floats(const Mlp<float>& net) {
  const auto f = net.flat();
  return std::vector<float>(f.data(), f.data() + f.size());
}

struct RawFile {
  nlohmann::json meta;
  std::vector<float> data;
};

RawFile read_raw(const std::string& path) {
  RawFile r;
  std::ifstream js(path + ".json");
  if (!js) throw std::runtime_error("cannot open weight sidecar: " + path + ".json");
  r.meta = nlohmann::json::parse(js);
  std::ifstream bin(path, std::ios::binary | std::ios::ate);
  if (!bin) throw std::runtime_error("cannot open weight file: " + path);
  const auto bytes = static_cast<std::size_t>(bin.tellg());
  if (bytes % sizeof(float) != 0) throw std::runtime_error("weight file size is not a multiple of 4: " + path);
  r.data.resize(bytes / sizeof(float));
  bin.seekg(0);
  bin.read(reinterpret_cast<char*>(r.data.data()), static_cast<std::streamsize>(bytes));
  for (float v : r.data)
    if (!std::isfinite(v)) throw std::runtime_error("weight file contains non-finite values: " + path);
  return r;
}

Mlp<float> mlp_from_meta(const nlohmann::json& layers, const std::vector<float>& data, std::size_t& offset) {
  std::vector<int> widths;
  bool squash = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i == 0) widths.push_back(layers[i].at("in").get<int>());
    widths.push_back(layers[i].at("out").get<int>());
    if (i + 1 == layers.size()) squash = layers[i].at("activation").get<std::string>() == "tanh";
  }
  Mlp<float> net(widths, squash);
  const auto n = static_cast<std::size_t>(net.num_params());
  if (offset + n > data.size()) throw std::runtime_error("weight file shorter than its sidecar describes");
  net.set_flat(Eigen::Map<const Eigen::VectorXf>(data.data() + offset, static_cast<Eigen::Index>(n)));
  offset += n;
  return net;
}

}  // namespace

void save_policy(const GaussianPolicy<float>& p, const std::string& path, const ObservationScales& scales) {
  std::vector<float> data = mlp_floats(p.mean);
  for (int i = 0; i < kActDim; ++i) data.push_back(p.log_std[i]);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_floats(out, data);
  nlohmann::json meta{{"format", "float32-le"},
                      {"kind", "gaussian-policy"},
                      {"layout", "per layer: weight row-major (out x in), then bias; then log_std"},
                      {"layers", layer_json(p.mean)},
                      {"log_std", kActDim},
                      {"observation_scales",
                       {{"position", scales.position},
                        {"velocity", scales.velocity},
                        {"rates", scales.rates},
                        {"action", scales.action}}}};
  std::ofstream js(path + ".json");
  js << meta.dump(2) << '\n';
}

GaussianPolicy<float> load_policy(const std::string& path) {
  const RawFile raw = read_raw(path);
  std::size_t offset = 0;
  GaussianPolicy<float> p;
  p.mean = mlp_from_meta(raw.meta.at("layers"), raw.data, offset);
  if (p.mean.input_dim() != kObsDim || p.mean.output_dim() != kActDim)
    throw std::runtime_error("policy file has the wrong input/output width: " + path);
  if (offset + kActDim != raw.data.size()) throw std::runtime_error("policy file size does not match its sidecar");
  for (int i = 0; i < kActDim; ++i) p.log_std[i] = raw.data[offset + static_cast<std::size_t>(i)];
  return p;
}

void save_mlp(const Mlp<float>& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_floats(out, mlp_floats(net));
  nlohmann::json meta{{"format", "float32-le"},
                      {"kind", "mlp"},
                      {"layout", "per layer: weight row-major (out x in), then bias"},
                      {"layers", layer_json(net)}};
  std::ofstream js(path + ".json");
  js << meta.dump(2) << '\n';
}

Mlp<float> load_mlp(const std::string& path) {
  const RawFile raw = read_raw(path);
  std::size_t offset = 0;
  Mlp<float> net = mlp_from_meta(raw.meta.at("layers"), raw.data, offset);
  if (offset != raw.data.size()) throw std::runtime_error("mlp file size does not match its sidecar");
  return net;
}

// ---------------------------------------------------------------- delay

DelayLine::DelayLine(int steps, const RawAction& initial) : steps_(steps) {
  if (steps < 0) throw std::invalid_argument("delay must be non-negative");
  reset(initial);
}

void DelayLine::reset(const RawAction& initial) { queue_.assign(static_cast<std::size_t>(steps_), initial); }

RawAction DelayLine::push(const RawAction& v) {
  if (steps_ == 0) return v;
  queue_.push_back(v);
  const RawAction out = queue_.front();
  queue_.pop_front();
  return out;
}

int delay_steps(double delay, double dt) {
  if (!(delay >= 0.0) || !(dt > 0.0)) throw std::invalid_argument("delay must be >= 0 and dt > 0");
  const double n = delay / dt;
  const double r = std::round(n);
  if (std::abs(n - r) > 1e-9 * std::max(1.0, n)) throw std::invalid_argument("delay must be a multiple of dt");
  return static_cast<int>(r);
}

std::vector<RawAction> delayed_apply(const std::vector<RawAction>& stream, int steps) {
  DelayLine line(steps);
  std::vector<RawAction> out;
  out.reserve(stream.size());
  for (const auto& a : stream) out.push_back(line.push(a));
  return out;
}

}  // namespace flipquad
