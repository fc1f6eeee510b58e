#include "blm/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "blm/error.hpp"
#include "blm/kernels.hpp"
#include "blm/rng.hpp"

namespace blm {

std::string_view to_string(ModelKind k) noexcept { return k == ModelKind::Cnn ? "cnn" : "ffnn"; }

ModelKind parse_model_kind(std::string_view s) {
  if (s == "cnn" || s == "CNN") return ModelKind::Cnn;
  if (s == "ffnn" || s == "FFNN") return ModelKind::Ffnn;
  throw Error(Errc::ParseError, "unknown model kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- ParamSet

template <class T>
std::size_t ParamSet<T>::count() const noexcept {
  std::size_t n = 0;
  for (const auto& b : blobs) n += b.data.size();
  return n;
}

template <class T>
void ParamSet<T>::zero() noexcept {
  for (auto& b : blobs) std::fill(b.data.begin(), b.data.end(), T(0));
}

template <class T>
ParamSet<T> ParamSet<T>::zeros_like() const {
  ParamSet out = *this;
  out.zero();
  return out;
}

template <class T>
bool ParamSet<T>::same_shape(const ParamSet& other) const noexcept {
  if (blobs.size() != other.blobs.size()) return false;
  for (std::size_t i = 0; i < blobs.size(); ++i)
    if (blobs[i].data.size() != other.blobs[i].data.size()) return false;
  return true;
}

template <class T>
T& ParamSet<T>::flat(std::size_t i) {
  for (auto& b : blobs) {
    if (i < b.data.size()) return b.data[i];
    i -= b.data.size();
  }
  throw Error(Errc::ShapeError, "flat parameter index out of range");
}

template <class T>
const T& ParamSet<T>::flat(std::size_t i) const {
  return const_cast<ParamSet*>(this)->flat(i);
}

// ---------------------------------------------------------------- shapes

std::size_t cnn_conv_width(std::size_t dim, int layer) { return dim - 2 * static_cast<std::size_t>(layer); }

std::size_t cnn_param_count(std::size_t dim) {
  const std::size_t flat = cnn_conv_width(dim, 3);
  return 3 * (9 + 1) + flat * dim + dim;
}

std::size_t ffnn_hidden(std::size_t dim) { return (7 * dim) / 2; }

std::size_t ffnn_param_count(std::size_t dim) {
  const std::size_t h = ffnn_hidden(dim);
  return (7 * dim) * h + h + h * h + h + h * dim + dim;
}

namespace {

template <class T>
Blob<T> blob(std::string name, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return Blob<T>{std::move(name), std::move(shape), std::vector<T>(n, T(0))};
}

template <class T>
void relu_inplace(std::span<T> x) {
  for (auto& v : x) v = v > T(0) ? v : T(0);
}

// y[0:n_out] = b + x^T W, with W stored n_in x n_out.
template <class T>
void dense_forward(const simd::KernelTable<T>& k, std::span<const T> x, const std::vector<T>& w,
                   const std::vector<T>& b, std::span<T> y) {
  const std::size_t n_out = b.size();
  std::copy(b.begin(), b.end(), y.begin());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == T(0)) continue;
    k.axpy(x[i], w.data() + i * n_out, y.data(), n_out);
  }
}

// dW += x dy^T, db += dy, dx = W dy (dx may be empty).
template <class T>
void dense_backward(const simd::KernelTable<T>& k, std::span<const T> x, const std::vector<T>& w,
                    std::span<const T> dy, std::vector<T>& dw, std::vector<T>& db, std::span<T> dx) {
  const std::size_t n_out = dy.size();
  k.axpy(T(1), dy.data(), db.data(), n_out);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != T(0)) k.axpy(x[i], dy.data(), dw.data() + i * n_out, n_out);
    if (!dx.empty()) dx[i] = k.dot(w.data() + i * n_out, dy.data(), n_out);
  }
}

// Valid 3x3 convolution of an h x w plane, then ReLU.
template <class T>
void conv_forward(const simd::KernelTable<T>& k, const T* in, std::size_t h, std::size_t w, const std::vector<T>& kern,
                  T bias, T* out) {
  const std::size_t ho = h - 2, wo = w - 2;
  for (std::size_t r = 0; r < ho; ++r) {
    T* row = out + r * wo;
    std::fill(row, row + wo, bias);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) k.axpy(kern[3 * i + j], in + (r + i) * w + j, row, wo);
    relu_inplace(std::span<T>(row, wo));
  }
}

// dpre is the gradient w.r.t. the pre-activation (already ReLU-masked).
template <class T>
void conv_backward(const simd::KernelTable<T>& k, const T* in, std::size_t h, std::size_t w, const std::vector<T>& kern,
                   const T* dpre, std::vector<T>& dkern, T& dbias, T* din) {
  const std::size_t ho = h - 2, wo = w - 2;
  for (std::size_t r = 0; r < ho; ++r) {
    const T* drow = dpre + r * wo;
    T s = T(0);
    for (std::size_t c = 0; c < wo; ++c) s += drow[c];
    dbias += s;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        dkern[3 * i + j] += k.dot(drow, in + (r + i) * w + j, wo);
        if (din) k.axpy(kern[3 * i + j], drow, din + (r + i) * w + j, wo);
      }
    }
  }
}

template <class T>
void mask_by_activation(std::span<const T> act, std::span<T> grad) {
  for (std::size_t i = 0; i < act.size(); ++i)
    if (!(act[i] > T(0))) grad[i] = T(0);
}

}  // namespace

// ---------------------------------------------------------------- Network

template <class T>
void Network<T>::check_input(std::span<const T> input) const {
  if (input.size() != input_size())
    throw Error(Errc::ShapeError, "input of size " + std::to_string(input.size()) + ", expected 7 x " +
                                      std::to_string(dim_));
}

template <class T>
std::vector<T> Network<T>::forward(std::span<const T> input) const {
  Workspace<T> ws;
  std::vector<T> out(dim_);
  forward(input, ws, out);
  return out;
}

template <class T>
CnnNetwork<T>::CnnNetwork(std::size_t dim) : Network<T>(dim) {
  if (dim < 7) throw Error(Errc::ShapeError, "CNN needs dim >= 7 for three valid 3x3 convolutions");
  // Height 7 -> 5 -> 3 -> 1; width dim -> dim-2 -> dim-4 -> dim-6.
  auto& b = this->params_.blobs;
  for (int l = 1; l <= 3; ++l) {
    b.push_back(blob<T>("conv" + std::to_string(l) + ".w", {3, 3}));
    b.push_back(blob<T>("conv" + std::to_string(l) + ".b", {1}));
  }
  b.push_back(blob<T>("fc.w", {cnn_conv_width(dim, 3), dim}));
  b.push_back(blob<T>("fc.b", {dim}));
}

template <class T>
void CnnNetwork<T>::forward(std::span<const T> input, Workspace<T>& ws, std::span<T> out) const {
  this->check_input(input);
  if (out.size() != this->dim_) throw Error(Errc::ShapeError, "output span has wrong size");
  const auto& k = simd::kernels<T>();
  const auto& b = this->params_.blobs;
  const std::size_t d = this->dim_;
  ws.buf.resize(3);
  const T* src = input.data();
  std::size_t h = kInputRows, w = d;
  for (int l = 0; l < 3; ++l) {
    auto& dst = ws.buf[static_cast<std::size_t>(l)];
    dst.resize((h - 2) * (w - 2));
    conv_forward(k, src, h, w, b[2 * l].data, b[2 * l + 1].data[0], dst.data());
    src = dst.data();
    h -= 2;
    w -= 2;
  }
  dense_forward<T>(k, ws.buf[2], b[6].data, b[7].data, out);
}

template <class T>
void CnnNetwork<T>::backward(std::span<const T> input, const Workspace<T>& ws, std::span<const T> dout,
                             ParamSet<T>& grads) const {
  this->check_input(input);
  if (!grads.same_shape(this->params_)) throw Error(Errc::ShapeError, "gradient buffer shape mismatch");
  const auto& k = simd::kernels<T>();
  const auto& p = this->params_.blobs;
  auto& g = grads.blobs;
  const std::size_t d = this->dim_;

  // Gradients w.r.t. each conv output (post-ReLU), then masked to pre-ReLU.
  std::vector<T> d3(ws.buf[2].size());
  dense_backward<T>(k, ws.buf[2], p[6].data, dout, g[6].data, g[7].data, d3);

  std::vector<T> d2(ws.buf[1].size(), T(0));
  std::vector<T> d1(ws.buf[0].size(), T(0));
  std::vector<T>* dact[3] = {&d1, &d2, &d3};
  const std::size_t heights[3] = {kInputRows, 5, 3};
  for (int l = 2; l >= 0; --l) {
    const auto ul = static_cast<std::size_t>(l);
    mask_by_activation<T>(ws.buf[ul], *dact[ul]);
    const T* in = l == 0 ? input.data() : ws.buf[ul - 1].data();
    T* din = l == 0 ? nullptr : dact[ul - 1]->data();
    conv_backward(k, in, heights[ul], cnn_conv_width(d, l), p[2 * ul].data, dact[ul]->data(), g[2 * ul].data,
                  g[2 * ul + 1].data[0], din);
  }
}

template <class T>
FfnnNetwork<T>::FfnnNetwork(std::size_t dim) : Network<T>(dim) {
  if (dim < 1) throw Error(Errc::ShapeError, "FFNN needs dim >= 1");
  const std::size_t h = ffnn_hidden(dim);
  auto& b = this->params_.blobs;
  b.push_back(blob<T>("fc1.w", {kInputRows * dim, h}));
  b.push_back(blob<T>("fc1.b", {h}));
  b.push_back(blob<T>("fc2.w", {h, h}));
  b.push_back(blob<T>("fc2.b", {h}));
  b.push_back(blob<T>("fc3.w", {h, dim}));
  b.push_back(blob<T>("fc3.b", {dim}));
}

template <class T>
std::size_t FfnnNetwork<T>::hidden() const noexcept {
  return ffnn_hidden(this->dim_);
}

template <class T>
void FfnnNetwork<T>::forward(std::span<const T> input, Workspace<T>& ws, std::span<T> out) const {
  this->check_input(input);
  if (out.size() != this->dim_) throw Error(Errc::ShapeError, "output span has wrong size");
  const auto& k = simd::kernels<T>();
  const auto& b = this->params_.blobs;
  const std::size_t h = hidden();
  ws.buf.resize(2);
  ws.buf[0].resize(h);
  ws.buf[1].resize(h);
  dense_forward<T>(k, input, b[0].data, b[1].data, ws.buf[0]);
  relu_inplace<T>(ws.buf[0]);
  dense_forward<T>(k, ws.buf[0], b[2].data, b[3].data, ws.buf[1]);
  relu_inplace<T>(ws.buf[1]);
  dense_forward<T>(k, ws.buf[1], b[4].data, b[5].data, out);
}

template <class T>
void FfnnNetwork<T>::backward(std::span<const T> input, const Workspace<T>& ws, std::span<const T> dout,
                              ParamSet<T>& grads) const {
  this->check_input(input);
  if (!grads.same_shape(this->params_)) throw Error(Errc::ShapeError, "gradient buffer shape mismatch");
  const auto& k = simd::kernels<T>();
  const auto& p = this->params_.blobs;
  auto& g = grads.blobs;
  const std::size_t h = hidden();
  std::vector<T> dh2(h), dh1(h);
  dense_backward<T>(k, ws.buf[1], p[4].data, dout, g[4].data, g[5].data, dh2);
  mask_by_activation<T>(ws.buf[1], dh2);
  dense_backward<T>(k, ws.buf[0], p[2].data, dh2, g[2].data, g[3].data, dh1);
  mask_by_activation<T>(ws.buf[0], dh1);
  dense_backward<T>(k, input, p[0].data, dh1, g[0].data, g[1].data, std::span<T>());
}

template <class T>
std::unique_ptr<Network<T>> make_network(ModelKind kind, std::size_t dim) {
  if (kind == ModelKind::Cnn) return std::make_unique<CnnNetwork<T>>(dim);
  return std::make_unique<FfnnNetwork<T>>(dim);
}

template <class T>
std::unique_ptr<Network<T>> make_network(ModelKind kind, std::size_t dim, std::uint64_t seed) {
  auto net = make_network<T>(kind, dim);
  Rng rng(seed);
  auto& blobs = net->params().blobs;
  for (std::size_t i = 0; i < blobs.size(); i += 2) {
    // Weight blob followed by its bias; fan-in is the weight's leading size
    // (9 for a 3x3 kernel).
    const auto& shape = blobs[i].shape;
    const std::size_t fan_in = kind == ModelKind::Cnn && blobs[i].name.starts_with("conv") ? 9 : shape[0];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : blobs[i].data) x = static_cast<T>(rng.uniform(-bound, bound));
    for (auto& x : blobs[i + 1].data) x = static_cast<T>(rng.uniform(-bound, bound));
  }
  return net;
}

template <class To, class From>
std::unique_ptr<Network<To>> convert_network(const Network<From>& net) {
  auto out = make_network<To>(net.kind(), net.dim());
  auto& dst = out->params().blobs;
  const auto& src = net.params().blobs;
  for (std::size_t i = 0; i < src.size(); ++i)
    std::transform(src[i].data.begin(), src[i].data.end(), dst[i].data.begin(),
                   [](From v) { return static_cast<To>(v); });
  return out;
}

// ---------------------------------------------------------------- loss

template <class T>
T cosine(std::span<const T> a, std::span<const T> b) {
  const auto& k = simd::kernels<T>();
  const T na = std::sqrt(k.dot(a.data(), a.data(), a.size()));
  const T nb = std::sqrt(k.dot(b.data(), b.data(), b.size()));
  if (na == T(0) || nb == T(0)) throw Error(Errc::ZeroVector, "cosine of a zero vector");
  return k.dot(a.data(), b.data(), a.size()) / (na * nb);
}

template <class T>
T margin_loss(std::span<const T> pred, std::span<const T> correct, std::span<const std::span<const T>> negatives,
              std::span<T> grad) {
  const std::size_t n = pred.size();
  if (correct.size() != n || grad.size() != n) throw Error(Errc::ShapeError, "margin_loss: length mismatch");
  const auto& k = simd::kernels<T>();
  const T pnorm = std::sqrt(k.dot(pred.data(), pred.data(), n));
  if (pnorm == T(0)) throw Error(Errc::ZeroVector, "predicted embedding has zero norm");

  // d cos(a, p) / dp = a / (|a||p|) - cos(a, p) p / |p|^2
  auto cos_and_norm = [&](std::span<const T> a, T& anorm) {
    anorm = std::sqrt(k.dot(a.data(), a.data(), n));
    if (anorm == T(0)) throw Error(Errc::ZeroVector, "answer embedding has zero norm");
    return k.dot(a.data(), pred.data(), n) / (anorm * pnorm);
  };
  auto add_dcos = [&](std::span<const T> a, T anorm, T cos_ap, T sign) {
    k.axpy(sign / (anorm * pnorm), a.data(), grad.data(), n);
    k.axpy(-sign * cos_ap / (pnorm * pnorm), pred.data(), grad.data(), n);
  };

  std::fill(grad.begin(), grad.end(), T(0));
  T c_norm;
  const T cos_c = cos_and_norm(correct, c_norm);
  T loss = T(0);
  std::size_t active = 0;
  for (const auto& neg : negatives) {
    if (neg.size() != n) throw Error(Errc::ShapeError, "margin_loss: negative length mismatch");
    T neg_norm;
    const T cos_i = cos_and_norm(neg, neg_norm);
    const T term = T(1) + cos_i - cos_c;
    if (term > T(0)) {
      loss += term;
      add_dcos(neg, neg_norm, cos_i, T(1));
      ++active;
    }
  }
  if (active > 0) add_dcos(correct, c_norm, cos_c, -static_cast<T>(active));
  return loss;
}

// ---------------------------------------------------------------- Adam

template <class T>
Adam<T>::Adam(const ParamSet<T>& like, AdamConfig<T> config)
    : config_(config), m_(like.zeros_like()), v_(like.zeros_like()) {}

template <class T>
void Adam<T>::step(ParamSet<T>& params, const ParamSet<T>& grads) {
  if (!params.same_shape(m_) || !grads.same_shape(m_)) throw Error(Errc::ShapeError, "Adam: shape mismatch");
  ++t_;
  const double t = static_cast<double>(t_);
  simd::AdamCoeffs<T> c{config_.lr,
                        config_.beta1,
                        config_.beta2,
                        T(1) - config_.beta1,
                        T(1) - config_.beta2,
                        static_cast<T>(1.0 - std::pow(static_cast<double>(config_.beta1), t)),
                        static_cast<T>(1.0 - std::pow(static_cast<double>(config_.beta2), t)),
                        config_.eps};
  const auto& k = simd::kernels<T>();
  for (std::size_t i = 0; i < params.blobs.size(); ++i) {
    k.adam(params.blobs[i].data.data(), m_.blobs[i].data.data(), v_.blobs[i].data.data(),
           grads.blobs[i].data.data(), params.blobs[i].data.size(), c);
  }
}

// ---------------------------------------------------------------- checks

double relative_error(double analytic, double numeric) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double loss_of(const Network<double>& net, std::span<const double> input, std::span<const double> correct,
               const std::vector<std::span<const double>>& negs, Workspace<double>& ws, std::vector<double>& out,
               std::vector<double>& grad) {
  net.forward(input, ws, out);
  return margin_loss<double>(out, correct, negs, grad);
}

std::vector<std::span<const double>> spans(const std::vector<std::vector<double>>& v) {
  std::vector<std::span<const double>> out;
  for (const auto& x : v) out.emplace_back(x);
  return out;
}

}  // namespace

GradCheckResult grad_check(Network<double>& net, std::span<const double> input, std::span<const double> correct,
                           const std::vector<std::vector<double>>& negatives, double tolerance,
                           std::size_t min_entries, double h, std::uint64_t seed) {
  const auto negs = spans(negatives);
  Workspace<double> ws;
  std::vector<double> out(net.dim()), dpred(net.dim());
  loss_of(net, input, correct, negs, ws, out, dpred);
  ParamSet<double> grads = net.params().zeros_like();
  net.backward(input, ws, dpred, grads);

  const std::size_t total = net.params().count();
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  if (total > min_entries) {
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(min_entries);
    std::sort(idx.begin(), idx.end());
  }

  GradCheckResult res;
  for (std::size_t i : idx) {
    double& p = net.params().flat(i);
    const double saved = p;
    p = saved + h;
    const double lp = loss_of(net, input, correct, negs, ws, out, dpred);
    p = saved - h;
    const double lm = loss_of(net, input, correct, negs, ws, out, dpred);
    p = saved;
    const double numeric = (lp - lm) / (2 * h);
    res.max_rel_error = std::max(res.max_rel_error, relative_error(grads.flat(i), numeric));
    ++res.checked;
  }
  res.passed = res.max_rel_error < tolerance;
  return res;
}

GradCheckResult grad_check_loss(std::span<const double> pred, std::span<const double> correct,
                                const std::vector<std::vector<double>>& negatives, double tolerance, double h) {
  const auto negs = spans(negatives);
  std::vector<double> p(pred.begin(), pred.end()), grad(p.size()), scratch(p.size());
  margin_loss<double>(p, correct, negs, grad);
  GradCheckResult res;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double lp = margin_loss<double>(p, correct, negs, scratch);
    p[i] = saved - h;
    const double lm = margin_loss<double>(p, correct, negs, scratch);
    p[i] = saved;
    res.max_rel_error = std::max(res.max_rel_error, relative_error(grad[i], (lp - lm) / (2 * h)));
    ++res.checked;
  }
  res.passed = res.max_rel_error < tolerance;
  return res;
}

// ---------------------------------------------------------------- checkpoints

void save_checkpoint(const Network<float>& net, const std::filesystem::path& path) {
  std::string buf(kCheckpointMagic, 4);
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put_u32(kCheckpointVersion);
  put_u32(static_cast<std::uint32_t>(net.kind()));
  put_u32(static_cast<std::uint32_t>(net.dim()));
  for (const auto& b : net.params().blobs)
    for (float x : b.data) put_u32(std::bit_cast<std::uint32_t>(x));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

std::unique_ptr<Network<float>> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto u32 = [&]() {
    if (bytes.size() - pos < 4) throw Error(Errc::TruncatedFile, "checkpoint ends early");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    pos += 4;
    return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
  };
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw Error(Errc::BadMagic, path.string() + " is not a BLMP checkpoint");
  pos = 4;
  const std::uint32_t version = u32();
  if (version != kCheckpointVersion) throw Error(Errc::VersionMismatch, "checkpoint version " + std::to_string(version));
  const std::uint32_t kind = u32();
  if (kind != static_cast<std::uint32_t>(ModelKind::Cnn) && kind != static_cast<std::uint32_t>(ModelKind::Ffnn))
    throw Error(Errc::ParseError, "unknown model kind code " + std::to_string(kind));
  const std::uint32_t dim = u32();
  auto net = make_network<float>(static_cast<ModelKind>(kind), dim);
  for (auto& b : net->params().blobs)
    for (float& x : b.data) x = std::bit_cast<float>(u32());
  if (pos != bytes.size()) throw Error(Errc::DimMismatch, "checkpoint has trailing bytes");
  return net;
}

// ---------------------------------------------------------------- instantiations

template class ParamSet<float>;
template class ParamSet<double>;
template class Network<float>;
template class Network<double>;
template class CnnNetwork<float>;
template class CnnNetwork<double>;
template class FfnnNetwork<float>;
template class FfnnNetwork<double>;
template class Adam<float>;
template class Adam<double>;
template std::unique_ptr<Network<float>> make_network<float>(ModelKind, std::size_t);
template std::unique_ptr<Network<double>> make_network<double>(ModelKind, std::size_t);
template std::unique_ptr<Network<float>> make_network<float>(ModelKind, std::size_t, std::uint64_t);
template std::unique_ptr<Network<double>> make_network<double>(ModelKind, std::size_t, std::uint64_t);
template std::unique_ptr<Network<double>> convert_network<double, float>(const Network<float>&);
template std::unique_ptr<Network<float>> convert_network<float, double>(const Network<double>&);
template float margin_loss<float>(std::span<const float>, std::span<const float>,
                                  std::span<const std::span<const float>>, std::span<float>);
template double margin_loss<double>(std::span<const double>, std::span<const double>,
                                    std::span<const std::span<const double>>, std::span<double>);
template float cosine<float>(std::span<const float>, std::span<const float>);
template double cosine<double>(std::span<const double>, std::span<const double>);

}  // namespace blm
