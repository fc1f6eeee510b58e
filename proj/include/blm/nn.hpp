#pragma once

// Two fixed architectures mapping a 7 x dim context to a dim-vector, the
// max-margin cosine loss, Adam, finite-difference gradient checks and
// checkpoints. Templated on the scalar type: float for training, double for
// gradient checks.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace blm {

enum class ModelKind : std::uint8_t { Cnn = 1, Ffnn = 2 };

std::string_view to_string(ModelKind k) noexcept;
ModelKind parse_model_kind(std::string_view s);

inline constexpr std::size_t kInputRows = 7;

template <class T>
struct Blob {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> data;
};

template <class T>
class ParamSet {
 public:
  std::vector<Blob<T>> blobs;

  std::size_t count() const noexcept;
  void zero() noexcept;
  ParamSet zeros_like() const;
  bool same_shape(const ParamSet& other) const noexcept;

  // Flat view helpers for checks: index over blobs in declaration order.
  T& flat(std::size_t i);
  const T& flat(std::size_t i) const;
};

// Per-call scratch (activations). Reusable across calls on the same network.
template <class T>
struct Workspace {
  std::vector<std::vector<T>> buf;
};

template <class T>
class Network {
 public:
  virtual ~Network() = default;

  virtual ModelKind kind() const noexcept = 0;
  std::size_t dim() const noexcept { return dim_; }
  std::size_t input_size() const noexcept { return kInputRows * dim_; }

  ParamSet<T>& params() noexcept { return params_; }
  const ParamSet<T>& params() const noexcept { return params_; }

  // input: 7 x dim row-major; out: dim. Throws ShapeError.
  virtual void forward(std::span<const T> input, Workspace<T>& ws, std::span<T> out) const = 0;
  // Accumulates parameter gradients for the forward pass recorded in ws.
  virtual void backward(std::span<const T> input, const Workspace<T>& ws, std::span<const T> dout,
                        ParamSet<T>& grads) const = 0;

  std::vector<T> forward(std::span<const T> input) const;

 protected:
  explicit Network(std::size_t dim) : dim_(dim) {}
  void check_input(std::span<const T> input) const;

  std::size_t dim_;
  ParamSet<T> params_;
};

// Three valid 3x3 stride-1 single-channel convolutions with ReLU, then a
// dense layer (dim-6) -> dim. Blobs: conv{1,2,3}.{w,b}, fc.w (in x out), fc.b.
template <class T>
class CnnNetwork final : public Network<T> {
 public:
  explicit CnnNetwork(std::size_t dim);
  ModelKind kind() const noexcept override { return ModelKind::Cnn; }
  void forward(std::span<const T> input, Workspace<T>& ws, std::span<T> out) const override;
  void backward(std::span<const T> input, const Workspace<T>& ws, std::span<const T> dout,
                ParamSet<T>& grads) const override;
  using Network<T>::forward;
};

// 7*dim -> floor(3.5*dim) -> floor(3.5*dim) -> dim, ReLU after the first two.
// Blobs: fc{1,2,3}.{w,b}, weights stored in x out.
template <class T>
class FfnnNetwork final : public Network<T> {
 public:
  explicit FfnnNetwork(std::size_t dim);
  ModelKind kind() const noexcept override { return ModelKind::Ffnn; }
  void forward(std::span<const T> input, Workspace<T>& ws, std::span<T> out) const override;
  void backward(std::span<const T> input, const Workspace<T>& ws, std::span<const T> dout,
                ParamSet<T>& grads) const override;
  using Network<T>::forward;

  std::size_t hidden() const noexcept;
};

std::size_t cnn_conv_width(std::size_t dim, int layer);  // width after `layer` convolutions
std::size_t cnn_param_count(std::size_t dim);
std::size_t ffnn_hidden(std::size_t dim);
std::size_t ffnn_param_count(std::size_t dim);

// Zero-initialized network of the given kind.
template <class T>
std::unique_ptr<Network<T>> make_network(ModelKind kind, std::size_t dim);

// Fan-in scaled uniform init U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights
// and biases. Values are drawn in double, so float and double networks built
// from one seed hold the same (rounded) parameters.
template <class T>
std::unique_ptr<Network<T>> make_network(ModelKind kind, std::size_t dim, std::uint64_t seed);

template <class To, class From>
std::unique_ptr<Network<To>> convert_network(const Network<From>& net);

// Max-margin cosine loss
//   sum_i max(0, 1 + cos(neg_i, pred) - cos(correct, pred))
// Writes d loss / d pred into grad (size dim). Inactive hinges (<= 0)
// contribute no gradient. Throws ZeroVector for a zero pred.
template <class T>
T margin_loss(std::span<const T> pred, std::span<const T> correct, std::span<const std::span<const T>> negatives,
              std::span<T> grad);

template <class T>
T cosine(std::span<const T> a, std::span<const T> b);

template <class T>
struct AdamConfig {
  T lr = T(0.001);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

template <class T>
class Adam {
 public:
  Adam(const ParamSet<T>& like, AdamConfig<T> config = {});

  // Throws ShapeError when params/grads disagree with the moment shapes.
  void step(ParamSet<T>& params, const ParamSet<T>& grads);

  std::uint64_t steps() const noexcept { return t_; }
  const AdamConfig<T>& config() const noexcept { return config_; }
  const ParamSet<T>& first_moment() const noexcept { return m_; }
  const ParamSet<T>& second_moment() const noexcept { return v_; }

 private:
  AdamConfig<T> config_;
  ParamSet<T> m_;
  ParamSet<T> v_;
  std::uint64_t t_ = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

// Central differences on a seeded random subset of at least min_entries
// parameters (all of them when fewer exist) against backprop, on the margin
// loss of a single example.
GradCheckResult grad_check(Network<double>& net, std::span<const double> input, std::span<const double> correct,
                           const std::vector<std::vector<double>>& negatives, double tolerance,
                           std::size_t min_entries = 200, double h = 1e-5, std::uint64_t seed = 0);

// Same check for margin_loss with respect to pred.
GradCheckResult grad_check_loss(std::span<const double> pred, std::span<const double> correct,
                                const std::vector<std::vector<double>>& negatives, double tolerance,
                                double h = 1e-5);

double relative_error(double analytic, double numeric) noexcept;

inline constexpr char kCheckpointMagic[4] = {'B', 'L', 'M', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Network<float>& net, const std::filesystem::path& path);
std::unique_ptr<Network<float>> load_checkpoint(const std::filesystem::path& path);

}  // namespace blm
