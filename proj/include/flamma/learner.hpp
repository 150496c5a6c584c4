#pragma once

// Small trainable models with exact gradients: multinomial logistic
// regression, a one-hidden-layer ReLU MLP and the quadratic 0.5*||w - b||^2.
//
// Parameter layouts (row-major, flat):
//   logistic:  W[C x d], bias[C]
//   mlp:       W1[H x d], b1[H], W2[C x H], b2[C]
//   quadratic: w[dim(b)]

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flamma::learner {

class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit ParameterVector(std::vector<double> values) : values_(std::move(values)) {}
  ParameterVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool all_finite() const;
  double norm() const;
  double squared_norm() const;

  // this += scale * other
  void axpy(double scale, const ParameterVector& other);

  bool operator==(const ParameterVector&) const = default;

 private:
  std::vector<double> values_;
};

ParameterVector operator-(const ParameterVector& a, const ParameterVector& b);
double distance(const ParameterVector& a, const ParameterVector& b);

enum class ModelKind { logistic, mlp, quadratic };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

inline constexpr std::size_t kDefaultHiddenDim = 32;

struct ModelSpec {
  ModelKind kind = ModelKind::logistic;
  std::size_t input_dim = 1;
  std::size_t num_classes = 2;
  std::size_t hidden_dim = kDefaultHiddenDim;
  ParameterVector quadratic_target;

  static ModelSpec logistic(std::size_t input_dim, std::size_t num_classes);
  static ModelSpec mlp(std::size_t input_dim, std::size_t num_classes,
                       std::size_t hidden_dim = kDefaultHiddenDim);
  static ModelSpec quadratic(ParameterVector target);

  std::size_t parameter_count() const;
  bool is_classifier() const noexcept { return kind != ModelKind::quadratic; }
  void validate() const;
};

// Row-major feature matrix plus integer labels. Quadratic models ignore it.
struct Batch {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }
  Batch subset(std::span<const std::size_t> rows) const;
};

// Zero weights for logistic, Glorot-uniform for the MLP, zeros for quadratic.
ParameterVector init_parameters(const ModelSpec& spec, std::uint64_t seed);

double loss(const ModelSpec& spec, const ParameterVector& w, const Batch& batch);
ParameterVector gradient(const ModelSpec& spec, const ParameterVector& w, const Batch& batch);
ParameterVector finite_diff_gradient(const ModelSpec& spec, const ParameterVector& w,
                                     const Batch& batch, double h);

// Class scores (logits) for one example.
std::vector<double> predict_scores(const ModelSpec& spec, const ParameterVector& w,
                                   std::span<const double> x);
// argmax of the scores, ties toward the lower class index.
int predict(const ModelSpec& spec, const ParameterVector& w, std::span<const double> x);

struct TrainOptions {
  int epochs = 1;
  double lr = 0.05;
  double gamma = 1.0;
  std::size_t batch_size = 32;
  double prox_mu = 0.0;
  std::optional<ParameterVector> prox_anchor;
  std::uint64_t seed = 0;
};

// `epochs` passes of mini-batch SGD with steps
//   w <- w - lr * gamma * (grad F(w) + prox_mu * (w - anchor)).
// Each epoch reshuffles the rows with a seed derived from (seed, epoch); the
// last partial batch is kept. Quadratic models take one full step per epoch.
ParameterVector local_train(const ModelSpec& spec, const ParameterVector& w0, const Batch& data,
                            const TrainOptions& options);

}  // namespace flamma::learner
