#include "flamma/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flamma/errors.hpp"
#include "flamma/rng.hpp"

namespace flamma::learner {

bool ParameterVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double ParameterVector::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

double ParameterVector::norm() const { return std::sqrt(squared_norm()); }

void ParameterVector::axpy(double scale, const ParameterVector& other) {
  if (other.size() != size()) throw InvalidArgument("axpy: dimension mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
}

ParameterVector operator-(const ParameterVector& a, const ParameterVector& b) {
  if (a.size() != b.size()) throw InvalidArgument("subtract: dimension mismatch");
  ParameterVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

double distance(const ParameterVector& a, const ParameterVector& b) { return (a - b).norm(); }

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::logistic: return "logistic";
    case ModelKind::mlp: return "mlp";
    case ModelKind::quadratic: return "quadratic";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "logistic") return ModelKind::logistic;
  if (name == "mlp") return ModelKind::mlp;
  if (name == "quadratic") return ModelKind::quadratic;
  throw InvalidArgument("unknown model kind '" + name + "'");
}

ModelSpec ModelSpec::logistic(std::size_t input_dim, std::size_t num_classes) {
  ModelSpec s;
  s.kind = ModelKind::logistic;
  s.input_dim = input_dim;
  s.num_classes = num_classes;
  return s;
}

ModelSpec ModelSpec::mlp(std::size_t input_dim, std::size_t num_classes, std::size_t hidden_dim) {
  ModelSpec s;
  s.kind = ModelKind::mlp;
  s.input_dim = input_dim;
  s.num_classes = num_classes;
  s.hidden_dim = hidden_dim;
  return s;
}

ModelSpec ModelSpec::quadratic(ParameterVector target) {
  ModelSpec s;
  s.kind = ModelKind::quadratic;
  s.input_dim = target.size();
  s.num_classes = 1;
  s.quadratic_target = std::move(target);
  return s;
}

std::size_t ModelSpec::parameter_count() const {
  switch (kind) {
    case ModelKind::logistic: return num_classes * input_dim + num_classes;
    case ModelKind::mlp:
      return hidden_dim * input_dim + hidden_dim + num_classes * hidden_dim + num_classes;
    case ModelKind::quadratic: return quadratic_target.size();
  }
  return 0;
}

void ModelSpec::validate() const {
  if (kind == ModelKind::quadratic) {
    if (quadratic_target.empty()) throw InvalidArgument("quadratic model needs a target");
    if (!quadratic_target.all_finite()) throw InvalidArgument("quadratic target is not finite");
    return;
  }
  if (input_dim == 0) throw InvalidArgument("input_dim must be positive");
  if (num_classes == 0) throw InvalidArgument("num_classes must be positive");
  if (kind == ModelKind::mlp && hidden_dim == 0) throw InvalidArgument("hidden_dim must be positive");
}

Batch Batch::subset(std::span<const std::size_t> rows) const {
  Batch out;
  out.dim = dim;
  out.features.reserve(rows.size() * dim);
  out.labels.reserve(rows.size());
  for (auto r : rows) {
    if (r >= size()) throw InvalidArgument("Batch::subset: row index out of range");
    auto x = row(r);
    out.features.insert(out.features.end(), x.begin(), x.end());
    out.labels.push_back(labels[r]);
  }
  return out;
}

namespace {

void check_params(const ModelSpec& spec, const ParameterVector& w) {
  spec.validate();
  if (w.size() != spec.parameter_count())
    throw InvalidArgument("parameter vector has " + std::to_string(w.size()) +
                          " entries, model expects " + std::to_string(spec.parameter_count()));
}

void check_batch(const ModelSpec& spec, const Batch& batch) {
  if (!spec.is_classifier()) return;
  if (batch.empty()) throw InvalidArgument("classifier loss needs a non-empty batch");
  if (batch.dim != spec.input_dim)
    throw InvalidArgument("batch dimension " + std::to_string(batch.dim) +
                          " does not match model input " + std::to_string(spec.input_dim));
  if (batch.features.size() != batch.size() * batch.dim)
    throw InvalidArgument("batch feature matrix has the wrong size");
  for (int y : batch.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= spec.num_classes)
      throw InvalidArgument("label " + std::to_string(y) + " outside [0, num_classes)");
}

// scores = W x + b for W stored row-major [rows x cols] at `offset`.
void affine(std::span<const double> w, std::size_t offset, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> out) {
  const double* W = w.data() + offset;
  const double* b = W + rows * cols;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = b[r];
    const double* wr = W + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
    out[r] = s;
  }
}

// Softmax in place; returns log-sum-exp of the input scores.
double softmax_inplace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return m + std::log(sum);
}

struct Workspace {
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  std::vector<double> scores;
};

// Forward pass; leaves logits in ws.scores (and activations for the MLP).
void forward(const ModelSpec& spec, std::span<const double> w, std::span<const double> x,
             Workspace& ws) {
  const std::size_t C = spec.num_classes;
  const std::size_t d = spec.input_dim;
  ws.scores.resize(C);
  if (spec.kind == ModelKind::logistic) {
    affine(w, 0, C, d, x, ws.scores);
    return;
  }
  const std::size_t H = spec.hidden_dim;
  ws.hidden_pre.resize(H);
  ws.hidden.resize(H);
  affine(w, 0, H, d, x, ws.hidden_pre);
  for (std::size_t j = 0; j < H; ++j) ws.hidden[j] = ws.hidden_pre[j] > 0.0 ? ws.hidden_pre[j] : 0.0;
  affine(w, H * d + H, C, H, ws.hidden, ws.scores);
}

double classifier_loss(const ModelSpec& spec, const ParameterVector& w, const Batch& batch,
                       ParameterVector* grad) {
  const std::size_t C = spec.num_classes;
  const std::size_t d = spec.input_dim;
  const std::size_t H = spec.hidden_dim;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Workspace ws;
  std::vector<double> dhidden;
  double total = 0.0;
  auto wv = w.span();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto x = batch.row(i);
    const int y = batch.labels[i];
    forward(spec, wv, x, ws);
    const double true_score = ws.scores[y];
    const double lse = softmax_inplace(ws.scores);
    total += lse - true_score;
    if (!grad) continue;
    // ws.scores now holds probabilities; dL/dz = p - onehot.
    ws.scores[y] -= 1.0;
    auto g = grad->span();
    if (spec.kind == ModelKind::logistic) {
      for (std::size_t c = 0; c < C; ++c) {
        const double dz = ws.scores[c] * inv_n;
        double* gw = g.data() + c * d;
        for (std::size_t k = 0; k < d; ++k) gw[k] += dz * x[k];
        g[C * d + c] += dz;
      }
      continue;
    }
    const std::size_t off2 = H * d + H;
    dhidden.assign(H, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      const double dz = ws.scores[c] * inv_n;
      double* gw = g.data() + off2 + c * H;
      const double* w2 = wv.data() + off2 + c * H;
      for (std::size_t j = 0; j < H; ++j) {
        gw[j] += dz * ws.hidden[j];
        dhidden[j] += dz * w2[j];
      }
      g[off2 + C * H + c] += dz;
    }
    for (std::size_t j = 0; j < H; ++j) {
      if (ws.hidden_pre[j] <= 0.0) continue;
      const double dz = dhidden[j];
      double* gw = g.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) gw[k] += dz * x[k];
      g[H * d + j] += dz;
    }
  }
  return total * inv_n;
}

}  // namespace

ParameterVector init_parameters(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParameterVector w(spec.parameter_count());
  if (spec.kind != ModelKind::mlp) return w;
  Rng rng(derive_seed(seed, {0x11117}));
  const std::size_t d = spec.input_dim, H = spec.hidden_dim, C = spec.num_classes;
  const double a1 = std::sqrt(6.0 / static_cast<double>(d + H));
  const double a2 = std::sqrt(6.0 / static_cast<double>(H + C));
  for (std::size_t i = 0; i < H * d; ++i) w[i] = rng.uniform(-a1, a1);
  const std::size_t off2 = H * d + H;
  for (std::size_t i = 0; i < C * H; ++i) w[off2 + i] = rng.uniform(-a2, a2);
  return w;
}

double loss(const ModelSpec& spec, const ParameterVector& w, const Batch& batch) {
  check_params(spec, w);
  if (spec.kind == ModelKind::quadratic) return 0.5 * (w - spec.quadratic_target).squared_norm();
  check_batch(spec, batch);
  return classifier_loss(spec, w, batch, nullptr);
}

ParameterVector gradient(const ModelSpec& spec, const ParameterVector& w, const Batch& batch) {
  check_params(spec, w);
  if (spec.kind == ModelKind::quadratic) return w - spec.quadratic_target;
  check_batch(spec, batch);
  ParameterVector g(w.size());
  classifier_loss(spec, w, batch, &g);
  return g;
}

ParameterVector finite_diff_gradient(const ModelSpec& spec, const ParameterVector& w,
                                     const Batch& batch, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_gradient: h must be > 0");
  ParameterVector probe = w;
  ParameterVector g(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double orig = probe[j];
    probe[j] = orig + h;
    const double up = loss(spec, probe, batch);
    probe[j] = orig - h;
    const double down = loss(spec, probe, batch);
    probe[j] = orig;
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

std::vector<double> predict_scores(const ModelSpec& spec, const ParameterVector& w,
                                   std::span<const double> x) {
  check_params(spec, w);
  if (!spec.is_classifier()) throw InvalidArgument("quadratic models do not classify");
  if (x.size() != spec.input_dim) throw InvalidArgument("input dimension mismatch");
  Workspace ws;
  forward(spec, w.span(), x, ws);
  return ws.scores;
}

int predict(const ModelSpec& spec, const ParameterVector& w, std::span<const double> x) {
  const auto scores = predict_scores(spec, w, x);
  // max_element returns the first maximum, i.e. the lowest class index.
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

ParameterVector local_train(const ModelSpec& spec, const ParameterVector& w0, const Batch& data,
                            const TrainOptions& options) {
  check_params(spec, w0);
  if (options.epochs < 0) throw InvalidArgument("local_train: epochs must be >= 0");
  if (!(options.lr > 0.0) || !std::isfinite(options.lr))
    throw InvalidArgument("local_train: lr must be positive");
  if (!(options.gamma >= 0.0 && options.gamma <= 1.0))
    throw InvalidArgument("local_train: gamma must lie in [0, 1]");
  if (options.batch_size == 0) throw InvalidArgument("local_train: batch_size must be positive");
  if (!(options.prox_mu >= 0.0)) throw InvalidArgument("local_train: prox_mu must be >= 0");
  if (options.prox_mu > 0.0) {
    if (!options.prox_anchor) throw InvalidArgument("local_train: prox_mu > 0 needs an anchor");
    if (options.prox_anchor->size() != w0.size())
      throw InvalidArgument("local_train: anchor dimension mismatch");
  }

  ParameterVector w = w0;
  if (options.epochs == 0) return w;
  const double step = options.lr * options.gamma;

  auto apply = [&](ParameterVector g) {
    if (options.prox_mu > 0.0) g.axpy(options.prox_mu, w - *options.prox_anchor);
    w.axpy(-step, g);
  };

  if (spec.kind == ModelKind::quadratic) {
    for (int e = 0; e < options.epochs; ++e) apply(gradient(spec, w, data));
    return w;
  }
  check_batch(spec, data);

  std::vector<std::size_t> order(data.size());
  for (int e = 0; e < options.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(e)}));
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const Batch mb = data.subset(std::span<const std::size_t>(order).subspan(start, end - start));
      apply(gradient(spec, w, mb));
    }
  }
  return w;
}

}  // namespace flamma::learner
