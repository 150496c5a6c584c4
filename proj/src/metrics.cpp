#include "flamma/metrics.hpp"

#include <vector>

#include "flamma/errors.hpp"

namespace flamma::analysis {

double accuracy(const learner::ModelSpec& spec, const learner::ParameterVector& w,
                const learner::Batch& test) {
  if (test.empty()) throw InvalidArgument("accuracy: empty test set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (learner::predict(spec, w, test.row(i)) == test.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double accuracy_variance(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("accuracy_variance: no accuracies given");
  // Shifted by the first value so identical inputs give exactly zero.
  const double n = static_cast<double>(values.size());
  const double shift = values.front();
  double mean = 0.0;
  for (double v : values) mean += v - shift;
  mean /= n;
  double ss = 0.0;
  for (double v : values) {
    const double dev = (v - shift) - mean;
    ss += dev * dev;
  }
  return ss / n;
}

double accuracy_variance(const std::map<int, double>& per_client) {
  std::vector<double> values;
  values.reserve(per_client.size());
  for (const auto& [id, acc] : per_client) values.push_back(acc);
  return accuracy_variance(values);
}

}  // namespace flamma::analysis
