#pragma once

#include <map>
#include <span>

#include "flamma/learner.hpp"

namespace flamma::analysis {

// Fraction of argmax-correct predictions; ties go to the lower class index.
double accuracy(const learner::ModelSpec& spec, const learner::ParameterVector& w,
                const learner::Batch& test);

// Population variance (divide by n) on whatever scale the inputs use.
// Records feed accuracies in percent, giving percentage points squared.
double accuracy_variance(const std::map<int, double>& per_client);
double accuracy_variance(std::span<const double> values);

}  // namespace flamma::analysis
