#pragma once

#include <span>

namespace creditprint {

// Probability that a random positive outscores a random negative, ties
// counted one half. Midrank statistic; throws DataError unless both classes
// are present or when the lengths differ.
double auc(std::span<const double> scores, std::span<const int> labels);

// O(n²) pair counting. Reference implementation for tests.
double auc_pair_count(std::span<const double> scores, std::span<const int> labels);

}  // namespace creditprint
