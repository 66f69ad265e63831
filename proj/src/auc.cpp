#include "creditprint/auc.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "creditprint/errors.hpp"

namespace creditprint {
namespace {

void check(std::span<const double> scores, std::span<const int> labels, std::size_t& pos, std::size_t& neg) {
  if (scores.size() != labels.size()) throw DataError("auc: scores and labels differ in length");
  pos = neg = 0;
  for (int y : labels) {
    if (y == 1)
      ++pos;
    else if (y == 0)
      ++neg;
    else
      throw DataError("auc: labels must be 0 or 1, got " + std::to_string(y));
  }
  if (pos == 0 || neg == 0) throw DataError("auc: both classes must be present");
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t pos = 0, neg = 0;
  check(scores, labels, pos, neg);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Ranks are doubled so that midranks stay integral and the result is exact.
  std::uint64_t doubled_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t doubled_midrank = i + j + 1;  // 2 × mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) doubled_rank_sum += doubled_midrank;
    i = j;
  }
  const std::uint64_t doubled_u = doubled_rank_sum - static_cast<std::uint64_t>(pos) * (pos + 1);
  return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

double auc_pair_count(std::span<const double> scores, std::span<const int> labels) {
  std::size_t pos = 0, neg = 0;
  check(scores, labels, pos, neg);
  std::uint64_t doubled = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j])
        doubled += 2;
      else if (scores[i] == scores[j])
        doubled += 1;
    }
  }
  return static_cast<double>(doubled) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace creditprint
