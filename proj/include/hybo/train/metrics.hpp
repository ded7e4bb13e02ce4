#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hybo::train {

// P(score+ > score-) + P(tie)/2 via the Mann-Whitney rank statistic.
double roc_auc(const std::vector<double>& positives, const std::vector<double>& negatives);

// Mean over classes of per-class F1; classes absent from both predictions and
// labels are skipped.
double f1_macro(const std::vector<std::uint32_t>& predicted, const std::vector<std::uint32_t>& truth,
                std::size_t num_classes);

}  // namespace hybo::train
