#include <algorithm>
#include <map>
#include <random>

#include "dtwlmnn/errors.hpp"
#include "dtwlmnn/eval.hpp"

namespace dtwlmnn {

CvPlan::CvPlan(std::size_t folds, std::size_t repetitions, std::uint64_t seed,
               std::vector<std::vector<std::vector<std::size_t>>> assignment)
    : folds_(folds),
      repetitions_(repetitions),
      seed_(seed),
      assignment_(std::move(assignment)) {
  if (assignment_.size() != repetitions_) {
    throw ValidationError("cv plan: repetition count mismatch");
  }
  for (const auto& rep : assignment_) {
    if (rep.size() != folds_) throw ValidationError("cv plan: fold count mismatch");
    std::size_t total = 0;
    for (const auto& fold : rep) total += fold.size();
    if (samples_ == 0) samples_ = total;
    std::vector<bool> seen(total, false);
    for (const auto& fold : rep) {
      for (std::size_t i : fold) {
        if (i >= total || seen[i] || total != samples_) {
          throw ValidationError("cv plan: folds do not partition the samples");
        }
        seen[i] = true;
      }
    }
  }
}

std::vector<std::size_t> CvPlan::train(std::size_t rep, std::size_t fold) const {
  const auto& held_out = test(rep, fold);
  std::vector<std::size_t> out;
  out.reserve(samples_ - held_out.size());
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < samples_; ++i) {
    if (cursor < held_out.size() && held_out[cursor] == i) {
      ++cursor;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

CvPlan make_cv_plan(std::span<const std::size_t> labels, std::size_t folds,
                    std::size_t repetitions, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("cv plan: need at least 2 folds");
  if (folds > labels.size()) {
    throw ValidationError("cv plan: " + std::to_string(folds) +
                          " folds for " + std::to_string(labels.size()) +
                          " samples");
  }
  if (repetitions < 1) throw ValidationError("cv plan: need >= 1 repetition");

  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::vector<std::size_t>>> assignment(repetitions);
  for (auto& rep : assignment) {
    rep.assign(folds, {});
    std::size_t cursor = 0;
    for (auto& [label, members] : by_class) {
      std::vector<std::size_t> order = members;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i : order) {
        rep[cursor].push_back(i);
        cursor = (cursor + 1) % folds;
      }
    }
    for (auto& fold : rep) std::sort(fold.begin(), fold.end());
  }
  return CvPlan(folds, repetitions, seed, std::move(assignment));
}

}  // namespace dtwlmnn
