#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modelcomp/core.hpp"
#include "modelcomp/filtering.hpp"

namespace modelcomp {

/// One model's classification claim about one image.
struct ClassLabel {
  std::string image;
  int category = 0;
  double score = 1.0;
  std::optional<ProbVector> probs;
  std::string model;
};

/// All models' votes for one image. Model ids must be distinct.
struct ClassVote {
  struct Entry {
    std::string model;
    int category = 0;
    std::optional<ProbVector> probs;
  };

  std::string image;
  std::vector<Entry> votes;

  void validate() const;
};

enum class TieRule {
  abstain,     // a tie for first place yields no pseudo-label
  mean_prob,   // break the tie by the highest mean probability, else abstain
};

TieRule tie_rule_from_string(const std::string& name);

/// Majority voting: the category with strictly the most votes wins; ties for
/// first place abstain (nullopt) unless resolved by the tie rule. Abstained
/// images are excluded from the pseudo-label set.
std::optional<int> majority_vote(const ClassVote& vote, TieRule tie = TieRule::abstain);

/// Regroups per-model label lists into one ClassVote per image, in first-seen
/// image order. A model voting twice for one image is rejected.
std::vector<ClassVote> collect_votes(const std::vector<std::vector<ClassLabel>>& per_model);

/// Runs majority_vote over every image and keeps the non-abstained results.
std::vector<ClassLabel> aggregate_classification(
    const std::vector<std::vector<ClassLabel>>& per_model, TieRule tie = TieRule::abstain);

}  // namespace modelcomp
