#include "modelcomp/classification.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

namespace modelcomp {

void ClassVote::validate() const {
  if (votes.empty()) {
    throw ValidationError("vote for image '" + image + "' has no entries");
  }
  std::set<std::string> models;
  for (const auto& v : votes) {
    if (!models.insert(v.model).second) {
      throw ValidationError("model '" + v.model + "' voted twice for image '" + image + "'");
    }
  }
}

TieRule tie_rule_from_string(const std::string& name) {
  if (name == "abstain") return TieRule::abstain;
  if (name == "mean-prob") return TieRule::mean_prob;
  throw ValidationError("unknown tie rule '" + name + "'");
}

std::optional<int> majority_vote(const ClassVote& vote, TieRule tie) {
  vote.validate();

  std::map<int, int> counts;   // ordered so iteration is deterministic
  for (const auto& v : vote.votes) {
    ++counts[v.category];
  }

  int best = 0;
  std::vector<int> leaders;
  for (const auto& [category, count] : counts) {
    if (count > best) {
      best = count;
      leaders.assign(1, category);
    } else if (count == best) {
      leaders.push_back(category);
    }
  }
  if (leaders.size() == 1) {
    return leaders.front();
  }
  if (tie == TieRule::abstain) {
    return std::nullopt;
  }

  // mean-prob: among the tied leaders, the highest mean probability over the
  // votes that carry probability vectors wins; no coverage or an exact tie
  // of the means falls back to abstention.
  double best_mean = -1.0;
  std::optional<int> winner;
  bool tied_means = false;
  for (int category : leaders) {
    double sum = 0.0;
    int covered = 0;
    for (const auto& v : vote.votes) {
      if (v.probs && static_cast<std::size_t>(category - 1) < v.probs->size()) {
        sum += v.probs->probs()[category - 1];
        ++covered;
      }
    }
    if (covered == 0) {
      continue;
    }
    const double mean = sum / covered;
    if (mean > best_mean) {
      best_mean = mean;
      winner = category;
      tied_means = false;
    } else if (mean == best_mean) {
      tied_means = true;
    }
  }
  if (tied_means) {
    return std::nullopt;
  }
  return winner;
}

std::vector<ClassVote> collect_votes(const std::vector<std::vector<ClassLabel>>& per_model) {
  std::vector<ClassVote> votes;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& labels : per_model) {
    for (const auto& label : labels) {
      auto [it, fresh] = index.try_emplace(label.image, votes.size());
      if (fresh) {
        votes.push_back(ClassVote{label.image, {}});
      }
      votes[it->second].votes.push_back({label.model, label.category, label.probs});
    }
  }
  for (const auto& v : votes) {
    v.validate();
  }
  return votes;
}

std::vector<ClassLabel> aggregate_classification(
    const std::vector<std::vector<ClassLabel>>& per_model, TieRule tie) {
  std::vector<ClassLabel> out;
  for (const auto& vote : collect_votes(per_model)) {
    if (auto category = majority_vote(vote, tie)) {
      out.push_back({vote.image, *category, 1.0, std::nullopt, ""});
    }
  }
  return out;
}

}  // namespace modelcomp
