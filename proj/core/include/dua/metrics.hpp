#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dua::eval {

/// One context with its candidates' scores and binary relevance labels.
struct RankedGroup {
  std::size_t context_id = 0;
  std::vector<double> scores;
  std::vector<int> labels;
  std::string category;

  std::size_t size() const noexcept { return scores.size(); }
  std::size_t positives() const;
};

/// Candidate indices by descending score; ties keep input order.
/// Throws ContractError on NaN scores or an empty group.
std::vector<std::size_t> rank_group(const RankedGroup& group);

// The per-group metrics return nullopt for groups without a positive
// candidate; such groups are skipped by every average.

/// Positives ranked within the top k over all positives. Requires k <= n.
std::optional<double> recall_at_k(const RankedGroup& group, std::size_t k);
std::optional<double> average_precision(const RankedGroup& group);
std::optional<double> reciprocal_rank(const RankedGroup& group);
std::optional<double> precision_at_1(const RankedGroup& group);

struct MetricsReport {
  double map = 0;
  double mrr = 0;
  double p_at_1 = 0;
  double r_at_1 = 0;
  double r_at_2 = 0;
  double r_at_5 = 0;
  std::size_t group_size = 0;  // n of R_n@k
  std::size_t total_groups = 0;
  std::size_t scored_groups = 0;
  std::size_t skipped_groups = 0;
  std::map<std::string, MetricsReport> per_category;

  /// Looks up a metric by name: MAP, MRR, P@1, R@1, R@2, R@5.
  double metric(const std::string& name) const;

  /// Aligned human-readable table.
  std::string table() const;
  /// "key=value" lines, one metric per line, categories prefixed.
  std::string key_values() const;
};

/// Means over non-skipped groups. R_n@k with k > n is computed at k = n.
/// Per-category sub-reports are produced when any group has a category.
MetricsReport summarize(const std::vector<RankedGroup>& groups);

bool is_metric_name(const std::string& name);

}  // namespace dua::eval
