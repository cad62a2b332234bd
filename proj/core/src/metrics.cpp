#include "dua/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "dua/error.hpp"

namespace dua::eval {

std::size_t RankedGroup::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

std::vector<std::size_t> rank_group(const RankedGroup& group) {
  if (group.scores.empty()) throw ContractError("rank_group: empty group");
  if (group.scores.size() != group.labels.size()) throw ContractError("rank_group: scores and labels differ in length");
  for (double s : group.scores) {
    if (std::isnan(s)) throw ContractError("rank_group: NaN score in group " + std::to_string(group.context_id));
  }
  std::vector<std::size_t> order(group.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return group.scores[a] > group.scores[b]; });
  return order;
}

namespace {

// 1-based ranks of the positives, ascending.
std::vector<std::size_t> positive_ranks(const RankedGroup& group) {
  const auto order = rank_group(group);
  std::vector<std::size_t> ranks;
  for (std::size_t r = 0; r < order.size(); ++r)
    if (group.labels[order[r]] == 1) ranks.push_back(r + 1);
  return ranks;
}

}  // namespace

std::optional<double> recall_at_k(const RankedGroup& group, std::size_t k) {
  if (k == 0 || k > group.size()) {
    throw ContractError("recall_at_k: k = " + std::to_string(k) + " for group of " + std::to_string(group.size()));
  }
  const auto ranks = positive_ranks(group);
  if (ranks.empty()) return std::nullopt;
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::optional<double> average_precision(const RankedGroup& group) {
  const auto ranks = positive_ranks(group);
  if (ranks.empty()) return std::nullopt;
  double total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) total += static_cast<double>(i + 1) / static_cast<double>(ranks[i]);
  return total / static_cast<double>(ranks.size());
}

std::optional<double> reciprocal_rank(const RankedGroup& group) {
  const auto ranks = positive_ranks(group);
  if (ranks.empty()) return std::nullopt;
  return 1.0 / static_cast<double>(ranks.front());
}

std::optional<double> precision_at_1(const RankedGroup& group) {
  if (group.positives() == 0) return std::nullopt;
  return group.labels[rank_group(group).front()] == 1 ? 1.0 : 0.0;
}

namespace {

MetricsReport summarize_flat(const std::vector<const RankedGroup*>& groups) {
  MetricsReport r;
  r.total_groups = groups.size();
  for (const RankedGroup* g : groups) {
    r.group_size = std::max(r.group_size, g->size());
    const auto ap = average_precision(*g);
    if (!ap) {
      ++r.skipped_groups;
      continue;
    }
    ++r.scored_groups;
    const std::size_t n = g->size();
    r.map += *ap;
    r.mrr += *reciprocal_rank(*g);
    r.p_at_1 += *precision_at_1(*g);
    r.r_at_1 += *recall_at_k(*g, std::min<std::size_t>(1, n));
    r.r_at_2 += *recall_at_k(*g, std::min<std::size_t>(2, n));
    r.r_at_5 += *recall_at_k(*g, std::min<std::size_t>(5, n));
  }
  if (r.scored_groups) {
    const double d = static_cast<double>(r.scored_groups);
    for (double* m : {&r.map, &r.mrr, &r.p_at_1, &r.r_at_1, &r.r_at_2, &r.r_at_5}) *m /= d;
  }
  return r;
}

}  // namespace

MetricsReport summarize(const std::vector<RankedGroup>& groups) {
  std::vector<const RankedGroup*> all;
  std::map<std::string, std::vector<const RankedGroup*>> by_category;
  for (const auto& g : groups) {
    all.push_back(&g);
    if (!g.category.empty()) by_category[g.category].push_back(&g);
  }
  MetricsReport r = summarize_flat(all);
  for (const auto& [cat, members] : by_category) r.per_category.emplace(cat, summarize_flat(members));
  return r;
}

double MetricsReport::metric(const std::string& name) const {
  if (name == "MAP") return map;
  if (name == "MRR") return mrr;
  if (name == "P@1") return p_at_1;
  if (name == "R@1") return r_at_1;
  if (name == "R@2") return r_at_2;
  if (name == "R@5") return r_at_5;
  throw ContractError("unknown metric '" + name + "' (expected MAP, MRR, P@1, R@1, R@2 or R@5)");
}

bool is_metric_name(const std::string& name) {
  return name == "MAP" || name == "MRR" || name == "P@1" || name == "R@1" || name == "R@2" || name == "R@5";
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void table_row(std::string& out, const std::string& label, const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8zu %8zu\n", label.c_str(), r.map,
                r.mrr, r.p_at_1, r.r_at_1, r.r_at_2, r.r_at_5, r.scored_groups, r.skipped_groups);
  out += buf;
}

void kv_block(std::string& out, const std::string& prefix, const MetricsReport& r) {
  const std::string n = std::to_string(r.group_size);
  out += prefix + "MAP=" + fixed(r.map) + "\n";
  out += prefix + "MRR=" + fixed(r.mrr) + "\n";
  out += prefix + "P@1=" + fixed(r.p_at_1) + "\n";
  out += prefix + "R" + n + "@1=" + fixed(r.r_at_1) + "\n";
  out += prefix + "R" + n + "@2=" + fixed(r.r_at_2) + "\n";
  out += prefix + "R" + n + "@5=" + fixed(r.r_at_5) + "\n";
  out += prefix + "groups_total=" + std::to_string(r.total_groups) + "\n";
  out += prefix + "groups_scored=" + std::to_string(r.scored_groups) + "\n";
  out += prefix + "groups_skipped=" + std::to_string(r.skipped_groups) + "\n";
}

}  // namespace

std::string MetricsReport::table() const {
  const std::string n = std::to_string(group_size);
  char head[256];
  std::snprintf(head, sizeof head, "%-16s %8s %8s %8s %8s %8s %8s %8s %8s\n", "", "MAP", "MRR", "P@1",
                ("R" + n + "@1").c_str(), ("R" + n + "@2").c_str(), ("R" + n + "@5").c_str(), "scored", "skipped");
  std::string out = head;
  table_row(out, "all", *this);
  for (const auto& [cat, r] : per_category) table_row(out, cat, r);
  return out;
}

std::string MetricsReport::key_values() const {
  std::string out;
  kv_block(out, "", *this);
  for (const auto& [cat, r] : per_category) kv_block(out, "category." + cat + ".", r);
  return out;
}

}  // namespace dua::eval
