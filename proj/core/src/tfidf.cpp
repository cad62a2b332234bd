#include "dua/tfidf.hpp"

#include <cmath>
#include <map>
#include <set>

#include "dua/evaluate.hpp"

namespace dua::baseline {
namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ' ';
    out += parts[i];
  }
  return out;
}

}  // namespace

TfidfModel TfidfModel::fit(const std::vector<data::RawDialogue>& corpus) {
  TfidfModel m;
  auto add_document = [&](std::string_view text) {
    const auto tokens = data::tokenize(text);
    for (const auto& t : std::set<std::string>(tokens.begin(), tokens.end())) ++m.df_[t];
    ++m.documents_;
  };
  for (const auto& d : corpus) {
    add_document(join(d.context));
    add_document(d.response);
  }
  return m;
}

std::size_t TfidfModel::df(const std::string& term) const {
  auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

double TfidfModel::idf(const std::string& term) const {
  return std::log((static_cast<double>(documents_) + 1.0) / (static_cast<double>(df(term)) + 1.0)) + 1.0;
}

double TfidfModel::similarity(std::string_view a, std::string_view b) const {
  std::map<std::string, double> va, vb;
  for (auto& t : data::tokenize(a)) va[t] += 1.0;
  for (auto& t : data::tokenize(b)) vb[t] += 1.0;
  double na = 0, nb = 0, dot = 0;
  for (auto& [t, tf] : va) {
    tf *= idf(t);
    na += tf * tf;
  }
  for (auto& [t, tf] : vb) {
    tf *= idf(t);
    nb += tf * tf;
    if (auto it = va.find(t); it != va.end()) dot += it->second * tf;
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double TfidfModel::score(const std::vector<std::string>& context, const std::string& response) const {
  return similarity(join(context), response);
}

eval::MetricsReport evaluate_tfidf(const TfidfModel& model, const std::vector<data::RawDialogue>& test,
                                   std::size_t group_size) {
  eval::check_shared_context(std::span<const data::RawDialogue>(test), group_size);
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> categories;
  bool any_category = false;
  for (const auto& d : test) {
    scores.push_back(model.score(d.context, d.response));
    labels.push_back(d.label);
    categories.push_back(d.category);
    any_category = any_category || !d.category.empty();
  }
  if (!any_category) categories.clear();
  return eval::summarize(eval::group_scores(scores, labels, categories, group_size));
}

}  // namespace dua::baseline
