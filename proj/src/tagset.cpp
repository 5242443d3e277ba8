#include "vmr/tagset.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "vmr/error.hpp"

namespace vmr::tagset {
namespace {

// Scores closer than this (relative) are treated as equal, so that
// mathematically identical values reached through different rationals tie.
constexpr double kTieTolerance = 1e-12;

}  // namespace

int TagCollection::total() const {
  int n = 0;
  for (const auto& [_, c] : counts) n += c;
  return n;
}

int UnifiedTagSet::label_id(const std::string& music_id) const {
  auto it = label_of_music.find(music_id);
  if (it == label_of_music.end()) throw DomainError("no label for music " + music_id);
  return label_index.at(it->second);
}

std::vector<TagCollection> build_tag_collections(const corpus::Corpus& corpus) {
  std::map<std::string, TagCollection> by_music;
  for (const auto& p : corpus.pairs()) {
    auto& col = by_music[p.music_id];
    col.music_id = p.music_id;
    for (const auto& t : p.tags) ++col.counts[t];
  }
  std::vector<TagCollection> out;
  for (auto& [_, c] : by_music) out.push_back(std::move(c));
  return out;
}

CorpusTagStats collect_stats(const std::vector<TagCollection>& collections) {
  CorpusTagStats s;
  s.music_count = collections.size();
  for (const auto& c : collections) {
    for (const auto& [tag, _] : c.counts) ++s.doc_freq[tag];
  }
  return s;
}

double tfidf(const TagCollection& tagcol, const CorpusTagStats& stats, const std::string& tag) {
  auto it = tagcol.counts.find(tag);
  if (it == tagcol.counts.end()) {
    throw DomainError("tag '" + tag + "' is not in the collection of music " + tagcol.music_id);
  }
  auto df = stats.doc_freq.find(tag);
  if (df == stats.doc_freq.end()) throw DomainError("tag '" + tag + "' has no document frequency");
  const double tf = static_cast<double>(it->second) / static_cast<double>(tagcol.total());
  const double idf = std::log(static_cast<double>(stats.music_count) / static_cast<double>(df->second + 1));
  return tf * idf;
}

std::string best_tag(const TagCollection& tagcol, const CorpusTagStats& stats) {
  if (tagcol.counts.empty()) throw ValidationError("empty tag collection for music " + tagcol.music_id);
  std::string best;
  double best_score = 0.0;
  // counts is ordered, so the first of several tied tags is the smallest.
  for (const auto& [tag, _] : tagcol.counts) {
    const double s = tfidf(tagcol, stats, tag);
    if (best.empty() || s > best_score + kTieTolerance * std::max(1.0, std::abs(best_score))) {
      best = tag;
      best_score = s;
    }
  }
  return best;
}

UnifiedTagSet assign_labels(const std::vector<TagCollection>& collections) {
  const CorpusTagStats stats = collect_stats(collections);
  UnifiedTagSet out;
  std::set<std::string> labels;
  for (const auto& c : collections) {
    std::string label = best_tag(c, stats);
    labels.insert(label);
    out.label_of_music[c.music_id] = std::move(label);
  }
  out.vocab.assign(labels.begin(), labels.end());
  for (std::size_t i = 0; i < out.vocab.size(); ++i) out.label_index[out.vocab[i]] = static_cast<int>(i);
  return out;
}

UnifiedTagSet assign_labels(const corpus::Corpus& corpus) { return assign_labels(build_tag_collections(corpus)); }

void export_tagset(const UnifiedTagSet& set, const std::filesystem::path& path) {
  nlohmann::json j;
  j["labels"] = nlohmann::json::array();
  for (const auto& tag : set.vocab) {
    std::vector<std::string> ids;
    for (const auto& [m, l] : set.label_of_music) {
      if (l == tag) ids.push_back(m);
    }
    j["labels"].push_back({{"tag", tag}, {"id", set.label_index.at(tag)}, {"music_ids", ids}});
  }
  std::ofstream os(path);
  if (!os) throw LoadError(path.string(), "cannot create tagset file");
  os << j.dump(2) << '\n';
}

UnifiedTagSet import_tagset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), "cannot open tagset file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string(), std::string("malformed tagset (") + e.what() + ")");
  }
  UnifiedTagSet out;
  for (const auto& e : j.at("labels")) {
    const auto tag = e.at("tag").get<std::string>();
    out.vocab.push_back(tag);
    out.label_index[tag] = e.at("id").get<int>();
    for (const auto& m : e.at("music_ids")) out.label_of_music[m.get<std::string>()] = tag;
  }
  return out;
}

}  // namespace vmr::tagset
