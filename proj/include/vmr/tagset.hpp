#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vmr/corpus.hpp"

namespace vmr::tagset {

// Non-deduplicated pool of the tags of every video paired with one track.
struct TagCollection {
  std::string music_id;
  std::map<std::string, int> counts;

  int total() const;
};

struct CorpusTagStats {
  std::size_t music_count = 0;
  std::map<std::string, int> doc_freq;  // tag -> number of tracks whose collection holds it
};

struct UnifiedTagSet {
  std::vector<std::string> vocab;                       // sorted, unique
  std::map<std::string, std::string> label_of_music;    // music_id -> label
  std::map<std::string, int> label_index;               // label -> id (position in vocab)

  int label_id(const std::string& music_id) const;
  bool operator==(const UnifiedTagSet&) const = default;
};

std::vector<TagCollection> build_tag_collections(const corpus::Corpus& corpus);
CorpusTagStats collect_stats(const std::vector<TagCollection>& collections);

// (count / total) * ln(N / (doc_freq + 1)). Negative when the tag occurs in
// (nearly) every track. Throws DomainError when the tag is not in tagcol.
double tfidf(const TagCollection& tagcol, const CorpusTagStats& stats, const std::string& tag);

// Highest-scoring tag of one collection; equal scores resolve to the
// lexicographically smallest tag.
std::string best_tag(const TagCollection& tagcol, const CorpusTagStats& stats);

UnifiedTagSet assign_labels(const std::vector<TagCollection>& collections);
UnifiedTagSet assign_labels(const corpus::Corpus& corpus);

// JSON: {"labels": [{"tag", "id", "music_ids": [...]}, ...]}
void export_tagset(const UnifiedTagSet& set, const std::filesystem::path& path);
UnifiedTagSet import_tagset(const std::filesystem::path& path);

}  // namespace vmr::tagset
