#pragma once

/**
 * @file corpus.hpp
 * @brief On-disk corpus layout: a directory of volume files plus an
 *        index.json listing subjects, masks, labels, split tags and strata.
 */

#include <filesystem>
#include <string>
#include <vector>

#include "voxuad/volume.hpp"

namespace voxuad {

struct CorpusEntry {
  std::string subject_id;
  std::string volume_file;  // relative to the index directory
  std::string mask_file;
  std::string labels_file;  // empty when absent
  std::string stratum;
  SplitTag split_tag = SplitTag::unassigned;
};

struct CorpusIndex {
  std::filesystem::path root;
  std::vector<CorpusEntry> entries;
};

CorpusIndex read_corpus_index(const std::filesystem::path& index_path);
void write_corpus_index(const std::filesystem::path& index_path, const CorpusIndex& index);

SubjectRecord load_subject(const CorpusIndex& index, const CorpusEntry& entry);
std::vector<SubjectRecord> load_corpus(const CorpusIndex& index);

/// Writes one subject's files under dir and returns the corpus entry.
CorpusEntry store_subject(const std::filesystem::path& dir, const SubjectRecord& record);

}  // namespace voxuad
