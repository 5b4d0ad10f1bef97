#include "voxuad/corpus.hpp"

#include <fstream>

#include "json.hpp"
#include "voxuad/volume_io.hpp"

namespace voxuad {

using nlohmann::json;

CorpusIndex read_corpus_index(const std::filesystem::path& index_path) {
  std::ifstream in(index_path);
  if (!in) throw std::runtime_error("cannot open corpus index " + index_path.string());
  json j = json::parse(in);
  CorpusIndex index;
  index.root = index_path.parent_path();
  for (const auto& e : j.at("subjects")) {
    CorpusEntry entry;
    entry.subject_id = e.at("id").get<std::string>();
    entry.volume_file = e.at("volume").get<std::string>();
    entry.mask_file = e.at("mask").get<std::string>();
    entry.labels_file = e.value("labels", "");
    entry.stratum = e.value("stratum", "");
    entry.split_tag = split_tag_from_string(e.value("split", "unassigned"));
    index.entries.push_back(std::move(entry));
  }
  return index;
}

void write_corpus_index(const std::filesystem::path& index_path, const CorpusIndex& index) {
  json subjects = json::array();
  for (const auto& e : index.entries) {
    json s{{"id", e.subject_id}, {"volume", e.volume_file}, {"mask", e.mask_file}};
    if (!e.labels_file.empty()) s["labels"] = e.labels_file;
    if (!e.stratum.empty()) s["stratum"] = e.stratum;
    if (e.split_tag != SplitTag::unassigned) s["split"] = to_string(e.split_tag);
    subjects.push_back(std::move(s));
  }
  json j{{"subjects", std::move(subjects)}};
  atomic_write_file(index_path, j.dump(2) + "\n");
}

SubjectRecord load_subject(const CorpusIndex& index, const CorpusEntry& entry) {
  SubjectRecord r;
  r.volume = read_volume(index.root / entry.volume_file);
  r.volume.subject_id = entry.subject_id;
  r.mask = read_nifti_mask(index.root / entry.mask_file);
  if (!entry.labels_file.empty()) r.labels = read_nifti_labels(index.root / entry.labels_file);
  r.split_tag = entry.split_tag;
  r.stratum = entry.stratum;
  return r;
}

std::vector<SubjectRecord> load_corpus(const CorpusIndex& index) {
  std::vector<SubjectRecord> records;
  records.reserve(index.entries.size());
  for (const auto& e : index.entries) records.push_back(load_subject(index, e));
  return records;
}

CorpusEntry store_subject(const std::filesystem::path& dir, const SubjectRecord& record) {
  std::filesystem::create_directories(dir);
  CorpusEntry entry;
  entry.subject_id = record.volume.subject_id;
  entry.volume_file = entry.subject_id + "_vol.nii.gz";
  entry.mask_file = entry.subject_id + "_mask.nii.gz";
  write_nifti(dir / entry.volume_file, record.volume);
  write_nifti(dir / entry.mask_file, record.mask, record.volume.spacing);
  if (record.labels) {
    entry.labels_file = entry.subject_id + "_labels.nii.gz";
    write_nifti(dir / entry.labels_file, *record.labels, record.volume.spacing);
  }
  entry.stratum = record.stratum;
  entry.split_tag = record.split_tag;
  return entry;
}

}  // namespace voxuad
