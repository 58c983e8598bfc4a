#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "segpipe/volume.hpp"

namespace segpipe {

/// Voxel counts per nonzero label id.
struct LabelInventory {
  std::map<std::int64_t, std::uint64_t> counts;
  std::uint64_t total() const;
};

LabelInventory inventory(const Volume& v);

/// Relabeling from source ids onto target ids. Ids not listed as sources
/// map to themselves; a target id never appears as a source (no chains).
struct MergeMap {
  std::map<std::int64_t, std::int64_t> mapping;  // source -> target
  std::set<std::int64_t> targets;

  void validate() const;
  std::int64_t apply(std::int64_t label) const;
  bool knows(std::int64_t label) const {
    return mapping.count(label) != 0 || targets.count(label) != 0;
  }
};

/// Apply the merge to every voxel. Any nonzero label that is neither a
/// source nor a target raises UnknownLabelError naming the offenders.
/// Total foreground voxel count is preserved.
Volume apply_merge(const Volume& v, const MergeMap& m);

/// 1 where v == id, else 0.
Volume binarize(const Volume& v, std::int64_t id);

/// Named target taxonomy plus substructure merges. This is the file
/// format behind --labels.
struct LabelSchema {
  struct Target {
    std::int64_t id = 0;
    std::string name;
    bool operator==(const Target&) const = default;
  };
  std::vector<Target> targets;
  std::vector<std::pair<std::int64_t, std::int64_t>> merges;  // source -> target

  MergeMap merge_map() const;
  std::string name_of(std::int64_t id) const;  // "label_<id>" when unnamed
  std::vector<std::int64_t> target_ids() const;

  static LabelSchema from_json_text(const std::string& text);
  std::string to_json_text() const;
  bool operator==(const LabelSchema&) const = default;
};

/// 45 head-neck structures as targets 1..45 plus placeholder merges for
/// the nine training substructures 46..54. The substructure parents vary
/// by dataset release, so the shipped mapping (46..54 onto 1..9) is a
/// stand-in to be overridden from a schema file.
LabelSchema default_oars_schema();

/// Two tumor targets: 1 = primary (nasopharynx), 2 = nodal.
LabelSchema default_gtvs_schema();

}  // namespace segpipe
