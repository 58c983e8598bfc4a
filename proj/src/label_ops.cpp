#include "segpipe/label_ops.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

namespace segpipe {

std::uint64_t LabelInventory::total() const {
  std::uint64_t t = 0;
  for (const auto& [id, n] : counts) t += n;
  return t;
}

LabelInventory inventory(const Volume& v) {
  if (v.kind() != VoxelKind::Label)
    throw KindError("inventory: expected a label volume");
  LabelInventory inv;
  for (std::size_t i = 0; i < v.voxels().size(); ++i) {
    std::int64_t id = v.label_at(i);
    if (id != 0) ++inv.counts[id];
  }
  return inv;
}

void MergeMap::validate() const {
  for (const auto& [src, dst] : mapping) {
    if (src <= 0 || dst <= 0)
      throw ValidationError("merge map: ids must be positive");
    if (mapping.count(dst))
      throw ValidationError("merge map: target " + std::to_string(dst) +
                            " also appears as a source (chain)");
    if (!targets.count(dst))
      throw ValidationError("merge map: target " + std::to_string(dst) +
                            " is not in the declared target set");
  }
  for (std::int64_t t : targets)
    if (mapping.count(t))
      throw ValidationError("merge map: declared target " + std::to_string(t) +
                            " appears as a source");
}

std::int64_t MergeMap::apply(std::int64_t label) const {
  auto it = mapping.find(label);
  return it == mapping.end() ? label : it->second;
}

Volume apply_merge(const Volume& v, const MergeMap& m) {
  if (v.kind() != VoxelKind::Label)
    throw KindError("apply_merge: expected a label volume");
  m.validate();

  LabelInventory inv = inventory(v);
  std::vector<std::int64_t> unknown;
  for (const auto& [id, n] : inv.counts)
    if (!m.knows(id)) unknown.push_back(id);
  if (!unknown.empty()) {
    std::ostringstream os;
    os << "apply_merge: labels unknown to the merge map:";
    for (std::int64_t id : unknown) os << ' ' << id;
    throw UnknownLabelError(os.str());
  }

  Volume out = v;
  auto data = out.voxels();
  for (double& x : data) {
    if (x != 0.0) x = static_cast<double>(m.apply(static_cast<std::int64_t>(x)));
  }
  return out;
}

Volume binarize(const Volume& v, std::int64_t id) {
  if (v.kind() != VoxelKind::Label)
    throw KindError("binarize: expected a label volume");
  Volume out = Volume::label(v.geometry(), DataType::UInt8);
  auto in = v.voxels();
  auto o = out.voxels();
  const double target = static_cast<double>(id);
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = in[i] == target ? 1.0 : 0.0;
  return out;
}

MergeMap LabelSchema::merge_map() const {
  MergeMap m;
  for (const auto& t : targets) m.targets.insert(t.id);
  for (const auto& [src, dst] : merges) {
    if (m.mapping.count(src))
      throw ValidationError("label schema: duplicate merge source " +
                            std::to_string(src));
    m.mapping[src] = dst;
  }
  m.validate();
  return m;
}

std::string LabelSchema::name_of(std::int64_t id) const {
  for (const auto& t : targets)
    if (t.id == id) return t.name;
  return "label_" + std::to_string(id);
}

std::vector<std::int64_t> LabelSchema::target_ids() const {
  std::vector<std::int64_t> ids;
  ids.reserve(targets.size());
  for (const auto& t : targets) ids.push_back(t.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

LabelSchema LabelSchema::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  LabelSchema s;
  std::set<std::int64_t> seen;
  for (const auto& t : j.at("targets")) {
    Target target{t.at("id").get<std::int64_t>(), t.at("name").get<std::string>()};
    if (target.id <= 0)
      throw ValidationError("label schema: target ids must be positive");
    if (!seen.insert(target.id).second)
      throw ValidationError("label schema: duplicate target id " +
                            std::to_string(target.id));
    s.targets.push_back(std::move(target));
  }
  if (j.contains("merges")) {
    for (const auto& mj : j.at("merges"))
      s.merges.emplace_back(mj.at("source_id").get<std::int64_t>(),
                            mj.at("target_id").get<std::int64_t>());
  }
  s.merge_map();  // validates
  return s;
}

std::string LabelSchema::to_json_text() const {
  nlohmann::json j;
  j["targets"] = nlohmann::json::array();
  for (const auto& t : targets)
    j["targets"].push_back({{"id", t.id}, {"name", t.name}});
  j["merges"] = nlohmann::json::array();
  for (const auto& [src, dst] : merges)
    j["merges"].push_back({{"source_id", src}, {"target_id", dst}});
  return j.dump(2);
}

LabelSchema default_oars_schema() {
  static const char* names[45] = {
      "brain",
      "brainstem",
      "chiasm",
      "cochlea_left",
      "cochlea_right",
      "esophagus",
      "eustachian_tube_left",
      "eustachian_tube_right",
      "eye_left",
      "eye_right",
      "hippocampus_left",
      "hippocampus_right",
      "internal_auditory_canal_left",
      "internal_auditory_canal_right",
      "larynx",
      "larynx_glottic",
      "larynx_supraglottic",
      "lens_left",
      "lens_right",
      "mandible_left",
      "mandible_right",
      "mastoid_left",
      "mastoid_right",
      "middle_ear_left",
      "middle_ear_right",
      "optic_nerve_left",
      "optic_nerve_right",
      "oral_cavity",
      "parotid_left",
      "parotid_right",
      "pharyngeal_constrictor_muscle",
      "pituitary",
      "spinal_cord",
      "submandibular_left",
      "submandibular_right",
      "temporal_lobe_left",
      "temporal_lobe_right",
      "thyroid",
      "temporomandibular_joint_left",
      "temporomandibular_joint_right",
      "trachea",
      "tympanic_cavity_left",
      "tympanic_cavity_right",
      "vestibular_semicircular_canal_left",
      "vestibular_semicircular_canal_right",
  };
  LabelSchema s;
  for (std::int64_t id = 1; id <= 45; ++id)
    s.targets.push_back({id, names[id - 1]});
  // Placeholder assignment of the nine training substructures; real
  // datasets must override this from a schema file.
  for (std::int64_t src = 46; src <= 54; ++src)
    s.merges.emplace_back(src, src - 45);
  return s;
}

LabelSchema default_gtvs_schema() {
  LabelSchema s;
  s.targets.push_back({1, "gtv_nasopharynx"});
  s.targets.push_back({2, "gtv_lymph_nodes"});
  return s;
}

}  // namespace segpipe
