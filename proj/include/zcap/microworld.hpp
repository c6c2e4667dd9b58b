// Synthetic paired micro-world: ground-truth scenes rendered to captions on
// the text side and to structured feature vectors on the image side, plus a
// simulated object detector and the noun extractor used for training anchors.
// Every operation is a pure function of its inputs and the random source.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zcap/rng.hpp"

namespace zcap::world {

struct DetectorNoiseSpec {
  double miss_rate = 0.0;             // probability a true object is omitted
  double false_positive_rate = 0.0;   // expected spurious detections per scene
  double confidence_concentration = 32.0;

  void validate() const;
};

// A caption template; slots are {cat0}/{attr0}/... and {rel}. Arity and
// relation usage are derived from the pattern.
struct CaptionTemplate {
  std::string pattern;
  int arity = 0;
  bool uses_relation = false;

  static CaptionTemplate parse(const std::string& pattern);
};

struct WorldSpec {
  std::string domain_id;
  std::vector<std::string> categories;
  std::map<std::string, std::vector<std::string>> attributes_per_category;
  std::vector<std::string> relations;
  int min_entities = 1;
  int max_entities = 1;
  std::vector<CaptionTemplate> template_set;
  DetectorNoiseSpec detector_noise;
  double image_noise_sigma = 0.05;
  uint64_t seed = 0;

  void validate() const;
  size_t feature_dim() const;
  size_t max_attributes() const;
  int category_index(const std::string& cat) const;  // -1 if absent
  int relation_index(const std::string& phrase) const;
};

struct Scene {
  struct Entity {
    std::string category;
    std::string attribute;
  };
  struct Relation {
    size_t subject = 0;
    std::string phrase;
    size_t object = 0;
  };
  std::vector<Entity> entities;
  std::optional<Relation> relation;
  uint64_t scene_id = 0;

  std::vector<std::string> category_set() const;  // dedup, entity order
};

struct RawImageFeature {
  std::vector<double> values;
  uint64_t scene_id = 0;
};

struct CaptionText {
  std::vector<std::string> tokens;
  uint64_t scene_id = 0;

  std::string text() const;
};

struct Detection {
  std::string label;
  double confidence = 0.0;
};

struct SplitIndices {
  std::vector<uint64_t> train, validation, test;
};

struct SplitSizes {
  size_t train = 0, validation = 0, test = 0;
};

// Uniform per-scene storage; split membership is by scene_id. The train-split
// captions form the unsupervised text corpus; images of eval scenes together
// with their references form the paired evaluation set.
struct DatasetBundle {
  WorldSpec world;
  std::vector<Scene> scenes;
  std::vector<CaptionText> text_corpus;                 // one caption per scene
  std::vector<RawImageFeature> image_set;               // one feature per scene
  std::vector<std::vector<CaptionText>> references;     // k per scene
  SplitIndices splits;

  std::vector<CaptionText> train_corpus() const;
  std::vector<std::pair<RawImageFeature, CaptionText>> paired_split(
      const std::vector<uint64_t>& ids) const;
};

inline constexpr size_t kReferenceCount = 5;

Scene generate_scene(const WorldSpec& spec, Rng& rng);
CaptionText render_caption(const Scene& scene, const WorldSpec& spec, Rng& rng);
std::vector<CaptionText> render_references(const Scene& scene, const WorldSpec& spec, size_t k);
RawImageFeature render_image_features(const Scene& scene, const WorldSpec& spec, Rng& rng);
std::vector<std::string> extract_nouns(const CaptionText& caption, const WorldSpec& spec);
// The spec supplies the label universe that spurious detections draw from.
std::vector<Detection> detect_objects(const Scene& scene, const WorldSpec& spec,
                                      const DetectorNoiseSpec& noise, Rng& rng);
DatasetBundle build_dataset(const WorldSpec& spec, const SplitSizes& sizes, Rng& rng);

// Two stock domains with disjoint content vocabulary ("park" and "reef");
// any other id derives a distinct-seed park-style world.
WorldSpec default_world_spec(const std::string& domain_id);

// Directory layout: world.cfg, scenes.jsonl, corpus.jsonl, images.f32 (+
// images.f32.hdr sidecar), refs.jsonl, splits.jsonl.
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle load_dataset(const std::filesystem::path& dir);

void save_world_spec(const WorldSpec& spec, const std::filesystem::path& file);
WorldSpec load_world_spec(const std::filesystem::path& file);

}  // namespace zcap::world
