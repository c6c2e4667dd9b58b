#include "zcap/microworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "zcap/checkpoint.hpp"

namespace zcap::world {

using ojson = nlohmann::ordered_json;

void DetectorNoiseSpec::validate() const {
  if (miss_rate < 0.0 || miss_rate > 1.0) throw std::invalid_argument("detector: miss_rate out of [0,1]");
  if (false_positive_rate < 0.0) throw std::invalid_argument("detector: false_positive_rate negative");
  if (confidence_concentration <= 0.0)
    throw std::invalid_argument("detector: concentration must be positive");
}

CaptionTemplate CaptionTemplate::parse(const std::string& pattern) {
  CaptionTemplate t;
  t.pattern = pattern;
  std::istringstream in(pattern);
  std::string tok;
  int max_index = -1;
  while (in >> tok) {
    if (tok.empty() || tok[0] != '{') continue;
    if (tok.back() != '}') throw std::invalid_argument("template: malformed slot " + tok);
    const std::string slot = tok.substr(1, tok.size() - 2);
    if (slot == "rel") {
      t.uses_relation = true;
    } else if (slot.rfind("cat", 0) == 0 || slot.rfind("attr", 0) == 0) {
      const size_t digits = slot.rfind("cat", 0) == 0 ? 3 : 4;
      const int idx = std::stoi(slot.substr(digits));
      max_index = std::max(max_index, idx);
    } else {
      throw std::invalid_argument("template: unknown slot " + tok);
    }
  }
  if (max_index < 0) throw std::invalid_argument("template: no entity slots in " + pattern);
  t.arity = max_index + 1;
  return t;
}

void WorldSpec::validate() const {
  if (categories.empty()) throw std::invalid_argument("world: no categories");
  for (const auto& cat : categories) {
    auto it = attributes_per_category.find(cat);
    if (it == attributes_per_category.end() || it->second.empty())
      throw std::invalid_argument("world: category without attributes: " + cat);
  }
  if (min_entities < 1 || max_entities < min_entities)
    throw std::invalid_argument("world: empty entity count range");
  if (static_cast<size_t>(max_entities) > categories.size())
    throw std::invalid_argument("world: entity range exceeds category count");
  if (template_set.empty()) throw std::invalid_argument("world: no templates");
  for (int n = min_entities; n <= max_entities; ++n) {
    bool found = false;
    for (const auto& t : template_set)
      if (t.arity == n && (!t.uses_relation || !relations.empty())) found = true;
    if (!found) throw std::invalid_argument("world: no usable template for entity count " + std::to_string(n));
  }
  detector_noise.validate();
  if (image_noise_sigma < 0.0) throw std::invalid_argument("world: negative image noise");
}

size_t WorldSpec::max_attributes() const {
  size_t m = 0;
  for (const auto& [cat, attrs] : attributes_per_category) m = std::max(m, attrs.size());
  return m;
}

size_t WorldSpec::feature_dim() const {
  return 3 * categories.size() + categories.size() * max_attributes() + relations.size();
}

int WorldSpec::category_index(const std::string& cat) const {
  for (size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == cat) return static_cast<int>(i);
  return -1;
}

int WorldSpec::relation_index(const std::string& phrase) const {
  for (size_t i = 0; i < relations.size(); ++i)
    if (relations[i] == phrase) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> Scene::category_set() const {
  std::vector<std::string> out;
  for (const auto& e : entities)
    if (std::find(out.begin(), out.end(), e.category) == out.end()) out.push_back(e.category);
  return out;
}

std::string CaptionText::text() const {
  std::string s;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

Scene generate_scene(const WorldSpec& spec, Rng& rng) {
  spec.validate();
  const int span = spec.max_entities - spec.min_entities + 1;
  const int count = spec.min_entities + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(span)));

  // Distinct categories so every category word appears exactly once per caption.
  std::vector<size_t> order(spec.categories.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  Scene scene;
  for (int i = 0; i < count; ++i) {
    const std::string& cat = spec.categories[order[static_cast<size_t>(i)]];
    const auto& attrs = spec.attributes_per_category.at(cat);
    const std::string& attr = attrs[rng.uniform_int(attrs.size())];
    scene.entities.push_back({cat, attr});
  }
  if (count >= 2 && !spec.relations.empty()) {
    Scene::Relation rel;
    rel.subject = 0;
    rel.object = 1;
    rel.phrase = spec.relations[rng.uniform_int(spec.relations.size())];
    scene.relation = rel;
  }
  return scene;
}

namespace {

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// Entity order used for slot filling: relation subject first, then object,
// then the rest in scene order.
std::vector<size_t> mention_order(const Scene& scene) {
  std::vector<size_t> order;
  if (scene.relation) {
    order.push_back(scene.relation->subject);
    if (scene.relation->object != scene.relation->subject) order.push_back(scene.relation->object);
  }
  for (size_t i = 0; i < scene.entities.size(); ++i)
    if (std::find(order.begin(), order.end(), i) == order.end()) order.push_back(i);
  return order;
}

CaptionText fill_template(const Scene& scene, const WorldSpec& spec, const CaptionTemplate& tmpl) {
  if (tmpl.arity != static_cast<int>(scene.entities.size()))
    throw std::runtime_error("render_caption: template arity does not match scene");
  if (tmpl.uses_relation && !scene.relation)
    throw std::runtime_error("render_caption: template needs a relation the scene lacks");
  const std::vector<size_t> order = mention_order(scene);
  CaptionText caption;
  caption.scene_id = scene.scene_id;
  for (const std::string& tok : split_words(tmpl.pattern)) {
    if (tok[0] != '{') {
      caption.tokens.push_back(tok);
      continue;
    }
    const std::string slot = tok.substr(1, tok.size() - 2);
    if (slot == "rel") {
      for (const std::string& w : split_words(scene.relation->phrase)) caption.tokens.push_back(w);
    } else if (slot.rfind("cat", 0) == 0) {
      caption.tokens.push_back(scene.entities[order[std::stoul(slot.substr(3))]].category);
    } else {
      caption.tokens.push_back(scene.entities[order[std::stoul(slot.substr(4))]].attribute);
    }
  }
  return caption;
}

std::vector<const CaptionTemplate*> applicable_templates(const Scene& scene, const WorldSpec& spec) {
  std::vector<const CaptionTemplate*> out;
  for (const auto& t : spec.template_set) {
    if (t.arity != static_cast<int>(scene.entities.size())) continue;
    if (t.uses_relation && !scene.relation) continue;
    out.push_back(&t);
  }
  return out;
}

}  // namespace

CaptionText render_caption(const Scene& scene, const WorldSpec& spec, Rng& rng) {
  const auto usable = applicable_templates(scene, spec);
  if (usable.empty()) throw std::runtime_error("render_caption: no template matches the scene");
  return fill_template(scene, spec, *usable[rng.uniform_int(usable.size())]);
}

std::vector<CaptionText> render_references(const Scene& scene, const WorldSpec& spec, size_t k) {
  if (k < 1) throw std::invalid_argument("render_references: k must be >= 1");
  const auto usable = applicable_templates(scene, spec);
  if (usable.empty()) throw std::runtime_error("render_references: no template matches the scene");
  std::vector<CaptionText> refs;
  for (size_t i = 0; i < k; ++i) refs.push_back(fill_template(scene, spec, *usable[i % usable.size()]));
  return refs;
}

RawImageFeature render_image_features(const Scene& scene, const WorldSpec& spec, Rng& rng) {
  const size_t n_cat = spec.categories.size();
  const size_t max_a = spec.max_attributes();
  RawImageFeature feat;
  feat.scene_id = scene.scene_id;
  feat.values.assign(spec.feature_dim(), 0.0);

  const size_t pair_off = n_cat;
  const size_t rel_off = pair_off + n_cat * max_a;
  const size_t subj_off = rel_off + spec.relations.size();
  const size_t obj_off = subj_off + n_cat;

  for (const auto& e : scene.entities) {
    const int ci = spec.category_index(e.category);
    if (ci < 0) throw std::invalid_argument("render_image_features: unknown category " + e.category);
    feat.values[static_cast<size_t>(ci)] = 1.0;
    const auto& attrs = spec.attributes_per_category.at(e.category);
    const auto it = std::find(attrs.begin(), attrs.end(), e.attribute);
    if (it == attrs.end()) throw std::invalid_argument("render_image_features: unknown attribute " + e.attribute);
    const size_t ai = static_cast<size_t>(it - attrs.begin());
    feat.values[pair_off + static_cast<size_t>(ci) * max_a + ai] = 1.0;
  }
  if (scene.relation) {
    const int ri = spec.relation_index(scene.relation->phrase);
    if (ri < 0) throw std::invalid_argument("render_image_features: unknown relation");
    feat.values[rel_off + static_cast<size_t>(ri)] = 1.0;
    const int si = spec.category_index(scene.entities[scene.relation->subject].category);
    const int oi = spec.category_index(scene.entities[scene.relation->object].category);
    feat.values[subj_off + static_cast<size_t>(si)] = 1.0;
    feat.values[obj_off + static_cast<size_t>(oi)] = 1.0;
  }
  if (spec.image_noise_sigma > 0.0)
    for (double& x : feat.values) x += rng.normal(0.0, spec.image_noise_sigma);
  return feat;
}

std::vector<std::string> extract_nouns(const CaptionText& caption, const WorldSpec& spec) {
  std::vector<std::string> out;
  for (const auto& tok : caption.tokens) {
    if (spec.category_index(tok) < 0) continue;
    if (std::find(out.begin(), out.end(), tok) == out.end()) out.push_back(tok);
  }
  return out;
}

std::vector<Detection> detect_objects(const Scene& scene, const WorldSpec& spec,
                                      const DetectorNoiseSpec& noise, Rng& rng) {
  noise.validate();
  std::vector<Detection> out;
  const auto present = scene.category_set();
  for (const auto& cat : present) {
    if (rng.uniform() < noise.miss_rate) continue;
    out.push_back({cat, rng.beta_near_one(noise.confidence_concentration)});
  }
  if (noise.false_positive_rate > 0.0) {
    std::vector<std::string> absent;
    for (const auto& cat : spec.categories)
      if (std::find(present.begin(), present.end(), cat) == present.end()) absent.push_back(cat);
    const uint64_t n_fp = rng.poisson(noise.false_positive_rate);
    std::vector<std::string> used;
    for (uint64_t i = 0; i < n_fp && !absent.empty(); ++i) {
      const std::string& label = absent[rng.uniform_int(absent.size())];
      if (std::find(used.begin(), used.end(), label) != used.end()) continue;
      used.push_back(label);
      out.push_back({label, rng.beta_near_zero(noise.confidence_concentration)});
    }
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.label < b.label;
  });
  return out;
}

DatasetBundle build_dataset(const WorldSpec& spec, const SplitSizes& sizes, Rng& rng) {
  spec.validate();
  if (sizes.train == 0 || sizes.validation == 0 || sizes.test == 0)
    throw std::invalid_argument("build_dataset: all split sizes must be positive");
  DatasetBundle bundle;
  bundle.world = spec;
  const size_t total = sizes.train + sizes.validation + sizes.test;
  for (size_t i = 0; i < total; ++i) {
    Rng scene_rng = rng.substream("scene", i);
    Rng caption_rng = rng.substream("caption", i);
    Rng image_rng = rng.substream("image", i);
    Scene scene = generate_scene(spec, scene_rng);
    scene.scene_id = i;
    bundle.text_corpus.push_back(render_caption(scene, spec, caption_rng));
    bundle.image_set.push_back(render_image_features(scene, spec, image_rng));
    bundle.references.push_back(render_references(scene, spec, kReferenceCount));
    bundle.scenes.push_back(std::move(scene));
  }
  for (size_t i = 0; i < sizes.train; ++i) bundle.splits.train.push_back(i);
  for (size_t i = 0; i < sizes.validation; ++i) bundle.splits.validation.push_back(sizes.train + i);
  for (size_t i = 0; i < sizes.test; ++i) bundle.splits.test.push_back(sizes.train + sizes.validation + i);
  return bundle;
}

std::vector<CaptionText> DatasetBundle::train_corpus() const {
  std::vector<CaptionText> out;
  out.reserve(splits.train.size());
  for (uint64_t id : splits.train) out.push_back(text_corpus[id]);
  return out;
}

std::vector<std::pair<RawImageFeature, CaptionText>> DatasetBundle::paired_split(
    const std::vector<uint64_t>& ids) const {
  std::vector<std::pair<RawImageFeature, CaptionText>> out;
  out.reserve(ids.size());
  for (uint64_t id : ids) out.emplace_back(image_set[id], text_corpus[id]);
  return out;
}

WorldSpec default_world_spec(const std::string& domain_id) {
  WorldSpec spec;
  spec.domain_id = domain_id;
  std::vector<std::string> attrs;
  // Two stock vocabularies; "A"/"B" alias the park/reef pair.
  const bool reef_family = domain_id == "reef" || domain_id == "B" || domain_id == "b";
  if (reef_family) {
    spec.categories = {"crab", "whale", "shark",  "coral", "shell", "kelp",
                       "turtle", "seal", "squid", "eel",   "ray",   "sponge"};
    attrs = {"pale", "dark", "striped", "spotted", "tiny", "giant"};
    spec.relations = {"under", "near", "inside", "around"};
    spec.seed = 2;
  } else {
    spec.categories = {"dog",  "cat",  "bird",  "horse", "ball", "kite",
                       "bench", "car", "tree", "house", "lamp", "bike"};
    attrs = {"red", "blue", "green", "yellow", "small", "big"};
    spec.relations = {"next to", "behind", "above", "beside"};
    spec.seed = 1;
  }
  for (const auto& cat : spec.categories) spec.attributes_per_category[cat] = attrs;
  spec.min_entities = 2;
  spec.max_entities = 2;

  const std::vector<std::string> openers = {"a",        "there is a",      "a photo of a",
                                            "you can see a", "a picture of a", "this is a"};
  for (const auto& op : openers) {
    spec.template_set.push_back(CaptionTemplate::parse(op + " {attr0} {cat0}"));
    spec.template_set.push_back(
        CaptionTemplate::parse(op + " {attr0} {cat0} {rel} a {attr1} {cat1}"));
  }
  for (const auto& op : {"a", "there is a", "a photo of a"}) {
    spec.template_set.push_back(CaptionTemplate::parse(
        std::string(op) + " {attr0} {cat0} {rel} a {attr1} {cat1} and a {attr2} {cat2}"));
    spec.template_set.push_back(CaptionTemplate::parse(
        std::string(op) +
        " {attr0} {cat0} {rel} a {attr1} {cat1} and a {attr2} {cat2} and a {attr3} {cat3}"));
  }
  // Relation-free fallbacks for hand-built scenes.
  spec.template_set.push_back(CaptionTemplate::parse("a {attr0} {cat0} and a {attr1} {cat1}"));
  spec.template_set.push_back(
      CaptionTemplate::parse("a {attr0} {cat0} and a {attr1} {cat1} and a {attr2} {cat2}"));
  spec.template_set.push_back(CaptionTemplate::parse(
      "a {attr0} {cat0} and a {attr1} {cat1} and a {attr2} {cat2} and a {attr3} {cat3}"));

  spec.detector_noise = {0.15, 0.6, 32.0};
  spec.image_noise_sigma = 0.05;
  if (domain_id != "park" && domain_id != "A" && domain_id != "a" && !reef_family) {
    // Derive a distinct seed for ad-hoc domains; vocabulary stays park-style.
    spec.seed = 1;
    for (char c : domain_id) spec.seed = spec.seed * 131 + static_cast<unsigned char>(c);
  }
  return spec;
}

namespace {

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

void save_world_spec(const WorldSpec& spec, const std::filesystem::path& file) {
  std::string out;
  out += "domain_id=" + spec.domain_id + "\n";
  out += "seed=" + std::to_string(spec.seed) + "\n";
  out += "entity_min=" + std::to_string(spec.min_entities) + "\n";
  out += "entity_max=" + std::to_string(spec.max_entities) + "\n";
  out += "image_noise_sigma=" + fmt_double(spec.image_noise_sigma) + "\n";
  out += "detector.miss_rate=" + fmt_double(spec.detector_noise.miss_rate) + "\n";
  out += "detector.false_positive_rate=" + fmt_double(spec.detector_noise.false_positive_rate) + "\n";
  out += "detector.confidence_concentration=" +
         fmt_double(spec.detector_noise.confidence_concentration) + "\n";
  out += "categories=" + join(spec.categories, ",") + "\n";
  for (const auto& cat : spec.categories)
    out += "attrs." + cat + "=" + join(spec.attributes_per_category.at(cat), ",") + "\n";
  out += "relations=" + join(spec.relations, "|") + "\n";
  std::vector<std::string> patterns;
  for (const auto& t : spec.template_set) patterns.push_back(t.pattern);
  out += "templates=" + join(patterns, "|") + "\n";
  atomic_write_text(file, out);
}

WorldSpec load_world_spec(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open world spec: " + file.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("world spec: malformed line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  WorldSpec spec;
  spec.domain_id = kv.at("domain_id");
  spec.seed = std::stoull(kv.at("seed"));
  spec.min_entities = std::stoi(kv.at("entity_min"));
  spec.max_entities = std::stoi(kv.at("entity_max"));
  spec.image_noise_sigma = std::stod(kv.at("image_noise_sigma"));
  spec.detector_noise.miss_rate = std::stod(kv.at("detector.miss_rate"));
  spec.detector_noise.false_positive_rate = std::stod(kv.at("detector.false_positive_rate"));
  spec.detector_noise.confidence_concentration = std::stod(kv.at("detector.confidence_concentration"));
  spec.categories = split(kv.at("categories"), ',');
  for (const auto& cat : spec.categories)
    spec.attributes_per_category[cat] = split(kv.at("attrs." + cat), ',');
  spec.relations = split(kv.at("relations"), '|');
  for (const auto& p : split(kv.at("templates"), '|'))
    spec.template_set.push_back(CaptionTemplate::parse(p));
  spec.validate();
  return spec;
}

void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_world_spec(bundle.world, dir / "world.cfg");

  std::string scenes_out, corpus_out, refs_out;
  for (const auto& scene : bundle.scenes) {
    ojson j;
    j["scene_id"] = scene.scene_id;
    ojson ents = ojson::array();
    for (const auto& e : scene.entities) ents.push_back(ojson::array({e.category, e.attribute}));
    j["entities"] = ents;
    if (scene.relation)
      j["relation"] = ojson::array({scene.relation->subject, scene.relation->phrase, scene.relation->object});
    else
      j["relation"] = nullptr;
    scenes_out += j.dump() + "\n";
  }
  for (const auto& cap : bundle.text_corpus) {
    ojson j;
    j["scene_id"] = cap.scene_id;
    j["tokens"] = cap.tokens;
    corpus_out += j.dump() + "\n";
  }
  for (size_t i = 0; i < bundle.references.size(); ++i) {
    ojson j;
    j["scene_id"] = bundle.scenes[i].scene_id;
    ojson refs = ojson::array();
    for (const auto& r : bundle.references[i]) refs.push_back(r.tokens);
    j["refs"] = refs;
    refs_out += j.dump() + "\n";
  }
  atomic_write_text(dir / "scenes.jsonl", scenes_out);
  atomic_write_text(dir / "corpus.jsonl", corpus_out);
  atomic_write_text(dir / "refs.jsonl", refs_out);

  const size_t dim = bundle.world.feature_dim();
  std::string raw;
  raw.reserve(bundle.image_set.size() * dim * 4);
  for (const auto& img : bundle.image_set) {
    for (double x : img.values) {
      const float f = static_cast<float>(x);
      char b[4];
      std::memcpy(b, &f, 4);
      raw.append(b, 4);
    }
  }
  atomic_write_bytes(dir / "images.f32", raw.data(), raw.size());
  atomic_write_text(dir / "images.f32.hdr",
                    "dim=" + std::to_string(dim) + " count=" + std::to_string(bundle.image_set.size()) + "\n");

  std::string splits_out;
  const auto write_split = [&](const char* name, const std::vector<uint64_t>& ids) {
    ojson j;
    j["split"] = name;
    j["scene_ids"] = ids;
    splits_out += j.dump() + "\n";
  };
  write_split("train", bundle.splits.train);
  write_split("validation", bundle.splits.validation);
  write_split("test", bundle.splits.test);
  atomic_write_text(dir / "splits.jsonl", splits_out);
}

namespace {

std::vector<ojson> read_jsonl(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open: " + file.string());
  std::vector<ojson> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(ojson::parse(line));
  }
  return out;
}

}  // namespace

DatasetBundle load_dataset(const std::filesystem::path& dir) {
  DatasetBundle bundle;
  bundle.world = load_world_spec(dir / "world.cfg");

  for (const auto& j : read_jsonl(dir / "scenes.jsonl")) {
    Scene scene;
    scene.scene_id = j.at("scene_id").get<uint64_t>();
    for (const auto& e : j.at("entities")) scene.entities.push_back({e.at(0), e.at(1)});
    if (!j.at("relation").is_null()) {
      const auto& r = j.at("relation");
      scene.relation = Scene::Relation{r.at(0).get<size_t>(), r.at(1).get<std::string>(),
                                       r.at(2).get<size_t>()};
    }
    bundle.scenes.push_back(std::move(scene));
  }
  for (const auto& j : read_jsonl(dir / "corpus.jsonl")) {
    CaptionText cap;
    cap.scene_id = j.at("scene_id").get<uint64_t>();
    cap.tokens = j.at("tokens").get<std::vector<std::string>>();
    bundle.text_corpus.push_back(std::move(cap));
  }
  for (const auto& j : read_jsonl(dir / "refs.jsonl")) {
    std::vector<CaptionText> refs;
    const uint64_t id = j.at("scene_id").get<uint64_t>();
    for (const auto& r : j.at("refs")) {
      CaptionText cap;
      cap.scene_id = id;
      cap.tokens = r.get<std::vector<std::string>>();
      refs.push_back(std::move(cap));
    }
    bundle.references.push_back(std::move(refs));
  }

  std::ifstream hdr(dir / "images.f32.hdr");
  if (!hdr) throw std::runtime_error("missing images.f32.hdr");
  std::string hline;
  std::getline(hdr, hline);
  size_t dim = 0, count = 0;
  if (std::sscanf(hline.c_str(), "dim=%zu count=%zu", &dim, &count) != 2)
    throw std::runtime_error("malformed images header: " + hline);
  std::ifstream img(dir / "images.f32", std::ios::binary);
  if (!img) throw std::runtime_error("missing images.f32");
  std::vector<char> raw((std::istreambuf_iterator<char>(img)), std::istreambuf_iterator<char>());
  if (raw.size() != dim * count * 4) throw std::runtime_error("images.f32 size mismatch");
  for (size_t i = 0; i < count; ++i) {
    RawImageFeature feat;
    feat.scene_id = bundle.scenes[i].scene_id;
    feat.values.resize(dim);
    for (size_t j = 0; j < dim; ++j) {
      float f;
      std::memcpy(&f, raw.data() + (i * dim + j) * 4, 4);
      feat.values[j] = static_cast<double>(f);
    }
    bundle.image_set.push_back(std::move(feat));
  }

  for (const auto& j : read_jsonl(dir / "splits.jsonl")) {
    const std::string name = j.at("split");
    const auto ids = j.at("scene_ids").get<std::vector<uint64_t>>();
    if (name == "train")
      bundle.splits.train = ids;
    else if (name == "validation")
      bundle.splits.validation = ids;
    else if (name == "test")
      bundle.splits.test = ids;
    else
      throw std::runtime_error("unknown split: " + name);
  }
  return bundle;
}

}  // namespace zcap::world
