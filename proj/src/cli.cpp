#include "zcap/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "zcap/checkpoint.hpp"
#include "zcap/gradsuite.hpp"

namespace zcap::cli {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

void require_exists(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw std::runtime_error(what + " not found: " + p.string());
}

world::DatasetBundle load_bundle(const RunConfig& cfg) {
  require_exists(cfg.data_dir / "world.cfg", "dataset");
  return world::load_dataset(cfg.data_dir);
}

Vocab load_vocab_for(const RunConfig& cfg) {
  require_exists(cfg.data_dir / "vocab.txt", "vocabulary");
  return load_vocab(cfg.data_dir / "vocab.txt");
}

enc::EncoderParams load_encoder_for(const RunConfig& cfg, const Vocab& vocab) {
  const fs::path path = cfg.checkpoint_dir / "encoder.ckpt";
  require_exists(path, "encoder checkpoint");
  return enc::load_encoder(path, vocab);
}

clm::DecoderParams load_decoder_for(const RunConfig& cfg) {
  const fs::path path = cfg.checkpoint_dir / "clm.ckpt";
  require_exists(path, "decoder checkpoint");
  return clm::load_decoder(path);
}

void write_run_manifest(const RunConfig& cfg, const fs::path& dir, const std::string& command) {
  fs::create_directories(dir);
  atomic_write_text(dir / (command + ".run.cfg"), "command=" + command + "\n" + cfg.dump());
}

ojson report_json(const std::string& name, const metrics::MetricReport& r, uint64_t seed) {
  ojson j;
  j["name"] = name;
  j["b1"] = r.bleu1;
  j["b4"] = r.bleu4;
  j["rl"] = r.rouge_l;
  j["cider"] = r.cider;
  j["mean"] = r.mean_score;
  j["n"] = r.sample_count;
  j["seed"] = seed;
  return j;
}

}  // namespace

clm::EvalItem make_text_eval_item(const world::DatasetBundle& bundle, const enc::EncoderParams& encoder,
                                  uint64_t scene_id) {
  clm::EvalItem item;
  item.scene_id = scene_id;
  const world::CaptionText& caption = bundle.text_corpus[scene_id];
  item.f = enc::encode_text(caption, encoder);
  item.anchors = world::extract_nouns(caption, bundle.world);
  item.references = bundle.references[scene_id];
  return item;
}

clm::EvalItem make_image_eval_item(const world::DatasetBundle& bundle, const enc::EncoderParams& encoder,
                                   uint64_t scene_id, const world::DetectorNoiseSpec& noise, double p,
                                   uint64_t seed) {
  clm::EvalItem item;
  item.scene_id = scene_id;
  item.f = enc::encode_image(bundle.image_set[scene_id], encoder);
  Rng det_rng = Rng(seed).substream("detector", scene_id);
  const auto detections = world::detect_objects(bundle.scenes[scene_id], bundle.world, noise, det_rng);
  item.anchors = gen::filter_anchors(detections, p);
  item.references = bundle.references[scene_id];
  return item;
}

std::vector<clm::TrainSample> make_train_samples(const world::DatasetBundle& bundle,
                                                 const enc::EncoderParams& encoder) {
  std::vector<clm::TrainSample> out;
  out.reserve(bundle.splits.train.size());
  for (uint64_t id : bundle.splits.train) {
    clm::TrainSample s;
    s.caption = bundle.text_corpus[id];
    s.f_text = enc::encode_text(s.caption, encoder);
    s.anchors = world::extract_nouns(s.caption, bundle.world);
    out.push_back(std::move(s));
  }
  return out;
}

int cmd_gen_data(const RunConfig& cfg) {
  world::WorldSpec spec = world::default_world_spec(cfg.domain_id);
  spec.seed = cfg.seed;
  Rng data_rng = Rng(cfg.seed).substream("data");
  const world::DatasetBundle bundle =
      world::build_dataset(spec, {cfg.train_size, cfg.val_size, cfg.test_size}, data_rng);
  world::save_dataset(bundle, cfg.data_dir);
  save_vocab(build_vocab(bundle.train_corpus()), cfg.data_dir / "vocab.txt");
  write_run_manifest(cfg, cfg.data_dir, "gen-data");
  std::printf("dataset %s: %zu train / %zu val / %zu test scenes, feature dim %zu\n",
              cfg.domain_id.c_str(), bundle.splits.train.size(), bundle.splits.validation.size(),
              bundle.splits.test.size(), spec.feature_dim());
  return 0;
}

int cmd_train_encoder(const RunConfig& cfg) {
  const world::DatasetBundle bundle = load_bundle(cfg);
  enc::EncoderTrainOptions opts;
  opts.epochs = cfg.encoder_epochs;
  opts.batch_size = cfg.encoder_batch;
  opts.opt.learning_rate = cfg.encoder_lr;
  opts.seed = cfg.seed;
  opts.verbose = true;
  fs::create_directories(cfg.checkpoint_dir);
  // Per-epoch atomic save: an interrupted run keeps the last completed epoch.
  opts.on_epoch = [&](size_t, const enc::EncoderParams& params) {
    enc::save_encoder(params, cfg.checkpoint_dir / "encoder.ckpt");
  };
  enc::EncoderTrainResult result = enc::train_encoder(bundle, opts);
  enc::save_encoder(result.params, cfg.checkpoint_dir / "encoder.ckpt");
  std::string log;
  for (size_t e = 0; e < result.epoch_losses.size(); ++e) {
    ojson j;
    j["epoch"] = e + 1;
    j["loss"] = result.epoch_losses[e];
    j["val_retrieval"] = result.val_retrieval[e];
    log += j.dump() + "\n";
  }
  atomic_write_text(cfg.checkpoint_dir / "encoder.log.jsonl", log);
  write_run_manifest(cfg, cfg.checkpoint_dir, "train-encoder");
  std::printf("encoder: final val retrieval %.4f\n",
              result.val_retrieval.empty() ? 0.0 : result.val_retrieval.back());
  return 0;
}

namespace {

std::vector<clm::EvalItem> validation_items(const world::DatasetBundle& bundle,
                                            const enc::EncoderParams& encoder, const RunConfig& cfg,
                                            bool image_side) {
  std::vector<clm::EvalItem> items;
  const size_t n = std::min(cfg.eval_items, bundle.splits.validation.size());
  for (size_t i = 0; i < n; ++i) {
    const uint64_t id = bundle.splits.validation[i];
    items.push_back(image_side ? make_image_eval_item(bundle, encoder, id,
                                                      bundle.world.detector_noise, cfg.gen.p, cfg.seed)
                               : make_text_eval_item(bundle, encoder, id));
  }
  return items;
}

}  // namespace

int cmd_train_clm(const RunConfig& cfg) {
  const world::DatasetBundle bundle = load_bundle(cfg);
  const Vocab vocab = load_vocab_for(cfg);
  const enc::EncoderParams encoder = load_encoder_for(cfg, vocab);

  const auto samples = make_train_samples(bundle, encoder);
  const auto val_text = validation_items(bundle, encoder, cfg, /*image_side=*/false);
  const auto val_image = validation_items(bundle, encoder, cfg, /*image_side=*/true);

  clm::ClmConfig ccfg = cfg.clm;
  ccfg.seed = cfg.seed;
  ccfg.verbose = true;
  fs::create_directories(cfg.checkpoint_dir);
  const clm::EpochCallback on_epoch = [&](size_t, const clm::DecoderParams& best) {
    clm::save_decoder(best, cfg.checkpoint_dir / "clm.ckpt");
  };
  clm::ClmTrainResult result =
      clm::train_clm(samples, ccfg, vocab, val_text, val_image, cfg.gen, on_epoch);
  clm::save_decoder(result.params, cfg.checkpoint_dir / "clm.ckpt");
  clm::save_training_log(result.log, cfg.checkpoint_dir / "clm.log.jsonl");
  write_run_manifest(cfg, cfg.checkpoint_dir, "train-clm");
  std::printf("clm: best epoch %zu of %zu\n", result.log.best_epoch, result.log.epochs.size());
  return 0;
}

int cmd_caption(const RunConfig& cfg, const std::string& split, bool zero_prefix, bool timing) {
  const world::DatasetBundle bundle = load_bundle(cfg);
  const Vocab vocab = load_vocab_for(cfg);
  const enc::EncoderParams encoder = load_encoder_for(cfg, vocab);
  const clm::DecoderParams decoder = load_decoder_for(cfg);

  const std::vector<uint64_t>* ids = &bundle.splits.test;
  if (split == "validation") ids = &bundle.splits.validation;
  else if (split == "train") ids = &bundle.splits.train;
  else if (split != "test") throw std::runtime_error("unknown split: " + split);

  // Decoding is pure over frozen parameters, so the split fans out across
  // threads; output order stays the split order.
  std::vector<world::CaptionText> captions(ids->size());
  const auto t0 = std::chrono::steady_clock::now();
  const size_t workers = std::min<size_t>(std::max(1u, std::thread::hardware_concurrency()), 4);
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (size_t i = w; i < ids->size(); i += workers) {
        const uint64_t id = (*ids)[i];
        clm::EvalItem item =
            make_image_eval_item(bundle, encoder, id, bundle.world.detector_noise, cfg.gen.p, cfg.seed);
        if (zero_prefix) std::fill(item.f.values.begin(), item.f.values.end(), 0.0);
        const clm::InputSequence input = gen::build_generation_input(item.f, item.anchors, vocab);
        captions[i] = gen::beam_search(decoder, input, cfg.gen, vocab);
      }
    });
  }
  for (auto& t : pool) t.join();
  const auto t1 = std::chrono::steady_clock::now();

  std::string plain, jsonl;
  for (size_t i = 0; i < ids->size(); ++i) {
    plain += captions[i].text() + "\n";
    ojson j;
    j["scene_id"] = (*ids)[i];
    j["tokens"] = captions[i].tokens;
    j["seed"] = cfg.seed;
    jsonl += j.dump() + "\n";
  }
  fs::create_directories(cfg.output_dir);
  atomic_write_text(cfg.output_dir / "captions.txt", plain);
  atomic_write_text(cfg.output_dir / "captions.jsonl", jsonl);
  write_run_manifest(cfg, cfg.output_dir, "caption");
  if (timing && !ids->empty()) {
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count() /
                      static_cast<double>(ids->size());
    std::printf("decode latency: %.2f ms/image over %zu images\n", ms, ids->size());
  }
  std::printf("wrote %zu captions to %s\n", ids->size(), (cfg.output_dir / "captions.txt").string().c_str());
  return 0;
}

std::string format_report_table(const std::vector<std::pair<std::string, metrics::MetricReport>>& rows) {
  std::ostringstream out;
  out << "name                          B@1    B@4    M      R-L    CIDEr  Mean\n";
  for (const auto& [name, r] : rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-28s  %-5.1f  %-5.1f  -      %-5.1f  %-5.2f  %-5.2f\n",
                  name.c_str(), 100.0 * r.bleu1, 100.0 * r.bleu4, 100.0 * r.rouge_l, r.cider,
                  r.mean_score);
    out << line;
  }
  return out.str();
}

int cmd_evaluate(const RunConfig& cfg, const fs::path& candidates_file, const std::string& split) {
  const world::DatasetBundle bundle = load_bundle(cfg);
  const std::vector<uint64_t>* ids = &bundle.splits.test;
  if (split == "validation") ids = &bundle.splits.validation;
  else if (split == "train") ids = &bundle.splits.train;
  else if (split != "test") throw std::runtime_error("unknown split: " + split);

  require_exists(candidates_file, "candidates file");
  std::ifstream in(candidates_file);
  metrics::Candidates cands;
  std::string line;
  const bool is_jsonl = candidates_file.extension() == ".jsonl";
  while (std::getline(in, line)) {
    world::CaptionText cap;
    if (is_jsonl) {
      if (line.empty()) continue;
      ojson j = ojson::parse(line);
      cap.scene_id = j.at("scene_id").get<uint64_t>();
      cap.tokens = j.at("tokens").get<std::vector<std::string>>();
    } else {
      // a blank line is an empty caption; order carries the alignment
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) cap.tokens.push_back(tok);
    }
    cands.push_back(std::move(cap));
  }
  if (cands.size() != ids->size())
    throw std::runtime_error("candidate count " + std::to_string(cands.size()) +
                             " does not match split size " + std::to_string(ids->size()));
  metrics::ReferenceSets refs;
  for (uint64_t id : *ids) refs.push_back(bundle.references[id]);
  const metrics::MetricReport report = metrics::evaluate_set(cands, refs);

  fs::create_directories(cfg.output_dir);
  const std::string table = format_report_table({{split, report}});
  atomic_write_text(cfg.output_dir / "report.txt", table);
  atomic_write_text(cfg.output_dir / "report.jsonl", report_json(split, report, cfg.seed).dump() + "\n");
  write_run_manifest(cfg, cfg.output_dir, "evaluate");
  std::fputs(table.c_str(), stdout);
  return 0;
}

namespace {

metrics::MetricReport evaluate_items(const clm::DecoderParams& decoder,
                                     const std::vector<clm::EvalItem>& items,
                                     const gen::GenerationConfig& gencfg, const Vocab& vocab) {
  metrics::Candidates cands;
  metrics::ReferenceSets refs;
  for (const auto& item : items) {
    const clm::InputSequence input = gen::build_generation_input(item.f, item.anchors, vocab);
    world::CaptionText cap = gen::beam_search(decoder, input, gencfg, vocab);
    cap.scene_id = item.scene_id;
    cands.push_back(std::move(cap));
    refs.push_back(item.references);
  }
  return metrics::evaluate_set(cands, refs);
}

}  // namespace

AblationResult run_ablation(const world::DatasetBundle& bundle, const enc::EncoderParams& encoder,
                            const RunConfig& cfg, const AblationGrid& grid, size_t eval_images) {
  for (double v : grid.p_values)
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("ablation: p out of [0,1]");
  for (double v : grid.q_values)
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("ablation: q out of [0,1]");

  const auto samples = make_train_samples(bundle, encoder);
  const auto val_text = validation_items(bundle, encoder, cfg, /*image_side=*/false);
  const auto val_image = validation_items(bundle, encoder, cfg, /*image_side=*/true);

  // One model per q, trained in parallel; models are independent and all
  // randomness is substream-derived, so scheduling cannot change results.
  std::vector<clm::ClmTrainResult> trained(grid.q_values.size());
  std::vector<std::thread> workers;
  for (size_t qi = 0; qi < grid.q_values.size(); ++qi) {
    workers.emplace_back([&, qi] {
      clm::ClmConfig ccfg = cfg.clm;
      ccfg.q = grid.q_values[qi];
      ccfg.seed = cfg.seed;
      ccfg.verbose = false;
      trained[qi] = clm::train_clm(samples, ccfg, encoder.vocab, val_text, val_image, cfg.gen);
    });
  }
  for (auto& w : workers) w.join();

  // Detections are per-scene substreams, so every (p, q) cell sees the same
  // detector output thresholded differently.
  std::vector<uint64_t> test_ids = bundle.splits.test;
  if (test_ids.size() > eval_images) test_ids.resize(eval_images);

  AblationResult result;
  result.grid = grid;
  result.cells.assign(grid.p_values.size(), std::vector<double>(grid.q_values.size(), 0.0));
  for (size_t qi = 0; qi < grid.q_values.size(); ++qi) {
    const bool anchor_free_model = grid.q_values[qi] >= 1.0;
    if (anchor_free_model) {
      // Trained without anchors; generation provides none either,
      // independent of p. Same input builder as every other cell.
      std::vector<clm::EvalItem> items;
      for (uint64_t id : test_ids) {
        clm::EvalItem item = make_image_eval_item(bundle, encoder, id, bundle.world.detector_noise,
                                                  /*p=*/1.0, cfg.seed);
        item.anchors.clear();
        items.push_back(std::move(item));
      }
      result.q1_value =
          evaluate_items(trained[qi].params, items, cfg.gen, encoder.vocab).mean_score;
      for (size_t pi = 0; pi < grid.p_values.size(); ++pi) result.cells[pi][qi] = result.q1_value;
      continue;
    }
    for (size_t pi = 0; pi < grid.p_values.size(); ++pi) {
      std::vector<clm::EvalItem> items;
      for (uint64_t id : test_ids)
        items.push_back(make_image_eval_item(bundle, encoder, id, bundle.world.detector_noise,
                                             grid.p_values[pi], cfg.seed));
      result.cells[pi][qi] =
          evaluate_items(trained[qi].params, items, cfg.gen, encoder.vocab).mean_score;
    }
  }
  return result;
}

std::string format_ablation_table(const AblationResult& result) {
  std::ostringstream out;
  out << "p \\ q ";
  bool has_q1 = false;
  for (double q : result.grid.q_values) {
    char buf[32];
    if (q >= 1.0) {
      has_q1 = true;
      continue;
    }
    std::snprintf(buf, sizeof(buf), "%8.2f", q);
    out << buf;
  }
  if (has_q1) out << "       1";
  out << "\n";
  for (size_t pi = 0; pi < result.grid.p_values.size(); ++pi) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "p=%-4.2f", result.grid.p_values[pi]);
    out << buf;
    for (size_t qi = 0; qi < result.grid.q_values.size(); ++qi) {
      if (result.grid.q_values[qi] >= 1.0) continue;
      std::snprintf(buf, sizeof(buf), "%8.2f", result.cells[pi][qi]);
      out << buf;
    }
    if (has_q1) {
      // Anchor-free column holds a single value, independent of p.
      if (pi == 0)
        std::snprintf(buf, sizeof(buf), "%8.2f", result.q1_value);
      else
        std::snprintf(buf, sizeof(buf), "%8s", "");
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

int cmd_ablate(const RunConfig& cfg, const AblationGrid& grid) {
  const world::DatasetBundle bundle = load_bundle(cfg);
  const Vocab vocab = load_vocab_for(cfg);
  const enc::EncoderParams encoder = load_encoder_for(cfg, vocab);
  const AblationResult result = run_ablation(bundle, encoder, cfg, grid, /*eval_images=*/200);

  fs::create_directories(cfg.output_dir);
  const std::string table = format_ablation_table(result);
  atomic_write_text(cfg.output_dir / "ablation.txt", table);
  std::string jsonl;
  for (size_t pi = 0; pi < grid.p_values.size(); ++pi)
    for (size_t qi = 0; qi < grid.q_values.size(); ++qi) {
      ojson j;
      j["p"] = grid.p_values[pi];
      j["q"] = grid.q_values[qi];
      j["mean_score"] = result.cells[pi][qi];
      j["anchor_free"] = grid.q_values[qi] >= 1.0;
      j["seed"] = cfg.seed;
      jsonl += j.dump() + "\n";
    }
  atomic_write_text(cfg.output_dir / "ablation.jsonl", jsonl);
  write_run_manifest(cfg, cfg.output_dir, "ablate");
  std::fputs(table.c_str(), stdout);
  return 0;
}

int cmd_crossdomain(const RunConfig& cfg_a, const RunConfig& cfg_b) {
  struct Domain {
    world::DatasetBundle bundle;
    Vocab vocab;
    enc::EncoderParams encoder;
    clm::DecoderParams decoder;
    std::string name;
  };
  const auto load_domain = [](const RunConfig& cfg) {
    world::DatasetBundle bundle = load_bundle(cfg);
    Vocab vocab = load_vocab_for(cfg);
    enc::EncoderParams encoder = load_encoder_for(cfg, vocab);
    clm::DecoderParams decoder = load_decoder_for(cfg);
    return Domain{std::move(bundle), std::move(vocab), std::move(encoder), std::move(decoder),
                  cfg.domain_id};
  };
  Domain a = load_domain(cfg_a);
  Domain b = load_domain(cfg_b);
  if (a.bundle.world.feature_dim() != b.bundle.world.feature_dim())
    throw std::runtime_error("cross-domain: image feature dimensions differ");

  size_t dropped_labels = 0;
  const auto evaluate_on = [&](const Domain& model, const Domain& data) {
    std::vector<clm::EvalItem> items;
    for (uint64_t id : data.bundle.splits.test) {
      clm::EvalItem item;
      item.scene_id = id;
      item.f = enc::encode_image(data.bundle.image_set[id], model.encoder);
      Rng det_rng = Rng(cfg_a.seed).substream("detector", id);
      const auto detections =
          world::detect_objects(data.bundle.scenes[id], data.bundle.world,
                                data.bundle.world.detector_noise, det_rng);
      for (const auto& anchor : gen::filter_anchors(detections, cfg_a.gen.p))
        if (model.vocab.id_or_unk(anchor) == Vocab::kUnk) ++dropped_labels;
      item.anchors = gen::filter_anchors(detections, cfg_a.gen.p);
      item.references = data.bundle.references[id];
      items.push_back(std::move(item));
    }
    return evaluate_items(model.decoder, items, cfg_a.gen, model.vocab);
  };

  std::vector<std::pair<std::string, metrics::MetricReport>> rows;
  rows.emplace_back(a.name + " => " + a.name, evaluate_on(a, a));
  rows.emplace_back(a.name + " => " + b.name, evaluate_on(a, b));
  rows.emplace_back(b.name + " => " + b.name, evaluate_on(b, b));
  rows.emplace_back(b.name + " => " + a.name, evaluate_on(b, a));

  fs::create_directories(cfg_a.output_dir);
  const std::string table = format_report_table(rows);
  atomic_write_text(cfg_a.output_dir / "crossdomain.txt", table);
  std::string jsonl;
  for (const auto& [name, r] : rows) jsonl += report_json(name, r, cfg_a.seed).dump() + "\n";
  atomic_write_text(cfg_a.output_dir / "crossdomain.jsonl", jsonl);
  write_run_manifest(cfg_a, cfg_a.output_dir, "cross-domain");
  if (dropped_labels)
    std::printf("note: %zu detector labels outside the model vocabulary were dropped\n", dropped_labels);
  std::fputs(table.c_str(), stdout);
  return 0;
}

int cmd_dynamics(const RunConfig& cfg) {
  const fs::path log_path = cfg.checkpoint_dir / "clm.log.jsonl";
  require_exists(log_path, "training log");
  const clm::TrainingLog log = clm::load_training_log(log_path);
  if (log.epochs.empty()) throw std::runtime_error("training log has no epochs");

  std::string jsonl, table = "epoch  text_mean  caption_mean  caption_cider  best\n";
  for (const auto& rec : log.epochs) {
    ojson j;
    j["epoch"] = rec.epoch;
    j["text_mean"] = rec.text_gen.mean_score;
    j["caption_mean"] = rec.caption.mean_score;
    j["caption_cider"] = rec.caption.cider;
    j["early_stop"] = rec.epoch == log.best_epoch;
    j["seed"] = cfg.seed;
    jsonl += j.dump() + "\n";
    char line[128];
    std::snprintf(line, sizeof(line), "%-5zu  %-9.2f  %-12.2f  %-13.3f  %s\n", rec.epoch,
                  rec.text_gen.mean_score, rec.caption.mean_score, rec.caption.cider,
                  rec.epoch == log.best_epoch ? "*" : "");
    table += line;
  }
  // Observational: whether text-side generation keeps improving after the
  // caption side has peaked (the transfer-inhibition crossover).
  size_t text_peak = 0, caption_peak = 0;
  double best_text = -1.0, best_caption = -1.0;
  for (const auto& rec : log.epochs) {
    if (rec.text_gen.mean_score > best_text) {
      best_text = rec.text_gen.mean_score;
      text_peak = rec.epoch;
    }
    if (rec.caption.cider > best_caption) {
      best_caption = rec.caption.cider;
      caption_peak = rec.epoch;
    }
  }
  char summary[160];
  std::snprintf(summary, sizeof(summary),
                "caption peak epoch %zu, text-gen peak epoch %zu, crossover observed: %s\n",
                caption_peak, text_peak, text_peak > caption_peak ? "yes" : "no");
  table += summary;

  fs::create_directories(cfg.output_dir);
  atomic_write_text(cfg.output_dir / "dynamics.jsonl", jsonl);
  atomic_write_text(cfg.output_dir / "dynamics.txt", table);
  write_run_manifest(cfg, cfg.output_dir, "dynamics");
  std::fputs(table.c_str(), stdout);
  return 0;
}

int cmd_counterfactual(const RunConfig& cfg, const std::string& source_phrase,
                       const std::string& target_phrase, double scale, size_t max_images) {
  const world::DatasetBundle bundle = load_bundle(cfg);
  const Vocab vocab = load_vocab_for(cfg);
  const enc::EncoderParams encoder = load_encoder_for(cfg, vocab);
  const clm::DecoderParams decoder = load_decoder_for(cfg);

  const auto to_caption = [](const std::string& phrase) {
    world::CaptionText cap;
    std::istringstream in(phrase);
    std::string tok;
    while (in >> tok) cap.tokens.push_back(tok);
    if (cap.tokens.empty()) throw std::runtime_error("counterfactual: empty phrase");
    return cap;
  };
  cf::ConceptShift shift = cf::concept_direction(to_caption(source_phrase), to_caption(target_phrase), encoder);
  shift.scale = scale;

  std::vector<clm::EvalItem> items;
  for (uint64_t id : bundle.splits.test) {
    if (items.size() >= max_images) break;
    items.push_back(
        make_image_eval_item(bundle, encoder, id, bundle.world.detector_noise, cfg.gen.p, cfg.seed));
  }
  const auto pairs = cf::counterfactual_report(items, shift, decoder, cfg.gen, vocab);

  std::string jsonl, text;
  size_t changed = 0;
  for (const auto& p : pairs) {
    ojson j;
    j["scene_id"] = p.scene_id;
    j["original"] = p.original.tokens;
    j["counterfactual"] = p.shifted.tokens;
    j["removed"] = p.removed;
    j["added"] = p.added;
    j["seed"] = cfg.seed;
    jsonl += j.dump() + "\n";
    if (!p.removed.empty() || !p.added.empty()) ++changed;
    text += "scene " + std::to_string(p.scene_id) + "\n  orig: " + p.original.text() +
            "\n  cf:   " + p.shifted.text() + "\n";
  }
  char summary[160];
  std::snprintf(summary, sizeof(summary), "shift '%s' -> '%s' scale %.2f: %zu/%zu captions changed\n",
                source_phrase.c_str(), target_phrase.c_str(), scale, changed, pairs.size());
  text += summary;
  fs::create_directories(cfg.output_dir);
  atomic_write_text(cfg.output_dir / "counterfactual.jsonl", jsonl);
  atomic_write_text(cfg.output_dir / "counterfactual.txt", text);
  write_run_manifest(cfg, cfg.output_dir, "counterfactual");
  std::fputs(summary, stdout);
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg) {
  const GradSuiteResult result = run_gradient_suite(cfg.seed);
  for (const auto& row : result.rows)
    std::printf("%-30s max rel err %.3e  (tol %.0e)  %s\n", row.name.c_str(), row.max_rel_err,
                row.tolerance, row.pass ? "ok" : "FAIL");
  return result.all_pass ? 0 : 1;
}

}  // namespace zcap::cli
