// Run configuration: plain-text key=value files plus command-line overrides;
// precedence is CLI > file > defaults.
#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "zcap/clm.hpp"
#include "zcap/generation.hpp"
#include "zcap/microworld.hpp"

namespace zcap {

struct RunConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path output_dir = "out";
  std::string domain_id = "park";
  uint64_t seed = 17;

  size_t train_size = 5000;
  size_t val_size = 500;
  size_t test_size = 500;

  size_t encoder_epochs = 30;
  size_t encoder_batch = 128;
  double encoder_lr = 3e-4;

  clm::ClmConfig clm;
  gen::GenerationConfig gen;
  size_t eval_items = 150;  // per-epoch validation subset for CLM training

  // Applies file values over the defaults; unknown keys are an error.
  void apply_file(const std::filesystem::path& file);
  void apply_pair(const std::string& key, const std::string& value);
  std::string dump() const;
};

std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& file);

}  // namespace zcap
