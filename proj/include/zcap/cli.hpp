// End-to-end commands: data generation, the two training stages, captioning,
// evaluation, the p/q ablation sweep, training-dynamics export, the
// counterfactual probe, and a gradient-check verb. Each command is callable
// in-process (the binary in tools/ is a thin argument parser over these).
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "zcap/clm.hpp"
#include "zcap/config.hpp"
#include "zcap/counterfactual.hpp"
#include "zcap/dualencoder.hpp"
#include "zcap/generation.hpp"
#include "zcap/metrics.hpp"
#include "zcap/microworld.hpp"

namespace zcap::cli {

struct AblationGrid {
  std::vector<double> p_values = {0.5, 0.7, 0.9, 1.0};
  std::vector<double> q_values = {0.0, 0.25, 0.5, 0.75, 1.0};
};

struct AblationResult {
  AblationGrid grid;
  // cells[i][j] = mean score at p_values[i], q_values[j] (q < 1 columns).
  std::vector<std::vector<double>> cells;
  double q1_value = 0.0;  // anchor-free column, independent of p
};

int cmd_gen_data(const RunConfig& cfg);
int cmd_train_encoder(const RunConfig& cfg);
int cmd_train_clm(const RunConfig& cfg);
int cmd_caption(const RunConfig& cfg, const std::string& split, bool zero_prefix, bool timing);
int cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& candidates_file,
                 const std::string& split);
int cmd_ablate(const RunConfig& cfg, const AblationGrid& grid);
int cmd_crossdomain(const RunConfig& cfg_a, const RunConfig& cfg_b);
int cmd_dynamics(const RunConfig& cfg);
int cmd_counterfactual(const RunConfig& cfg, const std::string& source_phrase,
                       const std::string& target_phrase, double scale, size_t max_images);
int cmd_gradcheck(const RunConfig& cfg);

// Pieces shared with the acceptance suite.
clm::EvalItem make_text_eval_item(const world::DatasetBundle& bundle, const enc::EncoderParams& encoder,
                                  uint64_t scene_id);
clm::EvalItem make_image_eval_item(const world::DatasetBundle& bundle, const enc::EncoderParams& encoder,
                                   uint64_t scene_id, const world::DetectorNoiseSpec& noise, double p,
                                   uint64_t seed);
std::vector<clm::TrainSample> make_train_samples(const world::DatasetBundle& bundle,
                                                 const enc::EncoderParams& encoder);
AblationResult run_ablation(const world::DatasetBundle& bundle, const enc::EncoderParams& encoder,
                            const RunConfig& cfg, const AblationGrid& grid, size_t eval_images);
std::string format_ablation_table(const AblationResult& result);
std::string format_report_table(const std::vector<std::pair<std::string, metrics::MetricReport>>& rows);

}  // namespace zcap::cli
