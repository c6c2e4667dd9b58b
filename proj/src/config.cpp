#include "zcap/config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace zcap {

std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config: " + file.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("config: malformed line: " + line);
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

void RunConfig::apply_pair(const std::string& key, const std::string& value) {
  const auto as_size = [&] { return static_cast<size_t>(std::stoull(value)); };
  const auto as_double = [&] { return std::stod(value); };
  if (key == "data_dir")
    data_dir = value;
  else if (key == "checkpoint_dir")
    checkpoint_dir = value;
  else if (key == "output_dir")
    output_dir = value;
  else if (key == "domain_id")
    domain_id = value;
  else if (key == "seed")
    seed = std::stoull(value);
  else if (key == "train_size")
    train_size = as_size();
  else if (key == "val_size")
    val_size = as_size();
  else if (key == "test_size")
    test_size = as_size();
  else if (key == "encoder.epochs")
    encoder_epochs = as_size();
  else if (key == "encoder.batch")
    encoder_batch = as_size();
  else if (key == "encoder.lr")
    encoder_lr = as_double();
  else if (key == "clm.q")
    clm.q = as_double();
  else if (key == "clm.epochs")
    clm.epochs = as_size();
  else if (key == "clm.batch")
    clm.batch_size = as_size();
  else if (key == "clm.lr")
    clm.optimizer.learning_rate = as_double();
  else if (key == "clm.patience")
    clm.patience = as_size();
  else if (key == "clm.max_len")
    clm.max_len = as_size();
  else if (key == "gen.beam_width")
    gen.beam_width = as_size();
  else if (key == "gen.max_len")
    gen.max_len = as_size();
  else if (key == "gen.p")
    gen.p = as_double();
  else if (key == "eval_items")
    eval_items = as_size();
  else
    throw std::runtime_error("config: unknown key: " + key);
}

void RunConfig::apply_file(const std::filesystem::path& file) {
  for (const auto& [k, v] : parse_kv_file(file)) apply_pair(k, v);
}

namespace {
std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}
}  // namespace

std::string RunConfig::dump() const {
  std::string out;
  out += "data_dir=" + data_dir.string() + "\n";
  out += "checkpoint_dir=" + checkpoint_dir.string() + "\n";
  out += "output_dir=" + output_dir.string() + "\n";
  out += "domain_id=" + domain_id + "\n";
  out += "seed=" + std::to_string(seed) + "\n";
  out += "train_size=" + std::to_string(train_size) + "\n";
  out += "val_size=" + std::to_string(val_size) + "\n";
  out += "test_size=" + std::to_string(test_size) + "\n";
  out += "encoder.epochs=" + std::to_string(encoder_epochs) + "\n";
  out += "encoder.batch=" + std::to_string(encoder_batch) + "\n";
  out += "encoder.lr=" + fmt(encoder_lr) + "\n";
  out += "clm.q=" + fmt(clm.q) + "\n";
  out += "clm.epochs=" + std::to_string(clm.epochs) + "\n";
  out += "clm.batch=" + std::to_string(clm.batch_size) + "\n";
  out += "clm.lr=" + fmt(clm.optimizer.learning_rate) + "\n";
  out += "clm.patience=" + std::to_string(clm.patience) + "\n";
  out += "clm.max_len=" + std::to_string(clm.max_len) + "\n";
  out += "gen.beam_width=" + std::to_string(gen.beam_width) + "\n";
  out += "gen.max_len=" + std::to_string(gen.max_len) + "\n";
  out += "gen.p=" + fmt(gen.p) + "\n";
  out += "eval_items=" + std::to_string(eval_items) + "\n";
  return out;
}

}  // namespace zcap
