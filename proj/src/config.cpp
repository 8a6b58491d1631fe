#include "rsit/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace rsit {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config: " + key + " = '" + value + "' is not " + want);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field int_field(T RunConfig::*outer, int T::*member) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) {
            c.*outer.*member = static_cast<int>(parse_int(k, v));
          },
          [=](const RunConfig& c) { return std::to_string(c.*outer.*member); }};
}

template <class T>
Field double_field(T RunConfig::*outer, double T::*member) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) { c.*outer.*member = parse_double(k, v); },
          [=](const RunConfig& c) { return fmt_double(c.*outer.*member); }};
}

template <class T>
Field bool_field(T RunConfig::*outer, bool T::*member) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) { c.*outer.*member = parse_bool(k, v); },
          [=](const RunConfig& c) { return std::string(c.*outer.*member ? "true" : "false"); }};
}

Field scene_int(int data::SyntheticSceneSpec::*member) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) {
            c.bench.scene.*member = static_cast<int>(parse_int(k, v));
          },
          [=](const RunConfig& c) { return std::to_string(c.bench.scene.*member); }};
}

Field scene_double(double data::SyntheticSceneSpec::*member) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) { c.bench.scene.*member = parse_double(k, v); },
          [=](const RunConfig& c) { return fmt_double(c.bench.scene.*member); }};
}

const std::map<std::string, Field>& fields() {
  using train::TrainConfig;
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    t["train.epochs_total"] = int_field(&RunConfig::train, &TrainConfig::epochs_total);
    t["train.lr0"] = double_field(&RunConfig::train, &TrainConfig::lr0);
    t["train.lambda_cyc"] = double_field(&RunConfig::train, &TrainConfig::lambda_cyc);
    t["train.lambda_id"] = double_field(&RunConfig::train, &TrainConfig::lambda_id);
    t["train.batch_size"] = int_field(&RunConfig::train, &TrainConfig::batch_size);
    t["train.scale"] = double_field(&RunConfig::train, &TrainConfig::scale);
    t["train.blocks"] = int_field(&RunConfig::train, &TrainConfig::blocks);
    t["train.use_srm"] = bool_field(&RunConfig::train, &TrainConfig::use_srm);
    t["train.use_style_loss"] = bool_field(&RunConfig::train, &TrainConfig::use_style_loss);
    t["train.style_to_generator"] = bool_field(&RunConfig::train, &TrainConfig::style_to_generator);
    t["train.beta1"] = double_field(&RunConfig::train, &TrainConfig::beta1);
    t["train.beta2"] = double_field(&RunConfig::train, &TrainConfig::beta2);
    t["train.history_capacity"] = int_field(&RunConfig::train, &TrainConfig::history_capacity);
    t["train.checkpoint_every"] = int_field(&RunConfig::train, &TrainConfig::checkpoint_every);
    t["train.crop"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         c.crop = static_cast<int>(parse_int(k, v));
                       },
                       [](const RunConfig& c) { return std::to_string(c.crop); }};
    t["pcakm.block"] = int_field(&RunConfig::pcakm, &cd::PcakmConfig::block);
    t["pcakm.eigen_count"] = int_field(&RunConfig::pcakm, &cd::PcakmConfig::eigen_count);
    t["pcakm.max_iterations"] = int_field(&RunConfig::pcakm, &cd::PcakmConfig::max_iterations);
    t["pcakm.tolerance"] = double_field(&RunConfig::pcakm, &cd::PcakmConfig::tolerance);
    t["pcakm.luminance"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                              std::stringstream ss(v);
                              std::string part;
                              std::vector<double> w;
                              while (std::getline(ss, part, ',')) w.push_back(parse_double(k, trim(part)));
                              if (w.size() != 3) bad_value(k, v, "three comma-separated weights");
                              c.pcakm.luminance = {w[0], w[1], w[2]};
                            },
                            [](const RunConfig& c) {
                              return fmt_double(c.pcakm.luminance[0]) + "," + fmt_double(c.pcakm.luminance[1]) + "," +
                                     fmt_double(c.pcakm.luminance[2]);
                            }};
    t["data.train_per_domain"] = int_field(&RunConfig::bench, &data::BenchmarkSpec::train_per_domain);
    t["data.test_per_domain"] = int_field(&RunConfig::bench, &data::BenchmarkSpec::test_per_domain);
    t["data.pairs"] = int_field(&RunConfig::bench, &data::BenchmarkSpec::pairs);
    t["data.size"] = scene_int(&data::SyntheticSceneSpec::size);
    t["data.structure_count"] = scene_int(&data::SyntheticSceneSpec::structure_count);
    t["data.structure_min"] = scene_int(&data::SyntheticSceneSpec::structure_min);
    t["data.structure_max"] = scene_int(&data::SyntheticSceneSpec::structure_max);
    t["data.change_count"] = scene_int(&data::SyntheticSceneSpec::change_count);
    t["data.vegetation_fraction"] = scene_double(&data::SyntheticSceneSpec::vegetation_fraction);
    t["data.pixel_jitter"] = scene_double(&data::SyntheticSceneSpec::pixel_jitter);
    t["data.global_noise"] = scene_double(&data::SyntheticSceneSpec::global_noise);
    t["metrics.extractor"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.extractor = v; },
                              [](const RunConfig& c) { return c.extractor; }};
    t["metrics.weights"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.weights = v; },
                            [](const RunConfig& c) { return c.weights; }};
    t["metrics.is_splits"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                c.is_splits = static_cast<int>(parse_int(k, v));
                              },
                              [](const RunConfig& c) { return std::to_string(c.is_splits); }};
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "train.epochs_constant") {
    train.epochs_constant = static_cast<int>(parse_int(key, value));
    epochs_constant_set_ = true;
    return;
  }
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second.set(*this, key, value);
}

void RunConfig::resolve() {
  train.seed = seed;
  bench.seed = seed;
  bench.scene.seed = seed;
  pcakm.seed = seed;
  // Half the epochs at the initial rate unless stated otherwise.
  if (!epochs_constant_set_) train.epochs_constant = train.epochs_total / 2;
  if (crop < 16) throw ConfigError("config: train.crop must be >= 16");
  if (is_splits < 1) throw ConfigError("config: metrics.is_splits must be >= 1");
  if (bench.train_per_domain < 0 || bench.test_per_domain < 0 || bench.pairs < 0) {
    throw ConfigError("config: data counts must be >= 0");
  }
  try {
    train.validate();
    pcakm.validate();
    bench.scene.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string RunConfig::dump() const {
  std::map<std::string, std::string> lines;
  for (const auto& [k, f] : fields()) lines[k] = f.get(*this);
  lines["train.epochs_constant"] = std::to_string(train.epochs_constant);
  std::string out;
  for (const auto& [k, v] : lines) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::apply_desk_preset() {
  train.scale = 0.125;
  crop = 64;
  bench.scene.size = 64;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return parse_config_text(s.str());
}

RunConfig load_run_config(const std::filesystem::path& file,
                          const std::vector<std::pair<std::string, std::string>>& overrides,
                          RunConfig base) {
  RunConfig c = std::move(base);
  if (!file.empty())
    for (const auto& [k, v] : read_config_file(file)) c.set(k, v);
  for (const auto& [k, v] : overrides) c.set(k, v);
  c.resolve();
  return c;
}

}  // namespace rsit
