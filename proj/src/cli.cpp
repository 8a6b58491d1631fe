#include "rsit/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rsit/changedetect.hpp"
#include "rsit/config.hpp"
#include "rsit/features.hpp"
#include "rsit/image_io.hpp"
#include "rsit/metrics.hpp"
#include "rsit/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rsit::cli {

namespace {

/// Misuse detected after parsing (missing companion flag, bad choice). Exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::vector<std::string> set;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  bool desk = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Flat 'section.key = value' config file")->check(CLI::ExistingFile);
  sub->add_option("--set", c.set, "Override one config key, e.g. --set train.lr0=1e-4")->take_all();
  sub->add_option_function<std::uint64_t>(
      "--seed",
      [&c](const std::uint64_t& s) {
        c.seed = s;
        c.seed_given = true;
      },
      "Seed for every random stream");
  sub->add_option("--out", c.out, "Output directory");
  sub->add_flag("--desk", c.desk, "Desk-scale preset (1/8 widths, 64x64 crops)");
}

RunConfig resolve(const Common& c, std::vector<std::pair<std::string, std::string>> extra = {}) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& s : c.set) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (c.seed_given) overrides.emplace_back("seed", std::to_string(c.seed));
  for (auto& e : extra) overrides.push_back(std::move(e));
  RunConfig base;
  if (c.desk) base.apply_desk_preset();
  return load_run_config(c.config, overrides, base);
}

void prepare_out(const fs::path& out, const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (!fs::is_directory(out)) throw std::runtime_error("cannot create output directory " + out.string());
  std::ofstream f(out / "config.resolved");
  if (!f) throw std::runtime_error("cannot write to output directory " + out.string());
  f << cfg.dump();
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && io::has_image_extension(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<Tensor> read_images(const std::vector<fs::path>& files) {
  std::vector<Tensor> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(io::read_image(f));
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

train::Direction parse_direction(const std::string& d) {
  if (d == "xy") return train::Direction::XY;
  if (d == "yx") return train::Direction::YX;
  throw UsageError("--direction must be xy or yx, got '" + d + "'");
}

// ---------------------------------------------------------------------------

int cmd_datagen(const Common& c, std::ostream& out) {
  if (c.out.empty()) throw UsageError("datagen needs --out");
  RunConfig cfg = resolve(c);
  prepare_out(c.out, cfg);
  const fs::path manifest = data::write_benchmark(c.out, cfg.bench);
  out << manifest.string() << '\n';
  return kSuccess;
}

struct TrainArgs {
  std::string data;
  int epochs = -1;
  std::string resume;
  bool dry_run = false;
};

int cmd_train(const Common& c, const TrainArgs& a, std::ostream& out) {
  std::vector<std::pair<std::string, std::string>> extra;
  if (a.epochs >= 0) extra.emplace_back("train.epochs_total", std::to_string(a.epochs));
  RunConfig cfg = resolve(c, extra);

  if (a.dry_run) {
    const GeneratorConfig g = cfg.train.generator_config();
    const DiscriminatorConfig d = cfg.train.discriminator_config();
    const double g_macs = generator_gmacs(g, cfg.crop, cfg.crop);
    const double d_macs = discriminator_gmacs(d, cfg.crop);
    train::TranslationModel m(cfg.train);
    const std::size_t gp = m.g_xy().parameter_count(), dp = m.d_x().parameter_count();
    out << "network,params_M,GMACs@" << cfg.crop << "\n";
    out << "generator," << fixed(static_cast<double>(gp) / 1e6, 3) << "," << fixed(g_macs, 3) << "\n";
    out << "discriminator," << fixed(static_cast<double>(dp) / 1e6, 3) << "," << fixed(d_macs, 3) << "\n";
    out << "GFLOPs per translated image (multiply-accumulates, profiler convention): " << fixed(g_macs, 3) << "\n";
    return kSuccess;
  }

  if (c.out.empty()) throw UsageError("train needs --out");
  if (a.data.empty()) throw UsageError("train needs --data");
  const fs::path root(a.data);
  data::UnpairedDataset ds{
      data::DomainDataset::load_folder(root / "trainX", data::Domain::X, cfg.crop, cfg.seed),
      data::DomainDataset::load_folder(root / "trainY", data::Domain::Y, cfg.crop, cfg.seed + 1)};
  if (ds.x.empty() || ds.y.empty()) {
    throw std::runtime_error("no training images under " + (root / "trainX").string() + " or " +
                             (root / "trainY").string());
  }
  prepare_out(c.out, cfg);
  std::unique_ptr<train::Trainer> trainer;
  if (!a.resume.empty()) {
    trainer = train::Trainer::resume(a.resume, cfg.train);
    out << "resumed at epoch " << trainer->epoch() << " iteration " << trainer->iteration() << '\n';
  } else {
    trainer = std::make_unique<train::Trainer>(cfg.train);
  }
  train::FitOptions opts;
  opts.out_dir = c.out;
  opts.progress = &out;
  trainer->fit(ds, opts);
  out << "checkpoint " << (fs::path(c.out) / "checkpoint.rsit").string() << '\n';
  return kSuccess;
}

struct TranslateArgs {
  std::string checkpoint, input, direction;
};

int cmd_translate(const Common& c, const TranslateArgs& a, std::ostream& out) {
  if (c.out.empty()) throw UsageError("translate needs --out");
  const train::Direction dir = parse_direction(a.direction);
  RunConfig cfg = resolve(c);
  const auto files = list_images(a.input);
  prepare_out(c.out, cfg);
  if (files.empty()) {
    out << "0 images\n";
    return kSuccess;
  }
  auto model = train::load_model(a.checkpoint);
  out << "image,seconds\n";
  double total = 0.0;
  for (const auto& f : files) {
    const Tensor img = io::read_image(f);
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor result = model->translate(img, dir);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    total += sec;
    io::write_image(fs::path(c.out) / (f.stem().string() + ".png"), result);
    out << f.filename().string() << "," << fixed(sec, 4) << '\n';
  }
  out << "mean," << fixed(total / static_cast<double>(files.size()), 4) << '\n';
  out << files.size() << " images\n";
  return kSuccess;
}

struct EvalTranslationArgs {
  std::string real, fake, checkpoint, input, direction, extractor, weights;
};

int cmd_eval_translation(const Common& c, const EvalTranslationArgs& a, std::ostream& out) {
  std::vector<std::pair<std::string, std::string>> extra;
  if (!a.extractor.empty()) extra.emplace_back("metrics.extractor", a.extractor);
  if (!a.weights.empty()) extra.emplace_back("metrics.weights", a.weights);
  RunConfig cfg = resolve(c, extra);
  if (a.fake.empty() == a.input.empty()) throw UsageError("eval-translation needs exactly one of --fake or --input");
  if (!a.input.empty() && (a.checkpoint.empty() || a.direction.empty())) {
    throw UsageError("--input needs --checkpoint and --direction");
  }
  const std::vector<Tensor> real = read_images(list_images(a.real));
  std::vector<Tensor> fake;
  if (!a.fake.empty()) {
    fake = read_images(list_images(a.fake));
  } else {
    const train::Direction dir = parse_direction(a.direction);
    auto model = train::load_model(a.checkpoint);
    for (const auto& img : read_images(list_images(a.input))) fake.push_back(model->translate(img, dir));
  }
  if (real.size() < 2 || fake.size() < 2) throw std::runtime_error("eval-translation needs at least 2 images per set");
  auto extractor = features::make_extractor(cfg.extractor, cfg.weights);
  const auto fr = features::extract_all(*extractor, real);
  const auto ff = features::extract_all(*extractor, fake);
  const double is = metrics::inception_score(ff.probs, cfg.is_splits);
  const double fid = metrics::fid(ff.features, fr.features);
  const double kid = metrics::kid(ff.features, fr.features);

  out << "IS,FID,KID(x100)\n" << fixed(is, 4) << "," << fixed(fid, 4) << "," << fixed(100.0 * kid, 4) << '\n';
  const json record = {{"extractor", extractor->name()}, {"real", a.real},       {"fake", a.fake.empty() ? a.input : a.fake},
                       {"n_real", real.size()},          {"n_fake", fake.size()}, {"is", is},
                       {"fid", fid},                     {"kid", kid},            {"seed", cfg.seed}};
  if (!c.out.empty()) {
    prepare_out(c.out, cfg);
    std::ofstream(fs::path(c.out) / "metrics.csv") << "IS,FID,KID(x100)\n"
                                                   << is << "," << fid << "," << 100.0 * kid << '\n';
    std::ofstream(fs::path(c.out) / "metrics.jsonl", std::ios::app) << record.dump() << '\n';
  } else {
    out << record.dump() << '\n';
  }
  return kSuccess;
}

struct EvalCdArgs {
  std::string data, checkpoint, direction = "w2s", pred;
};

struct CdRow {
  std::string method;
  double fa = 0, ma = 0, oe = 0, pcc = 0;
  int n = 0;
};

int cmd_eval_cd(const Common& c, const EvalCdArgs& a, std::ostream& out, std::ostream& err) {
  if (c.out.empty()) throw UsageError("eval-cd needs --out");
  if (a.data.empty()) throw UsageError("eval-cd needs --data");
  if (a.direction != "w2s" && a.direction != "s2w") {
    throw UsageError("--direction must be w2s or s2w, got '" + a.direction + "'");
  }
  RunConfig cfg = resolve(c);
  const auto pairs = data::load_pairs(a.data);
  if (pairs.empty()) throw std::runtime_error("no pairs under " + (fs::path(a.data) / "pairs").string());
  std::unique_ptr<train::TranslationModel> model;
  if (!a.checkpoint.empty()) model = train::load_model(a.checkpoint);
  else if (a.pred.empty()) err << "note: no --checkpoint given; reporting the pcakm row only\n";
  prepare_out(c.out, cfg);
  const cd::CdDirection dir = a.direction == "w2s" ? cd::CdDirection::WinterToSummer : cd::CdDirection::SummerToWinter;

  std::vector<CdRow> rows;
  auto row = [&](const std::string& m) -> CdRow& {
    for (auto& r : rows)
      if (r.method == m) return r;
    rows.push_back({m});
    return rows.back();
  };
  std::ofstream per_pair(fs::path(c.out) / "cd_pairs.csv");
  per_pair << "pair,method,fa,ma,oe,pcc\n";
  auto record = [&](const std::string& method, const data::ChangePair& p, const Tensor& map) {
    const auto s = metrics::score_change_map(map, p.mask);
    per_pair << p.name << "," << method << "," << s.fa << "," << s.ma << "," << s.oe << "," << fixed(s.pcc, 4) << '\n';
    CdRow& r = row(method);
    r.fa += s.fa;
    r.ma += s.ma;
    r.oe += s.oe;
    r.pcc += s.pcc;
    ++r.n;
    const fs::path dir_out = fs::path(c.out) / "maps" / method;
    fs::create_directories(dir_out);
    io::write_mask(dir_out / (fs::path(p.name).stem().string() + ".png"), map);
  };
  for (const auto& p : pairs) {
    if (!a.pred.empty()) {
      record("pred", p, io::read_mask(fs::path(a.pred) / (fs::path(p.name).stem().string() + ".png")));
      continue;
    }
    record("pcakm", p, cd::pcakm(cd::difference_image(p.t1, p.t2, cfg.pcakm.luminance), cfg.pcakm));
    if (model) record("translate+pcakm", p, cd::detect_with_translation(p.t1, p.t2, *model, dir, cfg.pcakm));
  }
  std::ofstream summary(fs::path(c.out) / "cd_summary.csv");
  summary << "method,fa,ma,oe,pcc\n";
  out << "method,FA,MA,OE,PCC\n";
  for (const auto& r : rows) {
    const double n = r.n;
    const std::string line = r.method + "," + fixed(r.fa / n, 2) + "," + fixed(r.ma / n, 2) + "," +
                             fixed(r.oe / n, 2) + "," + fixed(r.pcc / n, 4);
    summary << line << '\n';
    out << line << '\n';
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Season-varying remote-sensing image translation and change detection", "rsit"};
  app.require_subcommand(1);
  Common common;

  auto* datagen = app.add_subcommand("datagen", "Write the synthetic season-pair benchmark");
  add_common(datagen, common);

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "Train the translation model");
  add_common(trainc, common);
  trainc->add_option("--data", ta.data, "Dataset root with trainX/ and trainY/");
  trainc->add_option("--epochs", ta.epochs, "Total epochs (overrides train.epochs_total)")->check(CLI::NonNegativeNumber);
  trainc->add_option("--resume", ta.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  trainc->add_flag("--dry-run", ta.dry_run, "Print parameter and GFLOPs figures, then exit");

  TranslateArgs tr;
  auto* translate = app.add_subcommand("translate", "Translate a folder of images");
  add_common(translate, common);
  translate->add_option("--checkpoint", tr.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  translate->add_option("--input", tr.input, "Input image folder")->required();
  translate->add_option("--direction", tr.direction, "xy (summer to winter) or yx")->required();

  EvalTranslationArgs ea;
  auto* evalt = app.add_subcommand("eval-translation", "IS, FID and KID of translated images");
  add_common(evalt, common);
  evalt->add_option("--real", ea.real, "Folder of real target-domain images")->required();
  evalt->add_option("--fake", ea.fake, "Folder of already translated images");
  evalt->add_option("--checkpoint", ea.checkpoint, "Translate --input with this checkpoint")->check(CLI::ExistingFile);
  evalt->add_option("--input", ea.input, "Source images to translate");
  evalt->add_option("--direction", ea.direction, "xy or yx, with --input");
  evalt->add_option("--extractor", ea.extractor, "tiny-cnn or pretrained-inception");
  evalt->add_option("--weights", ea.weights, "Inception weight file");

  EvalCdArgs ec;
  auto* evalcd = app.add_subcommand("eval-cd", "PCAKM change detection with and without translation");
  add_common(evalcd, common);
  evalcd->add_option("--data", ec.data, "Benchmark root with pairs/{t1,t2,mask}");
  evalcd->add_option("--checkpoint", ec.checkpoint, "Trained checkpoint")->check(CLI::ExistingFile);
  evalcd->add_option("--direction", ec.direction, "w2s (translate winter) or s2w")->capture_default_str();
  evalcd->add_option("--pred", ec.pred, "Score these change maps instead of running PCAKM");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run 'rsit --help' for usage\n";
    return kUsageError;
  }

  try {
    if (datagen->parsed()) return cmd_datagen(common, out);
    if (trainc->parsed()) return cmd_train(common, ta, out);
    if (translate->parsed()) return cmd_translate(common, tr, out);
    if (evalt->parsed()) return cmd_eval_translation(common, ea, out);
    if (evalcd->parsed()) return cmd_eval_cd(common, ec, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}

}  // namespace rsit::cli
