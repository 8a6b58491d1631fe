#include "rsit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "rsit/checkpoint.hpp"
#include "rsit/ops.hpp"
#include "rsit/random.hpp"

namespace fs = std::filesystem;

namespace rsit::train {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
  if (epochs_total < 0) fail("epochs_total must be >= 0");
  if (epochs_constant < 0 || epochs_constant > epochs_total) fail("need 0 <= epochs_constant <= epochs_total");
  if (!(lr0 > 0.0)) fail("lr0 must be > 0");
  if (!(lambda_cyc >= 0.0)) fail("lambda_cyc must be >= 0");
  if (!(lambda_id >= 0.0)) fail("lambda_id must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(scale > 0.0)) fail("scale must be > 0");
  if (blocks < 0) fail("blocks must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must lie in [0, 1)");
  if (history_capacity < 0) fail("history_capacity must be >= 0");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
}

GeneratorConfig TrainConfig::generator_config() const {
  GeneratorConfig g = GeneratorConfig::scaled(scale);
  for (int w : g.widths)
    if (w < 1) throw std::invalid_argument("train config: scale " + std::to_string(scale) + " leaves a zero-width generator");
  g.blocks = blocks;
  g.use_srm = use_srm;
  return g;
}

DiscriminatorConfig TrainConfig::discriminator_config() const {
  DiscriminatorConfig d = DiscriminatorConfig::scaled(scale);
  d.use_srm = use_srm;
  return d;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs_total", epochs_total},
          {"epochs_constant", epochs_constant},
          {"lr0", lr0},
          {"lambda_cyc", lambda_cyc},
          {"lambda_id", lambda_id},
          {"batch_size", batch_size},
          {"seed", seed},
          {"scale", scale},
          {"style_to_generator", style_to_generator},
          {"use_srm", use_srm},
          {"use_style_loss", use_style_loss},
          {"blocks", blocks},
          {"beta1", beta1},
          {"beta2", beta2},
          {"history_capacity", history_capacity},
          {"checkpoint_every", checkpoint_every}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("epochs_total", c.epochs_total);
  get("epochs_constant", c.epochs_constant);
  get("lr0", c.lr0);
  get("lambda_cyc", c.lambda_cyc);
  get("lambda_id", c.lambda_id);
  get("batch_size", c.batch_size);
  get("seed", c.seed);
  get("scale", c.scale);
  get("style_to_generator", c.style_to_generator);
  get("use_srm", c.use_srm);
  get("use_style_loss", c.use_style_loss);
  get("blocks", c.blocks);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("history_capacity", c.history_capacity);
  get("checkpoint_every", c.checkpoint_every);
  return c;
}

std::string TrainConfig::architecture_hash() const {
  nlohmann::json arch{{"scale", scale}, {"use_srm", use_srm}, {"blocks", blocks}};
  return ckpt::fnv1a_hex(arch.dump());
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch > cfg.epochs_total) {
    throw std::out_of_range("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(cfg.epochs_total) + "]");
  }
  if (epoch < cfg.epochs_constant) return cfg.lr0;
  const int decay = cfg.epochs_total - cfg.epochs_constant;
  if (decay == 0) return 0.0;
  return cfg.lr0 * (1.0 - static_cast<double>(epoch - cfg.epochs_constant) / decay);
}

HistoryBuffer::HistoryBuffer(data::Domain domain, int capacity) : domain_(domain), capacity_(capacity) {
  if (capacity < 0) throw std::invalid_argument("history capacity must be >= 0");
}

Tensor HistoryBuffer::query(const Tensor& fresh, std::mt19937_64& rng) {
  if (capacity_ == 0) return fresh;
  if (images_.size() < static_cast<std::size_t>(capacity_)) {
    images_.push_back(fresh);
    return fresh;
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < 0.5) return fresh;
  std::uniform_int_distribution<std::size_t> pick(0, images_.size() - 1);
  Tensor& slot = images_[pick(rng)];
  Tensor old = std::move(slot);
  slot = fresh;
  return old;
}

void HistoryBuffer::restore(std::vector<Tensor> images) {
  if (images.size() > static_cast<std::size_t>(capacity_)) {
    throw std::invalid_argument("history restore exceeds capacity");
  }
  images_ = std::move(images);
}

namespace {

std::mt19937_64 network_rng(std::uint64_t seed, std::uint64_t which) {
  return std::mt19937_64(derive_seed(seed, {0x6e6574, which}));
}

void prefixed(const std::string& prefix, const nn::Module& m, std::vector<nn::NamedParameter>& out) {
  for (auto& p : m.named_parameters()) out.push_back({prefix + p.name, p.var});
}

}  // namespace

TranslationModel::TranslationModel(const TrainConfig& cfg) {
  cfg.validate();
  const auto gc = cfg.generator_config();
  const auto dc = cfg.discriminator_config();
  auto r0 = network_rng(cfg.seed, 0), r1 = network_rng(cfg.seed, 1);
  auto r2 = network_rng(cfg.seed, 2), r3 = network_rng(cfg.seed, 3);
  g_xy_ = std::make_unique<Generator>(gc, r0);
  g_yx_ = std::make_unique<Generator>(gc, r1);
  d_x_ = std::make_unique<Discriminator>(dc, r2);
  d_y_ = std::make_unique<Discriminator>(dc, r3);
}

std::vector<nn::NamedParameter> TranslationModel::generator_parameters() const {
  std::vector<nn::NamedParameter> out;
  prefixed("g_xy.", *g_xy_, out);
  prefixed("g_yx.", *g_yx_, out);
  return out;
}

std::vector<nn::NamedParameter> TranslationModel::discriminator_parameters() const {
  std::vector<nn::NamedParameter> out;
  prefixed("d_x.", *d_x_, out);
  prefixed("d_y.", *d_y_, out);
  return out;
}

std::vector<nn::NamedParameter> TranslationModel::named_parameters() const {
  auto out = generator_parameters();
  for (auto& p : discriminator_parameters()) out.push_back(std::move(p));
  return out;
}

Tensor TranslationModel::translate(const Tensor& image, Direction direction) const {
  return generator(direction).generate(image);
}

std::string csv_header() {
  return "iter,epoch,lr,g_xy_total,g_yx_total,d_x_total,d_y_total,gan,cycle,identity,style";
}

std::string csv_row(const IterationRecord& r) {
  const auto& s = r.report;
  const double gan = s.g_xy.gan + s.g_yx.gan;
  const double cycle = s.g_xy.cycle + s.g_yx.cycle;
  const double identity = s.g_xy.identity + s.g_yx.identity;
  const double style = s.g_xy.style + s.g_yx.style + s.d_x.style + s.d_y.style;
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%lld,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                static_cast<long long>(r.iter), r.epoch, r.lr, s.g_xy.total, s.g_yx.total,
                s.d_x.total, s.d_y.total, gan, cycle, identity, style);
  return buf;
}

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_(cfg),
      model_(std::make_unique<TranslationModel>(cfg)),
      opt_g_(model_->generator_parameters(), {cfg.beta1, cfg.beta2, 1e-8}),
      opt_d_(model_->discriminator_parameters(), {cfg.beta1, cfg.beta2, 1e-8}),
      hist_x_(data::Domain::X, cfg.history_capacity),
      hist_y_(data::Domain::Y, cfg.history_capacity),
      rng_(derive_seed(cfg.seed, {0x68697374})) {}

namespace {

struct DirectionTerms {
  Var total;
  losses::LossReport report;
};

// One generator direction: src -> fake -> reconstruction, plus identity on `target`.
DirectionTerms generator_direction(const Generator& forward_g, const Generator& backward_g,
                                   const Discriminator& judge, const Var& src, const Var& target,
                                   const TrainConfig& cfg, Var& fake_out) {
  Var fake = forward_g.forward(src);
  Var rec = backward_g.forward(fake);
  auto judged = judge.forward(fake);
  Var gan = losses::gan_generator(judged.decision);
  Var cyc = losses::l1(rec, src);
  std::vector<Var> terms{gan, cyc};
  std::vector<double> weights{1.0, cfg.lambda_cyc};
  losses::GeneratorTerms parts{gan.item(), cyc.item(), 0.0, 0.0};
  if (cfg.lambda_id > 0.0) {
    Var id = losses::l1(forward_g.forward(target), target);
    terms.push_back(id);
    weights.push_back(cfg.lambda_id);
    parts.identity = id.item();
  }
  const bool style_term = cfg.style_to_generator && cfg.use_style_loss;
  if (style_term) {
    Tensor real_style;
    {
      NoGradGuard guard;
      real_style = judge.forward(target).style.value();
    }
    Var st = losses::l1(judged.style, Var(real_style));
    terms.push_back(st);
    weights.push_back(1.0);
    parts.style = st.item();
  }
  losses::ObjectiveWeights w{cfg.lambda_cyc, cfg.lambda_id, style_term ? 1.0 : 0.0};
  fake_out = fake;
  return {ops::weighted_sum(terms, weights), losses::generator_objective(parts, w)};
}

DirectionTerms discriminator_terms(const Discriminator& d, const Tensor& real, const Tensor& fake,
                                   const TrainConfig& cfg) {
  auto r = d.forward(Var(real));
  auto f = d.forward(Var(fake));
  Var gan = losses::gan_discriminator(r.decision, f.decision);
  if (!cfg.use_style_loss) return {gan, losses::discriminator_objective(gan.item(), 0.0)};
  Var style = losses::l1(f.style, r.style);
  return {ops::add(gan, style), losses::discriminator_objective(gan.item(), style.item())};
}

void accumulate(losses::LossReport& into, const losses::LossReport& r, double w) {
  into.gan += w * r.gan;
  into.cycle += w * r.cycle;
  into.identity += w * r.identity;
  into.style += w * r.style;
  into.total += w * r.total;
}

bool finite_report(const losses::LossReport& r) {
  return std::isfinite(r.gan) && std::isfinite(r.cycle) && std::isfinite(r.identity) &&
         std::isfinite(r.style) && std::isfinite(r.total);
}

}  // namespace

void Trainer::check_finite(const StepReport& r, double lr) const {
  if (finite_report(r.g_xy) && finite_report(r.g_yx) && finite_report(r.d_x) && finite_report(r.d_y)) return;
  std::ostringstream diag;
  diag << "non-finite loss at iteration " << iter_ << " (epoch " << epoch_ << ", lr " << lr << ")\n";
  IterationRecord rec{iter_, epoch_, lr, r};
  diag << "  " << csv_header() << "\n  " << csv_row(rec) << '\n';
  for (const auto& p : model_->named_parameters()) {
    const Tensor& v = p.var.value();
    if (!v.all_finite()) diag << "  non-finite parameter " << p.name << '\n';
  }
  std::cerr << diag.str();
  throw NonFiniteLoss(diag.str());
}

StepReport Trainer::train_step(const std::vector<Tensor>& xs, const std::vector<Tensor>& ys, double lr) {
  if (xs.empty() || xs.size() != ys.size()) {
    throw std::invalid_argument("train_step: need equally sized, non-empty X and Y batches");
  }
  const double inv_b = 1.0 / static_cast<double>(xs.size());
  TranslationModel& m = *model_;
  StepReport report;

  std::vector<Tensor> fakes_y, fakes_x;
  m.d_x().set_requires_grad(false);
  m.d_y().set_requires_grad(false);
  opt_g_.zero_grad();
  for (std::size_t b = 0; b < xs.size(); ++b) {
    Var x(xs[b]), y(ys[b]);
    Var fake_y, fake_x;
    auto xy = generator_direction(m.g_xy(), m.g_yx(), m.d_y(), x, y, cfg_, fake_y);
    auto yx = generator_direction(m.g_yx(), m.g_xy(), m.d_x(), y, x, cfg_, fake_x);
    accumulate(report.g_xy, xy.report, inv_b);
    accumulate(report.g_yx, yx.report, inv_b);
    fakes_y.push_back(fake_y.value());
    fakes_x.push_back(fake_x.value());
    if (finite_report(xy.report) && finite_report(yx.report)) {
      backward(ops::weighted_sum({xy.total, yx.total}, {inv_b, inv_b}));
    }
  }
  m.d_x().set_requires_grad(true);
  m.d_y().set_requires_grad(true);
  check_finite(report, lr);
  opt_g_.step(lr);

  m.g_xy().set_requires_grad(false);
  m.g_yx().set_requires_grad(false);
  opt_d_.zero_grad();
  for (std::size_t b = 0; b < xs.size(); ++b) {
    const Tensor fy = hist_y_.query(fakes_y[b], rng_);
    const Tensor fx = hist_x_.query(fakes_x[b], rng_);
    auto dy = discriminator_terms(m.d_y(), ys[b], fy, cfg_);
    auto dx = discriminator_terms(m.d_x(), xs[b], fx, cfg_);
    accumulate(report.d_y, dy.report, inv_b);
    accumulate(report.d_x, dx.report, inv_b);
    if (finite_report(dy.report) && finite_report(dx.report)) {
      backward(ops::weighted_sum({dy.total, dx.total}, {inv_b, inv_b}));
    }
  }
  m.g_xy().set_requires_grad(true);
  m.g_yx().set_requires_grad(true);
  check_finite(report, lr);
  opt_d_.step(lr);
  opt_g_.zero_grad();
  opt_d_.zero_grad();
  return report;
}

void Trainer::run_epoch(const data::UnpairedDataset& dataset,
                        const std::function<void(const IterationRecord&)>& sink) {
  const std::size_t nx = dataset.x.size(), ny = dataset.y.size();
  if (nx == 0 || ny == 0) throw std::runtime_error("training needs at least one image in each domain");
  const std::size_t n = std::max(nx, ny);
  std::mt19937_64 order_rng(derive_seed(cfg_.seed, {0x6f72646572, static_cast<std::uint64_t>(epoch_)}));
  auto order = [&](std::size_t size) {
    std::vector<std::size_t> idx(n);
    if (size == n) {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::shuffle(idx.begin(), idx.end(), order_rng);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, size - 1);
      for (auto& i : idx) i = pick(order_rng);
    }
    return idx;
  };
  const auto ix = order(nx);
  const auto iy = order(ny);
  const double lr = lr_schedule(epoch_, cfg_);
  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  const auto e = static_cast<std::uint64_t>(epoch_);
  for (std::size_t start = 0; start < n; start += bs) {
    std::vector<Tensor> xs, ys;
    for (std::size_t k = start; k < std::min(n, start + bs); ++k) {
      xs.push_back(dataset.x.get(ix[k], e));
      ys.push_back(dataset.y.get(iy[k], e));
    }
    IterationRecord rec;
    rec.iter = iter_;
    rec.epoch = epoch_;
    rec.lr = lr;
    rec.report = train_step(xs, ys, lr);
    ++iter_;
    if (sink) sink(rec);
  }
  ++epoch_;
}

void Trainer::fit(const data::UnpairedDataset& dataset, const FitOptions& options) {
  cfg_.validate();
  std::ofstream log;
  if (!options.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (!fs::is_directory(options.out_dir)) {
      throw std::runtime_error("cannot create output directory " + options.out_dir.string());
    }
    const fs::path log_path = options.out_dir / "log.csv";
    const bool append = epoch_ > 0 && fs::exists(log_path);
    log.open(log_path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw std::runtime_error("cannot open " + log_path.string());
    if (!append) log << csv_header() << '\n';
  }
  auto sink = [&](const IterationRecord& r) {
    if (log.is_open()) log << csv_row(r) << '\n';
    if (options.on_iteration) options.on_iteration(r);
  };
  while (epoch_ < cfg_.epochs_total) {
    run_epoch(dataset, sink);
    if (log.is_open()) log.flush();
    if (options.progress) {
      *options.progress << "epoch " << epoch_ << "/" << cfg_.epochs_total << " iter " << iter_
                        << " lr " << lr_schedule(epoch_ - 1, cfg_) << '\n';
    }
    if (!options.out_dir.empty() && cfg_.checkpoint_every > 0 && epoch_ % cfg_.checkpoint_every == 0 &&
        epoch_ < cfg_.epochs_total) {
      save(options.out_dir / ("checkpoint_epoch" + std::to_string(epoch_) + ".rsit"));
    }
  }
  if (!options.out_dir.empty()) save(options.out_dir / "checkpoint.rsit");
}

void Trainer::save(const fs::path& path) const {
  ckpt::Container c;
  std::ostringstream rng_state;
  rng_state << rng_;
  c.meta = {{"format", "rsit-translation-model"},
            {"config", cfg_.to_json()},
            {"config_hash", cfg_.architecture_hash()},
            {"epoch", epoch_},
            {"iteration", iter_},
            {"adam_g_steps", opt_g_.steps()},
            {"adam_d_steps", opt_d_.steps()},
            {"history_rng", rng_state.str()},
            {"history_x", hist_x_.size()},
            {"history_y", hist_y_.size()}};
  for (const auto& p : model_->named_parameters()) c.tensors.emplace_back(p.name, p.var.value());
  auto moments = [&](const char* tag, const optim::Adam& opt) {
    auto& o = const_cast<optim::Adam&>(opt);
    for (std::size_t i = 0; i < o.params().size(); ++i) {
      c.tensors.emplace_back(std::string(tag) + ".m." + o.params()[i].name, o.first_moments()[i]);
      c.tensors.emplace_back(std::string(tag) + ".v." + o.params()[i].name, o.second_moments()[i]);
    }
  };
  moments("adam_g", opt_g_);
  moments("adam_d", opt_d_);
  for (std::size_t i = 0; i < hist_x_.size(); ++i)
    c.tensors.emplace_back("history.x." + std::to_string(i), hist_x_.images()[i]);
  for (std::size_t i = 0; i < hist_y_.size(); ++i)
    c.tensors.emplace_back("history.y." + std::to_string(i), hist_y_.images()[i]);
  ckpt::write(path, c);
}

namespace {

void load_parameters(const ckpt::Container& c, const std::vector<nn::NamedParameter>& params) {
  for (const auto& p : params) {
    const Tensor& t = c.get(p.name);
    if (t.shape() != p.var.shape()) {
      throw std::runtime_error("checkpoint tensor " + p.name + " has shape " + shape_str(t.shape()) +
                               ", model expects " + shape_str(p.var.shape()));
    }
    Var v = p.var;
    v.mutable_value() = t;
  }
}

ckpt::Container read_model_container(const fs::path& path) {
  auto c = ckpt::read(path);
  if (c.meta.value("format", "") != "rsit-translation-model") {
    throw std::runtime_error("checkpoint " + path.string() + " does not hold a translation model");
  }
  return c;
}

}  // namespace

std::unique_ptr<Trainer> Trainer::resume(const fs::path& checkpoint, const TrainConfig& cfg) {
  auto c = read_model_container(checkpoint);
  const std::string hash = c.meta.at("config_hash").get<std::string>();
  if (hash != cfg.architecture_hash()) {
    throw std::runtime_error("checkpoint " + checkpoint.string() + " was trained with a different architecture (hash " +
                             hash + ", config " + cfg.architecture_hash() + ")");
  }
  auto t = std::make_unique<Trainer>(cfg);
  load_parameters(c, t->model_->named_parameters());
  auto moments = [&](const char* tag, optim::Adam& opt, const char* steps_key) {
    for (std::size_t i = 0; i < opt.params().size(); ++i) {
      opt.first_moments()[i] = c.get(std::string(tag) + ".m." + opt.params()[i].name);
      opt.second_moments()[i] = c.get(std::string(tag) + ".v." + opt.params()[i].name);
    }
    opt.set_steps(c.meta.at(steps_key).get<std::int64_t>());
  };
  moments("adam_g", t->opt_g_, "adam_g_steps");
  moments("adam_d", t->opt_d_, "adam_d_steps");
  auto history = [&](const char* tag, std::size_t count) {
    std::vector<Tensor> images;
    for (std::size_t i = 0; i < count; ++i) images.push_back(c.get(std::string("history.") + tag + "." + std::to_string(i)));
    if (images.size() > static_cast<std::size_t>(cfg.history_capacity)) images.resize(static_cast<std::size_t>(cfg.history_capacity));
    return images;
  };
  t->hist_x_.restore(history("x", c.meta.at("history_x").get<std::size_t>()));
  t->hist_y_.restore(history("y", c.meta.at("history_y").get<std::size_t>()));
  std::istringstream rng_state(c.meta.at("history_rng").get<std::string>());
  rng_state >> t->rng_;
  t->epoch_ = c.meta.at("epoch").get<int>();
  t->iter_ = c.meta.at("iteration").get<std::int64_t>();
  if (t->epoch_ > cfg.epochs_total) {
    throw std::invalid_argument("checkpoint is at epoch " + std::to_string(t->epoch_) +
                                ", beyond epochs_total " + std::to_string(cfg.epochs_total));
  }
  return t;
}

std::unique_ptr<TranslationModel> load_model(const fs::path& checkpoint, TrainConfig* config_out) {
  auto c = read_model_container(checkpoint);
  const TrainConfig cfg = TrainConfig::from_json(c.meta.at("config"));
  auto model = std::make_unique<TranslationModel>(cfg);
  load_parameters(c, model->named_parameters());
  if (config_out) *config_out = cfg;
  return model;
}

}  // namespace rsit::train
