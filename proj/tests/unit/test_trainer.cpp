#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "rsit/trainer.hpp"

using namespace rsit;
using namespace rsit::train;
using rsit::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config(int epochs = 2) {
  TrainConfig c;
  c.scale = 0.0625;
  c.blocks = 2;
  c.epochs_total = epochs;
  c.epochs_constant = epochs / 2;
  c.seed = 11;
  c.history_capacity = 4;
  return c;
}

data::UnpairedDataset tiny_dataset(int nx = 3, int ny = 2) {
  std::mt19937_64 rng(99);
  std::vector<Tensor> xs, ys;
  for (int i = 0; i < nx; ++i) xs.push_back(random_tensor({3, 20, 20}, rng));
  for (int i = 0; i < ny; ++i) ys.push_back(random_tensor({3, 20, 20}, rng));
  return {data::DomainDataset(data::Domain::X, 16, 5, xs), data::DomainDataset(data::Domain::Y, 16, 6, ys)};
}

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("rsit_test_trainer_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<Tensor> snapshot(const TranslationModel& m) {
  std::vector<Tensor> out;
  for (const auto& p : m.named_parameters()) out.push_back(p.var.value());
  return out;
}

bool identical(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i].same_shape(b[i]) || a[i].storage() != b[i].storage()) return false;
  return true;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  CHECK(lr_schedule(0, c) == 2e-4);
  CHECK(lr_schedule(99, c) == 2e-4);
  CHECK(lr_schedule(100, c) == 2e-4);
  CHECK(std::abs(lr_schedule(150, c) - 1e-4) <= 1e-12);
  CHECK(lr_schedule(200, c) == 0.0);
  double prev = lr_schedule(0, c);
  for (int e = 1; e <= 200; ++e) {
    const double lr = lr_schedule(e, c);
    CHECK(lr <= prev);
    CHECK(lr >= 0.0);
    prev = lr;
  }
  CHECK_THROWS_AS(lr_schedule(-1, c), std::out_of_range);
  CHECK_THROWS_AS(lr_schedule(201, c), std::out_of_range);
  SUBCASE("no decay phase") {
    TrainConfig k;
    k.epochs_total = 10;
    k.epochs_constant = 10;
    CHECK(lr_schedule(9, k) == 2e-4);
    CHECK(lr_schedule(10, k) == 0.0);
  }
}

TEST_CASE("config validation and serialization") {
  TrainConfig c = tiny_config();
  CHECK_NOTHROW(c.validate());
  TrainConfig bad = c;
  bad.epochs_constant = c.epochs_total + 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.lr0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  TrainConfig back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.architecture_hash() == c.architecture_hash());
  TrainConfig other = c;
  other.use_srm = false;
  CHECK(other.architecture_hash() != c.architecture_hash());
  other = c;
  other.lr0 = 1e-3;
  CHECK(other.architecture_hash() == c.architecture_hash());
}

TEST_CASE("history buffer") {
  std::mt19937_64 rng(3);
  SUBCASE("fills with fresh images, then returns members of the pool or the fresh image") {
    HistoryBuffer h(data::Domain::X, 3);
    std::vector<Tensor> seen;
    for (int i = 0; i < 3; ++i) {
      Tensor f = Tensor::full({1, 2, 2}, static_cast<double>(i));
      CHECK(h.query(f, rng).storage() == f.storage());
      seen.push_back(f);
    }
    CHECK(h.size() == 3u);
    int returned_fresh = 0;
    const int trials = 2000;
    for (int i = 3; i < 3 + trials; ++i) {
      Tensor f = Tensor::full({1, 2, 2}, static_cast<double>(i));
      Tensor out = h.query(f, rng);
      const double v = out[0];
      const bool fresh = v == static_cast<double>(i);
      returned_fresh += fresh;
      CHECK((fresh || v < static_cast<double>(i)));
      CHECK(h.size() == 3u);
    }
    // Fresh image returned with probability 1/2; 6 sigma band.
    CHECK(std::abs(returned_fresh - trials / 2) < 6.0 * std::sqrt(trials * 0.25));
  }
  SUBCASE("capacity zero passes images through") {
    HistoryBuffer h(data::Domain::Y, 0);
    Tensor f = Tensor::full({1, 2, 2}, 7.0);
    CHECK(h.query(f, rng).storage() == f.storage());
    CHECK(h.size() == 0u);
  }
  SUBCASE("restore respects capacity") {
    HistoryBuffer h(data::Domain::X, 2);
    CHECK_THROWS(h.restore({Tensor({1}), Tensor({1}), Tensor({1})}));
    CHECK_NOTHROW(h.restore({Tensor({1})}));
    CHECK(h.size() == 1u);
  }
}

TEST_CASE("training step") {
  auto ds = tiny_dataset();
  std::vector<Tensor> xs{ds.x.get(0, 0)}, ys{ds.y.get(0, 0)};
  SUBCASE("zero learning rate leaves parameters bit-identical") {
    Trainer t(tiny_config());
    const auto before = snapshot(t.model());
    t.train_step(xs, ys, 0.0);
    CHECK(identical(before, snapshot(t.model())));
  }
  SUBCASE("a positive step moves generators and discriminators") {
    Trainer t(tiny_config());
    const auto g0 = t.model().generator_parameters();
    const auto d0 = t.model().discriminator_parameters();
    std::vector<Tensor> gb, db;
    for (const auto& p : g0) gb.push_back(p.var.value());
    for (const auto& p : d0) db.push_back(p.var.value());
    StepReport r = t.train_step(xs, ys, 2e-4);
    std::vector<Tensor> ga, da;
    for (const auto& p : t.model().generator_parameters()) ga.push_back(p.var.value());
    for (const auto& p : t.model().discriminator_parameters()) da.push_back(p.var.value());
    CHECK_FALSE(identical(gb, ga));
    CHECK_FALSE(identical(db, da));
    CHECK(r.g_xy.total > 0.0);
    CHECK(r.d_y.total > 0.0);
    CHECK(std::isfinite(r.g_yx.total));
    // Generator total decomposes with the configured weights.
    const auto& c = t.config();
    CHECK(r.g_xy.total == doctest::Approx(r.g_xy.gan + c.lambda_cyc * r.g_xy.cycle + c.lambda_id * r.g_xy.identity)
                              .epsilon(1e-12));
    CHECK(r.d_x.total == doctest::Approx(r.d_x.gan + r.d_x.style).epsilon(1e-12));
  }
  SUBCASE("batches of two") {
    TrainConfig c = tiny_config();
    c.batch_size = 2;
    Trainer t(c);
    StepReport r = t.train_step({ds.x.get(0, 0), ds.x.get(1, 0)}, {ds.y.get(0, 0), ds.y.get(1, 0)}, 2e-4);
    CHECK(std::isfinite(r.g_xy.total));
    CHECK_THROWS_AS(t.train_step({ds.x.get(0, 0)}, {}, 2e-4), std::invalid_argument);
  }
  SUBCASE("non-finite input raises") {
    Trainer t(tiny_config());
    Tensor bad = xs[0];
    bad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(t.train_step({bad}, ys, 2e-4), NonFiniteLoss);
  }
}

TEST_CASE("ablation baseline trains") {
  TrainConfig c = tiny_config(1);
  c.use_srm = false;
  c.use_style_loss = false;
  Trainer t(c);
  std::vector<IterationRecord> log;
  FitOptions o;
  o.on_iteration = [&](const IterationRecord& r) { log.push_back(r); };
  t.fit(tiny_dataset(), o);
  REQUIRE(log.size() == 3u);
  for (const auto& r : log) {
    CHECK(r.report.d_x.style == 0.0);
    CHECK(r.report.g_xy.style == 0.0);
  }
}

TEST_CASE("epoch iterates over the larger domain") {
  Trainer t(tiny_config(2));
  std::vector<IterationRecord> log;
  FitOptions o;
  o.on_iteration = [&](const IterationRecord& r) { log.push_back(r); };
  t.fit(tiny_dataset(3, 2), o);
  REQUIRE(log.size() == 6u);
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(log[i].iter == static_cast<std::int64_t>(i));
    CHECK(log[i].epoch == static_cast<int>(i / 3));
  }
  CHECK(log[0].lr == 2e-4);
  CHECK(log[5].lr == lr_schedule(1, t.config()));
  CHECK(t.epoch() == 2);
  CHECK(t.iteration() == 6);
}

TEST_CASE("zero epochs") {
  fs::path dir = scratch_dir("zero");
  Trainer t(tiny_config(0));
  const auto before = snapshot(t.model());
  FitOptions o;
  o.out_dir = dir;
  t.fit(tiny_dataset(), o);
  CHECK(identical(before, snapshot(t.model())));
  CHECK(fs::exists(dir / "checkpoint.rsit"));
  std::ifstream log(dir / "log.csv");
  std::string header, extra;
  std::getline(log, header);
  CHECK(header == csv_header());
  CHECK_FALSE(std::getline(log, extra));
  fs::remove_all(dir);
}

TEST_CASE("training is deterministic") {
  fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  for (const auto& dir : {a, b}) {
    Trainer t(tiny_config(2));
    FitOptions o;
    o.out_dir = dir;
    t.fit(tiny_dataset(), o);
  }
  CHECK(slurp(a / "log.csv") == slurp(b / "log.csv"));
  CHECK(slurp(a / "checkpoint.rsit") == slurp(b / "checkpoint.rsit"));
  TrainConfig other = tiny_config(2);
  other.seed = 12;
  fs::path c = scratch_dir("det_c");
  Trainer t(other);
  FitOptions o;
  o.out_dir = c;
  t.fit(tiny_dataset(), o);
  CHECK(slurp(a / "log.csv") != slurp(c / "log.csv"));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST_CASE("checkpoint round trip") {
  fs::path dir = scratch_dir("ckpt");
  Trainer t(tiny_config(1));
  t.fit(tiny_dataset());
  t.save(dir / "m.rsit");
  TrainConfig loaded_cfg;
  auto m = load_model(dir / "m.rsit", &loaded_cfg);
  CHECK(loaded_cfg.to_json() == t.config().to_json());
  CHECK(identical(snapshot(t.model()), snapshot(*m)));
  std::mt19937_64 rng(4);
  Tensor x = random_tensor({3, 16, 16}, rng);
  for (Direction d : {Direction::XY, Direction::YX}) {
    Tensor a = t.model().translate(x, d), b = m->translate(x, d);
    CHECK(a.storage() == b.storage());
  }
  SUBCASE("architecture mismatch is rejected") {
    TrainConfig other = tiny_config(1);
    other.blocks = 3;
    CHECK_THROWS(Trainer::resume(dir / "m.rsit", other));
  }
  SUBCASE("truncated file is rejected") {
    const std::string bytes = slurp(dir / "m.rsit");
    std::ofstream(dir / "cut.rsit", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    CHECK_THROWS(load_model(dir / "cut.rsit"));
  }
  fs::remove_all(dir);
}

TEST_CASE("resume continues the run exactly") {
  fs::path full = scratch_dir("resume_full"), split = scratch_dir("resume_split");
  {
    Trainer t(tiny_config(2));
    FitOptions o;
    o.out_dir = full;
    t.fit(tiny_dataset(), o);
  }
  {
    TrainConfig first = tiny_config(2);
    first.epochs_total = 1;
    first.epochs_constant = 1;
    Trainer t(first);
    FitOptions o;
    o.out_dir = split;
    t.fit(tiny_dataset(), o);
    auto r = Trainer::resume(split / "checkpoint.rsit", tiny_config(2));
    CHECK(r->epoch() == 1);
    CHECK(r->iteration() == 3);
    r->fit(tiny_dataset(), o);
  }
  CHECK(slurp(full / "log.csv") == slurp(split / "log.csv"));
  auto a = load_model(full / "checkpoint.rsit"), b = load_model(split / "checkpoint.rsit");
  CHECK(identical(snapshot(*a), snapshot(*b)));
  fs::remove_all(full);
  fs::remove_all(split);
}
