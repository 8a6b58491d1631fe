#include "rsit/data.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iostream>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "rsit/image_io.hpp"
#include "rsit/random.hpp"

namespace fs = std::filesystem;

namespace rsit::data {

const char* domain_name(Domain d) { return d == Domain::X ? "X" : "Y"; }

DomainDataset::DomainDataset(Domain domain, int crop, std::uint64_t seed,
                             std::vector<Tensor> images, std::vector<std::string> names)
    : domain_(domain), crop_(crop), seed_(seed), images_(std::move(images)), names_(std::move(names)) {
  if (crop < 1) throw std::invalid_argument("crop size must be positive");
  if (names_.empty()) {
    for (std::size_t i = 0; i < images_.size(); ++i) names_.push_back(std::to_string(i));
  }
  for (std::size_t i = 0; i < images_.size(); ++i) {
    const Tensor& img = images_[i];
    if (img.rank() != 3 || img.dim(0) != 3) {
      throw ShapeError("dataset image " + names_[i] + " is not [3, H, W]");
    }
    if (img.dim(1) < crop || img.dim(2) < crop) {
      throw std::invalid_argument("image " + names_[i] + " (" + std::to_string(img.dim(1)) + "x" +
                                  std::to_string(img.dim(2)) + ") is smaller than crop " +
                                  std::to_string(crop));
    }
  }
}

DomainDataset DomainDataset::load_folder(const fs::path& root, Domain domain, int crop,
                                         std::uint64_t seed) {
  if (!fs::is_directory(root)) throw std::runtime_error("not a directory: " + root.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_regular_file() && io::has_image_extension(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Tensor> images;
  std::vector<std::string> names;
  for (const auto& f : files) {
    try {
      images.push_back(io::read_image(f));
      names.push_back(f.filename().string());
    } catch (const std::runtime_error& e) {
      std::cerr << "warning: skipping " << f.string() << ": " << e.what() << '\n';
    }
  }
  return DomainDataset(domain, crop, seed, std::move(images), std::move(names));
}

std::pair<int, int> DomainDataset::crop_offset(std::size_t index, std::uint64_t epoch) const {
  const Tensor& img = images_.at(index);
  std::mt19937_64 rng(derive_seed(seed_, {epoch, static_cast<std::uint64_t>(index)}));
  std::uniform_int_distribution<int> dy(0, img.dim(1) - crop_), dx(0, img.dim(2) - crop_);
  const int oy = dy(rng);
  const int ox = dx(rng);
  return {oy, ox};
}

Tensor DomainDataset::get(std::size_t index, std::uint64_t epoch) const {
  const Tensor& img = images_.at(index);
  const auto [oy, ox] = crop_offset(index, epoch);
  Tensor out(Shape{3, crop_, crop_});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < crop_; ++y)
      for (int x = 0; x < crop_; ++x) out.at(c, y, x) = img.at(c, oy + y, ox + x);
  return out;
}

void SyntheticSceneSpec::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("synthetic spec: " + msg); };
  if (size < 16 || size % 4 != 0) fail("size must be >= 16 and a multiple of 4");
  if (structure_count < 0 || change_count < 0) fail("structure and change counts must be >= 0");
  if (structure_min < 1 || structure_min > structure_max || structure_max > size) {
    fail("structure sizes must satisfy 1 <= min <= max <= size");
  }
  if (!(vegetation_fraction >= 0.0 && vegetation_fraction <= 1.0)) fail("vegetation fraction must lie in [0, 1]");
  if (!(pixel_jitter >= 0.0) || !(global_noise >= 0.0)) fail("noise levels must be >= 0");
  const double area = static_cast<double>(size) * size;
  const double worst = static_cast<double>(structure_count + change_count) * structure_max * structure_max;
  if (vegetation_fraction + worst / area > 1.0) {
    fail("vegetation coverage plus structure area exceeds the canvas");
  }
}

namespace {

using Rgb = std::array<double, 3>;

// Season-invariant ground and roofs; vegetation changes hue and brightness with season.
constexpr Rgb kGround{0.38, 0.34, 0.30};
constexpr Rgb kSummerVegetation{0.16, 0.38, 0.12};
constexpr Rgb kWinterVegetation{0.70, 0.63, 0.52};
constexpr std::array<Rgb, 2> kRoofs{Rgb{0.86, 0.86, 0.86}, Rgb{0.95, 0.62, 0.55}};

struct Rect {
  int y, x, h, w;
  bool overlaps(const Rect& o, int margin) const {
    return y < o.y + o.h + margin && o.y < y + h + margin && x < o.x + o.w + margin &&
           o.x < x + w + margin;
  }
};

struct Structure {
  Rect rect;
  Rgb color;
  bool in_t1;
  bool in_t2;
};

void put(Tensor& img, int y, int x, const Rgb& c) {
  for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = 2.0 * std::clamp(c[static_cast<std::size_t>(ch)], 0.0, 1.0) - 1.0;
}

}  // namespace

SyntheticScene generate_synthetic(const SyntheticSceneSpec& spec) {
  spec.validate();
  const int s = spec.size;
  const double unit = s / 64.0;
  std::mt19937_64 rng(derive_seed(spec.seed, {0x5ce9e}));
  std::uniform_real_distribution<double> u01(0.0, 1.0), u11(-1.0, 1.0);

  Tensor vegetation(Shape{s, s});
  const double target = spec.vegetation_fraction * s * s;
  double covered = 0.0;
  while (covered < target) {
    const double cy = u01(rng) * s, cx = u01(rng) * s;
    const double ry = (3.0 + 7.0 * u01(rng)) * unit, rx = (3.0 + 7.0 * u01(rng)) * unit;
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        const double dy = (y + 0.5 - cy) / ry, dx = (x + 0.5 - cx) / rx;
        double& v = vegetation[static_cast<std::size_t>(y) * s + x];
        if (v == 0.0 && dy * dy + dx * dx <= 1.0) {
          v = 1.0;
          covered += 1.0;
        }
      }
  }

  std::vector<double> texture(static_cast<std::size_t>(s) * s);
  for (double& t : texture) t = u11(rng);
  Rgb scene_tint{};
  for (double& t : scene_tint) t = 0.03 * u11(rng);
  std::array<Rgb, 2> season_noise{};
  for (auto& season : season_noise)
    for (double& t : season) t = spec.global_noise * u11(rng);

  std::vector<Structure> structures;
  const int total = spec.structure_count + spec.change_count;
  std::uniform_int_distribution<int> side(spec.structure_min, spec.structure_max);
  for (int i = 0; i < total; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
      const int h = side(rng), w = side(rng);
      std::uniform_int_distribution<int> py(0, s - h), px(0, s - w);
      Rect r{py(rng), px(rng), h, w};
      const bool clash = std::any_of(structures.begin(), structures.end(),
                                     [&](const Structure& o) { return r.overlaps(o.rect, 1); });
      if (clash) continue;
      Rgb color = kRoofs[static_cast<std::size_t>(rng() % kRoofs.size())];
      for (double& c : color) c += 0.03 * u11(rng);
      const bool persistent = i < spec.structure_count;
      const bool added = !persistent && (i - spec.structure_count) % 2 == 0;
      structures.push_back({r, color, persistent || !added, persistent || added});
      placed = true;
    }
    if (!placed) throw std::invalid_argument("synthetic spec: cannot place structures without overlap");
  }

  SyntheticScene scene;
  scene.vegetation_mask = vegetation;
  scene.change_mask = Tensor(Shape{s, s});
  scene.summer_t1 = Tensor(Shape{3, s, s});
  scene.winter_t2 = Tensor(Shape{3, s, s});
  for (int season = 0; season < 2; ++season) {
    Tensor& img = season == 0 ? scene.summer_t1 : scene.winter_t2;
    const Rgb& veg = season == 0 ? kSummerVegetation : kWinterVegetation;
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * s + x;
        const Rgb& base = vegetation[i] > 0 ? veg : kGround;
        Rgb c{};
        for (std::size_t ch = 0; ch < 3; ++ch) {
          c[ch] = base[ch] + scene_tint[ch] + season_noise[static_cast<std::size_t>(season)][ch] +
                  spec.pixel_jitter * texture[i];
        }
        put(img, y, x, c);
      }
    for (const auto& st : structures) {
      if (!(season == 0 ? st.in_t1 : st.in_t2)) continue;
      for (int y = st.rect.y; y < st.rect.y + st.rect.h; ++y)
        for (int x = st.rect.x; x < st.rect.x + st.rect.w; ++x) {
          Rgb c = st.color;
          for (double& v : c) v += 0.5 * spec.pixel_jitter * texture[static_cast<std::size_t>(y) * s + x];
          put(img, y, x, c);
        }
    }
    io::quantize_to_bytes(img);
  }
  for (const auto& st : structures) {
    if (st.in_t1 == st.in_t2) continue;
    for (int y = st.rect.y; y < st.rect.y + st.rect.h; ++y)
      for (int x = st.rect.x; x < st.rect.x + st.rect.w; ++x)
        scene.change_mask[static_cast<std::size_t>(y) * s + x] = 1.0;
  }
  return scene;
}

SyntheticSceneSpec benchmark_scene(const BenchmarkSpec& spec, const std::string& role, int index) {
  SyntheticSceneSpec scene = spec.scene;
  std::uint64_t salt = 0;
  for (char c : role) salt = salt * 131 + static_cast<unsigned char>(c);
  scene.seed = derive_seed(spec.seed, {salt, static_cast<std::uint64_t>(index)});
  return scene;
}

namespace {

std::string item_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d.png", i);
  return buf;
}

nlohmann::ordered_json scene_json(const SyntheticSceneSpec& s) {
  nlohmann::ordered_json j;
  j["size"] = s.size;
  j["structure_count"] = s.structure_count;
  j["structure_min"] = s.structure_min;
  j["structure_max"] = s.structure_max;
  j["vegetation_fraction"] = s.vegetation_fraction;
  j["change_count"] = s.change_count;
  j["pixel_jitter"] = s.pixel_jitter;
  j["global_noise"] = s.global_noise;
  return j;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw std::runtime_error("cannot create directory " + p.string());
}

}  // namespace

fs::path write_benchmark(const fs::path& root, const BenchmarkSpec& spec) {
  spec.scene.validate();
  if (spec.train_per_domain < 0 || spec.test_per_domain < 0 || spec.pairs < 0) {
    throw std::invalid_argument("benchmark counts must be >= 0");
  }
  struct Split {
    const char* dir;
    int count;
    bool summer;
  };
  const std::array<Split, 4> splits{Split{"trainX", spec.train_per_domain, true},
                                    Split{"trainY", spec.train_per_domain, false},
                                    Split{"testX", spec.test_per_domain, true},
                                    Split{"testY", spec.test_per_domain, false}};
  nlohmann::ordered_json manifest;
  manifest["format"] = "rsit-synthetic-benchmark";
  manifest["version"] = 1;
  manifest["seed"] = spec.seed;
  manifest["scene"] = scene_json(spec.scene);
  for (const auto& split : splits) {
    ensure_dir(root / split.dir);
    for (int i = 0; i < split.count; ++i) {
      auto scene = generate_synthetic(benchmark_scene(spec, split.dir, i));
      io::write_image(root / split.dir / item_name(i), split.summer ? scene.summer_t1 : scene.winter_t2);
    }
    manifest["counts"][split.dir] = split.count;
  }
  for (const char* sub : {"t1", "t2", "mask"}) ensure_dir(root / "pairs" / sub);
  for (int i = 0; i < spec.pairs; ++i) {
    auto scene = generate_synthetic(benchmark_scene(spec, "pairs", i));
    io::write_image(root / "pairs" / "t1" / item_name(i), scene.summer_t1);
    io::write_image(root / "pairs" / "t2" / item_name(i), scene.winter_t2);
    io::write_mask(root / "pairs" / "mask" / item_name(i), scene.change_mask);
  }
  manifest["counts"]["pairs"] = spec.pairs;
  const fs::path path = root / "manifest.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << manifest.dump(2) << '\n';
  return path;
}

std::vector<ChangePair> load_pairs(const fs::path& root) {
  const fs::path t1_dir = root / "pairs" / "t1";
  if (!fs::is_directory(t1_dir)) throw std::runtime_error("missing " + t1_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(t1_dir)) {
    if (e.is_regular_file() && io::has_image_extension(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ChangePair> pairs;
  for (const auto& f : files) {
    const auto name = f.filename();
    ChangePair p;
    p.name = name.string();
    p.t1 = io::read_image(f);
    p.t2 = io::read_image(root / "pairs" / "t2" / name);
    p.mask = io::read_mask(root / "pairs" / "mask" / name);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

UnpairedDataset synthetic_training_set(const BenchmarkSpec& spec) {
  std::vector<Tensor> xs, ys;
  for (int i = 0; i < spec.train_per_domain; ++i) {
    xs.push_back(generate_synthetic(benchmark_scene(spec, "trainX", i)).summer_t1);
    ys.push_back(generate_synthetic(benchmark_scene(spec, "trainY", i)).winter_t2);
  }
  const int crop = spec.scene.size;
  return {DomainDataset(Domain::X, crop, spec.seed, std::move(xs)),
          DomainDataset(Domain::Y, crop, spec.seed, std::move(ys))};
}

std::vector<ChangePair> synthetic_pairs(const BenchmarkSpec& spec) {
  std::vector<ChangePair> out;
  for (int i = 0; i < spec.pairs; ++i) {
    auto scene = generate_synthetic(benchmark_scene(spec, "pairs", i));
    out.push_back({item_name(i), scene.summer_t1, scene.winter_t2, scene.change_mask});
  }
  return out;
}

}  // namespace rsit::data
