#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rsit/data.hpp"
#include "rsit/discriminator.hpp"
#include "rsit/generator.hpp"
#include "rsit/losses.hpp"
#include "rsit/optim.hpp"

namespace rsit::train {

struct TrainConfig {
  int epochs_total = 200;
  int epochs_constant = 100;
  double lr0 = 2e-4;
  double lambda_cyc = 10.0;
  double lambda_id = 5.0;
  int batch_size = 1;
  std::uint64_t seed = 0;
  double scale = 1.0;
  /// Adds the style L1 term to the generator objectives as well.
  bool style_to_generator = false;

  // Ablation switches: both off gives the plain cycle-consistent baseline.
  bool use_srm = true;
  bool use_style_loss = true;
  int blocks = 9;

  double beta1 = 0.5;
  double beta2 = 0.999;
  /// 0 disables the history buffer (discriminators see only fresh fakes).
  int history_capacity = 50;
  /// Save an intermediate checkpoint every N epochs; 0 saves only the final one.
  int checkpoint_every = 0;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;

  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  /// Hash of the fields that determine parameter shapes.
  std::string architecture_hash() const;
};

/// lr0 before epochs_constant, then linear decay reaching 0 at epochs_total.
/// Throws std::out_of_range outside [0, epochs_total].
double lr_schedule(int epoch, const TrainConfig& cfg);

/// Pool of past generated images for one domain. Until full it stores and returns the
/// fresh image; afterwards, with probability 1/2, it swaps the fresh image for a random
/// stored one and returns the stored one.
class HistoryBuffer {
 public:
  HistoryBuffer(data::Domain domain, int capacity);

  Tensor query(const Tensor& fresh, std::mt19937_64& rng);

  data::Domain domain() const { return domain_; }
  int capacity() const { return capacity_; }
  std::size_t size() const { return images_.size(); }
  const std::vector<Tensor>& images() const { return images_; }
  void restore(std::vector<Tensor> images);

 private:
  data::Domain domain_;
  int capacity_;
  std::vector<Tensor> images_;
};

enum class Direction { XY, YX };

/// The four networks. G_XY maps summer (X) to winter (Y); D_X judges domain X.
class TranslationModel {
 public:
  explicit TranslationModel(const TrainConfig& cfg);

  Generator& g_xy() { return *g_xy_; }
  Generator& g_yx() { return *g_yx_; }
  Discriminator& d_x() { return *d_x_; }
  Discriminator& d_y() { return *d_y_; }
  const Generator& generator(Direction d) const { return d == Direction::XY ? *g_xy_ : *g_yx_; }

  /// Names prefixed with "g_xy.", "g_yx.", "d_x.", "d_y.".
  std::vector<nn::NamedParameter> generator_parameters() const;
  std::vector<nn::NamedParameter> discriminator_parameters() const;
  std::vector<nn::NamedParameter> named_parameters() const;

  Tensor translate(const Tensor& image, Direction direction) const;

 private:
  std::unique_ptr<Generator> g_xy_, g_yx_;
  std::unique_ptr<Discriminator> d_x_, d_y_;
};

struct StepReport {
  losses::LossReport g_xy, g_yx, d_x, d_y;
};

struct IterationRecord {
  std::int64_t iter = 0;
  int epoch = 0;
  double lr = 0.0;
  StepReport report;
};

std::string csv_header();
std::string csv_row(const IterationRecord& r);

/// Raised when a loss becomes NaN or infinite.
class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitOptions {
  /// Checkpoints and log.csv go here; empty keeps everything in memory.
  std::filesystem::path out_dir;
  std::function<void(const IterationRecord&)> on_iteration;
  /// Per-epoch progress lines; null for silence.
  std::ostream* progress = nullptr;
};

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  /// Restores model, optimizer moments, history buffers and counters. `cfg` must have
  /// the same architecture hash as the checkpoint; its schedule fields take effect.
  static std::unique_ptr<Trainer> resume(const std::filesystem::path& checkpoint,
                                         const TrainConfig& cfg);

  /// One alternating update on a batch of unpaired images: generators first, then
  /// discriminators on history-buffer fakes.
  StepReport train_step(const std::vector<Tensor>& xs, const std::vector<Tensor>& ys, double lr);

  /// One pass over the larger domain; the smaller one is sampled with replacement.
  void run_epoch(const data::UnpairedDataset& dataset,
                 const std::function<void(const IterationRecord&)>& sink);

  /// Runs the remaining epochs up to epochs_total.
  void fit(const data::UnpairedDataset& dataset, const FitOptions& options = {});

  void save(const std::filesystem::path& path) const;

  TranslationModel& model() { return *model_; }
  const TranslationModel& model() const { return *model_; }
  const TrainConfig& config() const { return cfg_; }
  int epoch() const { return epoch_; }
  std::int64_t iteration() const { return iter_; }
  const HistoryBuffer& history(data::Domain d) const { return d == data::Domain::X ? hist_x_ : hist_y_; }

 private:
  void check_finite(const StepReport& r, double lr) const;

  TrainConfig cfg_;
  std::unique_ptr<TranslationModel> model_;
  optim::Adam opt_g_, opt_d_;
  HistoryBuffer hist_x_, hist_y_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  std::int64_t iter_ = 0;
};

/// Loads the networks from a checkpoint written by Trainer::save.
std::unique_ptr<TranslationModel> load_model(const std::filesystem::path& checkpoint,
                                             TrainConfig* config_out = nullptr);

}  // namespace rsit::train
