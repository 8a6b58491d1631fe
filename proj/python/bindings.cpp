#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "json.hpp"
#include "rsit/changedetect.hpp"
#include "rsit/data.hpp"
#include "rsit/discriminator.hpp"
#include "rsit/features.hpp"
#include "rsit/losses.hpp"
#include "rsit/metrics.hpp"
#include "rsit/srm.hpp"
#include "rsit/trainer.hpp"

namespace py = pybind11;
using namespace rsit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape.push_back(static_cast<int>(a.shape(i)));
  Tensor t(shape);
  std::copy(a.data(), a.data() + a.size(), t.ptr());
  return t;
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array a(shape);
  std::copy(t.ptr(), t.ptr() + t.size(), a.mutable_data());
  return a;
}

train::Direction direction(const std::string& d) {
  if (d == "xy") return train::Direction::XY;
  if (d == "yx") return train::Direction::YX;
  throw py::value_error("direction must be 'xy' or 'yx'");
}

train::TrainConfig config_from(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  const auto known = train::TrainConfig{}.to_json();
  for (const auto& item : j.items())
    if (!known.contains(item.key())) throw py::key_error("unknown training key: " + item.key());
  train::TrainConfig c = train::TrainConfig::from_json(j);
  c.validate();
  return c;
}

py::dict report_dict(const losses::LossReport& r) {
  py::dict d;
  d["gan"] = r.gan;
  d["cycle"] = r.cycle;
  d["identity"] = r.identity;
  d["style"] = r.style;
  d["total"] = r.total;
  return d;
}

cd::PcakmConfig pcakm_config(int block, int eigen_count, std::uint64_t seed) {
  cd::PcakmConfig c;
  c.block = block;
  c.eigen_count = eigen_count;
  c.seed = seed;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Season-varying remote-sensing image translation: native core";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<train::NonFiniteLoss>(m, "NonFiniteLoss", PyExc_ArithmeticError);

  // srm / style vector
  m.def(
      "style_pool",
      [](const Array& f) { return to_array(srm::style_pool(to_tensor(f)).data); },
      py::arg("feature_map"), "[C, H, W] -> [C, 2] of (mean, population std)");
  m.def(
      "srm_layer",
      [](const Array& f, double w_mean, double w_std, double bias) {
        return to_array(srm::srm_layer(to_tensor(f), {w_mean, w_std, bias}));
      },
      py::arg("feature_map"), py::arg("w_mean"), py::arg("w_std"), py::arg("bias"));
  m.def(
      "upper_correlation", [](const Array& v) { return to_array(upper_correlation(Var(to_tensor(v))).value()); },
      py::arg("summary"), "Flattened upper triangle of v v^T (length C*C, strict lower part zero)");
  m.def(
      "style_vector", [](const Array& f) { return to_array(style_vector(to_tensor(f)).data); },
      py::arg("feature_map"));

  // losses
  m.def(
      "gan_loss_generator", [](const std::vector<double>& fake) { return losses::gan_loss_generator(fake); },
      py::arg("fake_decisions"));
  m.def(
      "gan_loss_discriminator",
      [](const std::vector<double>& real, const std::vector<double>& fake) {
        return losses::gan_loss_discriminator(real, fake);
      },
      py::arg("real_decisions"), py::arg("fake_decisions"));
  m.def(
      "cycle_loss", [](const Array& a, const Array& b) { return losses::cycle_loss(to_tensor(a), to_tensor(b)); },
      py::arg("reconstruction"), py::arg("original"));
  m.def(
      "identity_loss", [](const Array& a, const Array& b) { return losses::identity_loss(to_tensor(a), to_tensor(b)); },
      py::arg("output"), py::arg("target"));
  m.def(
      "style_loss", [](const Array& a, const Array& b) { return losses::style_loss(to_tensor(a), to_tensor(b)); },
      py::arg("fake_style"), py::arg("real_style"));

  // schedule
  m.def(
      "lr_schedule",
      [](int epoch, int epochs_total, int epochs_constant, double lr0) {
        train::TrainConfig c;
        c.epochs_total = epochs_total;
        c.epochs_constant = epochs_constant;
        c.lr0 = lr0;
        return train::lr_schedule(epoch, c);
      },
      py::arg("epoch"), py::arg("epochs_total") = 200, py::arg("epochs_constant") = 100, py::arg("lr0") = 2e-4);

  // metrics
  m.def("inception_score", &metrics::inception_score, py::arg("probs"), py::arg("splits") = 1);
  m.def("fid", &metrics::fid, py::arg("a"), py::arg("b"), py::arg("eps") = 1e-6);
  m.def("kid", &metrics::kid, py::arg("a"), py::arg("b"));
  m.def(
      "score_change_map",
      [](const Array& pred, const Array& truth) {
        const auto s = metrics::score_change_map(to_tensor(pred), to_tensor(truth));
        py::dict d;
        d["fa"] = s.fa;
        d["ma"] = s.ma;
        d["oe"] = s.oe;
        d["n"] = s.n;
        d["pcc"] = s.pcc;
        return d;
      },
      py::arg("predicted"), py::arg("truth"));
  m.def(
      "extract_features",
      [](const std::vector<Array>& images, const std::string& extractor, const std::filesystem::path& weights) {
        const auto net = features::make_extractor(extractor, weights);
        std::vector<Tensor> ts;
        for (const auto& a : images) ts.push_back(to_tensor(a));
        auto fs = features::extract_all(*net, ts);
        return py::make_tuple(fs.features, fs.probs);
      },
      py::arg("images"), py::arg("extractor") = "tiny-cnn", py::arg("weights") = std::filesystem::path{},
      "Returns (features [N, D], probs [N, K]) for [3, H, W] images in [-1, 1]");

  // change detection
  m.def(
      "difference_image", [](const Array& a, const Array& b) { return to_array(cd::difference_image(to_tensor(a), to_tensor(b))); },
      py::arg("a"), py::arg("b"));
  m.def(
      "pcakm",
      [](const Array& diff, int block, int eigen_count, std::uint64_t seed) {
        return to_array(cd::pcakm(to_tensor(diff), pcakm_config(block, eigen_count, seed)));
      },
      py::arg("diff"), py::arg("block") = 4, py::arg("eigen_count") = 3, py::arg("seed") = 0);

  // data
  m.def(
      "generate_synthetic",
      [](int size, std::uint64_t seed, int change_count, double vegetation_fraction) {
        data::SyntheticSceneSpec s;
        s.size = size;
        s.seed = seed;
        s.change_count = change_count;
        s.vegetation_fraction = vegetation_fraction;
        const auto scene = data::generate_synthetic(s);
        py::dict d;
        d["summer"] = to_array(scene.summer_t1);
        d["winter"] = to_array(scene.winter_t2);
        d["change_mask"] = to_array(scene.change_mask);
        d["vegetation_mask"] = to_array(scene.vegetation_mask);
        return d;
      },
      py::arg("size") = 64, py::arg("seed") = 0, py::arg("change_count") = 2, py::arg("vegetation_fraction") = 0.35);

  // models
  py::class_<train::TranslationModel>(m, "TranslationModel")
      .def(py::init([](const std::string& config_json) {
             return std::make_unique<train::TranslationModel>(config_from(config_json));
           }),
           py::arg("config_json") = "{}")
      .def_static(
          "load", [](const std::filesystem::path& p) { return train::load_model(p); }, py::arg("path"))
      .def(
          "translate",
          [](const train::TranslationModel& self, const Array& image, const std::string& dir) {
            return to_array(self.translate(to_tensor(image), direction(dir)));
          },
          py::arg("image"), py::arg("direction"));

  py::class_<train::Trainer>(m, "Trainer")
      .def(py::init([](const std::string& config_json) { return std::make_unique<train::Trainer>(config_from(config_json)); }),
           py::arg("config_json") = "{}")
      .def(
          "train_step",
          [](train::Trainer& self, const std::vector<Array>& xs, const std::vector<Array>& ys, double lr) {
            std::vector<Tensor> tx, ty;
            for (const auto& a : xs) tx.push_back(to_tensor(a));
            for (const auto& a : ys) ty.push_back(to_tensor(a));
            const auto r = self.train_step(tx, ty, lr);
            py::dict d;
            d["g_xy"] = report_dict(r.g_xy);
            d["g_yx"] = report_dict(r.g_yx);
            d["d_x"] = report_dict(r.d_x);
            d["d_y"] = report_dict(r.d_y);
            return d;
          },
          py::arg("xs"), py::arg("ys"), py::arg("lr"))
      .def("save", &train::Trainer::save, py::arg("path"))
      .def(
          "translate",
          [](const train::Trainer& self, const Array& image, const std::string& dir) {
            return to_array(self.model().translate(to_tensor(image), direction(dir)));
          },
          py::arg("image"), py::arg("direction"))
      .def_property_readonly("epoch", &train::Trainer::epoch)
      .def_property_readonly("iteration", &train::Trainer::iteration);
}
