#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "pcflow/classify.hpp"
#include "pcflow/error.hpp"
#include "pcflow/phantom.hpp"

using namespace pcflow;
using namespace pcflow::nn;

constexpr std::size_t N = kClassifierSize;

TEST_CASE("layer gradients match central differences") {
  SUBCASE("conv2d") {
    Conv2d layer(2, 3);
    const auto g = oracle::check_layer_gradients(layer, {2, 6, 6}, 1);
    CHECK(g.max_param_error <= 1e-4);
    CHECK(g.max_input_error <= 1e-4);
  }
  SUBCASE("conv2d without padding") {
    Conv2d layer(1, 2, 3, 0);
    const auto g = oracle::check_layer_gradients(layer, {1, 5, 7}, 2);
    CHECK(g.max_param_error <= 1e-4);
    CHECK(g.max_input_error <= 1e-4);
  }
  SUBCASE("relu") {
    Relu layer;
    CHECK(oracle::check_layer_gradients(layer, {2, 4, 4}, 3).max_input_error <= 1e-4);
  }
  SUBCASE("max pool") {
    MaxPool layer(2);
    CHECK(oracle::check_layer_gradients(layer, {2, 6, 7}, 4).max_input_error <= 1e-4);
  }
  SUBCASE("average pool") {
    AvgPool layer(2);
    CHECK(oracle::check_layer_gradients(layer, {3, 5, 6}, 5).max_input_error <= 1e-4);
  }
  SUBCASE("dense") {
    Dense layer(18, 4);
    const auto g = oracle::check_layer_gradients(layer, {2, 3, 3}, 6);
    CHECK(g.max_param_error <= 1e-4);
    CHECK(g.max_input_error <= 1e-4);
  }
}

TEST_CASE("loss gradients match central differences") {
  Rng rng(11);
  for (Head head : {Head::kSoftmax, Head::kSigmoid}) {
    const std::size_t n = head == Head::kSoftmax ? 4 : 1;
    for (std::size_t label = 0; label < (head == Head::kSoftmax ? 4u : 2u); ++label) {
      std::vector<double> logits(n);
      for (auto& x : logits) x = rng.uniform(-3.0, 3.0);
      std::vector<double> grad(n);
      loss_and_gradient(head, logits, label, grad);
      std::vector<double> scratch(n);
      for (std::size_t i = 0; i < n; ++i) {
        auto up = logits, down = logits;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        const double numeric =
            (loss_and_gradient(head, up, label, scratch) - loss_and_gradient(head, down, label, scratch)) / 2e-6;
        CHECK(oracle::gradient_relative_error(grad[i], numeric) <= 1e-4);
      }
    }
  }
}

TEST_CASE("probabilities sum to one") {
  const auto model = ClassifierModel::make(3, LossKind::kCrossEntropy, 5);
  const auto qc = ClassifierModel::make(2, LossKind::kBinaryCrossEntropy, 5);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    ClassifierInput in;
    for (auto& p : in.pixels) p = rng.uniform();
    for (const auto* m : {&model, &qc}) {
      const auto p = m->probabilities(in);
      CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
      for (double v : p) CHECK(v >= 0.0);
    }
  }
  CHECK(class_probabilities(Head::kSoftmax, std::vector<double>{1000.0, 0.0, -1000.0})[0] == 1.0);
}

TEST_CASE("argmax ties go to the lowest index; QC threshold is inclusive") {
  CHECK(argmax(std::vector<double>{0.2, 0.4, 0.4}) == 1);
  CHECK(argmax(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}) == 0);
  CHECK(qc_label_from_score(0.5).label == QCVerdict::kArtefact);
  CHECK(qc_label_from_score(0.4999).label == QCVerdict::kPass);
  CHECK(qc_label_from_score(0.7, 0.8).label == QCVerdict::kPass);
}

TEST_CASE("preprocess: 256x208 is centre cropped") {
  std::vector<double> frame(256 * 208);
  for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = static_cast<double>(i % 977);
  const auto out = preprocess(frame, 256, 208);
  // Min-max over the cropped window.
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t r = 32; r < 224; ++r)
    for (std::size_t c = 8; c < 200; ++c) lo = std::min(lo, frame[r * 208 + c]), hi = std::max(hi, frame[r * 208 + c]);
  for (std::size_t r : {0u, 17u, 191u})
    for (std::size_t c : {0u, 100u, 191u})
      CHECK(std::abs(out.at(r, c) - (frame[(r + 32) * 208 + c + 8] - lo) / (hi - lo)) <= 1e-12);
}

TEST_CASE("preprocess: 192x192 in [0, 4095] is only rescaled") {
  std::vector<double> frame(N * N);
  for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = static_cast<double>(i % 4096);
  const auto out = preprocess(frame, N, N);
  for (std::size_t i = 0; i < frame.size(); ++i) CHECK(out.pixels[i] == frame[i] / 4095.0);
}

TEST_CASE("preprocess: 100x100 is zero padded symmetrically") {
  std::vector<double> frame(100 * 100, 7.0);
  frame[0] = 3.0;
  frame[100 * 100 - 1] = 11.0;
  const auto out = preprocess(frame, 100, 100);
  CHECK(out.at(0, 0) == 0.0);
  CHECK(out.at(46, 46) == 0.0);  // the minimum
  CHECK(out.at(46, 47) == 0.5);
  CHECK(out.at(145, 145) == 1.0);
  CHECK(out.at(146, 146) == 0.0);
  CHECK(out.at(45, 100) == 0.0);
  const auto constant = preprocess(std::vector<double>(100 * 100, 9.0), 100, 100);
  for (double v : constant.pixels) CHECK(v == 0.0);
  CHECK_THROWS_AS(preprocess(std::vector<double>(10), 3, 4), GeometryError);
}

TEST_CASE("preprocess output is in [0, 1]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const std::size_t rows = 50 + rng.below(300), cols = 50 + rng.below(300);
    std::vector<double> frame(rows * cols);
    for (auto& v : frame) v = rng.normal(100.0, 50.0);
    for (double v : preprocess(frame, rows, cols).pixels) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("flip is an involution; augment is deterministic") {
  Rng rng(3);
  ClassifierInput in;
  for (auto& p : in.pixels) p = rng.uniform();
  CHECK(flip(flip(in, FlipAxis::kHorizontal), FlipAxis::kHorizontal) == in);
  CHECK(flip(flip(in, FlipAxis::kVertical), FlipAxis::kVertical) == in);
  CHECK(flip(in, FlipAxis::kHorizontal).at(5, 0) == in.at(5, N - 1));

  AugmentationConfig off{.flip_probability = 0.0, .per_transform_probability = 0.0};
  Rng r0(1);
  CHECK(augment(in, off, r0) == in);

  AugmentationConfig on;
  Rng a(42), b(42);
  const auto x = augment(in, on, a);
  CHECK(x == augment(in, on, b));
  for (double v : x.pixels) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("checkpoint round-trip and corruption") {
  const auto model = ClassifierModel::make(3, LossKind::kCrossEntropy, 9);
  const auto bytes = model.encode();
  const auto back = ClassifierModel::decode(bytes);
  CHECK(back.encode() == bytes);
  CHECK(back.num_classes() == 3);
  CHECK(back.head() == Head::kSoftmax);
  Rng rng(1);
  ClassifierInput in;
  for (auto& p : in.pixels) p = rng.uniform();
  CHECK(back.probabilities(in) == model.probabilities(in));

  const auto dir = oracle::scratch_dir("checkpoint");
  model.save(dir / "m.pcnn");
  CHECK(ClassifierModel::load(dir / "m.pcnn").encode() == bytes);
  CHECK(file_checksum(dir / "m.pcnn").size() == 16);

  auto bad = bytes;
  bad[0] = 'Q';
  CHECK_THROWS_AS(ClassifierModel::decode(bad), FormatError);
  auto cut = bytes;
  cut.resize(cut.size() - 5);
  CHECK_THROWS_AS(ClassifierModel::decode(cut), Error);
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(ClassifierModel::decode(extra), FormatError);
}

TEST_CASE("training rejects degenerate datasets and bad configuration") {
  std::vector<LabeledImage> empty;
  CHECK_THROWS_AS(train(empty, {}, {}), DegenerateDatasetError);
  std::vector<LabeledImage> single(4);
  CHECK_THROWS_AS(train(single, {}, {}), DegenerateDatasetError);
  auto two = make_shape_corpus(4, 1);
  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(train(two, bad, {}), ConfigError);
  bad = {};
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train(two, bad, {}), ConfigError);
  const auto qc = ClassifierModel::make(2, LossKind::kBinaryCrossEntropy, 1);
  CHECK_THROWS_AS(predict_view(qc, two[0].image), ConfigError);
  CHECK_THROWS_AS(ClassifierModel::make(3, LossKind::kBinaryCrossEntropy, 1), ConfigError);
}

TEST_CASE("training: loss decreases and results do not depend on threading") {
  const auto data = make_shape_corpus(32, 4);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 8;
  cfg.rng_seed = 3;
  const auto a = train(data, cfg, {});
  CHECK(a.epoch_loss.size() == 6);
  CHECK(a.epoch_loss.back() < a.epoch_loss.front());

  cfg.parallel = false;
  const auto b = train(data, cfg, {});
  CHECK(a.model.encode() == b.model.encode());
  CHECK(a.epoch_loss == b.epoch_loss);

  cfg.rng_seed = 4;
  CHECK(train(data, cfg, {}).model.encode() != a.model.encode());
}

TEST_CASE("series inputs: view uses the first magnitude frame, QC the strongest phase frame") {
  PhantomConfig c;
  c.image_size = 64;
  c.grid_spacing_mm = 1.0;
  c.num_frames = 8;
  c.waveform = Waveform::kHalfSine;
  const auto p = generate_phantom(c);
  CHECK(view_input(p.series) == preprocess_frame(p.series.magnitude.frame(0), 64, 64));
  // Systole is frames 0..3 of 8 with its maximum at frame 2.
  CHECK(qc_input(p.series) == preprocess_frame(p.series.phase.frame(2), 64, 64));
}
