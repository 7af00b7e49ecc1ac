#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "streakfit/errors.hpp"
#include "streakfit/optimizer.hpp"
#include "streakfit/preprocess.hpp"
#include "streakfit/sim_harness.hpp"

using namespace streakfit;

namespace {

Grid random_grid(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Grid g(w, h);
  for (double& v : g.values()) v = u(rng);
  return g;
}

}  // namespace

TEST_CASE("box blur hand cases") {
  SUBCASE("k = 1 is the identity") {
    const Grid g = random_grid(13, 9, 1);
    CHECK(box_blur(g, 1) == g);
    CHECK(box_blur(g, 1, BlurBorder::Normalized) == g);
  }
  SUBCASE("constant image") {
    const Grid g(20, 15, 0.5);
    const Grid n = box_blur(g, 5, BlurBorder::Normalized);
    for (double v : n.values()) CHECK(v == 0.5);
    const Grid z = box_blur(g, 5, BlurBorder::Zero);
    for (int y = 2; y < 13; ++y) {
      for (int x = 2; x < 18; ++x) CHECK(z(x, y) == 0.5);
    }
    CHECK(z(0, 0) == doctest::Approx(0.5 * 9.0 / 25.0).epsilon(1e-15));
  }
  SUBCASE("impulse spreads to a k x k square") {
    Grid g(11, 11);
    g(5, 5) = 1.0;
    const Grid b = box_blur(g, 3);
    for (int y = 0; y < 11; ++y) {
      for (int x = 0; x < 11; ++x) {
        const bool inside = std::abs(x - 5) <= 1 && std::abs(y - 5) <= 1;
        CHECK(b(x, y) == doctest::Approx(inside ? 1.0 / 9.0 : 0.0).epsilon(1e-15));
        if (!inside) CHECK(std::abs(b(x, y)) < 1e-16);
      }
    }
  }
  SUBCASE("brute-force mean over the window") {
    const Grid g = random_grid(17, 12, 4);
    const int k = 5;
    for (BlurBorder border : {BlurBorder::Zero, BlurBorder::Normalized}) {
      const Grid b = box_blur(g, k, border);
      for (int y = 0; y < g.height(); ++y) {
        for (int x = 0; x < g.width(); ++x) {
          double s = 0.0;
          int n = 0;
          for (int j = y - 2; j <= y + 2; ++j) {
            for (int i = x - 2; i <= x + 2; ++i) {
              if (i < 0 || j < 0 || i >= g.width() || j >= g.height()) continue;
              s += g(i, j);
              ++n;
            }
          }
          const double expected = border == BlurBorder::Zero ? s / (k * k) : s / n;
          CHECK(std::abs(b(x, y) - expected) < 1e-14);
        }
      }
    }
  }
  SUBCASE("even or non-positive kernels throw") {
    const Grid g(4, 4);
    CHECK_THROWS_AS(box_blur(g, 4), InvalidArgument);
    CHECK_THROWS_AS(box_blur(g, 0), InvalidArgument);
    CHECK_THROWS_AS(box_blur(g, -3), InvalidArgument);
  }
}

TEST_CASE("blur conserves mass away from the border") {
  Grid g(60, 50);
  const Grid content = random_grid(20, 20, 9);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) g(x + 20, y + 15) = content(x, y);
  }
  for (int k : {3, 7, 15, 29}) CHECK(box_blur(g, k).sum() == doctest::Approx(g.sum()).epsilon(1e-12));
}

TEST_CASE("median") {
  CHECK(median(std::vector<double>{3, 1, 2}) == 2.0);
  CHECK(median(std::vector<double>{4, 1, 3, 2}) == 2.5);
  CHECK(median(std::vector<double>{7}) == 7.0);
}

TEST_CASE("background clamping is exact") {
  Grid g(2, 2);
  g(0, 0) = 0.5;
  g(1, 0) = 0.1;
  g(0, 1) = 0.2;
  g(1, 1) = 0.9;
  const Grid c = clamp_background(g, 0.2);
  CHECK(c(0, 0) == 0.5 - 0.2);
  CHECK(c(0, 0) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(c(1, 0) == 0.0);
  CHECK(c(0, 1) == 0.0);
  CHECK(c(1, 1) == 0.9 - 0.2);

  const Grid s = subtract_background(g, 0.2);
  CHECK(s.max() == 1.0);
  CHECK(s(0, 0) == (0.5 - 0.2) / (0.9 - 0.2));
  CHECK_THROWS_AS(subtract_background(g, 1.0), InvalidArgument);
}

TEST_CASE("streak scale is the median of the brightest fraction") {
  const Grid g = random_grid(40, 25, 12);
  for (double eta : {0.001, 0.01, 0.1}) {
    std::vector<double> v(g.values().begin(), g.values().end());
    std::sort(v.begin(), v.end(), std::greater<>());
    const auto n = static_cast<std::size_t>(std::ceil(eta * static_cast<double>(v.size())));
    v.resize(n);
    std::sort(v.begin(), v.end());
    const double expected = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    CHECK(streak_scale(g, eta) == expected);
  }
}

TEST_CASE("SIR and weights") {
  Grid g(10, 10);
  for (int i = 0; i < 7; ++i) g(i, 0) = 0.9;
  CHECK(compute_sir(g, 0.9) == 0.07);
  CHECK(compute_sir(g, 0.5) == 0.07);
  CHECK_THROWS_AS(compute_sir(g, 0.95), InvalidArgument);

  CHECK(compute_weights(std::vector<double>{0.02, 0.01}) == std::vector<double>{1.0, 2.0});
  CHECK(compute_weights(std::vector<double>{0.5, 0.25, 0.125}) == std::vector<double>{1.0, 2.0, 4.0});
  CHECK(compute_weights(std::vector<double>{0.3}) == std::vector<double>{1.0});

  // Only ratios matter.
  const std::vector<double> a = compute_weights(std::vector<double>{0.013, 0.004, 0.0071});
  const std::vector<double> b = compute_weights(std::vector<double>{0.013 * 8, 0.004 * 8, 0.0071 * 8});
  CHECK(a == b);
}

TEST_CASE("zero mask marks exact zeros only") {
  Grid g(3, 1);
  g(0, 0) = 0.0;
  g(1, 0) = 1e-300;
  g(2, 0) = -0.5;
  const Grid m = zero_mask(g);
  CHECK(m(0, 0) == 0.0);
  CHECK(m(1, 0) == 1.0);
  CHECK(m(2, 0) == 1.0);
}

TEST_CASE("preprocessing twice with k = 1 and no background is idempotent") {
  Grid g(30, 30);
  for (int i = 3; i < 27; ++i) g(i, i) = 0.25 + 0.01 * i;
  const PreprocessedImage once = preprocess(g, 1, 0.01);
  CHECK(once.background == 0.0);
  const PreprocessedImage twice = preprocess(once.pixels, 1, 0.01);
  CHECK(twice.pixels == once.pixels);
  CHECK(twice.streak_scale == once.streak_scale);
  CHECK(twice.sir == once.sir);
}

TEST_CASE("background is taken on a narrow blur") {
  Grid g(41, 41, 0.2);
  for (int i = 0; i < 41; ++i) g(i, 20) = 1.0;
  const PreprocessedImage p = preprocess(g, 5, 0.001);
  CHECK(p.background == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(p.pixels.max() == 1.0);
  CHECK_THROWS_AS(preprocess(g, 5, 0.001, BlurBorder::Normalized, 4), InvalidArgument);
}

TEST_CASE("masked holes drop out of a perfect fit") {
  // Perfect-fit loss on an image with holes equals the loss over the
  // hole-free pixels alone.
  const Scenario sc = simulate_trial(OrbitType::B, 60.0, 4.0, 31);
  const StreakImage& img = sc.observations.images[0];
  const PreprocessedImage prep = preprocess(img.pixels, 1, 0.001);
  int zeros = 0;
  for (double v : prep.zero_mask.values()) zeros += v == 0.0;
  REQUIRE(zeros > 0);

  Grid generated;
  generate_processed(sc.truth_state, img, prep, generated);
  const double masked = image_loss(generated, prep.pixels);

  // Same render without the mask, compared on non-hole pixels.
  PreprocessedImage open = prep;
  open.zero_mask.fill(1.0);
  Grid unmasked;
  generate_processed(sc.truth_state, img, open, unmasked);
  // The two renders differ only by their peak normalisation.
  const auto j = static_cast<std::size_t>(std::max_element(generated.data(), generated.data() + generated.size()) -
                                          generated.data());
  const double ratio = generated.data()[j] / unmasked.data()[j];
  double acc = 0.0;
  for (std::size_t i = 0; i < unmasked.size(); ++i) {
    if (prep.zero_mask.data()[i] == 0.0) {
      CHECK(generated.data()[i] == 0.0);
      continue;
    }
    const double d = unmasked.data()[i] * ratio - prep.pixels.data()[i];
    acc += d * d;
  }
  CHECK(std::abs(masked - std::sqrt(acc) / static_cast<double>(prep.pixels.size())) < 1e-12);
}
