#include <cmath>
#include <random>

#include <doctest.h>

#include "streakfit/camera.hpp"
#include "streakfit/errors.hpp"
#include "streakfit/observer.hpp"

using namespace streakfit;

TEST_CASE("timestamps are a uniform grid hitting both ends") {
  CHECK(interpolate_timestamps({0.0, 5.0, 5}) == std::vector<double>{0, 1, 2, 3, 4, 5});
  CHECK(interpolate_timestamps({10.0, 5.0, 1}) == std::vector<double>{10, 15});
  const auto t = interpolate_timestamps({0.0, 5.0, 500});
  REQUIRE(t.size() == 501);
  double gap = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) gap = std::max(gap, t[i] - t[i - 1]);
  CHECK(gap == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(t.back() == 5.0);

  const auto odd = interpolate_timestamps({123.456, 4.9, 77});
  CHECK(odd.front() == 123.456);
  CHECK(odd.back() == doctest::Approx(123.456 + 4.9).epsilon(1e-15));
  for (std::size_t i = 0; i < odd.size(); ++i) {
    CHECK(odd[i] == doctest::Approx(123.456 + 4.9 * static_cast<double>(i) / 77.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(interpolate_timestamps({0.0, 5.0, 0}), InvalidArgument);
  CHECK_THROWS_AS(interpolate_timestamps({0.0, 0.0, 4}), InvalidArgument);
}

TEST_CASE("GMST at J2000 matches the IAU 1982 value") {
  // 18h 41m 50.54841s
  const double expected = (18.0 + 41.0 / 60.0 + 50.54841 / 3600.0) * 15.0 * kDegToRad;
  CHECK(gmst_angle(0.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("Earth rotation is a proper rotation") {
  for (double t : {0.0, 1.0e8, 7.3e8}) {
    const Eigen::Matrix3d r = ecef_to_eci_rotation(t);
    CHECK((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("site positions follow Earth rotation") {
  const ObserverSite pole{Vec3(0.0, 0.0, 6356.75)};
  for (double t : {0.0, 3600.0, 5.0e8}) CHECK((site_eci(pole, t) - pole.ecef_position).norm() < 1e-12);

  const ObserverSite eq{Vec3(kEarthRadius, 0.0, 0.0)};
  CHECK((site_eci(eq, 0.0) - site_eci(eq, kSiderealDaySeconds)).norm() < 1e-6);

  const Vec3 a = site_eci(eq, 1000.0);
  const Vec3 b = site_eci(eq, 1000.0 + kSiderealDaySeconds / 4.0);
  CHECK(std::abs(std::acos(a.dot(b) / (a.norm() * b.norm())) - kPi / 2.0) < 1e-9);
  CHECK(site_eci(eq, 42.0).norm() == doctest::Approx(kEarthRadius).epsilon(1e-14));
}

TEST_CASE("random sites are uniform on the sphere") {
  std::mt19937_64 rng(99);
  const ObserverSite first = random_site(rng);
  std::mt19937_64 again(99);
  CHECK(random_site(again).ecef_position == first.ecef_position);

  const int n = 10000;
  Vec3 mean = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const ObserverSite s = random_site(rng);
    CHECK(std::abs(s.ecef_position.norm() - kEarthRadius) < 1e-9);
    mean += s.ecef_position / n;
  }
  // Each coordinate has variance R^2 / 3 on the sphere.
  const double se = kEarthRadius / std::sqrt(3.0 * n);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(mean[k]) < 3.0 * se);
}

TEST_CASE("window frames carry the interpolated epochs") {
  const ObserverSite site{Vec3(3000.0, 4000.0, 3500.0).normalized() * kEarthRadius};
  const Pointing pointing = Pointing::from_radec(30.0, 20.0, 5.0);
  const ExposureWindow one{100.0, 5.0, 1};
  const auto frames = frames_for_window(site, pointing, one);
  REQUIRE(frames.size() == 2);
  CHECK(frames[0].intrinsics().width == frames[1].intrinsics().width);
  CHECK(frames[0].intrinsics().pixel_scale == frames[1].intrinsics().pixel_scale);

  const ExposureWindow w{7.0e8, 5.0, 50};
  const auto many = frames_for_window(site, pointing, w);
  const auto times = interpolate_timestamps(w);
  REQUIRE(many.size() == times.size());
  for (std::size_t i = 0; i < times.size(); ++i) CHECK(many[i].epoch() == times[i]);

  // Observer sweeps a small circle about the z axis at the sidereal rate.
  const Vec3 a = many.front().observer_eci();
  const Vec3 b = many.back().observer_eci();
  const double swept = std::atan2(a.x() * b.y() - a.y() * b.x(), a.x() * b.x() + a.y() * b.y());
  CHECK(swept / w.duration == doctest::Approx(2.0 * kPi / kSiderealDaySeconds).epsilon(1e-6));
  CHECK(a.z() == doctest::Approx(b.z()).epsilon(1e-12));
}
