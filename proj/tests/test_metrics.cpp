#include <doctest.h>

#include <cmath>

#include "meshattn/io.hpp"
#include "meshattn/metrics.hpp"
#include "meshattn/rng.hpp"
#include "meshattn/scanpath.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace meshattn;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

std::vector<double> stdvec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd random_map(Rng& rng, Index n) {
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.uniform() * (rng.uniform() < 0.2 ? 0.0 : 1.0);
  v[0] += 0.1;  // never all-zero
  return v;
}

Scanpath path_from(const std::vector<Vec3>& pts, double duration = 1.0) {
  Scanpath s;
  for (std::size_t i = 0; i < pts.size(); ++i)
    s.fixations.push_back({static_cast<Index>(i), pts[i], duration});
  return s;
}

}  // namespace

TEST_CASE("kl_div examples") {
  const VectorXd p = vec({0.1, 0.2, 0.3, 0.4});
  CHECK(std::abs(kl_div(p, p)) < 1e-7);
  CHECK(kl_div(vec({1, 0}), vec({0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  const double expect = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  CHECK(kl_div(vec({0.5, 0.5}), vec({0.9, 0.1})) == doctest::Approx(expect).epsilon(1e-7));
  CHECK(expect == doctest::Approx(0.510826).epsilon(1e-6));
  // Unnormalised inputs are normalised on entry.
  CHECK(kl_div(vec({2, 0}), vec({3, 3})) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK_THROWS_AS(kl_div(vec({1, 0}), vec({1, 0, 0})), LengthMismatch);
}

TEST_CASE("cc examples") {
  const VectorXd p = vec({0.3, 0.1, 0.9, 0.4, 0.2});
  CHECK(cc(p, (2.5 * p.array() + 7.0).matrix()) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(cc(p, (-p).eval()) == doctest::Approx(-1.0).epsilon(1e-9));
  // sum of cross deviations 3, variances 5 and 2: 3 / sqrt(10).
  CHECK(cc(vec({0, 1, 2, 3}), vec({0, 1, 1, 2})) == doctest::Approx(0.948683).epsilon(1e-6));
  const Correlation flat = cc_checked(p, VectorXd::Constant(5, 0.2));
  CHECK(flat.zero_variance);
  CHECK(flat.value == 0.0);
}

TEST_CASE("nss examples") {
  CHECK_THROWS_AS(nss(VectorXd::Constant(5, 0.3), FixationSet{1}), ZeroVariance);
  CHECK(nss(vec({0, 0, 1, 0}), FixationSet{2}) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  for (Index n : {2, 7, 50}) {
    VectorXd onehot = VectorXd::Zero(n);
    onehot[n / 2] = 1.0;
    CHECK(nss(onehot, FixationSet{n / 2, n / 2, n / 2}) ==
          doctest::Approx(std::sqrt(double(n - 1))).epsilon(1e-12));
  }
}

TEST_CASE("auc_judd examples") {
  CHECK(auc_judd(vec({0.9, 0.1, 0.8, 0.2}), FixationSet{0, 2}) == 1.0);
  CHECK(auc_judd(VectorXd::Constant(10, 0.4), FixationSet{3, 4}) == 0.5);
  // Thresholds only at fixated values: ROC (0,0) -> (1,0.5) -> (1,1).
  CHECK(auc_judd(vec({0.1, 0.9, 0.2, 0.8}), FixationSet{0, 2}) == 0.25);
  CHECK_THROWS_AS(auc_judd(vec({0.1, 0.2}), FixationSet{0, 1}), AllFixated);
}

TEST_CASE("mse examples") {
  CHECK(mse(vec({0.2, 0.4}), vec({0.2, 0.4})) == 0.0);
  CHECK(mse(vec({0, 0}), vec({1, 1})) == 1.0);
  CHECK(mse(vec({0, 1}), vec({0.5, 0.5})) == 0.25);
  CHECK_THROWS_AS(mse(vec({0, 1}), vec({0.5})), LengthMismatch);
}

TEST_CASE("metrics agree with independent implementations on random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.uniform_index(199));
    const VectorXd y = random_map(rng, n), p = random_map(rng, n);
    const Index f = 1 + static_cast<Index>(rng.uniform_index(20));
    FixationSet fix;
    for (Index i = 0; i < f; ++i)
      fix.push_back(static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n - 1))));
    const auto ys = stdvec(y), ps = stdvec(p);
    CHECK(std::abs(kl_div(y, p) - double(oracle::kl(ys, ps))) < 1e-6);
    CHECK(kl_div(y.normalized(), p) >= -1e-7);
    CHECK(std::abs(cc(y, p) - double(oracle::pearson(ys, ps))) < 1e-6);
    CHECK(std::abs(nss(p, fix) - double(oracle::nss(ps, fix))) < 1e-6);
    CHECK(std::abs(auc_judd(p, fix) - double(oracle::auc_judd(ps, fix))) < 1e-6);
    CHECK(std::abs(mse(y, p) - double(oracle::mse(ys, ps))) < 1e-6);
  }
}

TEST_CASE("cc and argmax are invariant under positive affine maps") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const VectorXd y = random_map(rng, 40), p = random_map(rng, 40);
    const double a = rng.uniform(0.1, 10.0), b = rng.uniform(-5.0, 5.0);
    const VectorXd q = (a * p.array() + b).matrix();
    CHECK(std::abs(cc(y, p) - cc(y, q)) < 1e-9);
    CHECK(std::abs(cc(y, p) - cc((a * y.array() + b).matrix().eval(), p)) < 1e-9);
    Index ap, aq;
    p.maxCoeff(&ap);
    q.maxCoeff(&aq);
    CHECK(ap == aq);
  }
}

TEST_CASE("saliency and fixation files") {
  const auto dir = testutil::scratch_dir("metrics_io");
  const SaliencyMap m{vec({0.0, 0.25, 1.5, 3.0e-7})};
  save_saliency(m, dir / "m.txt");
  CHECK(load_saliency(dir / "m.txt").values == m.values);
  save_saliency(m, dir / "m.smap");
  const std::string bytes = testutil::read_file(dir / "m.smap");
  REQUIRE(bytes.size() == 4 + 4 + 8 + 4 * 4);
  CHECK(bytes.substr(0, 4) == "SMAP");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 4);
  const SaliencyMap back = load_saliency(dir / "m.smap");
  for (Index i = 0; i < 4; ++i) CHECK(back.values[i] == double(float(m.values[i])));

  save_fixations(FixationSet{3, 3, 0}, dir / "f.txt");
  CHECK(load_fixations(dir / "f.txt") == FixationSet{3, 3, 0});
  testutil::write_file(dir / "bad.txt", "0.1\nabc\n");
  CHECK_THROWS_AS(load_saliency(dir / "bad.txt"), ParseError);
}

TEST_CASE("multimatch identity and duration scaling") {
  const std::vector<Vec3> pts = {{0, 0, 0}, {0.3, 0.1, 0}, {0.5, 0.5, 0.2}, {0.1, 0.6, 0.4}};
  const Scanpath a = path_from(pts);
  const MultiMatchScore self = multimatch(a, a, 2.0);
  CHECK(self.shape == 1.0);
  CHECK(self.direction == 1.0);
  CHECK(self.length == 1.0);
  CHECK(self.position == 1.0);
  CHECK(self.duration == 1.0);
  CHECK(self.mean() == 1.0);

  const MultiMatchScore twice = multimatch(a, path_from(pts, 2.0), 2.0);
  CHECK(twice.duration == 0.5);
  CHECK(twice.shape == 1.0);
  CHECK(twice.direction == 1.0);
  CHECK(twice.length == 1.0);
  CHECK(twice.position == 1.0);
}

TEST_CASE("multimatch direction penalises opposite saccades") {
  // Three fixations each: same first saccade, opposite middle saccades.
  const Scanpath a = path_from({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}});
  const Scanpath same = path_from({{0, 0, 0}, {1, 0, 0}, {1, 1.2, 0}});
  const Scanpath opposite = path_from({{0, 0, 0}, {1, 0, 0}, {1, -1, 0}});
  CHECK(multimatch(a, opposite, 3.0).direction < multimatch(a, same, 3.0).direction);
}

TEST_CASE("multimatch is symmetric") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    auto random_path = [&] {
      std::vector<Vec3> pts;
      const int len = 2 + static_cast<int>(rng.uniform_index(10));
      for (int i = 0; i < len; ++i)
        pts.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
      Scanpath s = path_from(pts);
      for (auto& f : s.fixations) f.duration = rng.uniform(0.1, 1.0);
      return s;
    };
    const Scanpath a = random_path(), b = random_path();
    const MultiMatchScore ab = multimatch(a, b, 1.7), ba = multimatch(b, a, 1.7);
    CHECK(ab.shape == doctest::Approx(ba.shape).epsilon(1e-12));
    CHECK(ab.direction == doctest::Approx(ba.direction).epsilon(1e-12));
    CHECK(ab.length == doctest::Approx(ba.length).epsilon(1e-12));
    CHECK(ab.position == doctest::Approx(ba.position).epsilon(1e-12));
    CHECK(ab.duration == doctest::Approx(ba.duration).epsilon(1e-12));
  }
}

TEST_CASE("multimatch errors and JSON round trip") {
  const Scanpath one = path_from({{0, 0, 0}});
  CHECK_THROWS_AS(multimatch(one, one, 1.0), TooShort);
  Scanpath s = path_from({{0.125, -2, 3e-5}, {1, 2, 3}});
  s.mesh = "fixtures/sphere.off";
  const Scanpath back = scanpath_from_json(scanpath_to_json(s));
  CHECK(back.mesh == s.mesh);
  REQUIRE(back.size() == 2);
  CHECK(back.fixations[0].position == s.fixations[0].position);
  CHECK(back.fixations[1].vertex == 1);
  CHECK_THROWS_AS(scanpath_from_json("{\"fixations\": [{\"v\": 1}]}"), ParseError);
}
