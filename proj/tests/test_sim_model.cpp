#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "simce/channel.hpp"
#include "simce/config.hpp"
#include "simce/geometry.hpp"
#include "simce/wave_model.hpp"

using namespace simce;

namespace {

// Term-by-term evaluation of the diffraction coefficient.
cd scalar_oracle(const Point3& a, const Point3& b, double gap, double lambda, double d1, double d2) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
  const double cos_chi = gap / d;
  const double re = 1.0 / (2.0 * kPi * d);
  const double im = -1.0 / lambda;
  const double amp = d1 * d2 * cos_chi / d;
  const double ph = 2.0 * kPi * d / lambda;
  return amp * cd(re, im) * cd(std::cos(ph), std::sin(ph));
}

}  // namespace

TEST_CASE("reference geometry") {
  GeometryConfig cfg;
  const SimGeometry g = build_geometry(cfg);
  CHECK(g.atoms_per_layer() == 64);
  CHECK(g.num_layers == 6);
  CHECK(g.layer_gap == doctest::Approx(0.05 / 6).epsilon(1e-15));
  CHECK(g.wavelength == doctest::Approx(kSpeedOfLight / 28e9));
  CHECK(g.atom_spacing == doctest::Approx(g.wavelength / 2));
  CHECK(g.antennas.size() == 4);
  for (int l = 0; l < 6; ++l) {
    CHECK(g.layers[l][0].y == doctest::Approx(g.tx_gap + l * g.layer_gap));
  }
}

TEST_CASE("single layer takes the whole thickness") {
  GeometryConfig cfg;
  cfg.num_layers = 1;
  const SimGeometry g = build_geometry(cfg);
  CHECK(g.layer_gap == doctest::Approx(0.05));
}

TEST_CASE("two-atom grid is centered") {
  GeometryConfig cfg;
  cfg.nx = 2;
  cfg.nz = 1;
  const SimGeometry g = build_geometry(cfg);
  const double half = g.atom_spacing / 2;
  const auto& layer = g.layers[0];
  CHECK(layer[0].x == doctest::Approx(-half));
  CHECK(layer[1].x == doctest::Approx(half));
  CHECK(layer[0].z == doctest::Approx(layer[1].z));
  CHECK(layer[0].z == doctest::Approx(g.center_height));
}

TEST_CASE("invalid geometry names the field") {
  GeometryConfig cfg;
  cfg.num_layers = 0;
  try {
    build_geometry(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field().find("num_layers") != std::string::npos);
  }
  cfg = GeometryConfig{};
  cfg.sim_thickness_m = -1;
  CHECK_THROWS_AS(build_geometry(cfg), ConfigError);
}

TEST_CASE("grid shape") {
  CHECK(grid_shape(64) == std::pair{8, 8});
  CHECK(grid_shape(32) == std::pair{4, 8});
  CHECK(grid_shape(48) == std::pair{6, 8});
  CHECK(grid_shape(7) == std::pair{1, 7});
}

TEST_CASE("on-axis coefficient") {
  const double lambda = kSpeedOfLight / 28e9;
  const double g = 0.05 / 6, d1 = lambda / 2, d2 = lambda / 2;
  const cd w = transmission_coefficient(g, g, lambda, d1, d2);
  const cd expect = (d1 * d2 / g) * cd(1.0 / (2 * kPi * g), -1.0 / lambda) *
                    std::exp(cd(0, 2 * kPi * g / lambda));
  CHECK(std::abs(w - expect) <= 1e-14 * std::abs(expect));
  CHECK_THROWS_AS(transmission_coefficient(0.0, 0.0, lambda, d1, d2), GeometryError);
}

TEST_CASE("wave model matches scalar oracle entrywise") {
  const SimGeometry g = build_geometry(GeometryConfig{});
  const WaveModel m = build_wave_model(g);
  REQUIRE(m.num_layers() == 6);
  REQUIRE(m.atoms() == 64);
  REQUIRE(m.antennas() == 4);
  double worst = 0.0;
  for (int n = 0; n < 64; ++n) {
    for (int a = 0; a < 4; ++a) {
      const cd o = scalar_oracle(g.layers[0][n], g.antennas[a], g.tx_gap, g.wavelength,
                                 g.atom_width, g.atom_height);
      worst = std::max(worst, std::abs(m.w1(n, a) - o) / std::abs(o));
    }
  }
  for (int l = 0; l + 1 < 6; ++l) {
    for (int n = 0; n < 64; ++n) {
      for (int p = 0; p < 64; ++p) {
        const cd o = scalar_oracle(g.layers[l + 1][n], g.layers[l][p], g.layer_gap, g.wavelength,
                                   g.atom_width, g.atom_height);
        worst = std::max(worst, std::abs(m.inter_layer[l](n, p) - o) / std::abs(o));
      }
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("coefficient rescales with geometry and wavelength") {
  // w(k*all) = w(all) / k * ... : amplitude term d1 d2 cos/d scales as k, the
  // bracket as 1/k, the phase is invariant.
  const double lambda = 0.0107, g = 0.008, d = 0.011, a = lambda / 2;
  const cd w1 = transmission_coefficient(d, g, lambda, a, a);
  const cd w2 = transmission_coefficient(2 * d, 2 * g, 2 * lambda, 2 * a, 2 * a);
  CHECK(std::abs(w2 - w1) <= 1e-14 * std::abs(w1));
  const cd o = scalar_oracle({0, 0, 0}, {std::sqrt(d * d - g * g), g, 0}, g, lambda, a, a);
  CHECK(std::abs(w1 - o) <= 1e-13 * std::abs(o));
}

TEST_CASE("wave model is deterministic") {
  const SimGeometry g = build_geometry(GeometryConfig{});
  const WaveModel a = build_wave_model(g);
  const WaveModel b = build_wave_model(g);
  CHECK(a.w1 == b.w1);
  for (std::size_t i = 0; i < a.inter_layer.size(); ++i) CHECK(a.inter_layer[i] == b.inter_layer[i]);
}

TEST_CASE("sinc correlation") {
  CHECK(normalized_sinc(0.0) == 1.0);
  CHECK(std::abs(normalized_sinc(1.0)) < 1e-16);
  CHECK(normalized_sinc(0.5) == doctest::Approx(2.0 / kPi).epsilon(1e-15));

  const SimGeometry g = build_geometry(GeometryConfig{});
  const CMatrix r = build_correlation(g);
  for (int n = 0; n < 64; ++n) CHECK(r(n, n) == cd(1.0, 0.0));
  CHECK(std::abs(r(0, 1)) < 1e-15);  // adjacent at lambda/2
  CHECK((r - r.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(r);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * 64);

  GeometryConfig quarter;
  quarter.atom_spacing_m = kSpeedOfLight / 28e9 / 4;
  const CMatrix rq = build_correlation(build_geometry(quarter));
  CHECK(rq(0, 1).real() == doctest::Approx(2.0 / kPi).epsilon(1e-12));
}

TEST_CASE("hermitian square root") {
  const CMatrix r = build_correlation(build_geometry(GeometryConfig{}));
  const HermitianSqrt s = hermitian_sqrt(r);
  CHECK((s.root * s.root.adjoint() - r).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.root - s.root.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
  CMatrix bad = CMatrix::Identity(3, 3);
  bad(2, 2) = -1.0;
  CHECK_THROWS(hermitian_sqrt(bad));
  CMatrix tiny = CMatrix::Identity(3, 3);
  tiny(2, 2) = -1e-12;
  const HermitianSqrt t = hermitian_sqrt(tiny);
  CHECK(t.clipped == 1);
}

TEST_CASE("path loss") {
  CHECK(path_loss(1.0, 3.5, 1.0, 0.3) == doctest::Approx(0.3));
  CHECK(path_loss(2.0, 3.5, 1.0, 1.0) == doctest::Approx(0.088388).epsilon(1e-5));
  double prev = 1.0;
  for (double d : {50.0, 60.0, 70.0, 80.0}) {
    const double b = path_loss(d, 3.5, 1.0, 1.0);
    CHECK(b < prev);
    prev = b;
  }
  CHECK_THROWS(path_loss(0.5, 3.5, 1.0, 1.0));
  const double lambda = 0.01;
  CHECK(free_space_ref_gain(lambda, 1.0) == doctest::Approx(std::pow(lambda / (4 * kPi), 2)));
}

TEST_CASE("effective training SNR") {
  GeometryConfig gc;
  gc.nx = 2;
  gc.nz = 2;
  const SimGeometry g = build_geometry(gc);

  UsersConfig u;
  u.distances_m = {1.0};
  u.ref_gain = 1.0;
  PilotConfig p;
  p.noise_variance_w = 1.0;
  CHECK(effective_training_snr(build_channel_stats(g, u, p)) == doctest::Approx(1.0));

  CHECK(noise_for_effective_snr(db_to_linear(10.0), 1.0, 1.0) == doctest::Approx(0.1));

  // beta in {4, 2, 1, 1} via ref_gain 4 and exponent 1 at 1, 2, 4, 4 m.
  u.distances_m = {1.0, 2.0, 4.0, 4.0};
  u.path_loss_exponent = 1.0;
  u.ref_gain = 4.0;
  p.noise_variance_w = 2.0;
  const ChannelStats s = build_channel_stats(g, u, p);
  CHECK(s.users[1].path_loss == doctest::Approx(2.0));
  CHECK(effective_training_snr(s) == doctest::Approx(1.0));

  const ChannelStats t = with_effective_snr_db(s, 20.0);
  CHECK(linear_to_db(effective_training_snr(t)) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(t.pilot.length == 4);
  CHECK(t.pilot.rho_tau() == doctest::Approx(t.pilot.training_snr() * 4));
}

TEST_CASE("default noise from dBm") {
  const ChannelStats s = build_channel_stats(build_geometry(GeometryConfig{}), UsersConfig{}, PilotConfig{});
  CHECK(s.pilot.noise_variance == doctest::Approx(dbm_to_watts(-110.0)));
  CHECK(dbm_to_watts(-110.0) == doctest::Approx(1e-14));
  CHECK(s.num_users() == 4);
  for (const auto& u : s.users) {
    CHECK((u.scaled_sqrt() * u.scaled_sqrt().adjoint() - u.scaled_covariance()).cwiseAbs().maxCoeff() <
          1e-12 * u.path_loss);
  }
}

TEST_CASE("config parsing is strict and round-trips") {
  using nlohmann::json;
  const json doc = json::parse(R"({"seed": 7, "geometry": {"atoms": 32, "num_layers": 3},
                                   "pilot": {"effective_snr_db": 10}})");
  const SimulationConfig c = parse_config(doc);
  CHECK(c.seed == 7);
  CHECK(c.estimator.hyper.seed == 7);
  CHECK(c.atoms() == 32);
  CHECK(c.geometry.nx == 4);
  CHECK(c.resolved_subphases() == 8);
  CHECK(c.resolved_codebook_size() == 10 * 3 * 32);
  const SimulationConfig back = parse_config(to_json(c));
  CHECK(to_json(back) == to_json(c));

  try {
    parse_config(json::parse(R"({"geometry": {"nxx": 3}})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "geometry.nxx");
  }
  CHECK_THROWS_AS(parse_config(json::parse(R"({"geometry": {"nx": "eight"}})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"monte_carlo": {"path": "sideways"}})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(
                      R"({"geometry": {"atom_spacing_m": 0.005, "atom_spacing_wavelengths": 0.5}})")),
                  ConfigError);
}

TEST_CASE("scenario applies effective SNR") {
  SimulationConfig c;
  c.effective_snr_db = 10.0;
  const Scenario s = build_scenario(c);
  CHECK(linear_to_db(effective_training_snr(s.stats)) == doctest::Approx(10.0));
  CHECK(s.subphases == 16);
}
