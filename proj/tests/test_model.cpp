#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "supraid/io.hpp"
#include "supraid/model.hpp"

using namespace supraid;

TEST_CASE("new_model uniform circular transitions") {
  HmmModel m = new_model(1, Topology{TopologyKind::Circular}, 2, 1, 1, 0);
  for (int i = 0; i < 2; ++i) {
    CHECK(m.transitions.at(i, i) == 0.5);
    CHECK(m.transitions.at(i, (i + 1) % 2) == 0.5);
  }
  CHECK(validate(m).ok());
}

TEST_CASE("new_model left-to-right mask forces zeros") {
  HmmModel m = new_model(3, Topology{TopologyKind::LeftToRight}, 9, 4, 32, 7);
  std::vector<int> ctx(3);
  for (std::size_t c = 0; c < m.transitions.n_contexts(); ++c) {
    unflatten_tuple(c, 9, 3, ctx.data());
    if (!tuple_valid(m.topology, ctx.data(), 3, 9)) continue;
    int k = ctx[2];
    for (int w = 0; w < 9; ++w)
      if (w != k && w != k + 1) CHECK(m.transitions.at(c, w) == 0.0);
  }
  CHECK(validate(m).ok());
}

TEST_CASE("new_model absorbing end of LTR chain") {
  HmmModel m = new_model(1, Topology{TopologyKind::LeftToRight}, 3, 1, 1, 0);
  CHECK(m.transitions.at(2, 2) == 1.0);
  CHECK(m.transitions.at(2, 0) == 0.0);
  CHECK(m.transitions.at(2, 1) == 0.0);
}

TEST_CASE("new_model rejects bad parameters") {
  CHECK_THROWS_AS(new_model(0, Topology{}, 3, 1, 1, 0), usage_error);
  CHECK_THROWS_AS(new_model(4, Topology{}, 3, 1, 1, 0), usage_error);
  CHECK_THROWS_AS(new_model(1, Topology{}, 0, 1, 1, 0), usage_error);
  CHECK_THROWS_AS(new_model(1, Topology{}, 3, 0, 1, 0), usage_error);
}

TEST_CASE("validate flags an underweight row") {
  HmmModel m = new_model(2, Topology{TopologyKind::Circular}, 3, 1, 2, 1);
  // Context (1,2) row scaled to 0.9.
  std::size_t c = flatten_tuple(std::vector<int>{1, 2}.data(), 3, 2);
  for (int s = 0; s < 3; ++s) m.transitions.at(c, s) *= 0.9;
  ValidationReport rep = validate(m);
  REQUIRE_FALSE(rep.ok());
  bool mentions = false;
  for (const auto& msg : rep.issues)
    if (msg.find("(1,2)") != std::string::npos &&
        msg.find("0.9") != std::string::npos)
      mentions = true;
  CHECK(mentions);
}

TEST_CASE("validate flags a masked nonzero entry") {
  HmmModel m = new_model(1, Topology{TopologyKind::LeftToRight}, 4, 1, 1, 1);
  m.transitions.at(0, 3) = 0.25;  // 0 -> 3 is not an allowed arc
  ValidationReport rep = validate(m);
  REQUIRE_FALSE(rep.ok());
  bool mentions = false;
  for (const auto& msg : rep.issues)
    if (msg.find("(0)") != std::string::npos &&
        msg.find("-> 3") != std::string::npos)
      mentions = true;
  CHECK(mentions);
}

TEST_CASE("sample single-state model") {
  HmmModel m = new_model(1, Topology{TopologyKind::Circular}, 1, 1, 1, 0);
  auto [states, obs] = sample(m, 5, 3);
  CHECK(states == std::vector<int>{0, 0, 0, 0, 0});
  CHECK(obs.rows == 5);
}

TEST_CASE("sample deterministic cyclic order-3 chain") {
  HmmModel m = new_model(3, Topology{TopologyKind::Circular}, 3, 1, 1, 0);
  // All transition mass on the next state; ramp pinned to 0,1,2.
  std::vector<int> ctx(3);
  for (std::size_t c = 0; c < m.transitions.n_contexts(); ++c) {
    unflatten_tuple(c, 3, 3, ctx.data());
    if (!tuple_valid(m.topology, ctx.data(), 3, 3)) continue;
    for (int s = 0; s < 3; ++s) m.transitions.at(c, s) = 0.0;
    m.transitions.at(c, (ctx[2] + 1) % 3) = 1.0;
  }
  m.ramp.pi1 = {1.0, 0.0, 0.0};
  std::fill(m.ramp.pi2.begin(), m.ramp.pi2.end(), 0.0);
  std::fill(m.ramp.pi3.begin(), m.ramp.pi3.end(), 0.0);
  for (int i = 0; i < 3; ++i) m.ramp.pi2[i * 3 + (i + 1) % 3] = 1.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      m.ramp.pi3[(i * 3 + j) * 3 + (j + 1) % 3] = 1.0;

  auto [states, obs] = sample(m, 9, 11);
  for (int t = 0; t < 9; ++t) CHECK(states[t] == t % 3);
}

TEST_CASE("sampled transition frequencies match the tensor") {
  HmmModel m = testgen::random_model(1, TopologyKind::Circular, 3, 1, 1, 42);
  const int T = 100000;
  auto [states, obs] = sample(m, T, 5);
  std::map<std::pair<int, int>, double> counts;
  std::vector<double> from(3, 0.0);
  for (int t = 1; t < T; ++t) {
    counts[{states[t - 1], states[t]}] += 1.0;
    from[states[t - 1]] += 1.0;
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double freq = from[i] > 0 ? counts[{i, j}] / from[i] : 0.0;
      CHECK(std::abs(freq - m.transitions.at(i, j)) < 0.01);
    }
}

TEST_CASE("sample never crosses the topology mask") {
  HmmModel m = testgen::random_model(2, TopologyKind::LeftToRight, 5, 1, 1, 9);
  auto [states, obs] = sample(m, 20000, 17);
  for (std::size_t t = 1; t < states.size(); ++t)
    REQUIRE(m.topology.arc_allowed(states[t - 1], states[t], 5));
}

TEST_CASE("sample rejects sequences shorter than the order") {
  HmmModel m = new_model(3, Topology{TopologyKind::Circular}, 3, 1, 1, 0);
  CHECK_THROWS_AS(sample(m, 2, 0), usage_error);
}

TEST_CASE("log_emission standard normal at its mode") {
  GmmEmission e;
  e.n_components = 1;
  e.dim = 1;
  e.weights = {1.0};
  e.means = {0.0};
  e.variances = {1.0};
  double frame = 0.0;
  CHECK(log_emission(e, &frame, 1) ==
        Catch::Approx(-0.9189385332046727).epsilon(1e-12));
}

TEST_CASE("log_emission mixture of identical components collapses") {
  GmmEmission one;
  one.n_components = 1;
  one.dim = 2;
  one.weights = {1.0};
  one.means = {0.3, -0.7};
  one.variances = {1.2, 0.8};
  GmmEmission two = one;
  two.n_components = 2;
  two.weights = {0.5, 0.5};
  two.means = {0.3, -0.7, 0.3, -0.7};
  two.variances = {1.2, 0.8, 1.2, 0.8};
  std::vector<double> frame{0.1, 0.2};
  CHECK(log_emission(two, frame) ==
        Catch::Approx(log_emission(one, frame)).epsilon(1e-12));
}

TEST_CASE("log_emission matches direct linear-domain summation") {
  Rng rng(123);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::uniform_real_distribution<double> var_d(0.5, 2.0);
  GmmEmission e;
  e.n_components = 4;
  e.dim = 3;
  e.weights = {0.1, 0.2, 0.3, 0.4};
  e.means.resize(12);
  e.variances.resize(12);
  for (auto& v : e.means) v = unif(rng);
  for (auto& v : e.variances) v = var_d(rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> frame{unif(rng), unif(rng), unif(rng)};
    double direct = 0.0;
    for (int c = 0; c < 4; ++c) {
      double dens = 1.0;
      for (int d = 0; d < 3; ++d) {
        double diff = frame[d] - e.mean(c)[d];
        dens *= std::exp(-0.5 * diff * diff / e.variance(c)[d]) /
                std::sqrt(2.0 * M_PI * e.variance(c)[d]);
      }
      direct += e.weights[c] * dens;
    }
    double got = log_emission(e, frame);
    CHECK(std::abs(got - std::log(direct)) <= 1e-12 * std::abs(std::log(direct)));
  }
}

TEST_CASE("log_emission rejects dimension mismatch") {
  GmmEmission e;
  e.n_components = 1;
  e.dim = 2;
  e.weights = {1.0};
  e.means = {0.0, 0.0};
  e.variances = {1.0, 1.0};
  double frame = 0.0;
  CHECK_THROWS_AS(log_emission(e, &frame, 1), usage_error);
}

TEST_CASE("model serialization round-trips bit-exactly") {
  for (auto kind : {TopologyKind::LeftToRight, TopologyKind::Circular}) {
    for (int order = 1; order <= 3; ++order) {
      HmmModel m = testgen::random_model(order, kind, 3, 2, 2,
                                         100 + order * 10 + (int)kind);
      json j = to_json(m);
      HmmModel back = model_from_json(json::parse(j.dump()));
      CHECK(back.transitions.probs == m.transitions.probs);
      CHECK(back.ramp.pi1 == m.ramp.pi1);
      CHECK(back.ramp.pi2 == m.ramp.pi2);
      CHECK(back.ramp.pi3 == m.ramp.pi3);
      for (int s = 0; s < 3; ++s) {
        CHECK(back.emissions[s].weights == m.emissions[s].weights);
        CHECK(back.emissions[s].means == m.emissions[s].means);
        CHECK(back.emissions[s].variances == m.emissions[s].variances);
      }
      CHECK(validate(back).ok());
    }
  }
}

TEST_CASE("seeded construction and sampling are reproducible") {
  HmmModel a = new_model(2, Topology{TopologyKind::Circular}, 4, 3, 8, 21);
  HmmModel b = new_model(2, Topology{TopologyKind::Circular}, 4, 3, 8, 21);
  CHECK(to_json(a).dump() == to_json(b).dump());

  auto [sa, oa] = sample(a, 50, 7);
  auto [sb, ob] = sample(b, 50, 7);
  CHECK(sa == sb);
  CHECK(oa.data == ob.data);
}
