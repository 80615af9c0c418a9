#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "anc/acoustics.hpp"
#include "anc/controllers.hpp"
#include "anc/metrics.hpp"
#include "test_helpers.hpp"

using namespace anc;

namespace {

NodeParams params(std::size_t taps, double mu, double alpha = 0.0, std::size_t window = 0) {
  NodeParams p;
  p.taps = taps;
  p.mu = mu;
  p.alpha = alpha;
  p.boost_window = window;
  return p;
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

// FNV-1a over the raw bytes of a weight vector.
std::uint64_t mix(std::uint64_t h, std::span<const double> w) {
  const auto* p = reinterpret_cast<const unsigned char*>(w.data());
  for (std::size_t i = 0; i < w.size_bytes(); ++i) h = (h ^ p[i]) * 1099511628211ull;
  return h;
}

}  // namespace

TEST_CASE("algorithm names round-trip") {
  for (auto a : {Algorithm::decentralized_fxlms, Algorithm::leaky, Algorithm::wcfxlms, Algorithm::sb_wcfxlms,
                 Algorithm::centralized, Algorithm::collocated_centralized})
    CHECK(parse_algorithm(to_string(a)) == a);
  CHECK_FALSE(parse_algorithm("adfxlms").has_value());
}

TEST_CASE("control_output") {
  SUBCASE("zero filter") {
    NodeController c(Algorithm::decentralized_fxlms, {{1.0}}, params(4, 0.1));
    for (double x : {1.0, -2.0, 3.0}) CHECK(c.control_output(x) == 0.0);
  }
  SUBCASE("identity tap") {
    NodeController c(Algorithm::decentralized_fxlms, {{1.0}}, params(3, 0.1));
    c.set_weights(std::vector<double>{1.0, 0.0, 0.0});
    for (double x : {0.5, -2.0, 7.25}) CHECK(c.control_output(x) == x);
  }
  SUBCASE("two taps by hand") {
    NodeController c(Algorithm::decentralized_fxlms, {{1.0}}, params(2, 0.1));
    c.set_weights(std::vector<double>{0.5, -0.25});
    c.control_output(4.0);
    CHECK(c.control_output(2.0) == 0.0);  // 0.5*2 - 0.25*4
  }
}

TEST_CASE("filtered_reference_step") {
  SUBCASE("identity model") {
    NodeController c(Algorithm::decentralized_fxlms, {{1.0}}, params(2, 0.1));
    for (double x : {0.3, -1.0, 4.0}) {
      c.control_output(x);
      CHECK(c.filtered_reference_step() == x);
    }
  }
  SUBCASE("scaled delay") {
    NodeController c(Algorithm::decentralized_fxlms, {{0.0, 0.5}}, params(2, 0.1));
    double prev = 0.0;
    for (double x : {0.3, -1.0, 4.0, 2.0}) {
      c.control_output(x);
      CHECK(c.filtered_reference_step() == 0.5 * prev);
      prev = x;
    }
  }
  SUBCASE("four-tap model against direct convolution") {
    std::mt19937_64 rng(8);
    const auto model = test::random_vector(rng, 4);
    const auto x = test::random_vector(rng, 8);
    const auto want = test::direct_convolution(model, x);
    NodeController c(Algorithm::decentralized_fxlms, {model}, params(8, 0.1));
    for (std::size_t n = 0; n < x.size(); ++n) {
      c.control_output(x[n]);
      CHECK(std::abs(c.filtered_reference_step() - want[n]) <= 1e-12);
    }
    // the delay line holds the newest filtered sample first
    const auto fx = c.filtered_reference();
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(fx[i] - want[7 - i]) <= 1e-12);
  }
}

TEST_CASE("fxlms_update") {
  NodeController c(Algorithm::decentralized_fxlms, {{1.0}}, params(2, 0.1));
  c.output(1.0);
  c.output(2.0);  // filtered reference now [2, 1] newest first
  const auto before = to_vec(c.weights());
  c.fxlms_update(0.0);
  CHECK(to_vec(c.weights()) == before);

  NodeController h(Algorithm::decentralized_fxlms, {{1.0}}, params(2, 0.1));
  h.output(2.0);
  h.output(1.0);  // x' = [1, 2]
  h.fxlms_update(0.5);
  CHECK(h.weights()[0] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(h.weights()[1] == doctest::Approx(0.1).epsilon(1e-15));

  NodeController z(Algorithm::decentralized_fxlms, {{1.0}}, params(2, 0.0));
  z.output(3.0);
  z.fxlms_update(5.0);
  CHECK(to_vec(z.weights()) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("wcfxlms_update") {
  SUBCASE("one tap by hand") {
    NodeController c(Algorithm::wcfxlms, {{1.0}}, params(1, 0.1, 1.0));
    c.set_weights(std::vector<double>{0.2});
    c.output(1.0);
    c.wcfxlms_update(0.1);
    CHECK(c.weights()[0] == doctest::Approx(0.19).epsilon(1e-14));
  }
  SUBCASE("fixed point") {
    NodeController c(Algorithm::wcfxlms, {{1.0}}, params(3, 0.1, 5.0));
    const std::vector<double> w{0.3, -0.2, 0.7};
    c.set_weights(w);
    c.set_center(w);
    c.output(1.5);
    c.wcfxlms_update(0.0);
    CHECK(to_vec(c.weights()) == w);
  }
}

TEST_CASE("leaky update decays geometrically with zero error") {
  const double mu = 0.01, alpha = 2.0;
  NodeController c(Algorithm::leaky, {{1.0}}, params(2, mu, alpha));
  c.set_weights(std::vector<double>{1.0, -0.5});
  c.output(1.0);
  for (int n = 0; n < 100; ++n) c.leaky_fxlms_update(0.0);
  const double r = std::pow(1.0 - mu * alpha, 100);
  CHECK(std::abs(c.weights()[0] - r) <= 1e-9);
  CHECK(std::abs(c.weights()[1] + 0.5 * r) <= 1e-9);
}

TEST_CASE("wcfxlms converges to the centre at rate (1 - mu alpha) with zero error") {
  const double mu = 0.002, alpha = 7.0;
  std::mt19937_64 rng(3);
  const auto w0 = test::random_vector(rng, 16), center = test::random_vector(rng, 16);
  NodeController c(Algorithm::wcfxlms, {{1.0}}, params(16, mu, alpha));
  c.set_weights(w0);
  c.set_center(center);
  c.output(1.0);
  for (int n = 0; n < 100; ++n) c.wcfxlms_update(0.0);
  const double r = std::pow(1.0 - mu * alpha, 100);
  for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(c.weights()[i] - (center[i] + r * (w0[i] - center[i]))) <= 1e-9);
}

TEST_CASE("reduction chain holds bit for bit over random input") {
  std::mt19937_64 rng(2024);
  const auto model = test::random_vector(rng, 6, 0.5);
  const std::size_t N = 12;
  const auto xs = test::random_vector(rng, 1500), es = test::random_vector(rng, 1500);

  // WC with alpha 0 against FxLMS
  NodeController fx(Algorithm::decentralized_fxlms, {model}, params(N, 0.01));
  NodeController wc0(Algorithm::wcfxlms, {model}, params(N, 0.01, 0.0));
  // leaky against WC with the centre frozen at zero
  NodeController lk(Algorithm::leaky, {model}, params(N, 0.01, 3.0));
  NodeController wcz(Algorithm::wcfxlms, {model}, params(N, 0.01, 3.0));
  // SB with a window that never closes against WC with a fixed centre
  const auto c0 = test::random_vector(rng, N, 0.1);
  NodeController sb(Algorithm::sb_wcfxlms, {model}, params(N, 0.01, 3.0, 1u << 30));
  NodeController wcc(Algorithm::wcfxlms, {model}, params(N, 0.01, 3.0));
  sb.set_center(c0);
  wcc.set_center(c0);
  // SB with alpha 0 and boosting off against FxLMS
  NodeController sb0(Algorithm::sb_wcfxlms, {model}, params(N, 0.01, 0.0, 0));

  for (std::size_t n = 0; n < xs.size(); ++n) {
    const double y = fx.output(xs[n]);
    CHECK(wc0.output(xs[n]) == y);
    lk.output(xs[n]);
    wcz.output(xs[n]);
    CHECK(sb.output(xs[n]) == wcc.output(xs[n]));
    CHECK(sb0.output(xs[n]) == y);
    fx.fxlms_update(es[n]);
    wc0.wcfxlms_update(es[n]);
    lk.leaky_fxlms_update(es[n]);
    wcz.wcfxlms_update(es[n]);
    CHECK_FALSE(sb.adapt(es[n], n).has_value());
    wcc.wcfxlms_update(es[n]);
    sb0.adapt(es[n], n);
  }
  CHECK(to_vec(wc0.weights()) == to_vec(fx.weights()));
  CHECK(to_vec(lk.weights()) == to_vec(wcz.weights()));
  CHECK(to_vec(sb.weights()) == to_vec(wcc.weights()));
  CHECK(to_vec(sb0.weights()) == to_vec(fx.weights()));
  CHECK(sb.boost_count() == 0);
}

TEST_CASE("penalty term equals the finite-difference gradient of the proximal penalty") {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> ua(0.1, 50.0);
  const double mu = 1e-3;
  const std::size_t N = 5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double alpha = ua(rng);
    const auto w = test::random_vector(rng, N), center = test::random_vector(rng, N);
    NodeController c(Algorithm::wcfxlms, {{1.0}}, params(N, mu, alpha));
    c.set_weights(w);
    c.set_center(center);
    c.output(0.0);
    c.wcfxlms_update(1.0);  // x' = 0 isolates the penalty term
    const auto penalty = [&](const std::vector<double>& v) {
      double s = 0.0;
      for (std::size_t i = 0; i < N; ++i) s += (center[i] - v[i]) * (center[i] - v[i]);
      return alpha * s;
    };
    for (std::size_t i = 0; i < N; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(w[i]));
      auto wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      const double grad = (penalty(wp) - penalty(wm)) / (2 * h);
      const double increment = c.weights()[i] - w[i];
      const double want = -(mu / 2.0) * grad;
      worst = std::max(worst, std::abs(increment - want) / std::max(std::abs(want), 1e-12));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("FxLMS increment is the exact gradient step for a memoryless plant") {
  std::mt19937_64 rng(66);
  const double g = 0.8, mu = 0.01;
  const std::size_t N = 6;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto w = test::random_vector(rng, N);
    const auto xs = test::random_vector(rng, N);
    const double d = test::random_vector(rng, 1)[0];
    NodeController c(Algorithm::decentralized_fxlms, {{g}}, params(N, mu));
    c.set_weights(w);
    for (double x : xs) c.output(x);  // last output uses the full history
    const auto hist = c.filtered_reference();  // g * x, newest first
    const auto err = [&](const std::vector<double>& v) {
      double y = 0.0;
      for (std::size_t i = 0; i < N; ++i) y += v[i] * xs[N - 1 - i];
      const double e = d - g * y;
      return e * e;
    };
    double y = 0.0;
    for (std::size_t i = 0; i < N; ++i) y += w[i] * xs[N - 1 - i];
    const double e = d - g * y;
    c.fxlms_update(e);
    for (std::size_t i = 0; i < N; ++i) {
      CHECK(hist[i] == doctest::Approx(g * xs[N - 1 - i]));
      const double h = 1e-5;
      auto wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      const double grad = (err(wp) - err(wm)) / (2 * h);
      const double want = -(mu / 2.0) * grad;
      const double increment = c.weights()[i] - w[i];
      worst = std::max(worst, std::abs(increment - want) / std::max(std::abs(want), 1e-9));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("self_boost_tick") {
  SUBCASE("first window always boosts and records the closing sample") {
    NodeController c(Algorithm::sb_wcfxlms, {{1.0}}, params(2, 0.1, 1.0, 4));
    c.set_weights(std::vector<double>{0.25, -0.5});
    for (std::size_t n = 0; n < 3; ++n) CHECK_FALSE(c.self_boost_tick(1e3, n).has_value());
    const auto ev = c.self_boost_tick(1e3, 3);
    REQUIRE(ev.has_value());
    CHECK(ev->sample == 3);
    CHECK(std::isinf(ev->old_eta_min));
    CHECK(ev->new_eta_min == doctest::Approx(60.0));
    CHECK(to_vec(c.center()) == std::vector<double>{0.25, -0.5});
    CHECK(c.eta_min() == ev->new_eta_min);
    CHECK(c.boost_count() == 1);
  }
  SUBCASE("equal window mean does not boost") {
    NodeController c(Algorithm::sb_wcfxlms, {{1.0}}, params(1, 0.1, 1.0, 2));
    c.self_boost_tick(0.5, 0);
    REQUIRE(c.self_boost_tick(0.5, 1).has_value());
    const auto version = c.center_version();
    c.set_weights(std::vector<double>{9.0});
    c.self_boost_tick(0.5, 2);
    CHECK_FALSE(c.self_boost_tick(0.5, 3).has_value());
    CHECK(c.center_version() == version);
    CHECK(c.center()[0] == 0.0);
    // a strictly better window boosts again
    c.self_boost_tick(0.25, 4);
    CHECK(c.self_boost_tick(0.25, 5).has_value());
    CHECK(c.center()[0] == 9.0);
  }
  SUBCASE("constant 0.1 over one second is -20 dB") {
    NodeController c(Algorithm::sb_wcfxlms, {{1.0}}, params(1, 0.1, 1.0, 16000));
    std::optional<BoostEvent> ev;
    for (std::size_t n = 0; n < 16000; ++n) ev = c.self_boost_tick(0.1, n);
    REQUIRE(ev.has_value());
    CHECK(ev->sample == 15999);
    CHECK(ev->new_eta_min == doctest::Approx(-20.0).epsilon(1e-12));
  }
  SUBCASE("disabled outside the self-boosted algorithm") {
    NodeController c(Algorithm::wcfxlms, {{1.0}}, params(1, 0.1, 1.0, 2));
    for (std::size_t n = 0; n < 10; ++n) CHECK_FALSE(c.self_boost_tick(1.0, n).has_value());
  }
}

TEST_CASE("eta_min is non-increasing and the centre changes only with events") {
  std::mt19937_64 rng(12);
  NodeController c(Algorithm::sb_wcfxlms, {{0.0, 0.9}}, params(8, 0.01, 5.0, 100));
  double last = std::numeric_limits<double>::infinity();
  auto version = c.center_version();
  for (std::size_t n = 0; n < 5000; ++n) {
    c.output(std::sin(0.3 * n));
    const double e = test::random_vector(rng, 1, 1.0 / (1.0 + n / 500.0))[0];
    const auto ev = c.adapt(e, n);
    CHECK(c.eta_min() <= last);
    if (ev) {
      CHECK((n + 1) % 100 == 0);
      CHECK(ev->old_eta_min == last);
    }
    CHECK((c.center_version() != version) == ev.has_value());
    version = c.center_version();
    last = c.eta_min();
  }
  CHECK(c.boost_count() >= 2);
}

TEST_CASE("diverged node mutes and stops adapting") {
  NodeController c(Algorithm::decentralized_fxlms, {{1.0}}, params(1, 1.0));
  c.output(1e300);
  c.fxlms_update(1e300);
  CHECK(c.diverged());
  const auto w = to_vec(c.weights());
  CHECK(c.output(1.0) == 0.0);
  c.fxlms_update(1.0);
  CHECK(to_vec(c.weights()) == w);
}

TEST_CASE("constructor rejects invalid parameters") {
  CHECK_THROWS(NodeController(Algorithm::centralized, {{1.0}}, params(2, 0.1)));
  CHECK_THROWS(NodeController(Algorithm::wcfxlms, {{1.0}}, params(0, 0.1)));
  CHECK_THROWS(NodeController(Algorithm::wcfxlms, {{}}, params(2, 0.1)));
  CHECK_THROWS(NodeController(Algorithm::wcfxlms, {{1.0}}, params(2, -0.1)));
  CHECK_THROWS(NodeController(Algorithm::wcfxlms, {{1.0}}, params(2, 0.1, -1.0)));
}

namespace {

PathSet coupled_paths(std::size_t K, double coupling, std::uint64_t seed) {
  PathSynthParams sp;
  sp.nodes = K;
  sp.primary_len = 48;
  sp.secondary_len = 32;
  sp.coupling_gain = coupling;
  sp.seed = seed;
  auto ps = synth_paths(sp);
  make_estimates(ps, 24, 0.0, 1);
  return ps;
}

}  // namespace

TEST_CASE("centralized with one node equals single-channel FxLMS") {
  const auto ps = coupled_paths(1, 0.0, 4);
  CentralizedController cc(ps, 16, {0.01}, false);
  NodeController nc(Algorithm::decentralized_fxlms, ps.estimate(0), params(16, 0.01));
  std::mt19937_64 rng(9);
  const auto xs = test::random_vector(rng, 1200), es = test::random_vector(rng, 1200);
  double y[1];
  for (std::size_t n = 0; n < xs.size(); ++n) {
    cc.control_outputs(std::span<const double>(&xs[n], 1), y);
    CHECK(y[0] == nc.output(xs[n]));
    cc.update(std::span<const double>(&es[n], 1));
    nc.fxlms_update(es[n]);
  }
  CHECK(to_vec(cc.weights(0)) == to_vec(nc.weights()));
}

TEST_CASE("centralized with a diagonal model matrix equals decentralized nodes") {
  const std::size_t K = 3;
  const auto ps = coupled_paths(K, 0.0, 6);
  const std::vector<double> mu{0.01, 0.02, 0.005};
  CentralizedController cc(ps, 10, mu, false);
  std::vector<NodeController> nodes;
  for (std::size_t k = 0; k < K; ++k)
    nodes.emplace_back(Algorithm::decentralized_fxlms, ps.estimate(k), params(10, mu[k]));
  std::mt19937_64 rng(10);
  std::vector<double> y(K);
  for (int n = 0; n < 1000; ++n) {
    const auto x = test::random_vector(rng, K), e = test::random_vector(rng, K);
    cc.control_outputs(x, y);
    for (std::size_t k = 0; k < K; ++k) CHECK(y[k] == nodes[k].output(x[k]));
    cc.update(e);
    for (std::size_t k = 0; k < K; ++k) nodes[k].fxlms_update(e[k]);
  }
  for (std::size_t k = 0; k < K; ++k) CHECK(to_vec(cc.weights(k)) == to_vec(nodes[k].weights()));
}

TEST_CASE("centralized two-node one-step hand computation") {
  PathSet ps;
  ps.nodes = 2;
  ps.primary = {{{1.0}}, {{1.0}}};
  ps.secondary = {{{{1.0}}, {{0.5}}}, {{{0.25}}, {{1.0}}}};
  ps.estimates = ps.secondary;
  const std::vector<double> x{1.0, 2.0}, e{0.5, -1.0};
  std::vector<double> y(2);

  CentralizedController cc(ps, 1, {0.1, 0.2}, false);
  cc.control_outputs(x, y);
  cc.update(e);
  // w_1 += 0.1 * (1*1*0.5 + 0.25*1*(-1));  w_2 += 0.2 * (0.5*2*0.5 + 1*2*(-1))
  CHECK(cc.weights(0)[0] == doctest::Approx(0.025));
  CHECK(cc.weights(1)[0] == doctest::Approx(-0.3));

  CentralizedController col(ps, 1, {0.1, 0.2}, true);
  REQUIRE(col.refs_per_source() == 2);
  col.control_outputs(x, y);
  col.update(e);
  // source m, sub-filter j: w_mj += mu_m * sum_k s_km x_j e_k
  CHECK(col.weights(0, 0)[0] == doctest::Approx(0.1 * (1.0 * 1 * 0.5 + 0.25 * 1 * -1.0)));
  CHECK(col.weights(0, 1)[0] == doctest::Approx(0.1 * (1.0 * 2 * 0.5 + 0.25 * 2 * -1.0)));
  CHECK(col.weights(1, 0)[0] == doctest::Approx(0.2 * (0.5 * 1 * 0.5 + 1.0 * 1 * -1.0)));
  CHECK(col.weights(1, 1)[0] == doctest::Approx(0.2 * (0.5 * 2 * 0.5 + 1.0 * 2 * -1.0)));
  // the next output sums both sub-filters
  col.control_outputs(x, y);
  CHECK(y[0] == doctest::Approx(col.weights(0, 0)[0] * 1.0 + col.weights(0, 1)[0] * 2.0));
}

TEST_CASE("centralized requires the full estimate matrix") {
  auto ps = coupled_paths(2, 0.5, 1);
  ps.estimates = {{ps.estimate(0)}, {ps.estimate(1)}};
  CHECK_THROWS(CentralizedController(ps, 8, {0.1, 0.1}, false));
}

namespace {

// Closed loop with per-node SB controllers; returns a hash of node 0's weight trajectory.
std::uint64_t node0_hash(const PathSet& ps, const std::vector<double>& mu, const std::vector<double>& alpha,
                         bool shuffle) {
  const std::size_t K = ps.nodes;
  std::vector<NodeController> nodes;
  for (std::size_t k = 0; k < K; ++k)
    nodes.emplace_back(Algorithm::sb_wcfxlms, ps.estimate(k), params(16, mu[k], alpha[k], 200));
  Plant plant(ps);
  std::mt19937_64 rng(42), order_rng(7);
  std::vector<double> x(K), y(K), d(K), e(K);
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t n = 0; n < 2000; ++n) {
    for (std::size_t k = 0; k < K; ++k) x[k] = std::sin(0.05 * (k + 1) * n) + 0.1 * test::random_vector(rng, 1)[0];
    if (shuffle) std::shuffle(order.begin(), order.end(), order_rng);
    for (auto k : order) y[k] = nodes[k].output(x[k]);
    plant.step(x, y, d, e);
    if (shuffle) std::shuffle(order.begin(), order.end(), order_rng);
    for (auto k : order) nodes[k].adapt(e[k], n);
    h = mix(h, nodes[0].weights());
    h = mix(h, nodes[0].center());
  }
  return h;
}

}  // namespace

TEST_CASE("node state is independent of other nodes' parameters when decoupled") {
  const auto ps = coupled_paths(3, 0.0, 12);
  const auto base = node0_hash(ps, {0.01, 0.01, 0.01}, {5.0, 5.0, 5.0}, false);
  CHECK(node0_hash(ps, {0.01, 0.05, 0.001}, {5.0, 0.0, 100.0}, false) == base);
  CHECK(node0_hash(ps, {0.01, 0.0, 0.3}, {5.0, 7.0, 1.0}, false) == base);
  // and it does depend on its own parameters
  CHECK(node0_hash(ps, {0.02, 0.01, 0.01}, {5.0, 5.0, 5.0}, false) != base);
}

TEST_CASE("node evaluation order does not change a coupled run") {
  const auto ps = coupled_paths(4, 0.7, 13);
  const std::vector<double> mu{0.002, 0.003, 0.002, 0.001}, alpha{10.0, 20.0, 10.0, 5.0};
  CHECK(node0_hash(ps, mu, alpha, true) == node0_hash(ps, mu, alpha, false));
}
