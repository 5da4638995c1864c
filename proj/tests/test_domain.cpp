#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "support.hpp"
#include "switchcert/barrier.hpp"
#include "switchcert/config.hpp"
#include "switchcert/errors.hpp"
#include "switchcert/external_flow.hpp"
#include "switchcert/flow.hpp"
#include "switchcert/keyvalue.hpp"

using namespace switchcert;
using testsupport::vec;
using Catch::Approx;

namespace {

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

// Independent RK4 for the oracle below (one step, no substeps).
Vec lv_mode1(const Vec& x, double u) {
  Vec d(2);
  d << x[0] - x[0] * x[1] + u, -x[1] + x[0] * x[1];
  return d;
}

Vec lv_rk4_oracle(Vec x, double u, double dt, int steps) {
  const double h = dt / steps;
  for (int i = 0; i < steps; ++i) {
    const Vec k1 = lv_mode1(x, u);
    const Vec k2 = lv_mode1(x + 0.5 * h * k1, u);
    const Vec k3 = lv_mode1(x + 0.5 * h * k2, u);
    const Vec k4 = lv_mode1(x + h * k3, u);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

}  // namespace

TEST_CASE("key/value documents parse sections, lists and comments", "[domain]") {
  const auto doc = KeyValueDocument::parse(
      "# top\n[a]\nx = 1.5\nlist = [1, 2, 3]\nname = \"hi\"\nflag = true\n[modes.1]\nk = 2 # tail\n");
  CHECK(doc.get_double("a", "x") == 1.5);
  CHECK(doc.get_list("a", "list") == std::vector<double>{1, 2, 3});
  CHECK(doc.get_string("a", "name") == "hi");
  CHECK(doc.get_bool("a", "flag", false));
  CHECK(doc.get_int("modes.1", "k") == 2);
  CHECK(doc.get_double("a", "missing", 7.0) == 7.0);
  CHECK_THROWS_AS(doc.get_double("a", "missing"), ConfigError);
  CHECK_THROWS_AS(KeyValueDocument::parse("[a]\nx = 1\nx = 2\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueDocument::parse("[a]\nnot a pair\n"), ConfigError);
  CHECK_THROWS_AS(doc.get_double("a", "name"), ConfigError);
}

TEST_CASE("compact boxes enforce lo < hi", "[domain]") {
  const CompactBox b(vec({1, 1}), vec({4, 4}));
  CHECK(b.contains(vec({1, 4})));
  CHECK_FALSE(b.contains(vec({0.999, 2})));
  CHECK(b.max_distance_from(vec({1, 1})) == Approx(std::sqrt(18.0)));
  const CompactBox big = b.inflated(2.0);
  CHECK(big.lo()[0] == Approx(-0.5));
  CHECK(big.hi()[1] == Approx(5.5));
  CHECK_THROWS_AS(CompactBox(vec({0, 1}), vec({1, 1})), ValidationError);
  CHECK_THROWS_AS(CompactBox(vec({0}), vec({1, 2})), ValidationError);
}

TEST_CASE("Lotka-Volterra config parses into a 2-D two-mode spec", "[domain]") {
  const Config cfg = load_config(testsupport::source_path("configs/lotka_volterra.ini"));
  CHECK(cfg.system.n == 2);
  CHECK(cfg.system.m == 1);
  CHECK(cfg.system.r == 1);
  CHECK(cfg.system.mode_count() == 2);
  CHECK(cfg.system.state_box.lo() == vec({1, 1}));
  CHECK(cfg.system.state_box.hi() == vec({4, 4}));
  CHECK(cfg.system.reference == vec({1, 1}));
  CHECK(cfg.model.kind == SystemKind::LotkaVolterra);
  CHECK(cfg.hash.size() == 16);
}

TEST_CASE("config validation rejects bad inputs", "[domain]") {
  const std::string base = testsupport::linear_config_text();
  CHECK_NOTHROW(parse_config(base));
  // degenerate box
  CHECK_THROWS_AS(parse_config(replace(base, "state_hi = [1.0]", "state_hi = [-1.0]")),
                  ValidationError);
  // k1 >= k2 is jointly infeasible
  CHECK_THROWS_AS(
      parse_config(replace(replace(base, "k1 = 0.05", "k1 = 2.0"), "k2 = 5.0", "k2 = 1.0")),
      ValidationError);
  CHECK_THROWS_AS(parse_config(replace(base, "kind = linear", "kind = pendulum")), ConfigError);
  CHECK_THROWS_AS(parse_config(replace(base, "M_f = 3.1\n", "")), ConfigError);
  CHECK_THROWS_AS(parse_config(replace(base, "M_f = 3.1", "M_f = -1")), ValidationError);
  CHECK_THROWS_AS(parse_config(replace(base, "hinge_margin = 0.01", "hinge_margin = -1")),
                  ValidationError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("config hash tracks the byte stream", "[domain]") {
  const std::string base = testsupport::linear_config_text();
  CHECK(parse_config(base).hash == parse_config(base).hash);
  CHECK(parse_config(base).hash != parse_config(base + "\n# edit\n").hash);
  CHECK(content_hash("") == "cbf29ce484222325");  // FNV-1a offset basis
}

TEST_CASE("product barrier is zero on the boundary and positive inside", "[domain]") {
  const ProductBarrier h(CompactBox(vec({1, 1}), vec({4, 4})));
  CHECK(h.value(vec({2.5, 2.5})) == Approx(1.0));
  CHECK(h.value(vec({1, 3})) == 0.0);
  CHECK(h.value(vec({2, 2})) > 0.0);
  CHECK(h.value(vec({0.5, 2})) < 0.0);
  const Vec x = vec({1.7, 3.2});
  const Vec g = h.gradient(x);
  for (int i = 0; i < 2; ++i) {
    Vec e = Vec::Zero(2);
    e[i] = 1e-6;
    CHECK(g[i] == Approx((h.value(x + e) - h.value(x - e)) / 2e-6).epsilon(1e-6));
  }
  // interval bounds dominate sampled gradient norms
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(1.0, 4.0);
  for (int k = 0; k < 2000; ++k) {
    const Vec y = vec({u(rng), u(rng)});
    CHECK(h.gradient(y).norm() <= h.gradient_bound() + 1e-12);
  }
}

TEST_CASE("Lotka-Volterra vector fields", "[domain]") {
  auto flow = builtin_lotka_volterra(1, 1, 1, 1);
  const Vec w = Vec::Zero(1);
  const Vec f1 = (*flow->vector_field(0))(vec({2, 2}), vec({0}), w);
  CHECK(f1 == vec({-2, 2}));
  const Vec f2 = (*flow->vector_field(1))(vec({2, 2}), vec({1}), w);
  CHECK(f2 == vec({-2, 3}));
  for (std::size_t p = 0; p < 2; ++p) {
    CHECK((*flow->vector_field(p))(vec({1, 1}), vec({0}), w).norm() == 0.0);
  }
  CHECK_THROWS_AS(builtin_lotka_volterra(1, 0, 1, 1), ValidationError);
}

TEST_CASE("configured M_f bounds the Lotka-Volterra field over X x U", "[domain]") {
  const Config cfg = load_config(testsupport::source_path("configs/lotka_volterra.ini"));
  auto flow = make_flow(cfg);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(1.0, 4.0), uu(-2.0, 2.0);
  for (std::size_t p = 0; p < 2; ++p) {
    double worst = 0.0;
    for (int k = 0; k < 20000; ++k) {
      const Vec f = (*flow->vector_field(p))(vec({ux(rng), ux(rng)}), vec({uu(rng)}), Vec::Zero(1));
      worst = std::max(worst, f.norm());
    }
    CHECK(worst <= cfg.system.constants[p].bound_f);
  }
}

TEST_CASE("built-in flow step matches an RK4 oracle and is deterministic", "[domain]") {
  auto flow = builtin_lotka_volterra(1, 1, 1, 1, 1e-3);
  const Vec x = vec({2, 2});
  const Vec next = flow->step(0, x, vec({0}), Vec::Zero(1), 0.01);
  const Vec oracle = lv_rk4_oracle(x, 0.0, 0.01, 10);
  CHECK(next[0] == Approx(oracle[0]).margin(1e-12));
  CHECK(next[1] == Approx(oracle[1]).margin(1e-12));
  // second-order Taylor oracle: x'' = (-2, -2) at (2, 2)
  CHECK(next[0] == Approx(2.0 - 0.02 - 0.0001).margin(1e-6));
  CHECK(next[1] == Approx(2.0 + 0.02 - 0.0001).margin(1e-6));
  CHECK(flow->step(0, x, vec({0}), Vec::Zero(1), 0.01) == next);
  CHECK_THROWS_AS(flow->step(0, x, vec({0}), Vec::Zero(1), 0.0), ValidationError);
  CHECK_THROWS_AS(flow->step(2, x, vec({0}), Vec::Zero(1), 0.01), ValidationError);
}

TEST_CASE("external process flow speaks the line protocol", "[domain]") {
  const std::string server = SWITCHCERT_LV_SERVER;
  ExternalProcessFlow ext(server, 2, 1, 2);
  auto builtin = builtin_lotka_volterra(1, 1, 1, 1);
  const Vec y = ext.step(0, vec({2, 2}), vec({0}), Vec::Zero(1), 0.01);
  const Vec oracle = lv_rk4_oracle(vec({2, 2}), 0.0, 0.01, 10);
  CHECK(std::abs(y[0] - oracle[0]) <= 1e-6);
  CHECK(std::abs(y[1] - oracle[1]) <= 1e-6);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ux(1.0, 4.0), uu(-2.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    const std::size_t p = static_cast<std::size_t>(k % 2);
    const Vec x = vec({ux(rng), ux(rng)});
    const Vec u = vec({uu(rng)});
    const Vec a = ext.step(p, x, u, Vec::Zero(1), 0.01);
    const Vec b = builtin->step(p, x, u, Vec::Zero(1), 0.01);
    CHECK((a - b).norm() <= 1e-6 * b.norm());
  }
  CHECK_THROWS_AS(ext.step(0, vec({2, 2}), vec({0}), Vec::Zero(1), 0.0), ValidationError);
}

TEST_CASE("external protocol formatting and response parsing", "[domain]") {
  CHECK(ExternalProcessFlow::format_request(1, vec({2.0, 2.0}), vec({0.0}), 0.01) ==
        "STEP 1 2 2 0 0.01");
  CHECK(ExternalProcessFlow::parse_response("1.5 -2", 2) == vec({1.5, -2}));
  CHECK_THROWS_AS(ExternalProcessFlow::parse_response("NaN NaN", 2), NumericError);
  CHECK_THROWS_AS(ExternalProcessFlow::parse_response("1.0", 2), ProtocolError);
  CHECK_THROWS_AS(ExternalProcessFlow::parse_response("1.0 abc", 2), ProtocolError);
  CHECK_THROWS_AS(ExternalProcessFlow::parse_response("ERROR boom", 2), ProtocolError);
}

TEST_CASE("external process failures surface as typed errors", "[domain]") {
  SECTION("non-finite response") {
    ExternalProcessFlow ext("echo 'HELLO 2 1 2'; while read l; do echo 'NaN NaN'; done", 2, 1, 2);
    CHECK_THROWS_AS(ext.step(0, vec({2, 2}), vec({0}), Vec::Zero(1), 0.01), NumericError);
  }
  SECTION("handshake mismatch") {
    CHECK_THROWS_AS(ExternalProcessFlow("echo 'HELLO 3 1 2'; cat >/dev/null", 2, 1, 2),
                    ProtocolError);
  }
  SECTION("process exits") {
    ExternalProcessFlow ext("echo 'HELLO 2 1 2'; read l; exit 0", 2, 1, 2);
    CHECK_THROWS_AS(ext.step(0, vec({2, 2}), vec({0}), Vec::Zero(1), 0.01), TransportError);
  }
  SECTION("timeout") {
    ExternalProcessFlow ext("echo 'HELLO 2 1 2'; sleep 5", 2, 1, 2, 0.2);
    CHECK_THROWS_AS(ext.step(0, vec({2, 2}), vec({0}), Vec::Zero(1), 0.01), TransportError);
  }
}
