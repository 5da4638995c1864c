#include <catch_amalgamated.hpp>

#include <cmath>

#include "support.hpp"
#include "switchcert/bundle.hpp"
#include "switchcert/checkpoint.hpp"
#include "switchcert/errors.hpp"
#include "switchcert/lipschitz.hpp"
#include "switchcert/mlp.hpp"
#include "switchcert/train.hpp"

using namespace switchcert;
using testsupport::vec;
using Catch::Approx;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("zero network outputs zero", "[net]") {
  const Mlp net({3, 5, 2}, Activation::Tanh);
  CHECK(net.forward(vec({1, -2, 3})).isZero());
  CHECK(Mlp({2, 4, 1}, Activation::Tanh).input_gradient(vec({0.3, 0.1})).isZero());
}

TEST_CASE("closed-form one-hidden-unit network", "[net]") {
  Mlp net({1, 1, 1}, Activation::Tanh);
  net.weights()[0](0, 0) = 2.0;
  net.weights()[1](0, 0) = 1.0;
  CHECK(net.forward_scalar(vec({0.5})) == Approx(0.76159).margin(1e-5));
  CHECK(net.input_gradient(vec({0.5}))[0] == Approx(0.83995).margin(1e-5));
  // affine output: zero final weights give the output bias
  Mlp ctrl({2, 3, 1}, Activation::Tanh);
  ctrl.biases()[1][0] = 0.7;
  CHECK(ctrl.forward_scalar(vec({5, -5})) == 0.7);
}

TEST_CASE("output-bias gradient and zero adjoint", "[net]") {
  Mlp net({1, 1}, Activation::Tanh);
  Mlp::Tape tape;
  net.forward(vec({0}), tape);
  MlpGradient g = net.zero_gradient();
  net.backward(tape, vec({1}), &g);
  CHECK(g.biases[0][0] == 1.0);

  std::mt19937_64 rng(1);
  const Mlp r = testsupport::random_net({3, 8, 2}, Activation::Softplus, rng);
  Mlp::Tape t2;
  r.forward(vec({0.1, 0.2, 0.3}), t2);
  MlpGradient z = r.zero_gradient();
  r.backward(t2, Vec::Zero(2), &z);
  CHECK(z.squared_norm() == 0.0);
}

TEST_CASE("activation derivatives and bounds", "[net]") {
  for (Activation a : {Activation::Tanh, Activation::Softplus, Activation::Sigmoid}) {
    for (double z : {-2.0, -0.3, 0.0, 0.8, 3.0}) {
      const double fd = (activate(a, z + 1e-6) - activate(a, z - 1e-6)) / 2e-6;
      CHECK(activate_derivative(a, z) == Approx(fd).epsilon(1e-7));
      CHECK(std::abs(activate_derivative(a, z)) <= activation_bounds(a).slope);
    }
    CHECK(activation_from_string(to_string(a)) == a);
  }
  CHECK_THROWS_AS(activation_from_string("relu"), ValidationError);
}

TEST_CASE("input and parameter gradients match central differences", "[net]") {
  std::mt19937_64 rng(2024);
  const std::vector<std::vector<int>> shapes = {{1, 4, 1}, {2, 16, 16, 1}, {3, 32, 32, 1}, {2, 8, 1}};
  const double h = 1e-5;
  for (int trial = 0; trial < 12; ++trial) {
    const auto& shape = shapes[static_cast<std::size_t>(trial) % shapes.size()];
    const Activation act = trial % 3 == 0 ? Activation::Softplus : Activation::Tanh;
    Mlp net = testsupport::random_net(shape, act, rng);
    Vec x(shape.front());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::normal_distribution<double>()(rng);

    const Vec gx = net.input_gradient(x);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      CHECK(rel_err(gx[i], (net.forward_scalar(xp) - net.forward_scalar(xm)) / (2 * h)) <= 1e-6);
    }

    Mlp::Tape tape;
    net.forward(x, tape);
    MlpGradient g = net.zero_gradient();
    net.backward(tape, vec({1.0}), &g);
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
      for (Eigen::Index i = 0; i < net.weights()[k].size(); i += 7) {
        double& p = net.weights()[k].data()[i];
        const double o = p;
        p = o + h;
        const double fp = net.forward_scalar(x);
        p = o - h;
        const double fm = net.forward_scalar(x);
        p = o;
        CHECK(rel_err(g.weights[k].data()[i], (fp - fm) / (2 * h)) <= 1e-4);
      }
      for (Eigen::Index i = 0; i < net.biases()[k].size(); i += 5) {
        double& p = net.biases()[k][i];
        const double o = p;
        p = o + h;
        const double fp = net.forward_scalar(x);
        p = o - h;
        const double fm = net.forward_scalar(x);
        p = o;
        CHECK(rel_err(g.biases[k][i], (fp - fm) / (2 * h)) <= 1e-4);
      }
    }
  }
}

TEST_CASE("spectral norms and Lipschitz certificates", "[net]") {
  Mat w(2, 2);
  w << 3, 0, 0, 1;
  CHECK(spectral_norm(w).value == Approx(3.0).epsilon(1e-6));
  CHECK(spectral_norm(w).value >= 3.0);

  Mlp one({1, 1}, Activation::Tanh);
  one.weights()[0](0, 0) = 2.0;
  CHECK(certify_lipschitz(one).function_bound == Approx(2.0));

  Mlp two({2, 2, 1}, Activation::Tanh);
  two.weights()[0] << 2, 0, 0, 1;
  two.weights()[1] << 3, 0;
  CHECK(certify_lipschitz(two).function_bound == Approx(6.0).epsilon(1e-6));
  CHECK(certify_lipschitz(two).function_bound >= 6.0);
}

TEST_CASE("certified bounds dominate sampled Lipschitz ratios", "[net]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const Mlp net = testsupport::random_net({2, 16, 16, 1}, Activation::Tanh, rng, 1.5);
  const LipschitzCertificate cert = certify_lipschitz(net);
  double fn = 0.0, jac = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const Vec x = vec({u(rng), u(rng)});
    const Vec y = vec({u(rng), u(rng)});
    const double d = (x - y).norm();
    fn = std::max(fn, std::abs(net.forward_scalar(x) - net.forward_scalar(y)) / d);
    jac = std::max(jac, (net.input_gradient(x) - net.input_gradient(y)).norm() / d);
  }
  CHECK(fn <= cert.function_bound);
  CHECK(jac <= cert.jacobian_bound);
}

TEST_CASE("Lipschitz penalty is a hinge with correct gradient", "[net]") {
  CHECK(lipschitz_penalty({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}}) == 0.0);
  CHECK(lipschitz_penalty({{3.0, 2.0}}) > 0.0);
  CHECK(lipschitz_penalty({{4.0, 2.0}}) > lipschitz_penalty({{3.0, 2.0}}));
  CHECK_THROWS_AS(lipschitz_penalty({{1.0, 0.0}}), ValidationError);

  std::mt19937_64 rng(8);
  Mlp net = testsupport::random_net({2, 6, 1}, Activation::Tanh, rng, 2.0);
  const auto cert = certify_lipschitz(net);
  CHECK(lipschitz_penalty(net, cert.function_bound + 1, cert.jacobian_bound + 1, 1, 1, 1, nullptr) == 0.0);

  const double tfn = 0.5 * cert.function_bound, tjac = 0.5 * cert.jacobian_bound;
  MlpGradient g = net.zero_gradient();
  lipschitz_penalty(net, tfn, tjac, 1.0, 0.5, 1.0, &g);
  const double h = 1e-6;
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    for (Eigen::Index i = 0; i < net.weights()[k].size(); i += 3) {
      double& p = net.weights()[k].data()[i];
      const double o = p;
      p = o + h;
      const double fp = lipschitz_penalty(net, tfn, tjac, 1.0, 0.5, 1.0, nullptr);
      p = o - h;
      const double fm = lipschitz_penalty(net, tfn, tjac, 1.0, 0.5, 1.0, nullptr);
      p = o;
      CHECK(rel_err(g.weights[k].data()[i], (fp - fm) / (2 * h)) <= 1e-4);
    }
  }
}

TEST_CASE("penalty descent drives the spectral product below target", "[net]") {
  std::mt19937_64 rng(13);
  Mlp net = testsupport::random_net({2, 16, 1}, Activation::Tanh, rng, 3.0);
  const double target = 1.0;
  REQUIRE(certify_lipschitz(net).function_bound > 2.0 * target);
  Adam opt(net, 0.01, 0.9, 0.999, 1e-8);
  for (int it = 0; it < 2000 && lipschitz_penalty(net, target, std::nullopt, 1, 0, 1, nullptr) > 0; ++it) {
    MlpGradient g = net.zero_gradient();
    lipschitz_penalty(net, target, std::nullopt, 1.0, 0.0, 1.0, &g);
    opt.step(net, g);
  }
  CHECK(certify_lipschitz(net).function_bound <= target);
}

TEST_CASE("controller saturation stays inside the input box", "[net]") {
  std::mt19937_64 rng(3);
  const Mlp raw = testsupport::random_net({3, 8, 1}, Activation::Tanh, rng, 4.0);
  const Controller c(raw, vec({1, 1}), CompactBox(vec({-2}), vec({2})));
  const Controller free(raw, vec({1, 1}), std::nullopt);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int k = 0; k < 500; ++k) {
    const Vec x = vec({u(rng), u(rng)});
    const Vec w = vec({u(rng)});
    const double v = c.control(x, w)[0];
    CHECK(v > -2.0);
    CHECK(v < 2.0);
    CHECK(free.control(x, w)[0] == raw.forward_scalar(vec({x[0] - 1, x[1] - 1, w[0]})));
  }
}

TEST_CASE("bundle checkpoint round-trip is bit-exact", "[net]") {
  const Config cfg = parse_config(testsupport::linear_config_text(2));
  std::mt19937_64 rng(42);
  const CertificateBundle b = initialize_bundle(cfg, rng);
  const auto dir = testsupport::scratch_dir("checkpoint");
  const std::string path = (dir / "bundle.json").string();
  save_bundle(b, path);
  const CertificateBundle c = load_bundle(path);
  REQUIRE(c.mode_count() == 2);
  CHECK(c.config_hash == b.config_hash);
  for (std::size_t p = 0; p < 2; ++p) {
    CHECK(c.lyapunov[p] == b.lyapunov[p]);
    CHECK(c.controllers[p].net() == b.controllers[p].net());
    for (double x : {-0.9, -0.123456789, 0.5, 0.77}) {
      CHECK(c.lyapunov_value(p, vec({x})) == b.lyapunov_value(p, vec({x})));
      CHECK(c.controllers[p].control(vec({x}), vec({0.05})) ==
            b.controllers[p].control(vec({x}), vec({0.05})));
    }
  }

  testsupport::write_file(dir / "corrupt.json", "{\"format\": \"switchcert-bundle\", \"version\": 1");
  CHECK_THROWS_AS(load_bundle((dir / "corrupt.json").string()), ConfigError);
  testsupport::write_file(dir / "shape.json", testsupport::read_file(path).replace(
                                                  testsupport::read_file(path).find("\"sizes\""), 7,
                                                  "\"sizez\""));
  CHECK_THROWS_AS(load_bundle((dir / "shape.json").string()), ConfigError);
}

TEST_CASE("initialized bundles are centred and sized from the config", "[net]") {
  const Config cfg = parse_config(testsupport::linear_config_text(2));
  std::mt19937_64 rng(1);
  const CertificateBundle b = initialize_bundle(cfg, rng);
  CHECK(b.lyapunov.size() == 2);
  CHECK(b.lyapunov[0].sizes() == std::vector<int>{1, 8, 1});
  CHECK(b.controllers[0].net().sizes() == std::vector<int>{2, 8, 1});
  CHECK(std::abs(b.lyapunov_value(0, b.reference)) <= 1e-12);
  CHECK(b.kappa_min() == 1.0);

  const Config shared = parse_config(testsupport::linear_config_text(2, true));
  std::mt19937_64 rng2(1);
  CHECK(initialize_bundle(shared, rng2).lyapunov.size() == 1);
}
