#include <catch_amalgamated.hpp>

#include <cmath>

#include "support.hpp"
#include "switchcert/cover.hpp"
#include "switchcert/errors.hpp"
#include "switchcert/flow.hpp"
#include "switchcert/train.hpp"

using namespace switchcert;
using testsupport::vec;
using Catch::Approx;

namespace {

std::vector<TrainSample> full_batch(const SampleSet& s, std::size_t mode, std::size_t stride = 1) {
  std::vector<TrainSample> out;
  for (std::size_t i = 0; i < s.states.size(); i += stride) {
    for (std::size_t j = 0; j < s.disturbances.size(); ++j) out.push_back({mode, i, j});
  }
  return out;
}

FlowFactory factory(const Config& cfg) {
  return [cfg] { return make_flow(cfg); };
}

}  // namespace

TEST_CASE("a passing certificate has zero sub-losses", "[train]") {
  const Config cfg = parse_config(testsupport::linear_config_text());
  auto flow = make_flow(cfg);
  const SampleSet s = cover_product(cfg.system, cfg.certificate.eps_x, cfg.certificate.eps_u);
  const CertificateBundle b = testsupport::hand_bundle(cfg, 0.9);
  const auto m = compute_margins(cfg.system, b, cfg.certificate, s);
  const ClosedLoop loop(*flow, b);
  const auto l = sub_losses(loop, s, full_batch(s, 0), m);
  for (double v : l) CHECK(v == Approx(0.0).margin(1e-12));
}

TEST_CASE("zero candidate is charged the lower-bound hinge", "[train]") {
  const Config cfg = parse_config(testsupport::linear_config_text());
  auto flow = make_flow(cfg);
  const SampleSet s = cover_product(cfg.system, 0.01, 0.01);
  CertificateBundle b = testsupport::hand_bundle(cfg, 0.9);
  b.lyapunov[0] = Mlp({1, 2, 1}, Activation::Softplus);
  const auto m = compute_margins(cfg.system, b, cfg.certificate, s);
  const ClosedLoop loop(*flow, b);
  const auto batch = full_batch(s, 0);
  double oracle = 0.0;
  for (const Vec& x : s.states) {
    const double r = std::abs(x[0]);
    if (r >= m.exclusion_radius) oracle += 0.05 * r * r - m.eta_hat;
  }
  CHECK(sub_losses(loop, s, batch, m)[1] == Approx(oracle).epsilon(1e-12));
}

TEST_CASE("single sample at the reference has zero L1", "[train]") {
  const Config cfg = parse_config(testsupport::linear_config_text());
  auto flow = make_flow(cfg);
  SampleSet s;
  s.states = {vec({0.0})};
  s.disturbances = {vec({0.0})};
  s.eps = s.eps_x = s.eps_u = 0.001;
  const CertificateBundle b = testsupport::hand_bundle(cfg, 0.9);
  const auto m = compute_margins(cfg.system, b.params, b.barrier,
                                 LipschitzTargets::from(cfg.certificate), 0.001, 1e-4, 0.4);
  const ClosedLoop loop(*flow, b);
  CHECK(sub_losses(loop, s, {{0, 0, 0}}, m)[0] == Approx(0.0).margin(1e-15));
}

TEST_CASE("total loss is linear in the weights and its V gradient matches FD", "[train]") {
  Config cfg = parse_config(testsupport::linear_config_text());
  cfg.training.hinge_margin = 5.0;  // every hinge active
  auto flow = make_flow(cfg);
  const SampleSet s = cover_product(cfg.system, 0.02, 0.02);
  std::mt19937_64 rng(3);
  CertificateBundle b = initialize_bundle(cfg, rng);
  const auto m = compute_margins(cfg.system, b, cfg.certificate, s);
  const ClosedLoop loop(*flow, b);
  const auto batch = full_batch(s, 0, 3);

  TrainConfig doubled = cfg.training;
  for (double& c : doubled.loss_weights) c *= 2.0;
  const LossValue one = total_loss(loop, s, batch, m, cfg.training, nullptr);
  const LossValue two = total_loss(loop, s, batch, m, doubled, nullptr);
  CHECK(two.total - two.penalty == Approx(2.0 * (one.total - one.penalty)));

  BundleGradient g = BundleGradient::zeros(b);
  total_loss(loop, s, batch, m, cfg.training, &g);
  const double h = 1e-6;
  Mlp& v = b.lyapunov[0];
  for (std::size_t k = 0; k < v.layer_count(); ++k) {
    for (Eigen::Index i = 0; i < v.weights()[k].size(); ++i) {
      double& p = v.weights()[k].data()[i];
      const double o = p;
      p = o + h;
      const double lp = total_loss(loop, s, batch, m, cfg.training, nullptr).total;
      p = o - h;
      const double lm = total_loss(loop, s, batch, m, cfg.training, nullptr).total;
      p = o;
      const double fd = (lp - lm) / (2 * h);
      CHECK(std::abs(g.lyapunov[0].weights[k].data()[i] - fd) / std::max(1.0, std::abs(fd)) <= 1e-3);
    }
  }
}

TEST_CASE("Adam moves against the gradient with bias correction", "[train]") {
  Mlp net({1, 1}, Activation::Tanh);
  Adam opt(net, 0.1, 0.9, 0.999, 1e-8);
  MlpGradient g = net.zero_gradient();
  g.weights[0](0, 0) = 3.0;
  g.biases[0][0] = -0.5;
  opt.step(net, g);
  // first bias-corrected step is lr * sign(g)
  CHECK(net.weights()[0](0, 0) == Approx(-0.1));
  CHECK(net.biases()[0][0] == Approx(0.1));
  CHECK(opt.steps() == 1);
}

TEST_CASE("training status exit codes", "[train]") {
  CHECK(exit_code(TrainStatus::Certified) == 0);
  CHECK(exit_code(TrainStatus::Ispss) == 10);
  CHECK(exit_code(TrainStatus::NoCertificate) == 11);
  CHECK(exit_code(TrainStatus::Partial) == 11);
  CHECK(to_string(TrainStatus::Ispss) == "ispss");
}

TEST_CASE("zero epochs return the initial parameters", "[train]") {
  Config cfg = parse_config(testsupport::linear_config_text());
  cfg.training.max_epochs = 0;
  auto flow = make_flow(cfg);
  const SampleSet s = cover_product(cfg.system, cfg.certificate.eps_x, cfg.certificate.eps_u);
  std::mt19937_64 rng(cfg.training.seed);
  CertificateBundle b = initialize_bundle(cfg, rng);
  const CertificateBundle before = b;
  const auto m = compute_margins(cfg.system, b, cfg.certificate, s);
  const TrainResult r = train_mode(*flow, cfg.system, b, 0, s, m, cfg);
  CHECK(r.status == TrainStatus::NoCertificate);
  CHECK(r.epochs_run == 0);
  CHECK(r.log.size() == 1);
  CHECK(b.lyapunov[0] == before.lyapunov[0]);
  CHECK(b.controllers[0].net() == before.controllers[0].net());
}

TEST_CASE("oversized batches are rejected", "[train]") {
  Config cfg = parse_config(testsupport::linear_config_text());
  auto flow = make_flow(cfg);
  const SampleSet s = cover_product(cfg.system, 0.1, 0.05);
  cfg.training.batch_size = s.pair_count() + 1;
  std::mt19937_64 rng(1);
  CertificateBundle b = initialize_bundle(cfg, rng);
  const auto m = compute_margins(cfg.system, b, cfg.certificate, s);
  CHECK_THROWS_AS(train_mode(*flow, cfg.system, b, 0, s, m, cfg), ValidationError);
}

TEST_CASE("1-D feasible instance trains to a certificate", "[train]") {
  const Config cfg = parse_config(testsupport::linear_config_text(2));
  const SampleSet s = cover_product(cfg.system, cfg.certificate.eps_x, cfg.certificate.eps_u);
  const TrainAllResult r = train_all(factory(cfg), cfg, s);
  CHECK(r.status == TrainStatus::Certified);
  CHECK(r.report.pass);
  REQUIRE(r.report.zeta);
  CHECK(*r.report.zeta >= 1.0);
  CHECK(*r.report.tau_d_min == Approx(std::log(*r.report.zeta) / 1.0));
  for (const TrainResult& run : r.runs) {
    CHECK(run.status == TrainStatus::Certified);
    // stops at the first passing epoch
    CHECK(run.log.back().pass);
    for (std::size_t e = 0; e + 1 < run.log.size(); ++e) CHECK_FALSE(run.log[e].pass);
  }

  // identical config and seed reproduce the run bit for bit
  const TrainAllResult again = train_all(factory(cfg), cfg, s);
  CHECK(again.bundle.lyapunov[0] == r.bundle.lyapunov[0]);
  CHECK(again.bundle.controllers[1].net() == r.bundle.controllers[1].net());
  CHECK(again.runs[0].log.size() == r.runs[0].log.size());
}

TEST_CASE("shared Lyapunov training on two stable modes gives zeta = 1", "[train]") {
  const Config cfg = parse_config(testsupport::linear_config_text(2, true));
  const SampleSet s = cover_product(cfg.system, cfg.certificate.eps_x, cfg.certificate.eps_u);
  const TrainAllResult r = train_all(factory(cfg), cfg, s);
  CHECK(r.status == TrainStatus::Certified);
  CHECK(r.bundle.lyapunov.size() == 1);
  REQUIRE(r.report.zeta);
  CHECK(*r.report.zeta == 1.0);
  CHECK(*r.report.tau_d_min == 0.0);
}

TEST_CASE("training log CSV has one row per evaluated epoch", "[train]") {
  TrainResult r;
  EpochRecord e;
  e.epoch = 0;
  r.log.push_back(e);
  e.epoch = 1;
  e.pass = true;
  r.log.push_back(e);
  const auto dir = testsupport::scratch_dir("trainlog");
  write_training_log(r, (dir / "log.csv").string());
  const std::string text = testsupport::read_file(dir / "log.csv");
  CHECK(text.rfind("epoch,L1,L2,L3,L4,L5,penalty,loss,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
