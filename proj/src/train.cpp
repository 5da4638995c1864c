#include "switchcert/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "switchcert/errors.hpp"

namespace switchcert {

Adam::Adam(const Mlp& net, double learning_rate, double beta1, double beta2, double epsilon)
    : m_(net.zero_gradient()),
      v_(net.zero_gradient()),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon) {}

void Adam::step(Mlp& net, const MlpGradient& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  MlpGradient delta = net.zero_gradient();
  auto update = [&](auto& m, auto& v, const auto& g, auto& d) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    d = (-lr_ * (m / c1).array() / ((v / c2).array().sqrt() + epsilon_)).matrix();
  };
  for (std::size_t k = 0; k < grad.weights.size(); ++k) {
    update(m_.weights[k], v_.weights[k], grad.weights[k], delta.weights[k]);
    update(m_.biases[k], v_.biases[k], grad.biases[k], delta.biases[k]);
  }
  net.apply(delta);
}

BundleGradient BundleGradient::zeros(const CertificateBundle& bundle) {
  BundleGradient g;
  for (const Mlp& v : bundle.lyapunov) g.lyapunov.push_back(v.zero_gradient());
  for (const Controller& c : bundle.controllers) g.controllers.push_back(c.net().zero_gradient());
  return g;
}

bool BundleGradient::all_finite() const {
  for (const auto& g : lyapunov) if (!g.all_finite()) return false;
  for (const auto& g : controllers) if (!g.all_finite()) return false;
  return true;
}

namespace {

std::string describe(const TrainSample& s, const Vec& x, const Vec& w) {
  auto vec = [](const Vec& v) {
    std::string out = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
    return out + "]";
  };
  return "mode index " + std::to_string(s.mode) + " x=" + vec(x) + " w=" + vec(w);
}

// Shared kernel of sub_losses and total_loss.
LossValue evaluate_batch(const ClosedLoop& loop, const SampleSet& samples,
                         const std::vector<TrainSample>& batch, const ValidityMargins& margins,
                         const std::array<double, 5>& weights, double hinge_margin, double fd_step,
                         BundleGradient* grad) {
  const CertificateBundle& b = loop.bundle();
  const double eta = margins.eta_hat;
  const double tau = margins.tau;
  const Vec& ref = b.reference;
  LossValue out;

  // Conditions are evaluated on the centred net V(x) - V(x*), so the
  // gradient carries the -V(x*) term that matches the per-step re-centering.
  std::set<std::size_t> modes;
  for (const auto& s : batch) modes.insert(s.mode);
  std::map<std::size_t, std::pair<double, Mlp::Tape>> centre;
  std::map<std::size_t, double> centre_adj;
  for (std::size_t p : modes) {
    const std::size_t k = b.shared_v ? 0 : p;
    if (centre.count(k)) continue;
    Mlp::Tape tape;
    const double v0 = b.lyapunov[k].forward(Vec::Zero(ref.size()), tape)[0];
    out.sub_losses[0] += std::abs(v0);
    centre.emplace(k, std::make_pair(v0, std::move(tape)));
    centre_adj[k] = 0.0;
  }

  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const TrainSample& s : batch) {
    const std::size_t p = s.mode;
    const Vec& x = samples.states.at(s.state);
    const Vec& w = samples.disturbances.at(s.disturbance);
    const Mlp& vnet = b.lyapunov_net(p);
    MlpGradient* vgrad = grad ? &grad->lyapunov[b.shared_v ? 0 : p] : nullptr;
    const ModeCertificateParams& mp = b.params.at(p);
    const ModeMargins& mm = margins.modes.at(p);
    const Vec xt = x - ref;
    const double radius = xt.norm();
    const bool active = radius >= margins.exclusion_radius;

    const std::size_t vk = b.shared_v ? 0 : p;
    const double v0 = centre.at(vk).first;
    Mlp::Tape tape_x;
    const double v = vnet.forward(xt, tape_x)[0] - v0;
    double adj_x = 0.0;  // dLoss/dV(x)

    if (active && seen.insert({p, s.state}).second) {
      const double c1 = -v + mp.k.alpha1(radius);
      const double c2 = v - mp.k.alpha2(radius);
      if (!std::isfinite(c1) || !std::isfinite(c2)) {
        throw NumericError("loss: non-finite condition at " + describe(s, x, w));
      }
      if (c1 - eta + hinge_margin > 0.0) {
        out.sub_losses[1] += c1 - eta + hinge_margin;
        adj_x -= weights[1];
      }
      if (c2 - eta + hinge_margin > 0.0) {
        out.sub_losses[2] += c2 - eta + hinge_margin;
        adj_x += weights[2];
      }
    }

    const Vec xe = loop.advance(p, x, w, tau);
    Mlp::Tape tape_e;
    const double ve = vnet.forward(xe - ref, tape_e)[0] - v0;
    const double lie_v = (ve - v) / tau;
    const double lie_h = (b.barrier.value(xe) - b.barrier.value(x)) / tau;
    const double c3 = lie_v + mp.kappa * v - mp.k.sigma(w.norm()) + mm.delta_v;
    const double c4 = -lie_h - mp.mu * b.barrier.value(x) + mm.delta_h;
    if (!std::isfinite(c3) || !std::isfinite(c4)) {
      throw NumericError("loss: non-finite condition at " + describe(s, x, w));
    }

    Vec state_adj = Vec::Zero(x.size());  // dLoss/dx(tau)
    bool control_path = false;
    if (active && c3 - eta + hinge_margin > 0.0) {
      out.sub_losses[3] += c3 - eta + hinge_margin;
      if (grad != nullptr) {
        Vec a(1);
        a[0] = weights[3] / tau;
        state_adj += vnet.backward(tape_e, a, vgrad);
        centre_adj[vk] -= a[0];
        adj_x += weights[3] * (mp.kappa - 1.0 / tau);
        control_path = true;
      }
    }
    if (c4 - eta + hinge_margin > 0.0) {
      out.sub_losses[4] += c4 - eta + hinge_margin;
      if (grad != nullptr) {
        state_adj -= (weights[4] / tau) * b.barrier.gradient(xe);
        control_path = true;
      }
    }

    if (grad != nullptr && adj_x != 0.0) {
      Vec a(1);
      a[0] = adj_x;
      vnet.backward(tape_x, a, vgrad);
      centre_adj[vk] -= adj_x;
    }
    if (grad != nullptr && control_path) {
      const Controller& ctrl = b.controllers.at(p);
      Controller::Trace trace;
      const Vec u = ctrl.control(x, w, trace);
      FlowMap& flow = loop.flow();
      Vec u_adj(u.size());
      for (Eigen::Index j = 0; j < u.size(); ++j) {
        Vec up = u;
        Vec um = u;
        up[j] += fd_step;
        um[j] -= fd_step;
        const Vec dx = (flow.step(p, x, up, w, tau) - flow.step(p, x, um, w, tau)) / (2.0 * fd_step);
        u_adj[j] = state_adj.dot(dx);
      }
      if (!u_adj.allFinite()) {
        throw NumericError("loss: non-finite control sensitivity at " + describe(s, x, w));
      }
      ctrl.backward(trace, u_adj, &grad->controllers[p]);
    }
  }

  if (grad != nullptr) {
    for (auto& [k, entry] : centre) {
      Vec a(1);
      a[0] = centre_adj[k] + weights[0] * (entry.first > 0.0 ? 1.0 : entry.first < 0.0 ? -1.0 : 0.0);
      if (a[0] != 0.0) b.lyapunov[k].backward(entry.second, a, &grad->lyapunov[k]);
    }
  }
  for (std::size_t i = 0; i < 5; ++i) out.total += weights[i] * out.sub_losses[i];
  return out;
}

double penalty_for(const CertificateBundle& b, const std::set<std::size_t>& modes,
                   const ValidityMargins& margins, const TrainConfig& cfg, BundleGradient* grad) {
  const auto& t = margins.targets;
  const auto& cw = cfg.lipschitz_weights;
  double pen = 0.0;
  std::set<std::size_t> vnets;
  for (std::size_t p : modes) vnets.insert(b.shared_v ? 0 : p);
  for (std::size_t k : vnets) {
    pen += lipschitz_penalty(b.lyapunov[k], t.lyapunov, t.lyapunov_jacobian, cw[0], cw[1], 1.0,
                             grad ? &grad->lyapunov[k] : nullptr);
  }
  for (std::size_t p : modes) {
    pen += lipschitz_penalty(b.controllers[p].net(), t.controller, std::nullopt, cw[2], 0.0, 1.0,
                             grad ? &grad->controllers[p] : nullptr);
  }
  return pen;
}

}  // namespace

std::array<double, 5> sub_losses(const ClosedLoop& loop, const SampleSet& samples,
                                 const std::vector<TrainSample>& batch,
                                 const ValidityMargins& margins, double hinge_margin) {
  return evaluate_batch(loop, samples, batch, margins, {1, 1, 1, 1, 1}, hinge_margin, 1e-4, nullptr)
      .sub_losses;
}

LossValue total_loss(const ClosedLoop& loop, const SampleSet& samples,
                     const std::vector<TrainSample>& batch, const ValidityMargins& margins,
                     const TrainConfig& cfg, BundleGradient* grad) {
  LossValue lv = evaluate_batch(loop, samples, batch, margins, cfg.loss_weights, cfg.hinge_margin,
                                cfg.fd_step, grad);
  std::set<std::size_t> modes;
  for (const auto& s : batch) modes.insert(s.mode);
  lv.penalty = penalty_for(loop.bundle(), modes, margins, cfg, grad);
  lv.total += lv.penalty;
  if (!std::isfinite(lv.total)) throw NumericError("loss: non-finite total");
  return lv;
}

std::string to_string(TrainStatus s) {
  switch (s) {
    case TrainStatus::Certified: return "certified";
    case TrainStatus::Ispss: return "ispss";
    case TrainStatus::NoCertificate: return "no-certificate";
    case TrainStatus::Partial: return "partial";
  }
  return "unknown";
}

int exit_code(TrainStatus s) {
  switch (s) {
    case TrainStatus::Certified: return 0;
    case TrainStatus::Ispss: return 10;
    default: return 11;
  }
}

void write_training_log(const TrainResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("train: cannot write '" + path + "'");
  out << "epoch,L1,L2,L3,L4,L5,penalty,loss,worst_c1,worst_c2,worst_c3,worst_c4,worst_slack,pass,"
         "learning_rate\n";
  for (const EpochRecord& r : result.log) {
    out << r.epoch;
    for (double v : r.sub_losses) out << ',' << format_double(v);
    out << ',' << format_double(r.penalty) << ',' << format_double(r.loss);
    for (double v : r.worst) out << ',' << format_double(v);
    out << ',' << format_double(r.worst_slack) << ',' << (r.pass ? 1 : 0) << ','
        << format_double(r.learning_rate) << '\n';
  }
}

namespace {

struct Snapshot {
  std::vector<std::pair<std::size_t, Mlp>> lyapunov;
  std::vector<std::pair<std::size_t, Mlp>> controllers;
};

}  // namespace

TrainResult train_modes(FlowMap& flow, const SwitchedSystemSpec& spec, CertificateBundle& bundle,
                        const std::vector<std::size_t>& modes, const SampleSet& samples,
                        const ValidityMargins& margins, const Config& cfg) {
  const TrainConfig& tc = cfg.training;
  bundle.validate();
  if (modes.empty()) throw ValidationError("train: no modes selected");
  for (std::size_t p : modes) {
    if (p >= bundle.mode_count()) throw ValidationError("train: mode index out of range");
  }
  if (bundle.shared_v && modes.size() != bundle.mode_count()) {
    throw ValidationError("train: a shared Lyapunov net must be trained over all modes jointly");
  }
  if (!bundle.shared_v && modes.size() != 1) {
    throw ValidationError("train: independent Lyapunov nets are trained one mode at a time");
  }
  if (tc.batch_size > samples.pair_count()) {
    throw ValidationError("train: batch_size " + std::to_string(tc.batch_size) +
                          " exceeds the " + std::to_string(samples.pair_count()) + " grid pairs");
  }

  TrainResult result;
  result.modes = modes;
  std::set<std::size_t> vnets;
  for (std::size_t p : modes) vnets.insert(bundle.shared_v ? 0 : p);
  const std::set<std::size_t> mode_set(modes.begin(), modes.end());

  std::vector<TrainSample> pool;
  for (std::size_t p : modes) {
    for (std::size_t i = 0; i < samples.states.size(); ++i) {
      for (std::size_t j = 0; j < samples.disturbances.size(); ++j) pool.push_back({p, i, j});
    }
  }
  std::mt19937_64 rng(tc.seed + 0x9E3779B97F4A7C15ULL * (bundle.shared_v ? 0 : modes.front() + 1));

  double lr = tc.learning_rate;
  std::vector<std::pair<std::size_t, Adam>> vopt;
  std::vector<std::pair<std::size_t, Adam>> copt;
  for (std::size_t k : vnets) vopt.emplace_back(k, Adam(bundle.lyapunov[k], lr, tc.beta1, tc.beta2, tc.adam_epsilon));
  for (std::size_t p : modes) {
    copt.emplace_back(p, Adam(bundle.controllers[p].net(), lr, tc.beta1, tc.beta2, tc.adam_epsilon));
  }

  const ClosedLoop loop(flow, bundle);
  auto snapshot = [&] {
    Snapshot s;
    for (std::size_t k : vnets) s.lyapunov.emplace_back(k, bundle.lyapunov[k]);
    for (std::size_t p : modes) s.controllers.emplace_back(p, bundle.controllers[p].net());
    return s;
  };
  auto restore = [&](const Snapshot& s) {
    for (const auto& [k, net] : s.lyapunov) bundle.lyapunov[k] = net;
    for (const auto& [p, net] : s.controllers) bundle.controllers[p].net() = net;
  };
  auto recenter = [&] {
    const Vec zero = Vec::Zero(bundle.reference.size());
    for (std::size_t k : vnets) bundle.lyapunov[k].biases().back()[0] -= bundle.lyapunov[k].forward_scalar(zero);
  };
  auto evaluate = [&](int epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    rec.pass = true;
    rec.worst.fill(-std::numeric_limits<double>::infinity());
    rec.worst_slack = -std::numeric_limits<double>::infinity();
    for (std::size_t p : modes) {
      const ModeReport rep = evaluate_mode(loop, spec, margins, samples, p,
                                           cfg.certificate.zero_tolerance, cfg.certificate.lie_substeps);
      for (int i = 0; i < 5; ++i) rec.sub_losses[i] += rep.sub_losses[i];
      for (int i = 0; i < 4; ++i) {
        if (rep.conditions[i].evaluated) {
          rec.worst[i] = std::max(rec.worst[i], rep.conditions[i].value - margins.eta_hat);
        }
      }
      rec.worst_slack = std::max(rec.worst_slack, rep.worst_slack(margins.eta_hat));
      if (!rep.pass) rec.pass = false;
    }
    rec.penalty = penalty_for(bundle, mode_set, margins, tc, nullptr);
    rec.loss = rec.penalty;
    for (int i = 0; i < 5; ++i) rec.loss += tc.loss_weights[i] * rec.sub_losses[i];
    return rec;
  };

  EpochRecord rec = evaluate(0);
  result.log.push_back(rec);
  Snapshot best = snapshot();
  result.best_worst_slack = rec.worst_slack;
  if (rec.pass) {
    result.status = TrainStatus::Certified;
    result.message = "initial parameters already pass";
    return result;
  }

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    std::shuffle(pool.begin(), pool.end(), rng);
    try {
      for (std::size_t start = 0; start < pool.size(); start += tc.batch_size) {
        const std::size_t stop = std::min(pool.size(), start + tc.batch_size);
        const std::vector<TrainSample> batch(pool.begin() + static_cast<std::ptrdiff_t>(start),
                                             pool.begin() + static_cast<std::ptrdiff_t>(stop));
        BundleGradient g = BundleGradient::zeros(bundle);
        total_loss(loop, samples, batch, margins, tc, &g);
        if (!g.all_finite()) throw NumericError("train: non-finite gradient");
        for (auto& [k, opt] : vopt) opt.step(bundle.lyapunov[k], g.lyapunov[k]);
        for (auto& [p, opt] : copt) opt.step(bundle.controllers[p].net(), g.controllers[p]);
        recenter();
        for (std::size_t k : vnets) {
          if (!bundle.lyapunov[k].all_finite()) throw NumericError("train: non-finite Lyapunov parameters");
        }
        for (std::size_t p : modes) {
          if (!bundle.controllers[p].net().all_finite()) throw NumericError("train: non-finite controller parameters");
        }
      }
    } catch (const NumericError& e) {
      restore(best);
      result.diverged = true;
      result.status = TrainStatus::NoCertificate;
      result.epochs_run = epoch;
      result.message = std::string("diverged: ") + e.what();
      return result;
    }

    lr *= tc.lr_decay;
    for (auto& [k, opt] : vopt) opt.set_learning_rate(lr);
    for (auto& [p, opt] : copt) opt.set_learning_rate(lr);

    rec = evaluate(epoch);
    result.log.push_back(rec);
    result.epochs_run = epoch;
    if (rec.worst_slack < result.best_worst_slack) {
      result.best_worst_slack = rec.worst_slack;
      result.best_epoch = epoch;
      best = snapshot();
    }
    if (rec.pass) {
      result.status = TrainStatus::Certified;
      result.best_epoch = epoch;
      result.best_worst_slack = rec.worst_slack;
      return result;
    }
    if (rec.loss <= tc.residual_tolerance) {
      result.status = TrainStatus::Ispss;
      result.best_epoch = epoch;
      result.message = "grid loss " + format_double(rec.loss) + " within residual tolerance";
      return result;
    }
  }
  restore(best);
  result.status = TrainStatus::NoCertificate;
  result.message = "epoch budget exhausted; best worst slack " + format_double(result.best_worst_slack) +
                   " at epoch " + std::to_string(result.best_epoch);
  return result;
}

TrainResult train_mode(FlowMap& flow, const SwitchedSystemSpec& spec, CertificateBundle& bundle,
                       std::size_t mode, const SampleSet& samples, const ValidityMargins& margins,
                       const Config& cfg) {
  if (bundle.shared_v) throw ValidationError("train: shared bundles are trained over all modes");
  return train_modes(flow, spec, bundle, {mode}, samples, margins, cfg);
}

unsigned worker_count() {
  const char* env = std::getenv("SWITCHCERT_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("SWITCHCERT_WORKERS must be a positive integer");
  return static_cast<unsigned>(v);
}

TrainAllResult train_all(const FlowFactory& make, const Config& cfg, const SampleSet& samples) {
  const SwitchedSystemSpec& spec = cfg.system;
  TrainAllResult out;
  std::mt19937_64 rng(cfg.training.seed);
  out.bundle = initialize_bundle(cfg, rng);
  out.margins = compute_margins(spec, out.bundle, cfg.certificate, samples);
  const std::size_t l = spec.mode_count();

  if (out.bundle.shared_v) {
    std::vector<std::size_t> all(l);
    std::iota(all.begin(), all.end(), 0);
    auto flow = make();
    out.runs.push_back(train_modes(*flow, spec, out.bundle, all, samples, out.margins, cfg));
  } else {
    const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(l));
    out.runs.resize(l);
    if (workers <= 1) {
      auto flow = make();
      for (std::size_t p = 0; p < l; ++p) {
        out.runs[p] = train_modes(*flow, spec, out.bundle, {p}, samples, out.margins, cfg);
      }
    } else {
      std::vector<CertificateBundle> copies(l, out.bundle);
      std::vector<std::exception_ptr> errors(l);
      std::size_t next = 0;
      std::mutex lock;
      auto work = [&] {
        for (;;) {
          std::size_t p;
          {
            std::lock_guard<std::mutex> g(lock);
            if (next >= l) return;
            p = next++;
          }
          try {
            auto flow = make();
            out.runs[p] = train_modes(*flow, spec, copies[p], {p}, samples, out.margins, cfg);
          } catch (...) {
            errors[p] = std::current_exception();
          }
        }
      };
      std::vector<std::thread> pool;
      for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
      for (auto& t : pool) t.join();
      for (const auto& e : errors) if (e) std::rethrow_exception(e);
      for (std::size_t p = 0; p < l; ++p) {
        out.bundle.lyapunov[p] = copies[p].lyapunov[p];
        out.bundle.controllers[p] = copies[p].controllers[p];
      }
    }
  }

  auto flow = make();
  out.report = verify_full(*flow, spec, out.bundle, out.margins, samples,
                           cfg.certificate.zero_tolerance, cfg.certificate.lie_substeps);
  attach_dwell(out.report, out.bundle, uniform_grid(spec.state_box, cfg.certificate.zeta_grid),
               out.margins.exclusion_radius + out.margins.eps);

  std::size_t certified = 0;
  std::size_t ispss = 0;
  for (const auto& r : out.runs) {
    if (r.status == TrainStatus::Certified) ++certified;
    if (r.status == TrainStatus::Ispss) ++ispss;
  }
  if (certified == out.runs.size() && out.report.pass) {
    out.status = TrainStatus::Certified;
  } else if (certified + ispss == out.runs.size()) {
    out.status = TrainStatus::Ispss;
  } else if (certified + ispss > 0) {
    out.status = TrainStatus::Partial;
  } else {
    out.status = TrainStatus::NoCertificate;
  }
  return out;
}

}  // namespace switchcert
