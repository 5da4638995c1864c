#pragma once
// Helpers shared by the unit suites and the acceptance runner.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <sys/wait.h>

#include "switchcert/bundle.hpp"
#include "switchcert/config.hpp"
#include "switchcert/mlp.hpp"

namespace testsupport {

using switchcert::Mat;
using switchcert::Vec;

inline Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline std::string source_path(const std::string& rel) {
  return std::string(SWITCHCERT_SOURCE_DIR) + "/" + rel;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("switchcert_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Runs a shell command, capturing stdout+stderr; returns the exit status.
inline int run_command(const std::string& cmd, std::string* output = nullptr) {
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (pipe == nullptr) return -1;
  std::string text;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) text += buf;
  const int status = pclose(pipe);
  if (output != nullptr) *output = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline switchcert::Mlp random_net(std::vector<int> sizes, switchcert::Activation act,
                                  std::mt19937_64& rng, double scale = 1.0) {
  switchcert::Mlp net(std::move(sizes), act);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    Mat& w = net.weights()[k];
    const double s = scale / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = s * g(rng);
    Vec& b = net.biases()[k];
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.5 * g(rng);
  }
  return net;
}

/// V(x) = c (softplus(2x) + softplus(-2x) - 2 ln 2): even, zero at 0, V''(0) = 2c.
inline switchcert::Mlp bowl_net(double c) {
  switchcert::Mlp v({1, 2, 1}, switchcert::Activation::Softplus);
  v.weights()[0] << 2.0, -2.0;
  v.weights()[1] << c, c;
  v.biases()[1][0] = -2.0 * c * std::log(2.0);
  return v;
}

/// 1-D single-mode system x' = -x + u + w on X = [-1, 1], W = [0, 0.1].
inline std::string linear_config_text(int modes = 1, bool shared = false) {
  std::string s =
      "[system]\nkind = linear\nmodes = " + std::to_string(modes) +
      "\nstate_lo = [-1.0]\nstate_hi = [1.0]\ndist_lo = [0.0]\ndist_hi = [0.1]\n"
      "input_lo = [-2.0]\ninput_hi = [2.0]\n";
  for (int p = 1; p <= modes; ++p) {
    s += "\n[modes." + std::to_string(p) + "]\ndrift = [" + (p == 1 ? "-1.0" : "-2.0") +
         "]\nL_x = " + (p == 1 ? "1.0" : "2.0") + "\nL_u = 1.0\nL_w = 1.0\nM_f = " +
         (p == 1 ? "3.1" : "4.1") + "\nk1 = 0.05\nk2 = 5.0\nkw = 20.0\nkappa = 1.0\nmu = 1.0\n";
  }
  s += "\n[certificate]\neps_x = 0.001\neps_u = 0.001\ntau = 1e-4\nL_L = 4.0\nL_dL = 6.0\n"
       "L_C = 1.5\nexclusion_radius = 0.4\nlyapunov_hidden = [8]\ncontroller_hidden = [8]\n"
       "lyapunov_activation = tanh\n";
  if (shared) s += "shared_v = true\n";
  s += "\n[training]\nc_lip = [200.0, 200.0, 200.0]\nhinge_margin = 0.01\nlearning_rate = 0.003\n"
       "lr_decay = 0.97\nbatch_size = 512\nmax_epochs = 60\nseed = 1\n";
  return s;
}

/// Single-mode bundle for x' = -x + u + w with a zero controller and the
/// softplus bowl as Lyapunov function.
inline switchcert::CertificateBundle hand_bundle(const switchcert::Config& cfg, double c,
                                                 double kappa_scale = 1.0) {
  switchcert::CertificateBundle b;
  b.reference = cfg.system.reference;
  b.barrier = switchcert::ProductBarrier(cfg.system.state_box);
  b.params = cfg.certificate.per_mode;
  for (auto& p : b.params) p.kappa *= kappa_scale;
  for (std::size_t p = 0; p < cfg.system.mode_count(); ++p) {
    switchcert::Mlp ctrl({2, 1}, switchcert::Activation::Tanh);
    b.controllers.emplace_back(ctrl, b.reference, cfg.system.input_box);
    b.lyapunov.push_back(bowl_net(c));
  }
  b.config_hash = cfg.hash;
  return b;
}

}  // namespace testsupport
