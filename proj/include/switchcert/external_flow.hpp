#pragma once

#include <string>
#include <sys/types.h>

#include "switchcert/flow.hpp"

namespace switchcert {

/// Flow map served by a child process over a line protocol on stdin/stdout.
///
///   child -> parent on startup:  HELLO <n> <m> <l>
///   parent -> child:             STEP <mode> <x_1..x_n> <u_1..u_m> <dt>
///   child -> parent:             <x'_1..x'_n>
///
/// Modes are the 1-based identifiers. Numbers are written with 17 significant
/// digits. The disturbance is not part of the protocol: external plants only
/// see w through the controller. One request is in flight at a time.
class ExternalProcessFlow : public FlowMap {
 public:
  ExternalProcessFlow(const std::string& command, Eigen::Index n, Eigen::Index m, std::size_t modes,
                      double timeout_seconds = 10.0);
  ~ExternalProcessFlow() override;

  ExternalProcessFlow(const ExternalProcessFlow&) = delete;
  ExternalProcessFlow& operator=(const ExternalProcessFlow&) = delete;

  Eigen::Index state_dim() const override { return n_; }
  Eigen::Index control_dim() const override { return m_; }
  std::size_t mode_count() const override { return modes_; }

  Vec step(std::size_t mode, const Vec& x, const Vec& u, const Vec& w, double dt) override;

  /// Formats a STEP request line (without the trailing newline).
  static std::string format_request(int mode_id, const Vec& x, const Vec& u, double dt);
  /// Parses a response line into an n-vector; throws ProtocolError/NumericError.
  static Vec parse_response(const std::string& line, Eigen::Index n);

 private:
  void write_line(const std::string& line);
  std::string read_line();
  void shutdown();

  Eigen::Index n_;
  Eigen::Index m_;
  std::size_t modes_;
  double timeout_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace switchcert
