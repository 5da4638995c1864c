#include "switchcert/external_flow.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "switchcert/errors.hpp"

namespace switchcert {

ExternalProcessFlow::ExternalProcessFlow(const std::string& command, Eigen::Index n, Eigen::Index m,
                                         std::size_t modes, double timeout_seconds)
    : n_(n), m_(m), modes_(modes), timeout_(timeout_seconds) {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    throw TransportError(std::string("external flow: socketpair failed: ") + std::strerror(errno));
  }
  pid_ = ::fork();
  if (pid_ < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw TransportError("external flow: fork failed");
  }
  if (pid_ == 0) {
    ::close(fds[0]);
    ::dup2(fds[1], STDIN_FILENO);
    ::dup2(fds[1], STDOUT_FILENO);
    ::close(fds[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(fds[1]);
  to_child_ = fds[0];
  from_child_ = fds[0];

  const std::string hello = read_line();
  std::istringstream in(hello);
  std::string tag;
  long long hn = -1, hm = -1, hl = -1;
  in >> tag >> hn >> hm >> hl;
  if (tag != "HELLO" || in.fail()) {
    shutdown();
    throw ProtocolError("external flow: bad handshake '" + hello + "'");
  }
  if (hn != n_ || hm != m_ || hl != static_cast<long long>(modes_)) {
    shutdown();
    throw ProtocolError("external flow: handshake dimensions '" + hello + "' do not match n=" +
                        std::to_string(n_) + " m=" + std::to_string(m_) +
                        " l=" + std::to_string(modes_));
  }
}

ExternalProcessFlow::~ExternalProcessFlow() { shutdown(); }

void ExternalProcessFlow::shutdown() {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = from_child_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    // Give the child a moment to exit on EOF before killing it.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      ::usleep(2000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string ExternalProcessFlow::format_request(int mode_id, const Vec& x, const Vec& u, double dt) {
  std::string line = "STEP " + std::to_string(mode_id);
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), " %.17g", v);
    line += buf;
  };
  for (Eigen::Index i = 0; i < x.size(); ++i) put(x[i]);
  for (Eigen::Index i = 0; i < u.size(); ++i) put(u[i]);
  put(dt);
  return line;
}

Vec ExternalProcessFlow::parse_response(const std::string& line, Eigen::Index n) {
  Vec out(n);
  const char* p = line.data();
  const char* end = line.data() + line.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || next == p) {
      throw ProtocolError("external flow: malformed response '" + line + "'");
    }
    out[i] = v;
    p = next;
  }
  while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
  if (p != end) throw ProtocolError("external flow: malformed response '" + line + "'");
  if (!out.allFinite()) throw NumericError("external flow: non-finite state in response '" + line + "'");
  return out;
}

void ExternalProcessFlow::write_line(const std::string& line) {
  const std::string data = line + "\n";
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t k = ::send(to_child_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("external flow: write failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(k);
  }
}

std::string ExternalProcessFlow::read_line() {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::duration<double>(timeout_);
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (left.count() <= 0) throw TransportError("external flow: timed out waiting for response");
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError("external flow: poll failed");
    }
    if (rc == 0) throw TransportError("external flow: timed out waiting for response");
    char chunk[4096];
    const ssize_t k = ::read(from_child_, chunk, sizeof(chunk));
    if (k < 0) {
      if (errno == EINTR) continue;
      throw TransportError("external flow: read failed");
    }
    if (k == 0) throw TransportError("external flow: process closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(k));
  }
}

Vec ExternalProcessFlow::step(std::size_t mode, const Vec& x, const Vec& u, const Vec& /*w*/,
                              double dt) {
  if (!(dt > 0.0)) throw ValidationError("external flow: dt must be positive");
  if (mode >= modes_) throw ValidationError("external flow: mode index out of range");
  if (x.size() != n_ || u.size() != m_) throw ValidationError("external flow: dimension mismatch");
  if (to_child_ < 0) throw TransportError("external flow: process is not running");
  write_line(format_request(static_cast<int>(mode) + 1, x, u, dt));
  return parse_response(read_line(), n_);
}

}  // namespace switchcert
