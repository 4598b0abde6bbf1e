// Copyright 2026 The gpmorse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gpmorse/oracle.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

namespace gpmorse {

namespace protocol {

namespace {

void append_number(std::string& s, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, " %.17g", v);
  s += buf;
}

std::vector<std::string> split(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_number(const std::string& tok) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE) {
    throw OracleError("malformed number '" + tok + "' in oracle message");
  }
  return v;
}

}  // namespace

std::string hello(std::size_t dim) { return "HELLO " + std::to_string(dim) + "\n"; }

std::string flow_request(double tau, std::span<const double> x) {
  std::string s = "FLOW";
  append_number(s, tau);
  for (double v : x) append_number(s, v);
  return s + "\n";
}

std::string ok_reply(std::span<const double> y) {
  std::string s = "OK";
  for (double v : y) append_number(s, v);
  return s + "\n";
}

std::string error_reply(const std::string& message) {
  std::string clean = message;
  for (char& c : clean) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return "ERR " + clean + "\n";
}

std::optional<std::size_t> parse_hello(const std::string& line) {
  const auto tok = split(line);
  if (tok.size() != 2 || tok[0] != "HELLO") return std::nullopt;
  const double m = parse_number(tok[1]);
  if (m < 1 || m != std::floor(m)) throw OracleError("invalid dimension in HELLO");
  return static_cast<std::size_t>(m);
}

FlowRequest parse_flow_request(const std::string& line, std::size_t dim) {
  const auto tok = split(line);
  if (tok.empty() || tok[0] != "FLOW") throw OracleError("expected FLOW request");
  if (tok.size() != dim + 2) throw OracleError("FLOW request has wrong number of values");
  FlowRequest req;
  req.tau = parse_number(tok[1]);
  for (std::size_t i = 0; i < dim; ++i) req.x.push_back(parse_number(tok[i + 2]));
  return req;
}

State parse_reply(const std::string& line, std::size_t dim) {
  if (line.rfind("ERR", 0) == 0) {
    std::string msg = line.size() > 4 ? line.substr(4) : std::string("unspecified error");
    throw OracleError("oracle error: " + msg);
  }
  const auto tok = split(line);
  if (tok.empty() || tok[0] != "OK") throw OracleError("unexpected oracle reply: " + line);
  if (tok.size() != dim + 1) throw OracleError("oracle reply has wrong number of values");
  State y(dim);
  for (std::size_t i = 0; i < dim; ++i) y[i] = parse_number(tok[i + 1]);
  return y;
}

}  // namespace protocol

std::size_t serve_oracle(std::istream& in, std::ostream& out, FlowMap& flow) {
  std::string line;
  std::size_t served = 0;
  bool greeted = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      if (!greeted) {
        const auto m = protocol::parse_hello(line);
        if (!m) throw OracleError("expected HELLO");
        if (*m != flow.dim()) throw OracleError("dimension mismatch: oracle serves " + std::to_string(flow.dim()));
        out << protocol::hello(flow.dim()) << std::flush;
        greeted = true;
        continue;
      }
      const auto req = protocol::parse_flow_request(line, flow.dim());
      if (std::abs(req.tau - flow.tau()) > 1e-12 * std::max(1.0, flow.tau())) {
        throw OracleError("unsupported tau");
      }
      const State y = flow.flow(req.x);
      out << protocol::ok_reply(y) << std::flush;
      ++served;
    } catch (const std::exception& e) {
      out << protocol::error_reply(e.what()) << std::flush;
    }
  }
  return served;
}

ExternalFlowMap::ExternalFlowMap(const std::string& command, std::size_t dim, double tau,
                                 std::chrono::milliseconds timeout)
    : dim_(dim), tau_(tau), timeout_(timeout) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw OracleError("cannot create pipe");
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw OracleError("cannot create pipe");
  }
  pid_ = fork();
  if (pid_ < 0) throw OracleError("cannot fork oracle process");
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  // a dead oracle must surface as an error, not a signal
  signal(SIGPIPE, SIG_IGN);

  try {
    send(protocol::hello(dim_));
    const std::string reply = receive();
    const auto m = protocol::parse_hello(reply);
    if (!m) throw OracleError("oracle handshake failed: " + reply);
    if (*m != dim_) throw OracleError("oracle reports dimension " + std::to_string(*m));
  } catch (...) {
    shutdown();
    throw;
  }
}

ExternalFlowMap::~ExternalFlowMap() { shutdown(); }

void ExternalFlowMap::shutdown() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    // give the child a moment to exit on EOF, then make sure it is gone
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      usleep(2000);
    }
    kill(pid_, SIGTERM);
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

void ExternalFlowMap::send(const std::string& line) const {
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw OracleError("cannot write to oracle: " + std::string(std::strerror(errno)));
    }
    written += static_cast<std::size_t>(n);
  }
}

std::string ExternalFlowMap::receive() const {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto pos = buffer_.find('\n');
    if (pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw OracleError("oracle timed out");
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw OracleError("poll failed on oracle pipe");
    }
    if (rc == 0) throw OracleError("oracle timed out");
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw OracleError("cannot read from oracle");
    }
    if (n == 0) throw OracleError("oracle closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

State ExternalFlowMap::evaluate(std::span<const double> x) const {
  std::lock_guard lock(mutex_);
  send(protocol::flow_request(tau_, x));
  return protocol::parse_reply(receive(), dim_);
}

}  // namespace gpmorse
