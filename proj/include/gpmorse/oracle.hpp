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

#pragma once

#include <chrono>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "gpmorse/dynamics.hpp"

namespace gpmorse {

/// Timeout, malformed reply, ERR reply or a dead oracle process.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Line protocol spoken with an external dynamics oracle:
///
///   client: HELLO <M>            server: HELLO <M>
///   client: FLOW <tau> <x_1> ... <x_M>
///   server: OK <y_1> ... <y_M>   or   ERR <message>
///
/// Numbers are written with 17 significant digits.
namespace protocol {

std::string hello(std::size_t dim);
std::string flow_request(double tau, std::span<const double> x);
std::string ok_reply(std::span<const double> y);
std::string error_reply(const std::string& message);

/// Dimension announced by a HELLO line, nullopt if the line is not HELLO.
std::optional<std::size_t> parse_hello(const std::string& line);

struct FlowRequest {
  double tau = 0.0;
  State x;
};
/// Throws OracleError on anything but a well-formed FLOW line of `dim` states.
FlowRequest parse_flow_request(const std::string& line, std::size_t dim);

/// Returns y for OK, throws OracleError carrying the message for ERR or
/// on a protocol violation.
State parse_reply(const std::string& line, std::size_t dim);

}  // namespace protocol

/// Answers protocol requests on `in`/`out` with `flow` until EOF.
/// Returns the number of FLOW requests served.
std::size_t serve_oracle(std::istream& in, std::ostream& out, FlowMap& flow);

/// phi_tau evaluated by a child process (`/bin/sh -c command`) speaking the
/// protocol on its stdin/stdout. One connection, driven serially.
class ExternalFlowMap final : public FlowMap {
 public:
  ExternalFlowMap(const std::string& command, std::size_t dim, double tau,
                  std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~ExternalFlowMap() override;
  ExternalFlowMap(const ExternalFlowMap&) = delete;
  ExternalFlowMap& operator=(const ExternalFlowMap&) = delete;

  std::size_t dim() const override { return dim_; }
  double tau() const override { return tau_; }
  bool thread_safe() const override { return false; }

 protected:
  State evaluate(std::span<const double> x) const override;

 private:
  void shutdown();
  void send(const std::string& line) const;
  std::string receive() const;

  std::size_t dim_;
  double tau_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  mutable std::string buffer_;
  mutable std::mutex mutex_;
};

}  // namespace gpmorse
