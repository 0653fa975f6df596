// Copyright 2026 The Pricure Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// In-memory peer and dealer channels for running both workers of the
// interactive share operations inside one process (tests, benchmarks).

#ifndef PRICURE_LOCAL_TWO_PARTY_H_
#define PRICURE_LOCAL_TWO_PARTY_H_

#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "pricure/sharing.h"

namespace pricure {

class LocalPeerLink {
 public:
  LocalPeerLink();
  ~LocalPeerLink();
  LocalPeerLink(const LocalPeerLink&) = delete;
  LocalPeerLink& operator=(const LocalPeerLink&) = delete;

  PeerChannel& endpoint(WorkerId w);

  // Wakes blocked exchanges with kProtocol; used when the other side failed.
  void Abort();

  // Every tensor list handed over, for view statistics.
  void set_recorder(std::function<void(WorkerId from, OpenKind kind,
                                       const std::vector<RingTensor>&)> recorder) {
    recorder_ = std::move(recorder);
  }

 private:
  class Endpoint;
  struct Message {
    OpenKind kind;
    std::vector<RingTensor> tensors;
  };

  std::vector<RingTensor> Exchange(WorkerId self, OpenKind kind,
                                   const std::vector<RingTensor>& mine);

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Message> inbox_[2];
  bool aborted_ = false;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;
  std::function<void(WorkerId, OpenKind, const std::vector<RingTensor>&)> recorder_;
};

// Plays the dealer's sign role for two in-process workers.
class LocalSignService {
 public:
  explicit LocalSignService(uint64_t seed);
  ~LocalSignService();
  LocalSignService(const LocalSignService&) = delete;
  LocalSignService& operator=(const LocalSignService&) = delete;

  SignService& endpoint(WorkerId w);
  void Abort();

  // Blinded values the dealer reconstructed, in request order.
  const std::vector<RingTensor>& observed() const { return observed_; }

 private:
  class Endpoint;
  RingTensor Request(WorkerId self, uint64_t mask_id, const RingTensor& m_share);

  std::mutex mu_;
  std::condition_variable cv_;
  Rng rng_;
  std::optional<RingTensor> pending_[2];
  uint64_t pending_id_[2] = {0, 0};
  std::optional<RingTensor> result_[2];
  bool aborted_ = false;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;
  std::vector<RingTensor> observed_;
};

// Runs the two worker bodies on two threads, aborting the links if either
// throws, and rethrows the first failure.
void RunTwoParty(LocalPeerLink& link, LocalSignService* dealer,
                 const std::function<void()>& worker_a,
                 const std::function<void()>& worker_b);

}  // namespace pricure

#endif  // PRICURE_LOCAL_TWO_PARTY_H_
