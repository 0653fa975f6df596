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

#include "pricure/local_two_party.h"

#include <thread>

#include "pricure/errors.h"

namespace pricure {

class LocalPeerLink::Endpoint : public PeerChannel {
 public:
  Endpoint(LocalPeerLink* link, WorkerId self) : link_(link), self_(self) {}
  std::vector<RingTensor> Exchange(OpenKind kind,
                                   const std::vector<RingTensor>& mine) override {
    return link_->Exchange(self_, kind, mine);
  }

 private:
  LocalPeerLink* link_;
  WorkerId self_;
};

LocalPeerLink::LocalPeerLink() {
  endpoints_.push_back(std::make_unique<Endpoint>(this, WorkerId::kA));
  endpoints_.push_back(std::make_unique<Endpoint>(this, WorkerId::kB));
}

LocalPeerLink::~LocalPeerLink() = default;

PeerChannel& LocalPeerLink::endpoint(WorkerId w) {
  return *endpoints_[static_cast<int>(w)];
}

void LocalPeerLink::Abort() {
  std::lock_guard<std::mutex> lock(mu_);
  aborted_ = true;
  cv_.notify_all();
}

std::vector<RingTensor> LocalPeerLink::Exchange(WorkerId self, OpenKind kind,
                                                const std::vector<RingTensor>& mine) {
  const int me = static_cast<int>(self);
  std::unique_lock<std::mutex> lock(mu_);
  if (recorder_) recorder_(self, kind, mine);
  inbox_[1 - me].push_back(Message{kind, mine});
  cv_.notify_all();
  cv_.wait(lock, [&] { return aborted_ || !inbox_[me].empty(); });
  PRICURE_ENFORCE(!aborted_, ErrorCode::kProtocol, "peer worker aborted");
  Message msg = std::move(inbox_[me].front());
  inbox_[me].pop_front();
  PRICURE_ENFORCE(msg.kind == kind, ErrorCode::kDesync,
                  "peer opened a different operation");
  return std::move(msg.tensors);
}

class LocalSignService::Endpoint : public SignService {
 public:
  Endpoint(LocalSignService* svc, WorkerId self) : svc_(svc), self_(self) {}
  RingTensor RequestSignShares(uint64_t mask_id, const RingTensor& m_share) override {
    return svc_->Request(self_, mask_id, m_share);
  }

 private:
  LocalSignService* svc_;
  WorkerId self_;
};

LocalSignService::LocalSignService(uint64_t seed) : rng_(Rng::Substream(seed, "dealer/sign")) {
  endpoints_.push_back(std::make_unique<Endpoint>(this, WorkerId::kA));
  endpoints_.push_back(std::make_unique<Endpoint>(this, WorkerId::kB));
}

LocalSignService::~LocalSignService() = default;

SignService& LocalSignService::endpoint(WorkerId w) {
  return *endpoints_[static_cast<int>(w)];
}

void LocalSignService::Abort() {
  std::lock_guard<std::mutex> lock(mu_);
  aborted_ = true;
  cv_.notify_all();
}

RingTensor LocalSignService::Request(WorkerId self, uint64_t mask_id,
                                     const RingTensor& m_share) {
  const int me = static_cast<int>(self);
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [&] { return aborted_ || !pending_[me].has_value(); });
  PRICURE_ENFORCE(!aborted_, ErrorCode::kProtocol, "dealer aborted");
  pending_[me] = m_share;
  pending_id_[me] = mask_id;
  if (pending_[0] && pending_[1]) {
    if (pending_id_[0] != pending_id_[1]) {
      aborted_ = true;
      cv_.notify_all();
      Throw(ErrorCode::kDesync, "workers requested signs for masks " +
                                    std::to_string(pending_id_[0]) + " and " +
                                    std::to_string(pending_id_[1]));
    }
    observed_.push_back(Add(*pending_[0], *pending_[1]));
    auto [a, b] = DealerSignShares(*pending_[0], *pending_[1], rng_);
    result_[0] = std::move(a);
    result_[1] = std::move(b);
    pending_[0].reset();
    pending_[1].reset();
    cv_.notify_all();
  }
  cv_.wait(lock, [&] { return aborted_ || result_[me].has_value(); });
  PRICURE_ENFORCE(!aborted_, ErrorCode::kProtocol, "dealer aborted");
  RingTensor out = std::move(*result_[me]);
  result_[me].reset();
  cv_.notify_all();
  return out;
}

void RunTwoParty(LocalPeerLink& link, LocalSignService* dealer,
                 const std::function<void()>& worker_a,
                 const std::function<void()>& worker_b) {
  std::exception_ptr errors[2];
  auto guarded = [&](int idx, const std::function<void()>& body) {
    try {
      body();
    } catch (...) {
      errors[idx] = std::current_exception();
      link.Abort();
      if (dealer) dealer->Abort();
    }
  };
  std::thread tb(guarded, 1, std::cref(worker_b));
  guarded(0, worker_a);
  tb.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace pricure
