#pragma once

// Rank communication: face halo exchange, ordered sum reductions and message
// accounting. Two backends: Serial (one rank) and InProcess (one thread per
// rank inside this process, blocking collectives over owned message buffers).

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "pbicgs/errors.hpp"
#include "pbicgs/grid.hpp"

namespace pbicgs {

struct MessageCounters {
  std::uint64_t halo_messages_sent = 0;
  std::uint64_t halo_bytes_sent = 0;
  std::uint64_t allreduce_calls = 0;

  MessageCounters operator-(const MessageCounters& o) const {
    return {halo_messages_sent - o.halo_messages_sent, halo_bytes_sent - o.halo_bytes_sent,
            allreduce_calls - o.allreduce_calls};
  }
  bool operator==(const MessageCounters&) const = default;
};

enum class BackendKind { Serial, InProcess };

class Communicator {
 public:
  virtual ~Communicator() = default;

  virtual int rank() const = 0;
  virtual int size() const = 0;
  virtual BackendKind backend() const = 0;

  /// Sends every border plane that has a neighboring rank and overwrites the
  /// matching halo planes with the neighbors' borders. Physical halos are not
  /// touched. Returns once all sends and receives of this rank completed.
  virtual void halo_exchange(const Decomposition& decomp, Field& f) = 0;

  /// In-place element-wise sum over ranks, summed in ascending rank order.
  /// One call counts as one reduction regardless of the number of values.
  virtual void allreduce_sum(std::span<double> values) = 0;

  const MessageCounters& counters() const { return counters_; }

 protected:
  friend class SelfCommunicator;
  MessageCounters counters_;
};

/// Single-rank backend. Halo exchange has no remote partner and is a no-op.
class SerialCommunicator final : public Communicator {
 public:
  int rank() const override { return 0; }
  int size() const override { return 1; }
  BackendKind backend() const override { return BackendKind::Serial; }

  void halo_exchange(const Decomposition&, Field&) override {}
  void allreduce_sum(std::span<double>) override { ++counters_.allreduce_calls; }
};

/// Size-one view of a rank for subdomain-local solves. Nothing is sent;
/// reductions are the identity but are counted on the parent's allreduce
/// counter, like a reduction over a self-communicator.
class SelfCommunicator final : public Communicator {
 public:
  explicit SelfCommunicator(Communicator& parent) : parent_(parent) {}

  int rank() const override { return 0; }
  int size() const override { return 1; }
  BackendKind backend() const override { return BackendKind::Serial; }

  void halo_exchange(const Decomposition&, Field&) override {}
  void allreduce_sum(std::span<double>) override {
    ++counters_.allreduce_calls;
    ++parent_.counters_.allreduce_calls;
  }

 private:
  Communicator& parent_;
};

/// Shared state of the ranks of one in-process run.
class InProcessWorld {
 public:
  explicit InProcessWorld(int size, std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : size_(size), timeout_(timeout), slots_(static_cast<std::size_t>(size)) {
    if (size < 1) throw ConfigError("rank count must be >= 1");
  }

  int size() const { return size_; }
  std::chrono::milliseconds timeout() const { return timeout_; }

  /// Wakes every blocked rank with a CommError; used when one rank fails.
  void abort() {
    std::lock_guard lock(mutex_);
    aborted_ = true;
    cv_.notify_all();
  }

 private:
  friend class InProcessCommunicator;

  using MailKey = std::tuple<int, int, int>;  // destination, source, destination halo face

  void post(int dest, int src, Face dest_face, std::vector<double> payload) {
    std::lock_guard lock(mutex_);
    mail_[{dest, src, face_index(dest_face)}].push_back(std::move(payload));
    cv_.notify_all();
  }

  std::vector<double> receive(int dest, int src, Face dest_face) {
    std::unique_lock lock(mutex_);
    auto& queue = mail_[{dest, src, face_index(dest_face)}];
    const bool ok = cv_.wait_for(lock, timeout_, [&] { return aborted_ || !queue.empty(); });
    if (aborted_) throw CommError("rank " + std::to_string(dest) + ": run aborted by another rank");
    if (!ok) {
      std::ostringstream os;
      os << "rank " << dest << ": halo exchange timed out waiting for " << face_name(dest_face)
         << " neighbor rank " << src;
      throw CommError(os.str());
    }
    std::vector<double> payload = std::move(queue.front());
    queue.pop_front();
    return payload;
  }

  void allreduce(int rank, std::span<double> values) {
    std::unique_lock lock(mutex_);
    if (aborted_) throw CommError("rank " + std::to_string(rank) + ": run aborted by another rank");
    slots_[static_cast<std::size_t>(rank)].assign(values.begin(), values.end());
    const std::uint64_t generation = generation_;
    if (++arrived_ == size_) {
      mismatch_ = false;
      const std::size_t len = slots_[0].size();
      for (const auto& s : slots_) mismatch_ = mismatch_ || s.size() != len;
      result_.assign(len, 0.0);
      if (!mismatch_) {
        for (int r = 0; r < size_; ++r)
          for (std::size_t i = 0; i < len; ++i) result_[i] += slots_[static_cast<std::size_t>(r)][i];
      }
      arrived_ = 0;
      ++generation_;
      cv_.notify_all();
    } else {
      const bool ok = cv_.wait_for(lock, timeout_, [&] { return aborted_ || generation_ != generation; });
      if (aborted_) throw CommError("rank " + std::to_string(rank) + ": run aborted by another rank");
      if (!ok) throw CommError("rank " + std::to_string(rank) + ": allreduce timed out");
    }
    if (mismatch_) {
      throw CommError("rank " + std::to_string(rank) + ": allreduce called with different lengths across ranks");
    }
    std::copy(result_.begin(), result_.end(), values.begin());
  }

  const int size_;
  const std::chrono::milliseconds timeout_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool aborted_ = false;
  std::map<MailKey, std::deque<std::vector<double>>> mail_;
  std::vector<std::vector<double>> slots_;
  int arrived_ = 0;
  std::uint64_t generation_ = 0;
  std::vector<double> result_;
  bool mismatch_ = false;
};

class InProcessCommunicator final : public Communicator {
 public:
  InProcessCommunicator(std::shared_ptr<InProcessWorld> world, int rank) : world_(std::move(world)), rank_(rank) {
    if (rank_ < 0 || rank_ >= world_->size()) throw ConfigError("rank id outside the world");
  }

  int rank() const override { return rank_; }
  int size() const override { return world_->size(); }
  BackendKind backend() const override { return BackendKind::InProcess; }

  void halo_exchange(const Decomposition& decomp, Field& f) override {
    if (decomp.rank != rank_) throw std::logic_error("halo_exchange: decomposition belongs to another rank");
    const Index3& n = f.interior();
    for (Face face : kAllFaces) {
      const auto nb = decomp.neighbor(face);
      if (!nb) continue;
      std::vector<double> buffer;
      pack(f, border_box(n, face), buffer);
      counters_.halo_bytes_sent += buffer.size() * sizeof(double);
      ++counters_.halo_messages_sent;
      world_->post(*nb, rank_, opposite(face), std::move(buffer));
    }
    for (Face face : kAllFaces) {
      const auto nb = decomp.neighbor(face);
      if (!nb) continue;
      const std::vector<double> payload = world_->receive(rank_, *nb, face);
      const Box halo = halo_box(n, face);
      if (static_cast<Index>(payload.size()) != halo.count()) {
        throw CommError("rank " + std::to_string(rank_) + ": halo message size mismatch on face " +
                        std::string(face_name(face)));
      }
      unpack(f, halo, payload);
    }
  }

  void allreduce_sum(std::span<double> values) override {
    ++counters_.allreduce_calls;
    world_->allreduce(rank_, values);
  }

 private:
  std::shared_ptr<InProcessWorld> world_;
  int rank_;
};

/// Runs fn(comm) on `ranks` concurrent workers (or inline for one rank with the
/// Serial backend) and rethrows the first failure after all workers joined.
inline void run_ranks(int ranks, const std::function<void(Communicator&)>& fn,
                      std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
  if (ranks == 1) {
    SerialCommunicator comm;
    fn(comm);
    return;
  }
  auto world = std::make_shared<InProcessWorld>(ranks, timeout);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(ranks));
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(ranks));
  for (int r = 0; r < ranks; ++r) {
    workers.emplace_back([&, r] {
      try {
        InProcessCommunicator comm(world, r);
        fn(comm);
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
        world->abort();
      }
    });
  }
  for (auto& w : workers) w.join();
  // Prefer the root cause over the CommErrors of ranks woken by the abort.
  std::exception_ptr first;
  for (const auto& e : errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const CommError&) {
      if (!first) first = e;
    } catch (...) {
      std::rethrow_exception(e);
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace pbicgs
