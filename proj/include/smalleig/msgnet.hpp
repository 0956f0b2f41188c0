#pragma once

// Deterministic in-process message passing for P logical SPMD processes.
//
// Every logical process runs on its own thread. Messages are matched on
// (communicator context, sender, receiver, tag) and delivered FIFO per
// channel; there is no wildcard receive, so the data each rank observes is
// a function of the program alone. Blocking `send` is synchronous (it
// returns once the receiver has taken the message); `isend` is buffered.
// When every live process is blocked and nothing can be delivered, all of
// them fail with a DeadlockError naming the call sites.

#include <array>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <source_location>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "smalleig/procgrid.hpp"

namespace smalleig::msgnet {

enum class Category : std::uint8_t {
  P2PSend,
  Bcast,
  Allreduce,
  ReduceTree,
  PivotTrd,           // TRD pivot column along process rows
  SendYt,             // TRD v redistribution inside process columns
  SendXt,             // TRD y -> x redistribution inside process columns
  MatvecReduce,       // TRD row reduction of the partial matvec
  HouseholderReduce,  // TRD column-norm reduction for the reflector
  MuReduce,           // TRD reduction of the scalar mu
  TridiagAssemble,    // replication of T after the reduction loop
  GatherHit,          // HIT gather of the reflector slices
};
inline constexpr std::size_t kCategoryCount = 12;

std::string_view category_name(Category c);
std::array<Category, kCategoryCount> all_categories();

enum class Scope : std::uint8_t { World = 1, Row = 2, Column = 4, Custom = 8 };

struct Counter {
  std::uint64_t invocations = 0;  // operations this rank took part in
  std::uint64_t messages = 0;     // messages this rank put on the wire
  std::uint64_t bytes = 0;        // payload bytes this rank put on the wire
  std::uint64_t rounds = 0;       // combining rounds led (tree reduction)
  std::uint8_t scopes = 0;        // Scope bits the category was used on

  Counter& operator+=(const Counter& other);
  bool operator==(const Counter&) const = default;
};

class CommStats {
 public:
  Counter& operator[](Category c) { return counters_[static_cast<std::size_t>(c)]; }
  const Counter& operator[](Category c) const {
    return counters_[static_cast<std::size_t>(c)];
  }

  CommStats& operator+=(const CommStats& other);
  /// Counter growth since `earlier`; scopes are kept only where something grew.
  CommStats since(const CommStats& earlier) const;

  std::uint64_t total_messages() const;
  std::uint64_t total_bytes() const;
  std::uint64_t total_invocations() const;

  bool operator==(const CommStats&) const = default;

 private:
  std::array<Counter, kCategoryCount> counters_{};
};

/// Handle of a buffered non-blocking send; complete it exactly once.
struct PendingSend {
  std::uint64_t id = 0;
  int owner = -1;
};

class Fabric;

class Communicator {
 public:
  using Location = std::source_location;

  int rank() const { return my_index_; }
  int size() const { return static_cast<int>(group_.size()); }
  int world_rank() const { return group_[static_cast<std::size_t>(my_index_)]; }
  Scope scope() const { return scope_; }
  std::span<const int> group() const { return group_; }

  void send(int dest, int tag, std::span<const double> payload,
            Category cat = Category::P2PSend,
            Location loc = Location::current());
  std::vector<double> recv(int src, int tag, Category cat = Category::P2PSend,
                           Location loc = Location::current());
  PendingSend isend(int dest, int tag, std::span<const double> payload,
                    Category cat = Category::P2PSend,
                    Location loc = Location::current());
  void wait(PendingSend& pending, Location loc = Location::current());

  std::vector<double> bcast(int root, std::vector<double> payload,
                            Category cat = Category::Bcast,
                            Location loc = Location::current());

  /// Elementwise sum, left-folded in ascending group rank at group rank 0
  /// and broadcast back, so every member holds identical bits.
  std::vector<double> allreduce_sum(std::span<const double> payload,
                                    Category cat = Category::Allreduce,
                                    Location loc = Location::current());
  double allreduce_sum(double value, Category cat = Category::Allreduce,
                       Location loc = Location::current());

  /// Same contract as allreduce_sum, built from point-to-point messages as a
  /// binomial combining tree toward group rank 0 (round r pairs ranks that
  /// differ by 2^r, acc = acc + incoming) followed by a broadcast.
  std::vector<double> reduce_binary_tree(std::span<const double> payload,
                                         Category cat = Category::ReduceTree,
                                         Location loc = Location::current());

  /// Message-free collective assertion that every member passed the same
  /// signature. Throws ProtocolError on the first member that disagrees.
  void check_consistent(std::uint64_t signature, std::string_view what,
                        Location loc = Location::current());

  /// (row communicator: equal my_x, ordered by my_y;
  ///  column communicator: equal my_y, ordered by my_x).
  /// Must be called by every member with the grid of its own rank.
  std::pair<Communicator, Communicator> split(const ProcessGrid& grid) const;

  CommStats& stats() { return *stats_; }
  const CommStats& stats() const { return *stats_; }

 private:
  friend class Fabric;
  Communicator(std::shared_ptr<Fabric> fabric, std::uint64_t context,
               std::vector<int> group, int my_index, Scope scope,
               CommStats* stats);

  std::uint64_t next_collective();
  void note(Category cat, std::uint64_t messages, std::uint64_t bytes);

  std::shared_ptr<Fabric> fabric_;
  std::uint64_t context_ = 0;
  std::vector<int> group_;
  int my_index_ = 0;
  Scope scope_ = Scope::World;
  CommStats* stats_ = nullptr;
  std::uint64_t collective_seq_ = 0;
};

/// Totals the fabric keeps independently of the per-rank counters.
struct WorldTotals {
  /// Collective operations counted once per instance, not per member.
  std::array<std::uint64_t, kCategoryCount> collective_instances{};
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_received = 0;

  std::uint64_t instances(Category c) const {
    return collective_instances[static_cast<std::size_t>(c)];
  }
};

namespace detail {
struct WorldOutcome {
  std::vector<CommStats> rank_stats;
  WorldTotals totals;
};
/// Runs `body` once per rank and rethrows the root-cause failure, if any.
WorldOutcome run_world(int p, const std::function<void(Communicator&)>& body);
}  // namespace detail

template <class R>
struct SpmdRun {
  std::vector<R> results;
  std::vector<CommStats> rank_stats;
  CommStats merged;
  WorldTotals totals;
};

/// Runs `program(world)` on p logical processes and returns each rank's
/// result together with the counters. Errors raised by any rank abort the
/// whole world and are rethrown here (lowest failing rank wins).
template <class Program>
auto spawn_spmd(int p, Program&& program)
    -> SpmdRun<std::invoke_result_t<Program&, Communicator&>> {
  using R = std::invoke_result_t<Program&, Communicator&>;
  std::vector<std::optional<R>> slots(static_cast<std::size_t>(p > 0 ? p : 0));
  auto outcome = detail::run_world(p, [&](Communicator& world) {
    slots[static_cast<std::size_t>(world.rank())].emplace(program(world));
  });
  SpmdRun<R> run;
  run.results.reserve(slots.size());
  for (auto& s : slots) run.results.push_back(std::move(*s));
  run.rank_stats = std::move(outcome.rank_stats);
  for (const auto& s : run.rank_stats) run.merged += s;
  run.totals = outcome.totals;
  return run;
}

}  // namespace smalleig::msgnet
