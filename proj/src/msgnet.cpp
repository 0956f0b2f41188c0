#include "smalleig/msgnet.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "smalleig/error.hpp"

namespace smalleig::msgnet {

std::string_view category_name(Category c) {
  switch (c) {
    case Category::P2PSend: return "p2p_send";
    case Category::Bcast: return "bcast";
    case Category::Allreduce: return "allreduce";
    case Category::ReduceTree: return "reduce_tree";
    case Category::PivotTrd: return "pivot_trd";
    case Category::SendYt: return "send_yt";
    case Category::SendXt: return "send_xt";
    case Category::MatvecReduce: return "matvec_reduce";
    case Category::HouseholderReduce: return "householder_reduce";
    case Category::MuReduce: return "mu_reduce";
    case Category::TridiagAssemble: return "tridiag_assemble";
    case Category::GatherHit: return "gather_hit";
  }
  return "unknown";
}

std::array<Category, kCategoryCount> all_categories() {
  std::array<Category, kCategoryCount> cats{};
  for (std::size_t i = 0; i < kCategoryCount; ++i)
    cats[i] = static_cast<Category>(i);
  return cats;
}

Counter& Counter::operator+=(const Counter& other) {
  invocations += other.invocations;
  messages += other.messages;
  bytes += other.bytes;
  rounds += other.rounds;
  scopes |= other.scopes;
  return *this;
}

CommStats& CommStats::operator+=(const CommStats& other) {
  for (std::size_t i = 0; i < kCategoryCount; ++i)
    counters_[i] += other.counters_[i];
  return *this;
}

CommStats CommStats::since(const CommStats& earlier) const {
  CommStats d;
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    const Counter& a = counters_[i];
    const Counter& b = earlier.counters_[i];
    Counter& c = d.counters_[i];
    c.invocations = a.invocations - b.invocations;
    c.messages = a.messages - b.messages;
    c.bytes = a.bytes - b.bytes;
    c.rounds = a.rounds - b.rounds;
    if (c.invocations || c.messages || c.bytes || c.rounds) c.scopes = a.scopes;
  }
  return d;
}

std::uint64_t CommStats::total_messages() const {
  std::uint64_t t = 0;
  for (const auto& c : counters_) t += c.messages;
  return t;
}

std::uint64_t CommStats::total_bytes() const {
  std::uint64_t t = 0;
  for (const auto& c : counters_) t += c.bytes;
  return t;
}

std::uint64_t CommStats::total_invocations() const {
  std::uint64_t t = 0;
  for (const auto& c : counters_) t += c.invocations;
  return t;
}

namespace {

struct WorldAborted {};

std::string site_of(const std::source_location& loc) {
  std::string_view file = loc.file_name();
  if (auto slash = file.find_last_of('/'); slash != std::string_view::npos)
    file.remove_prefix(slash + 1);
  std::ostringstream os;
  os << file << ':' << loc.line();
  return os.str();
}

// Negative tags are reserved for collectives; user tags must be >= 0.
std::int64_t collective_tag(std::uint64_t seq, int phase) {
  return -1 - static_cast<std::int64_t>(seq * 4 + static_cast<std::uint64_t>(phase));
}

enum class CollectiveOp : int { Bcast, Allreduce, Tree, Consistency };

const char* op_name(CollectiveOp op) {
  switch (op) {
    case CollectiveOp::Bcast: return "bcast";
    case CollectiveOp::Allreduce: return "allreduce_sum";
    case CollectiveOp::Tree: return "reduce_binary_tree";
    case CollectiveOp::Consistency: return "check_consistent";
  }
  return "?";
}

struct Signature {
  CollectiveOp op;
  int root;
  std::int64_t length;  // -1 when the member cannot know it
  std::uint64_t value;
};

}  // namespace

class Fabric : public std::enable_shared_from_this<Fabric> {
 public:
  using Key = std::tuple<std::uint64_t, int, int, std::int64_t>;

  explicit Fabric(int p) : ranks_(static_cast<std::size_t>(p)) {}

  Communicator world(int rank) {
    std::vector<int> group(ranks_.size());
    for (std::size_t i = 0; i < group.size(); ++i) group[i] = static_cast<int>(i);
    return Communicator(shared_from_this(), 0, std::move(group), rank,
                        Scope::World, &ranks_[static_cast<std::size_t>(rank)].stats);
  }

  Communicator derive(const Communicator& parent, int kind, int color,
                      std::vector<int> group, int my_index, Scope scope) {
    std::uint64_t ctx;
    {
      std::lock_guard lock(mu_);
      auto key = std::make_tuple(parent.context_, kind, color);
      auto it = contexts_.find(key);
      if (it == contexts_.end())
        it = contexts_.emplace(key, contexts_.size() + 1).first;
      ctx = it->second;
    }
    return Communicator(shared_from_this(), ctx, std::move(group), my_index,
                        scope, parent.stats_);
  }

  // Buffered deposit. Returns the channel ticket of the message.
  std::uint64_t deposit(const Key& key, std::vector<double> payload) {
    std::lock_guard lock(mu_);
    return deposit_locked(key, std::move(payload));
  }

  void send_sync(const Key& key, std::vector<double> payload, int sender,
                 std::string site) {
    std::unique_lock lock(mu_);
    const std::uint64_t ticket = deposit_locked(key, std::move(payload));
    Waiter w{WaitKind::SyncSend, key, ticket, std::move(site)};
    block(lock, sender, std::move(w));
  }

  std::vector<double> take(const Key& key, int receiver, std::string site) {
    std::unique_lock lock(mu_);
    block(lock, receiver, Waiter{WaitKind::Recv, key, 0, std::move(site)});
    Channel& ch = channels_[key];
    std::vector<double> payload = std::move(ch.queue.front());
    ch.queue.pop_front();
    ++ch.consumed;
    totals_.bytes_received += payload.size() * sizeof(double);
    ++totals_.messages_received;
    // Wake a synchronous sender waiting for this hand-off.
    ranks_[static_cast<std::size_t>(std::get<1>(key))].cv.notify_all();
    return payload;
  }

  std::uint64_t open_pending(int rank) {
    std::lock_guard lock(mu_);
    auto& st = ranks_[static_cast<std::size_t>(rank)];
    const std::uint64_t id = ++st.next_handle;
    st.outstanding.insert(id);
    return id;
  }

  void close_pending(int rank, std::uint64_t id, const std::string& site) {
    std::lock_guard lock(mu_);
    auto& st = ranks_[static_cast<std::size_t>(rank)];
    if (st.outstanding.erase(id) == 0)
      throw ProtocolError("wait on a send handle that is not pending (rank " +
                          std::to_string(rank) + ", " + site + ")");
  }

  /// Validates a collective's arguments against the first member to arrive.
  /// The first arrival also counts the collective instance.
  void check_signature(std::uint64_t ctx, std::uint64_t seq, int group_size,
                       const Signature& sig, Category cat, const std::string& site) {
    std::lock_guard lock(mu_);
    auto key = std::make_pair(ctx, seq);
    auto it = registry_.find(key);
    if (it == registry_.end()) {
      if (sig.op != CollectiveOp::Consistency)
        ++totals_.collective_instances[static_cast<std::size_t>(cat)];
      if (group_size > 1) registry_.emplace(key, Registration{sig, 1});
      return;
    }
    Registration& reg = it->second;
    const Signature& first = reg.sig;
    std::string problem;
    if (first.op != sig.op) {
      problem = std::string("operation mismatch: ") + op_name(first.op) + " vs " +
                op_name(sig.op);
    } else if (first.root != sig.root) {
      problem = "root disagreement: " + std::to_string(first.root) + " vs " +
                std::to_string(sig.root);
    } else if (first.length >= 0 && sig.length >= 0 && first.length != sig.length) {
      problem = "payload length mismatch: " + std::to_string(first.length) +
                " vs " + std::to_string(sig.length);
    } else if (first.value != sig.value) {
      problem = "signature mismatch";
    }
    if (!problem.empty()) {
      registry_.erase(it);
      throw ProtocolError(std::string(op_name(sig.op)) + " " + problem + " (" +
                          site + ")");
    }
    if (++reg.arrivals == group_size) registry_.erase(it);
  }

  void finish(int rank) {
    std::lock_guard lock(mu_);
    ranks_[static_cast<std::size_t>(rank)].done = true;
    check_deadlock_locked();
  }

  void fail(int rank, std::exception_ptr error, bool primary) {
    std::lock_guard lock(mu_);
    auto& st = ranks_[static_cast<std::size_t>(rank)];
    st.done = true;
    if (primary) st.error = std::move(error);
    if (!aborted_) {
      aborted_ = true;
      for (auto& r : ranks_) r.cv.notify_all();
    }
  }

  detail::WorldOutcome teardown() {
    // Deadlock is reported by every blocked rank; other failures by the
    // lowest failing rank.
    if (!deadlock_report_.empty()) throw DeadlockError(deadlock_report_);
    for (auto& r : ranks_)
      if (r.error) std::rethrow_exception(r.error);

    std::ostringstream orphans;
    for (const auto& [key, ch] : channels_) {
      if (!ch.queue.empty())
        orphans << " [" << ch.queue.size() << " message(s) " << std::get<1>(key)
                << "->" << std::get<2>(key) << " tag " << std::get<3>(key) << "]";
    }
    if (!orphans.str().empty())
      throw ProtocolError("orphan messages at teardown:" + orphans.str());
    for (std::size_t r = 0; r < ranks_.size(); ++r)
      if (!ranks_[r].outstanding.empty())
        throw ProtocolError("rank " + std::to_string(r) + " exited with " +
                            std::to_string(ranks_[r].outstanding.size()) +
                            " send handle(s) never waited on");
    if (totals_.bytes_sent != totals_.bytes_received ||
        totals_.messages_sent != totals_.messages_received)
      throw ProtocolError("byte conservation violated at teardown");

    detail::WorldOutcome out;
    out.totals = totals_;
    for (auto& r : ranks_) out.rank_stats.push_back(r.stats);
    return out;
  }

 private:
  enum class WaitKind { None, Recv, SyncSend };
  struct Waiter {
    WaitKind kind = WaitKind::None;
    Key key{};
    std::uint64_t ticket = 0;
    std::string site;
  };
  struct Channel {
    std::deque<std::vector<double>> queue;
    std::uint64_t deposited = 0;
    std::uint64_t consumed = 0;
  };
  struct RankState {
    std::condition_variable cv;
    Waiter waiting;
    bool done = false;
    std::exception_ptr error;
    CommStats stats;
    std::set<std::uint64_t> outstanding;
    std::uint64_t next_handle = 0;
  };
  struct Registration {
    Signature sig;
    int arrivals;
  };

  std::uint64_t deposit_locked(const Key& key, std::vector<double> payload) {
    Channel& ch = channels_[key];
    totals_.bytes_sent += payload.size() * sizeof(double);
    ++totals_.messages_sent;
    ch.queue.push_back(std::move(payload));
    ranks_[static_cast<std::size_t>(std::get<2>(key))].cv.notify_all();
    return ch.deposited++;
  }

  bool can_progress(const Waiter& w) {
    switch (w.kind) {
      case WaitKind::None: return true;
      case WaitKind::Recv: {
        auto it = channels_.find(w.key);
        return it != channels_.end() && !it->second.queue.empty();
      }
      case WaitKind::SyncSend: return channels_[w.key].consumed > w.ticket;
    }
    return true;
  }

  void block(std::unique_lock<std::mutex>& lock, int rank, Waiter w) {
    auto& st = ranks_[static_cast<std::size_t>(rank)];
    if (aborted_) throw_aborted();
    if (can_progress(w)) return;
    st.waiting = std::move(w);
    check_deadlock_locked();
    st.cv.wait(lock, [&] { return aborted_ || can_progress(st.waiting); });
    const bool ok = can_progress(st.waiting);
    st.waiting = Waiter{};
    if (!ok || aborted_) throw_aborted();
  }

  [[noreturn]] void throw_aborted() {
    if (!deadlock_report_.empty()) throw DeadlockError(deadlock_report_);
    throw WorldAborted{};
  }

  void check_deadlock_locked() {
    if (aborted_) return;
    bool any_live = false;
    for (auto& r : ranks_) {
      if (r.done) continue;
      any_live = true;
      if (r.waiting.kind == WaitKind::None || can_progress(r.waiting)) return;
    }
    if (!any_live) return;
    std::ostringstream os;
    os << "deadlock: every live process is blocked";
    for (std::size_t i = 0; i < ranks_.size(); ++i) {
      const auto& r = ranks_[i];
      if (r.done) continue;
      const auto& [ctx, src, dst, tag] = r.waiting.key;
      os << "\n  rank " << i << ": "
         << (r.waiting.kind == WaitKind::Recv ? "recv from " : "send to ")
         << (r.waiting.kind == WaitKind::Recv ? src : dst) << " (context " << ctx
         << ", tag " << tag << ") at " << r.waiting.site;
    }
    deadlock_report_ = os.str();
    aborted_ = true;
    for (auto& r : ranks_) r.cv.notify_all();
  }

  std::mutex mu_;
  std::vector<RankState> ranks_;
  std::map<Key, Channel> channels_;
  std::map<std::pair<std::uint64_t, std::uint64_t>, Registration> registry_;
  std::map<std::tuple<std::uint64_t, int, int>, std::uint64_t> contexts_;
  WorldTotals totals_;
  bool aborted_ = false;
  std::string deadlock_report_;

  friend class Communicator;
};

Communicator::Communicator(std::shared_ptr<Fabric> fabric, std::uint64_t context,
                           std::vector<int> group, int my_index, Scope scope,
                           CommStats* stats)
    : fabric_(std::move(fabric)),
      context_(context),
      group_(std::move(group)),
      my_index_(my_index),
      scope_(scope),
      stats_(stats) {}

std::uint64_t Communicator::next_collective() { return collective_seq_++; }

void Communicator::note(Category cat, std::uint64_t messages, std::uint64_t bytes) {
  Counter& c = (*stats_)[cat];
  ++c.invocations;
  c.messages += messages;
  c.bytes += bytes;
  c.scopes |= static_cast<std::uint8_t>(scope_);
}

namespace {
void check_member(const Communicator& comm, int r, const char* what) {
  if (r < 0 || r >= comm.size())
    throw UsageError(std::string(what) + " rank " + std::to_string(r) +
                     " outside communicator of size " + std::to_string(comm.size()));
}
void check_tag(int tag) {
  if (tag < 0) throw UsageError("user tags must be non-negative");
}
void check_finite(std::span<const double> payload) {
  for (double v : payload)
    if (!std::isfinite(v)) throw UsageError("payload contains a non-finite value");
}
}  // namespace

void Communicator::send(int dest, int tag, std::span<const double> payload,
                        Category cat, Location loc) {
  check_member(*this, dest, "destination");
  check_tag(tag);
  check_finite(payload);
  note(cat, 1, payload.size_bytes());
  fabric_->send_sync({context_, world_rank(), group_[static_cast<std::size_t>(dest)], tag},
                     std::vector<double>(payload.begin(), payload.end()), world_rank(),
                     "send at " + site_of(loc));
}

std::vector<double> Communicator::recv(int src, int tag, Category, Location loc) {
  check_member(*this, src, "source");
  check_tag(tag);
  return fabric_->take({context_, group_[static_cast<std::size_t>(src)], world_rank(), tag},
                       world_rank(), "recv at " + site_of(loc));
}

PendingSend Communicator::isend(int dest, int tag, std::span<const double> payload,
                                Category cat, Location) {
  check_member(*this, dest, "destination");
  check_tag(tag);
  check_finite(payload);
  note(cat, 1, payload.size_bytes());
  fabric_->deposit({context_, world_rank(), group_[static_cast<std::size_t>(dest)], tag},
                   std::vector<double>(payload.begin(), payload.end()));
  return PendingSend{fabric_->open_pending(world_rank()), world_rank()};
}

void Communicator::wait(PendingSend& pending, Location loc) {
  if (pending.owner != world_rank())
    throw ProtocolError("wait on a send handle owned by another process (" +
                        site_of(loc) + ")");
  fabric_->close_pending(world_rank(), pending.id, site_of(loc));
}

std::vector<double> Communicator::bcast(int root, std::vector<double> payload,
                                        Category cat, Location loc) {
  check_member(*this, root, "root");
  const std::uint64_t seq = next_collective();
  const std::string site = "bcast at " + site_of(loc);
  fabric_->check_signature(
      context_, seq, size(),
      Signature{CollectiveOp::Bcast, root,
                rank() == root ? static_cast<std::int64_t>(payload.size()) : -1, 0},
      cat, site);
  const std::int64_t tag = collective_tag(seq, 0);
  const int root_world = group_[static_cast<std::size_t>(root)];
  if (rank() == root) {
    check_finite(payload);
    const auto others = static_cast<std::uint64_t>(size() - 1);
    note(cat, others, others * payload.size() * sizeof(double));
    for (int r = 0; r < size(); ++r)
      if (r != root) fabric_->deposit({context_, root_world, group_[static_cast<std::size_t>(r)], tag}, payload);
    return payload;
  }
  note(cat, 0, 0);
  return fabric_->take({context_, root_world, world_rank(), tag}, world_rank(), site);
}

std::vector<double> Communicator::allreduce_sum(std::span<const double> payload,
                                                Category cat, Location loc) {
  const std::uint64_t seq = next_collective();
  const std::string site = "allreduce_sum at " + site_of(loc);
  fabric_->check_signature(
      context_, seq, size(),
      Signature{CollectiveOp::Allreduce, 0, static_cast<std::int64_t>(payload.size()), 0},
      cat, site);
  check_finite(payload);
  const std::size_t bytes = payload.size_bytes();
  const int leader = group_[0];
  if (rank() != 0) {
    note(cat, 1, bytes);
    fabric_->deposit({context_, world_rank(), leader, collective_tag(seq, 0)},
                     std::vector<double>(payload.begin(), payload.end()));
    return fabric_->take({context_, leader, world_rank(), collective_tag(seq, 1)},
                         world_rank(), site);
  }
  std::vector<double> acc(payload.begin(), payload.end());
  for (int r = 1; r < size(); ++r) {
    auto in = fabric_->take({context_, group_[static_cast<std::size_t>(r)], world_rank(),
                             collective_tag(seq, 0)},
                            world_rank(), site);
    if (in.size() != acc.size()) throw ProtocolError("allreduce_sum length mismatch");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = acc[i] + in[i];
  }
  const auto others = static_cast<std::uint64_t>(size() - 1);
  note(cat, others, others * bytes);
  for (int r = 1; r < size(); ++r)
    fabric_->deposit({context_, leader, group_[static_cast<std::size_t>(r)], collective_tag(seq, 1)}, acc);
  return acc;
}

double Communicator::allreduce_sum(double value, Category cat, Location loc) {
  return allreduce_sum(std::span<const double>(&value, 1), cat, loc)[0];
}

std::vector<double> Communicator::reduce_binary_tree(std::span<const double> payload,
                                                     Category cat, Location loc) {
  const std::uint64_t seq = next_collective();
  const std::string site = "reduce_binary_tree at " + site_of(loc);
  fabric_->check_signature(
      context_, seq, size(),
      Signature{CollectiveOp::Tree, 0, static_cast<std::int64_t>(payload.size()), 0}, cat,
      site);
  check_finite(payload);
  const std::size_t bytes = payload.size_bytes();
  const int me = rank();
  std::vector<double> acc(payload.begin(), payload.end());
  std::uint64_t sent = 0;
  std::uint64_t rounds = 0;
  for (int step = 1; step < size(); step *= 2) {
    if (me % (2 * step) == 0) {
      if (me + step < size()) {
        auto in = fabric_->take({context_, group_[static_cast<std::size_t>(me + step)],
                                 world_rank(), collective_tag(seq, 0)},
                                world_rank(), site);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = acc[i] + in[i];
        ++rounds;
      }
    } else {
      fabric_->deposit({context_, world_rank(), group_[static_cast<std::size_t>(me - step)],
                        collective_tag(seq, 0)},
                       acc);
      ++sent;
      break;
    }
  }
  if (me == 0) {
    for (int r = 1; r < size(); ++r)
      fabric_->deposit({context_, world_rank(), group_[static_cast<std::size_t>(r)],
                        collective_tag(seq, 1)},
                       acc);
    sent += static_cast<std::uint64_t>(size() - 1);
  } else {
    acc = fabric_->take({context_, group_[0], world_rank(), collective_tag(seq, 1)},
                        world_rank(), site);
  }
  note(cat, sent, sent * bytes);
  (*stats_)[cat].rounds += rounds;
  return acc;
}

void Communicator::check_consistent(std::uint64_t signature, std::string_view what,
                                    Location loc) {
  const std::uint64_t seq = next_collective();
  fabric_->check_signature(context_, seq, size(),
                           Signature{CollectiveOp::Consistency, 0, -1, signature},
                           Category::P2PSend,
                           std::string(what) + " at " + site_of(loc));
}

std::pair<Communicator, Communicator> Communicator::split(const ProcessGrid& grid) const {
  if (grid.p_total != size() || grid.rank() != rank())
    throw UsageError("split requires the grid of this rank over the whole communicator");
  std::vector<int> row_group;
  std::vector<int> col_group;
  for (int y = 0; y < grid.p_y; ++y)
    row_group.push_back(group_[static_cast<std::size_t>(grid.rank_of(grid.my_x, y))]);
  for (int x = 0; x < grid.p_x; ++x)
    col_group.push_back(group_[static_cast<std::size_t>(grid.rank_of(x, grid.my_y))]);
  Communicator row = fabric_->derive(*this, 0, grid.my_x, std::move(row_group), grid.my_y,
                                     Scope::Row);
  Communicator col = fabric_->derive(*this, 1, grid.my_y, std::move(col_group), grid.my_x,
                                     Scope::Column);
  return {std::move(row), std::move(col)};
}

namespace detail {

WorldOutcome run_world(int p, const std::function<void(Communicator&)>& body) {
  if (p < 1) throw ConfigError("spawn_spmd needs at least one process");
  auto fabric = std::make_shared<Fabric>(p);
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(p));
  for (int r = 0; r < p; ++r) {
    threads.emplace_back([fabric, r, &body] {
      try {
        Communicator world = fabric->world(r);
        body(world);
        fabric->finish(r);
      } catch (const WorldAborted&) {
        fabric->fail(r, nullptr, false);
      } catch (const DeadlockError&) {
        fabric->fail(r, nullptr, false);
      } catch (...) {
        fabric->fail(r, std::current_exception(), true);
      }
    });
  }
  for (auto& t : threads) t.join();
  return fabric->teardown();
}

}  // namespace detail

}  // namespace smalleig::msgnet
