#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace fedledger::chain {

enum class TxStatus { kCommitted, kMvccConflict, kRejected };

std::string to_string(TxStatus status);

// One committed (or historical) value of a key. Versions start at 1 and
// increase by exactly 1 per committed write; version 0 means "never written".
struct VersionedValue {
  std::string value;
  std::int64_t version = 0;
  bool deleted = false;
  std::int64_t tx_seq = 0;   // global commit sequence number
  std::int64_t tick = 0;     // logical time of the commit
};

struct ReadRecord {
  std::string key;
  std::int64_t version = 0;  // version observed at simulation (0 = absent)
};

struct WriteRecord {
  std::string key;
  std::string value;
  bool deleted = false;
  std::int64_t version = 0;  // assigned at commit
};

struct TxResult {
  std::string tx_id;
  std::string channel;
  std::string label;
  TxStatus status = TxStatus::kRejected;
  std::string error;
  std::vector<ReadRecord> reads;
  std::vector<WriteRecord> writes;
  std::int64_t submit_tick = 0;  // when the transaction was simulated
  std::int64_t commit_tick = 0;  // when it committed or was discarded
};

// Transaction program view: reads come from a frozen snapshot and are
// recorded with the version they observed; writes are buffered and only
// become visible if the transaction commits.
class TxContext {
 public:
  // Latest non-deleted value visible in the snapshot; records the read.
  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, std::string value);
  void del(const std::string& key);
  // All snapshot keys with the given prefix (non-deleted); records a read
  // per returned key. Absent keys in the range are not phantom-protected.
  std::vector<std::pair<std::string, std::string>> scan_prefix(
      const std::string& prefix);
  // Aborts the transaction with status "rejected".
  [[noreturn]] void abort(const std::string& reason);

 private:
  friend class Ledger;
  struct Snapshot;
  explicit TxContext(const Snapshot& snap) : snap_(snap) {}
  const Snapshot& snap_;
  std::vector<ReadRecord> reads_;
  std::vector<WriteRecord> writes_;
};

struct TxRequest {
  std::string worker;      // submitting identity
  std::string credential;  // must match the registered credential
  std::string label;       // operation tag for the commit log
  std::function<void(TxContext&)> program;
  // Fault injection for scheduler-driven tests: the transaction simulates
  // normally but is discarded at commit as an mvcc-conflict.
  bool force_conflict = false;
};

// Simulated permissioned ledger: named channels, each an independent
// versioned key-value namespace with its own commit history. Transactions
// follow simulate-then-commit: reads are validated at commit time and any
// version drift discards the transaction as an mvcc-conflict. Commit order
// is the serialization order. A logical tick counter orders all simulate
// and commit events; no wall-clock time enters the state.
class Ledger {
 public:
  // members empty => any registered worker may submit.
  void create_channel(const std::string& channel,
                      std::set<std::string> members = {});
  bool has_channel(const std::string& channel) const;
  void register_worker(const std::string& worker, const std::string& credential);
  bool credential_ok(const std::string& worker,
                     const std::string& credential) const;

  // Simulate and commit one transaction immediately.
  TxResult submit(const std::string& channel, const TxRequest& request);
  // Simulate every request against the same snapshot, then attempt commits
  // in order; later transactions see earlier ones only through read-set
  // validation, so same-snapshot writers of one key conflict.
  std::vector<TxResult> submit_concurrent(const std::string& channel,
                                          const std::vector<TxRequest>& requests);

  // Non-transactional reads of committed state.
  std::optional<std::string> latest(const std::string& channel,
                                    const std::string& key) const;
  std::int64_t latest_version(const std::string& channel,
                              const std::string& key) const;
  const std::vector<VersionedValue>* key_history(const std::string& channel,
                                                 const std::string& key) const;
  std::vector<std::pair<std::string, std::string>> scan_prefix(
      const std::string& channel, const std::string& prefix) const;
  std::vector<std::string> channels() const;

  const std::vector<TxResult>& commit_log() const { return log_; }
  // Line-delimited export: txId, channel, label, status, reads, writes,
  // submit/commit ticks. Values are omitted; they live in the history.
  std::string export_commit_log() const;
  std::int64_t now() const { return tick_; }

 private:
  struct Channel {
    std::set<std::string> members;
    std::map<std::string, std::vector<VersionedValue>> history;
  };

  struct Prepared {
    TxResult result;
    bool runnable = false;
  };

  Prepared simulate(const std::string& channel, const TxRequest& request);
  void commit(Channel& chan, Prepared& prepared, bool force_conflict);

  std::map<std::string, Channel> channels_;
  std::map<std::string, std::string> credentials_;
  std::vector<TxResult> log_;
  std::int64_t tick_ = 0;
  std::int64_t tx_counter_ = 0;
  std::int64_t commit_seq_ = 0;
};

}  // namespace fedledger::chain
