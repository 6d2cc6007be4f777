#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedledger/chain/ledger.hpp"
#include "fedledger/chain/scheduler.hpp"
#include "fedledger/codec/sha256.hpp"
#include "fedledger/codec/wire.hpp"
#include "fedledger/fl/aggregate.hpp"

namespace fedledger::chain {

// Aggregation chaincode over the simulated ledger.
//
// Channels: "agg" carries the chaincode state (shard keys, receipt markers,
// the epoch header and GLOBAL results), "cache" holds conflict-recovery
// copies, and "ch:<worker>" is the private worker-server channel used for
// model announcements. Shard keys are workerId followed by the 1-based
// batch number zero-padded to 5 digits, so lexicographic order is batch
// order. Value layouts are pinned in FORMATS.md.
struct FlChainConfig {
  codec::PayloadKind kind = codec::PayloadKind::kFloat32;
  Eigen::Index dim = 0;
  int chunk_chars = codec::kDefaultChunkChars;
  // Legacy contention mode: every shard upload also bumps one shared
  // counter key, so concurrent uploads genuinely collide (the behaviour
  // the distinct-key scheme was introduced to fix).
  bool shared_counter = false;
  int drain_retry_limit = 8;
  std::string server_id = "server";
  std::string server_credential = "server-secret";
};

struct AggregationEvent {
  int epoch = 0;
  std::string global_key;
  std::int64_t tick = 0;
};

struct UploadOutcome {
  int committed = 0;
  int conflicts = 0;  // genuine plus injected mvcc conflicts
  int cached = 0;     // shards recovered through the cache chaincode
  int rejected = 0;   // duplicate or malformed shards
  std::vector<TxResult> txs;
};

struct EpochState {
  int epoch = -1;
  bool open = false;
  std::vector<std::string> expected;
  std::vector<std::string> received;  // sorted
  int upload_counter = 0;             // == |received|
  bool aggregation_enabled = false;
};

class FlChaincode {
 public:
  static constexpr const char* kAggChannel = "agg";
  static constexpr const char* kCacheChannel = "cache";

  FlChaincode(Ledger& ledger, FlChainConfig config);

  // Creates the channels and registers credentials. Worker ids must not
  // collide with reserved key prefixes.
  void setup(const std::map<std::string, std::string>& worker_credentials);

  static std::string worker_channel(const std::string& worker);
  static std::string shard_key(const std::string& worker, int batch_index);
  static std::string global_key(int epoch);

  // Server-side epoch control. Epoch indices are dense from 0.
  void begin_epoch(int epoch, const std::vector<std::string>& expected);
  EpochState state() const;

  // Worker-visible upload: one call per parameter vector. Chunking, the
  // scheduler-driven interleaving, cache recovery of conflicted shards and
  // the completion marker all happen inside. samples is the self-declared
  // dataset size carried as aggregation weight.
  UploadOutcome upload_params(const std::string& worker,
                              const std::string& credential, int epoch,
                              const Eigen::VectorXf& delta,
                              std::int64_t samples, Scheduler& scheduler);

  // Single-shard transaction (exposed for contention tests).
  TxResult upload_batch(const std::string& worker, const std::string& credential,
                        const codec::WireBatch& shard, int total_chunks,
                        std::int64_t samples, bool force_conflict = false);
  TxResult cache_put(const std::string& worker, const std::string& credential,
                     const codec::WireBatch& shard, int total_chunks,
                     std::int64_t samples);
  // Re-submits cached shards in batch order until each commits; empty cache
  // is a no-op. Throws TransportError past the retry limit.
  std::vector<TxResult> cache_drain(const std::string& worker,
                                    const std::string& credential, int epoch,
                                    Scheduler& scheduler);
  // Marks the worker received after verifying every declared shard of the
  // epoch is on the ledger.
  TxResult complete_upload(const std::string& worker,
                           const std::string& credential, int epoch,
                           int total_chunks, std::int64_t samples);

  // Counter-gated aggregation: requires every expected worker received.
  // Reassembles all shards, decodes them, computes the increment, stores it
  // under GLOBAL<epoch>, closes the epoch and notifies subscribers.
  Eigen::VectorXf aggregate(fl::AggregatorKind kind, float eta);

  Eigen::VectorXf read_global_increment(int epoch) const;
  // Recomputes a worker's commitment digest from ledger state alone; works
  // for any past epoch via the key history.
  codec::HashDigest recompute_worker_hash(const std::string& worker,
                                          int epoch) const;

  // Model distribution over the per-worker channels: the server announces
  // the digest of the round's starting parameters; the worker reads it back
  // through its own membership.
  void announce_model(int epoch, const codec::HashDigest& digest);
  std::optional<std::string> read_model_announcement(
      const std::string& worker, const std::string& credential, int epoch);

  void subscribe(std::function<void(const AggregationEvent&)> fn);

  // Expected ledger text length of a full payload for this config.
  std::int64_t payload_text_length() const;
  int expected_chunks() const;

 private:
  TxRequest upload_request(const std::string& worker,
                           const std::string& credential,
                           const codec::WireBatch& shard, int total_chunks,
                           std::int64_t samples, bool force_conflict) const;
  std::string shard_value_for_epoch(const std::string& worker, int epoch,
                                    int batch_index) const;

  Ledger& ledger_;
  FlChainConfig config_;
  std::vector<std::function<void(const AggregationEvent&)>> subscribers_;
};

}  // namespace fedledger::chain
