#include "fedledger/chain/chaincode.hpp"

#include <algorithm>
#include <set>

#include "fedledger/codec/base64.hpp"
#include "fedledger/error.hpp"
#include "fedledger/util/text.hpp"

namespace fedledger::chain {

namespace {

constexpr const char* kEpochKey = "EPOCH";
const std::vector<std::string> kReservedPrefixes = {
    "RECV", "GLOBAL", "EPOCH", "COUNTER", "CACHE", "MODEL"};

std::string recv_prefix(int epoch) { return "RECV" + zfill(epoch, 5) + ":"; }

std::string recv_key(int epoch, const std::string& worker) {
  return recv_prefix(epoch) + worker;
}

std::string counter_key(int epoch) { return "COUNTER" + zfill(epoch, 5); }

std::string cache_prefix(const std::string& worker, int epoch) {
  return "CACHE:" + worker + ":" + zfill(epoch, 5) + ":";
}

std::string model_key(int epoch) { return "MODEL" + zfill(epoch, 5); }

std::string float_hex(float v) {
  Eigen::VectorXf one(1);
  one[0] = v;
  return codec::hex_encode(codec::serialize_float32(one));
}

// Shard value: FLB1|worker|epoch|batch|kind|dim|chunks|samples|payload.
// The pipe never appears in worker ids (charset-checked at setup) nor in
// base64/hex payload text, so splitting is unambiguous.
struct ShardHeader {
  std::string worker;
  int epoch = 0;
  int batch = 0;
  codec::PayloadKind kind = codec::PayloadKind::kFloat32;
  Eigen::Index dim = 0;
  int chunks = 0;
  std::int64_t samples = 0;
  std::string payload;
};

std::string make_shard_value(const ShardHeader& h) {
  return "FLB1|" + h.worker + "|" + std::to_string(h.epoch) + "|" +
         std::to_string(h.batch) + "|" + codec::to_string(h.kind) + "|" +
         std::to_string(h.dim) + "|" + std::to_string(h.chunks) + "|" +
         std::to_string(h.samples) + "|" + h.payload;
}

ShardHeader parse_shard_value(const std::string& value) {
  const auto parts = split(value, '|');
  if (parts.size() != 9 || parts[0] != "FLB1") {
    throw Error("malformed shard value");
  }
  ShardHeader h;
  h.worker = parts[1];
  h.epoch = static_cast<int>(parse_int(parts[2]));
  h.batch = static_cast<int>(parse_int(parts[3]));
  h.kind = codec::payload_kind_from_string(parts[4]);
  h.dim = static_cast<Eigen::Index>(parse_int(parts[5]));
  h.chunks = static_cast<int>(parse_int(parts[6]));
  h.samples = parse_int(parts[7]);
  h.payload = parts[8];
  return h;
}

// Epoch header: FLE1|epoch|open-or-closed|worker,worker,...
struct EpochHeader {
  int epoch = -1;
  bool open = false;
  std::vector<std::string> workers;
};

std::string make_epoch_value(int epoch, bool open,
                             const std::vector<std::string>& workers) {
  return "FLE1|" + std::to_string(epoch) + "|" + (open ? "open" : "closed") +
         "|" + join(workers, ',');
}

EpochHeader parse_epoch_value(const std::string& value) {
  const auto parts = split(value, '|');
  if (parts.size() != 4 || parts[0] != "FLE1") {
    throw Error("malformed epoch header");
  }
  EpochHeader h;
  h.epoch = static_cast<int>(parse_int(parts[1]));
  if (parts[2] == "open") {
    h.open = true;
  } else if (parts[2] == "closed") {
    h.open = false;
  } else {
    throw Error("malformed epoch status");
  }
  if (!parts[3].empty()) h.workers = split(parts[3], ',');
  return h;
}

// Global value: FLG1|epoch|aggregator|eta-hex|dim|payload (float32 hex).
std::string make_global_value(int epoch, fl::AggregatorKind kind, float eta,
                              const Eigen::VectorXf& increment) {
  return "FLG1|" + std::to_string(epoch) + "|" + fl::to_string(kind) + "|" +
         float_hex(eta) + "|" + std::to_string(increment.size()) + "|" +
         codec::hex_encode(codec::serialize_float32(increment));
}

}  // namespace

FlChaincode::FlChaincode(Ledger& ledger, FlChainConfig config)
    : ledger_(ledger), config_(std::move(config)) {
  if (config_.dim < 1) throw PreconditionError("chaincode: dim must be >= 1");
  if (config_.chunk_chars < 1) {
    throw PreconditionError("chaincode: chunk_chars must be >= 1");
  }
  if (config_.drain_retry_limit < 1) {
    throw PreconditionError("chaincode: drain_retry_limit must be >= 1");
  }
  if (config_.server_id.empty()) {
    throw PreconditionError("chaincode: server id required");
  }
}

std::string FlChaincode::worker_channel(const std::string& worker) {
  return "ch:" + worker;
}

std::string FlChaincode::shard_key(const std::string& worker, int batch_index) {
  return worker + zfill(batch_index + 1, 5);
}

std::string FlChaincode::global_key(int epoch) {
  return "GLOBAL" + zfill(epoch, 5);
}

std::int64_t FlChaincode::payload_text_length() const {
  if (config_.kind == codec::PayloadKind::kSignBits) {
    const std::int64_t bytes = (config_.dim + 7) / 8;
    return 4 * ((bytes + 2) / 3);
  }
  return static_cast<std::int64_t>(config_.dim) * 8;
}

int FlChaincode::expected_chunks() const {
  const std::int64_t len = payload_text_length();
  return static_cast<int>((len + config_.chunk_chars - 1) / config_.chunk_chars);
}

void FlChaincode::setup(
    const std::map<std::string, std::string>& worker_credentials) {
  std::set<std::string> agg_members{config_.server_id};
  for (const auto& [worker, credential] : worker_credentials) {
    if (worker.empty()) throw PreconditionError("chaincode: empty worker id");
    for (char c : worker) {
      const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                      (c >= '0' && c <= '9') || c == '_' || c == '-';
      if (!ok) {
        throw PreconditionError("chaincode: worker id has invalid chars: " +
                                worker);
      }
    }
    for (const auto& reserved : kReservedPrefixes) {
      if (worker.rfind(reserved, 0) == 0) {
        throw PreconditionError("chaincode: worker id collides with key space: " +
                                worker);
      }
    }
    ledger_.register_worker(worker, credential);
    agg_members.insert(worker);
  }
  ledger_.register_worker(config_.server_id, config_.server_credential);
  ledger_.create_channel(kAggChannel, agg_members);
  ledger_.create_channel(kCacheChannel, agg_members);
  for (const auto& [worker, credential] : worker_credentials) {
    ledger_.create_channel(worker_channel(worker),
                           {worker, config_.server_id});
  }
}

void FlChaincode::begin_epoch(int epoch,
                              const std::vector<std::string>& expected) {
  if (expected.empty()) {
    throw PreconditionError("begin_epoch: no expected workers");
  }
  std::vector<std::string> workers = expected;
  std::sort(workers.begin(), workers.end());
  if (std::adjacent_find(workers.begin(), workers.end()) != workers.end()) {
    throw PreconditionError("begin_epoch: duplicate worker id");
  }
  TxRequest req;
  req.worker = config_.server_id;
  req.credential = config_.server_credential;
  req.label = "begin-epoch";
  req.program = [epoch, workers](TxContext& ctx) {
    const auto current = ctx.get(kEpochKey);
    if (current) {
      EpochHeader h = parse_epoch_value(*current);
      if (h.open) ctx.abort("previous epoch still open");
      if (epoch != h.epoch + 1) ctx.abort("epoch indices must be dense");
    } else if (epoch != 0) {
      ctx.abort("first epoch must be 0");
    }
    ctx.put(kEpochKey, make_epoch_value(epoch, true, workers));
  };
  const TxResult res = ledger_.submit(kAggChannel, req);
  if (res.status != TxStatus::kCommitted) {
    throw PreconditionError("begin_epoch: " + res.error);
  }
}

EpochState FlChaincode::state() const {
  EpochState st;
  const auto value = ledger_.latest(kAggChannel, kEpochKey);
  if (!value) return st;
  const EpochHeader h = parse_epoch_value(*value);
  st.epoch = h.epoch;
  st.open = h.open;
  st.expected = h.workers;
  for (const auto& [key, recv] : ledger_.scan_prefix(kAggChannel,
                                                     recv_prefix(h.epoch))) {
    st.received.push_back(key.substr(recv_prefix(h.epoch).size()));
  }
  std::sort(st.received.begin(), st.received.end());
  st.upload_counter = static_cast<int>(st.received.size());
  st.aggregation_enabled = st.open && st.received == st.expected;
  return st;
}

TxRequest FlChaincode::upload_request(const std::string& worker,
                                      const std::string& credential,
                                      const codec::WireBatch& shard,
                                      int total_chunks, std::int64_t samples,
                                      bool force_conflict) const {
  ShardHeader h;
  h.worker = shard.worker_id;
  h.epoch = shard.epoch_index;
  h.batch = shard.batch_index;
  h.kind = shard.kind;
  h.dim = config_.dim;
  h.chunks = total_chunks;
  h.samples = samples;
  h.payload = shard.payload;

  const FlChainConfig cfg = config_;
  const std::int64_t total_len = payload_text_length();
  const int want_chunks = expected_chunks();
  const std::string key = shard_key(shard.worker_id, shard.batch_index);
  const std::string marker = recv_key(shard.epoch_index, shard.worker_id);
  const std::string counter = counter_key(shard.epoch_index);

  TxRequest req;
  req.worker = worker;
  req.credential = credential;
  req.label = "upload-batch:" + key;
  req.force_conflict = force_conflict;
  req.program = [h, cfg, total_len, want_chunks, key, marker,
                 counter](TxContext& ctx) {
    const auto epoch_value = ctx.get(kEpochKey);
    if (!epoch_value) ctx.abort("no epoch open");
    const EpochHeader eh = parse_epoch_value(*epoch_value);
    if (!eh.open || eh.epoch != h.epoch) {
      ctx.abort("epoch " + std::to_string(h.epoch) + " not open for upload");
    }
    if (std::find(eh.workers.begin(), eh.workers.end(), h.worker) ==
        eh.workers.end()) {
      ctx.abort("worker " + h.worker + " not selected this epoch");
    }
    if (ctx.get(marker)) {
      ctx.abort("duplicate upload by " + h.worker + " in epoch " +
                std::to_string(h.epoch));
    }
    // Integrity checks: declared type, dim and the chunk-size arithmetic.
    if (h.kind != cfg.kind) ctx.abort("payload type mismatch");
    if (h.dim != cfg.dim) ctx.abort("payload dim mismatch");
    if (h.chunks != want_chunks) ctx.abort("declared chunk count mismatch");
    if (h.batch < 0 || h.batch >= h.chunks) ctx.abort("batch index out of range");
    const std::int64_t expect_len =
        h.batch + 1 < h.chunks
            ? cfg.chunk_chars
            : total_len - static_cast<std::int64_t>(h.chunks - 1) *
                              cfg.chunk_chars;
    if (static_cast<std::int64_t>(h.payload.size()) != expect_len) {
      ctx.abort("payload size mismatch for " + key);
    }
    if (cfg.shared_counter) {
      const auto c = ctx.get(counter);
      const std::int64_t next = (c ? parse_int(*c) : 0) + 1;
      ctx.put(counter, std::to_string(next));
    }
    ctx.put(key, make_shard_value(h));
  };
  return req;
}

TxResult FlChaincode::upload_batch(const std::string& worker,
                                   const std::string& credential,
                                   const codec::WireBatch& shard,
                                   int total_chunks, std::int64_t samples,
                                   bool force_conflict) {
  return ledger_.submit(kAggChannel,
                        upload_request(worker, credential, shard, total_chunks,
                                       samples, force_conflict));
}

TxResult FlChaincode::cache_put(const std::string& worker,
                                const std::string& credential,
                                const codec::WireBatch& shard, int total_chunks,
                                std::int64_t samples) {
  ShardHeader h;
  h.worker = shard.worker_id;
  h.epoch = shard.epoch_index;
  h.batch = shard.batch_index;
  h.kind = shard.kind;
  h.dim = config_.dim;
  h.chunks = total_chunks;
  h.samples = samples;
  h.payload = shard.payload;
  const std::string key =
      cache_prefix(shard.worker_id, shard.epoch_index) +
      zfill(shard.batch_index + 1, 5);
  TxRequest req;
  req.worker = worker;
  req.credential = credential;
  req.label = "cache-put:" + key;
  req.program = [key, value = make_shard_value(h)](TxContext& ctx) {
    ctx.put(key, value);
  };
  const TxResult res = ledger_.submit(kCacheChannel, req);
  if (res.status != TxStatus::kCommitted) {
    throw TransportError("cache_put failed: " + res.error);
  }
  return res;
}

std::vector<TxResult> FlChaincode::cache_drain(const std::string& worker,
                                               const std::string& credential,
                                               int epoch, Scheduler& scheduler) {
  std::vector<TxResult> out;
  // Keys are zero-padded, so scan order is batch order.
  const auto cached = ledger_.scan_prefix(kCacheChannel,
                                          cache_prefix(worker, epoch));
  for (const auto& [key, value] : cached) {
    const ShardHeader h = parse_shard_value(value);
    codec::WireBatch shard;
    shard.worker_id = h.worker;
    shard.epoch_index = h.epoch;
    shard.batch_index = h.batch;
    shard.payload = h.payload;
    shard.kind = h.kind;

    bool committed = false;
    for (int attempt = 1; attempt <= config_.drain_retry_limit; ++attempt) {
      const TxResult res = upload_batch(worker, credential, shard, h.chunks,
                                        h.samples, scheduler.inject_conflict());
      out.push_back(res);
      if (res.status == TxStatus::kCommitted) {
        committed = true;
        break;
      }
      if (res.status == TxStatus::kRejected) {
        throw TransportError("cache drain rejected: " + res.error);
      }
    }
    if (!committed) {
      throw TransportError("cache drain retry limit reached for " + key);
    }

    TxRequest drop;
    drop.worker = worker;
    drop.credential = credential;
    drop.label = "cache-del:" + key;
    drop.program = [key = key](TxContext& ctx) { ctx.del(key); };
    out.push_back(ledger_.submit(kCacheChannel, drop));
  }
  return out;
}

TxResult FlChaincode::complete_upload(const std::string& worker,
                                      const std::string& credential, int epoch,
                                      int total_chunks, std::int64_t samples) {
  const std::string marker = recv_key(epoch, worker);
  TxRequest req;
  req.worker = worker;
  req.credential = credential;
  req.label = "complete-upload:" + worker;
  req.program = [worker, epoch, total_chunks, samples, marker](TxContext& ctx) {
    const auto epoch_value = ctx.get(kEpochKey);
    if (!epoch_value) ctx.abort("no epoch open");
    const EpochHeader eh = parse_epoch_value(*epoch_value);
    if (!eh.open || eh.epoch != epoch) ctx.abort("epoch not open");
    if (std::find(eh.workers.begin(), eh.workers.end(), worker) ==
        eh.workers.end()) {
      ctx.abort("worker " + worker + " not selected this epoch");
    }
    if (ctx.get(marker)) ctx.abort("duplicate completion by " + worker);
    for (int b = 0; b < total_chunks; ++b) {
      const auto value = ctx.get(shard_key(worker, b));
      if (!value) {
        ctx.abort("missing shard " + shard_key(worker, b));
      }
      const ShardHeader h = parse_shard_value(*value);
      if (h.worker != worker || h.epoch != epoch || h.batch != b) {
        ctx.abort("stale shard " + shard_key(worker, b));
      }
    }
    ctx.put(marker, std::to_string(total_chunks) + "|" +
                        std::to_string(samples));
  };
  return ledger_.submit(kAggChannel, req);
}

UploadOutcome FlChaincode::upload_params(const std::string& worker,
                                         const std::string& credential,
                                         int epoch, const Eigen::VectorXf& delta,
                                         std::int64_t samples,
                                         Scheduler& scheduler) {
  if (delta.size() != config_.dim) {
    throw ShapeError("upload_params: delta dim " + std::to_string(delta.size()) +
                     " != configured " + std::to_string(config_.dim));
  }
  if (samples < 1) throw PreconditionError("upload_params: samples must be >= 1");

  UploadOutcome out;
  const std::string text = codec::payload_text(delta, config_.kind);
  const auto shards =
      codec::chunk(text, config_.chunk_chars, worker, epoch, config_.kind);
  const int n = static_cast<int>(shards.size());

  const auto order = scheduler.job_order(shards.size());
  std::vector<const codec::WireBatch*> to_cache;
  std::size_t cursor = 0;
  while (cursor < order.size()) {
    std::vector<TxRequest> group;
    std::vector<std::size_t> jobs;
    int size = scheduler.next_group_size();
    while (size-- > 0 && cursor < order.size()) {
      const std::size_t j = order[cursor++];
      jobs.push_back(j);
      group.push_back(upload_request(worker, credential, shards[j], n, samples,
                                     scheduler.inject_conflict()));
    }
    const auto results = ledger_.submit_concurrent(kAggChannel, group);
    for (std::size_t i = 0; i < results.size(); ++i) {
      out.txs.push_back(results[i]);
      switch (results[i].status) {
        case TxStatus::kCommitted:
          ++out.committed;
          break;
        case TxStatus::kMvccConflict:
          ++out.conflicts;
          to_cache.push_back(&shards[jobs[i]]);
          break;
        case TxStatus::kRejected:
          ++out.rejected;
          break;
      }
    }
  }

  if (out.rejected > 0) return out;  // duplicate or malformed upload

  for (const codec::WireBatch* shard : to_cache) {
    out.txs.push_back(cache_put(worker, credential, *shard, n, samples));
    ++out.cached;
  }
  if (!to_cache.empty()) {
    const auto drained = cache_drain(worker, credential, epoch, scheduler);
    for (const TxResult& res : drained) {
      if (res.status == TxStatus::kCommitted &&
          res.label.rfind("upload-batch:", 0) == 0) {
        ++out.committed;
      }
      out.txs.push_back(res);
    }
  }

  const TxResult done = complete_upload(worker, credential, epoch, n, samples);
  out.txs.push_back(done);
  if (done.status != TxStatus::kCommitted) {
    throw IntegrityError("upload completion failed for " + worker + ": " +
                         done.error);
  }
  return out;
}

Eigen::VectorXf FlChaincode::aggregate(fl::AggregatorKind kind, float eta) {
  const EpochState st = state();
  if (!st.aggregation_enabled) {
    throw PreconditionError(
        "aggregate: counter gate not satisfied (" +
        std::to_string(st.upload_counter) + "/" +
        std::to_string(st.expected.size()) + " received)");
  }

  const FlChainConfig cfg = config_;
  Eigen::VectorXf increment;
  TxRequest req;
  req.worker = config_.server_id;
  req.credential = config_.server_credential;
  req.label = "aggregate:" + std::to_string(st.epoch);
  req.program = [&increment, cfg, kind, eta](TxContext& ctx) {
    const auto epoch_value = ctx.get(kEpochKey);
    if (!epoch_value) ctx.abort("no epoch open");
    const EpochHeader eh = parse_epoch_value(*epoch_value);
    if (!eh.open) ctx.abort("epoch already closed");

    std::vector<std::string> expected = eh.workers;
    std::sort(expected.begin(), expected.end());
    std::map<std::string, std::pair<int, std::int64_t>> receipts;
    for (const auto& [key, value] : ctx.scan_prefix(recv_prefix(eh.epoch))) {
      const auto fields = split(value, '|');
      if (fields.size() != 2) ctx.abort("malformed receipt " + key);
      receipts[key.substr(recv_prefix(eh.epoch).size())] = {
          static_cast<int>(parse_int(fields[0])), parse_int(fields[1])};
    }
    std::vector<std::string> received;
    for (const auto& [worker, meta] : receipts) received.push_back(worker);
    if (received != expected) {
      ctx.abort("aggregation gate: received set != expected set");
    }

    std::map<std::string, Eigen::VectorXf> updates;
    std::map<std::string, std::int64_t> weights;
    for (const auto& [worker, meta] : receipts) {
      const auto& [chunks, samples] = meta;
      std::string text;
      for (int b = 0; b < chunks; ++b) {
        const auto value = ctx.get(shard_key(worker, b));
        if (!value) {
          ctx.abort("missing shard: worker " + worker + " batch " +
                    std::to_string(b));
        }
        const ShardHeader h = parse_shard_value(*value);
        if (h.worker != worker || h.epoch != eh.epoch || h.batch != b ||
            h.kind != cfg.kind || h.dim != cfg.dim || h.chunks != chunks) {
          ctx.abort("inconsistent shard: worker " + worker + " batch " +
                    std::to_string(b));
        }
        text += h.payload;
      }
      updates[worker] = codec::decode_payload_text(text, cfg.kind, cfg.dim);
      weights[worker] = samples;
    }

    increment = kind == fl::AggregatorKind::kFedAvg
                    ? fl::fed_avg_increment(updates, weights, eta)
                    : fl::sign_agg_increment(updates, eta);
    ctx.put(global_key(eh.epoch),
            make_global_value(eh.epoch, kind, eta, increment));
    ctx.put(kEpochKey, make_epoch_value(eh.epoch, false, eh.workers));
  };

  const TxResult res = ledger_.submit(kAggChannel, req);
  if (res.status != TxStatus::kCommitted) {
    throw IntegrityError("aggregate: " + res.error);
  }
  const AggregationEvent event{st.epoch, global_key(st.epoch), res.commit_tick};
  for (const auto& fn : subscribers_) fn(event);
  return increment;
}

Eigen::VectorXf FlChaincode::read_global_increment(int epoch) const {
  const auto value = ledger_.latest(kAggChannel, global_key(epoch));
  if (!value) {
    throw IntegrityError("no aggregation result for epoch " +
                         std::to_string(epoch));
  }
  const auto parts = split(*value, '|');
  if (parts.size() != 6 || parts[0] != "FLG1") {
    throw IntegrityError("malformed aggregation record");
  }
  const Eigen::VectorXf increment =
      codec::deserialize_float32(codec::hex_decode(parts[5]));
  if (increment.size() != static_cast<Eigen::Index>(parse_int(parts[4]))) {
    throw IntegrityError("aggregation record dim mismatch");
  }
  return increment;
}

codec::HashDigest FlChaincode::recompute_worker_hash(const std::string& worker,
                                                     int epoch) const {
  const auto receipt = ledger_.latest(kAggChannel, recv_key(epoch, worker));
  if (!receipt) {
    throw IntegrityError("no completed upload: worker " + worker + " epoch " +
                         std::to_string(epoch));
  }
  const int chunks = static_cast<int>(parse_int(split(*receipt, '|')[0]));
  std::string text;
  for (int b = 0; b < chunks; ++b) {
    const auto* history =
        ledger_.key_history(kAggChannel, shard_key(worker, b));
    bool found = false;
    if (history != nullptr) {
      for (auto it = history->rbegin(); it != history->rend(); ++it) {
        if (it->deleted) continue;
        const ShardHeader h = parse_shard_value(it->value);
        if (h.epoch == epoch && h.worker == worker && h.batch == b) {
          text += h.payload;
          found = true;
          break;
        }
      }
    }
    if (!found) {
      throw IntegrityError("missing shard: worker " + worker + " batch " +
                           std::to_string(b) + " epoch " +
                           std::to_string(epoch));
    }
  }
  return codec::sha256_hex(
      codec::payload_bytes_from_text(text, config_.kind, config_.dim));
}

void FlChaincode::announce_model(int epoch, const codec::HashDigest& digest) {
  const EpochState st = state();
  for (const auto& worker : st.expected) {
    TxRequest req;
    req.worker = config_.server_id;
    req.credential = config_.server_credential;
    req.label = "announce-model:" + worker;
    req.program = [key = model_key(epoch), hex = digest.hex](TxContext& ctx) {
      ctx.put(key, hex);
    };
    const TxResult res = ledger_.submit(worker_channel(worker), req);
    if (res.status != TxStatus::kCommitted) {
      throw TransportError("announce_model failed for " + worker + ": " +
                           res.error);
    }
  }
}

std::optional<std::string> FlChaincode::read_model_announcement(
    const std::string& worker, const std::string& credential, int epoch) {
  std::optional<std::string> seen;
  TxRequest req;
  req.worker = worker;
  req.credential = credential;
  req.label = "read-model";
  req.program = [&seen, key = model_key(epoch)](TxContext& ctx) {
    seen = ctx.get(key);
  };
  const TxResult res = ledger_.submit(worker_channel(worker), req);
  if (res.status != TxStatus::kCommitted) {
    throw AccessDeniedError("read_model_announcement: " + res.error);
  }
  return seen;
}

void FlChaincode::subscribe(std::function<void(const AggregationEvent&)> fn) {
  subscribers_.push_back(std::move(fn));
}

}  // namespace fedledger::chain
