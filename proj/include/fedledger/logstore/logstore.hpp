#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fedledger/codec/sha256.hpp"
#include "fedledger/codec/wire.hpp"
#include "fedledger/fl/aggregate.hpp"
#include "fedledger/nn/model.hpp"

namespace fedledger::logstore {

struct LooMetrics {
  bool present = false;
  double accuracy = 0.0;
  double loss = 0.0;
};

// One worker's published artifact for one epoch: the canonical wire bytes of
// its update plus the leave-one-out evaluation computed at round end.
// Immutable once published.
struct LogRecord {
  std::string worker_id;
  int epoch_index = 0;
  codec::PayloadKind kind = codec::PayloadKind::kFloat32;
  Eigen::Index dim = 0;
  std::int64_t samples = 0;  // self-declared aggregation weight
  std::vector<std::uint8_t> payload;
  LooMetrics loo;
  std::int64_t timestamp = 0;  // logical publish sequence, assigned by store
  codec::HashDigest digest;    // over payload, assigned by store
};

struct PublishReceipt {
  std::string worker_id;
  int epoch_index = 0;
  codec::HashDigest digest;
  std::int64_t timestamp = 0;
};

// One-time disclosure ticket issued during adjudication.
struct AccessGrant {
  std::string grant_id;
  int claim_id = 0;
  std::string subject_worker;
  bool consumed = false;
};

// Mock secure-cloud store: per-worker locations, immutable records, and
// grant-mediated disclosure. Only fetch_logs ever returns payload bytes to
// a caller; everything else exposes metadata. Persistable as a directory
// tree (one file per record plus a manifest; layout in FORMATS.md).
class LogStore {
 public:
  PublishReceipt publish(LogRecord record);
  bool has_record(const std::string& worker, int epoch) const;
  std::size_t size() const;
  // (worker, epoch, digest-hex) triples, sorted.
  std::vector<std::tuple<std::string, int, std::string>> index() const;

  const AccessGrant& grant_access(int claim_id, const std::string& subject);
  // Consumes the grant and returns every record of its subject, sorted by
  // epoch. A second fetch, or an unknown grant id, is denied.
  std::vector<LogRecord> fetch_logs(const std::string& grant_id);

  // Re-aggregates one epoch's updates without excludeWorker (same
  // aggregator and eta as the run), applies the increment to the epoch's
  // starting parameters and evaluates. Returns (accuracy, loss).
  std::pair<double, double> leave_one_out_eval(
      int epoch, const std::string& exclude_worker,
      const nn::ModelConfig& arch, const Eigen::VectorXf& global_before,
      fl::AggregatorKind aggregator, float eta,
      const nn::LabeledDataset& validation) const;

  void save(const std::filesystem::path& dir) const;
  static LogStore load(const std::filesystem::path& dir);

 private:
  const LogRecord& require(const std::string& worker, int epoch) const;

  std::map<std::string, std::map<int, LogRecord>> records_;
  std::vector<AccessGrant> grants_;
  std::int64_t clock_ = 0;
};

}  // namespace fedledger::logstore
