#include "fedledger/logstore/logstore.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "fedledger/codec/base64.hpp"
#include "fedledger/error.hpp"
#include "fedledger/util/text.hpp"

namespace fedledger::logstore {

namespace {

// Doubles travel as little-endian IEEE-754 hex so save/load round-trips are
// bit-exact.
std::string double_hex(double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  std::vector<std::uint8_t> bytes(8);
  for (int i = 0; i < 8; ++i) {
    bytes[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>((u >> (8 * i)) & 0xff);
  }
  return codec::hex_encode(bytes);
}

double double_from_hex(const std::string& hex) {
  const auto bytes = codec::hex_decode(hex);
  if (bytes.size() != 8) throw Error("double_from_hex: need 16 hex chars");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) {
    u |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i)])
         << (8 * i);
  }
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

std::string record_file_name(int epoch) {
  return "epoch" + zfill(epoch, 5) + ".log";
}

std::string field(const std::string& line, const std::string& key) {
  const std::string prefix = key + "=";
  if (line.rfind(prefix, 0) != 0) {
    throw IntegrityError("log record: expected field " + key);
  }
  return line.substr(prefix.size());
}

}  // namespace

PublishReceipt LogStore::publish(LogRecord record) {
  if (record.worker_id.empty()) {
    throw PreconditionError("publish: empty worker id");
  }
  if (record.epoch_index < 0) {
    throw PreconditionError("publish: negative epoch");
  }
  if (record.payload.empty()) {
    throw PreconditionError("publish: empty payload");
  }
  auto& per_worker = records_[record.worker_id];
  if (per_worker.count(record.epoch_index) != 0) {
    throw PreconditionError("publish: record exists for " + record.worker_id +
                            " epoch " + std::to_string(record.epoch_index));
  }
  record.timestamp = ++clock_;
  record.digest = codec::sha256_hex(record.payload);
  PublishReceipt receipt{record.worker_id, record.epoch_index, record.digest,
                         record.timestamp};
  per_worker[record.epoch_index] = std::move(record);
  return receipt;
}

bool LogStore::has_record(const std::string& worker, int epoch) const {
  const auto it = records_.find(worker);
  return it != records_.end() && it->second.count(epoch) != 0;
}

std::size_t LogStore::size() const {
  std::size_t n = 0;
  for (const auto& [worker, per_worker] : records_) n += per_worker.size();
  return n;
}

std::vector<std::tuple<std::string, int, std::string>> LogStore::index() const {
  std::vector<std::tuple<std::string, int, std::string>> out;
  for (const auto& [worker, per_worker] : records_) {
    for (const auto& [epoch, record] : per_worker) {
      out.emplace_back(worker, epoch, record.digest.hex);
    }
  }
  return out;
}

const LogRecord& LogStore::require(const std::string& worker, int epoch) const {
  const auto it = records_.find(worker);
  if (it == records_.end() || it->second.count(epoch) == 0) {
    throw IntegrityError("log store: missing record for " + worker +
                         " epoch " + std::to_string(epoch));
  }
  return it->second.at(epoch);
}

const AccessGrant& LogStore::grant_access(int claim_id,
                                          const std::string& subject) {
  AccessGrant grant;
  grant.grant_id = "grant" + std::to_string(grants_.size() + 1);
  grant.claim_id = claim_id;
  grant.subject_worker = subject;
  grants_.push_back(grant);
  return grants_.back();
}

std::vector<LogRecord> LogStore::fetch_logs(const std::string& grant_id) {
  for (AccessGrant& grant : grants_) {
    if (grant.grant_id != grant_id) continue;
    if (grant.consumed) {
      throw AccessDeniedError("grant already consumed: " + grant_id);
    }
    grant.consumed = true;  // consume before disclosure
    std::vector<LogRecord> out;
    const auto it = records_.find(grant.subject_worker);
    if (it != records_.end()) {
      for (const auto& [epoch, record] : it->second) out.push_back(record);
    }
    return out;
  }
  throw AccessDeniedError("unknown grant: " + grant_id);
}

std::pair<double, double> LogStore::leave_one_out_eval(
    int epoch, const std::string& exclude_worker, const nn::ModelConfig& arch,
    const Eigen::VectorXf& global_before, fl::AggregatorKind aggregator,
    float eta, const nn::LabeledDataset& validation) const {
  std::map<std::string, Eigen::VectorXf> updates;
  std::map<std::string, std::int64_t> weights;
  for (const auto& [worker, per_worker] : records_) {
    const auto it = per_worker.find(epoch);
    if (it == per_worker.end()) continue;
    if (worker == exclude_worker) continue;
    const LogRecord& record = it->second;
    const std::string text = record.kind == codec::PayloadKind::kSignBits
                                 ? codec::base64_encode(record.payload)
                                 : codec::hex_encode(record.payload);
    updates[worker] =
        codec::decode_payload_text(text, record.kind, record.dim);
    weights[worker] = record.samples;
  }
  if (updates.empty()) {
    throw IntegrityError("leave_one_out_eval: no updates for epoch " +
                         std::to_string(epoch));
  }
  const Eigen::VectorXf increment =
      aggregator == fl::AggregatorKind::kFedAvg
          ? fl::fed_avg_increment(updates, weights, eta)
          : fl::sign_agg_increment(updates, eta);
  nn::Model model;
  model.config = arch;
  model.params = global_before + increment;
  return {nn::eval_accuracy(model, validation),
          nn::eval_loss(model, validation)};
}

void LogStore::save(const std::filesystem::path& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ostringstream manifest;
  for (const auto& [worker, per_worker] : records_) {
    fs::create_directories(dir / worker);
    for (const auto& [epoch, record] : per_worker) {
      std::ofstream out(dir / worker / record_file_name(epoch),
                        std::ios::binary);
      if (!out) {
        throw Error("log store: cannot write record file for " + worker);
      }
      out << "FLLOG1\n"
          << "worker=" << record.worker_id << "\n"
          << "epoch=" << record.epoch_index << "\n"
          << "kind=" << codec::to_string(record.kind) << "\n"
          << "dim=" << record.dim << "\n"
          << "samples=" << record.samples << "\n"
          << "timestamp=" << record.timestamp << "\n"
          << "loo_present=" << (record.loo.present ? 1 : 0) << "\n"
          << "loo_accuracy=" << double_hex(record.loo.accuracy) << "\n"
          << "loo_loss=" << double_hex(record.loo.loss) << "\n"
          << "digest=" << record.digest.hex << "\n"
          << "payload=" << codec::hex_encode(record.payload) << "\n";
      manifest << worker << '\t' << epoch << '\t' << record.digest.hex << '\t'
               << record.timestamp << '\n';
    }
  }
  std::ofstream mf(dir / "MANIFEST", std::ios::binary);
  if (!mf) throw Error("log store: cannot write MANIFEST");
  mf << manifest.str();
}

LogStore LogStore::load(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(dir / "MANIFEST");
  if (!mf) {
    throw IntegrityError("log store: missing MANIFEST in " + dir.string());
  }
  LogStore store;
  std::string line;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    const auto parts = split(line, '\t');
    if (parts.size() != 4) throw IntegrityError("log store: bad MANIFEST line");
    const std::string worker = parts[0];
    const int epoch = static_cast<int>(parse_int(parts[1]));

    std::ifstream in(dir / worker / record_file_name(epoch));
    if (!in) {
      throw IntegrityError("log store: missing record file for " + worker +
                           " epoch " + parts[1]);
    }
    std::string magic;
    std::getline(in, magic);
    if (magic != "FLLOG1") throw IntegrityError("log store: bad record magic");

    LogRecord record;
    std::string l;
    std::getline(in, l);
    record.worker_id = field(l, "worker");
    std::getline(in, l);
    record.epoch_index = static_cast<int>(parse_int(field(l, "epoch")));
    std::getline(in, l);
    record.kind = codec::payload_kind_from_string(field(l, "kind"));
    std::getline(in, l);
    record.dim = static_cast<Eigen::Index>(parse_int(field(l, "dim")));
    std::getline(in, l);
    record.samples = parse_int(field(l, "samples"));
    std::getline(in, l);
    record.timestamp = parse_int(field(l, "timestamp"));
    std::getline(in, l);
    record.loo.present = parse_int(field(l, "loo_present")) != 0;
    std::getline(in, l);
    record.loo.accuracy = double_from_hex(field(l, "loo_accuracy"));
    std::getline(in, l);
    record.loo.loss = double_from_hex(field(l, "loo_loss"));
    std::getline(in, l);
    record.digest.hex = field(l, "digest");
    std::getline(in, l);
    record.payload = codec::hex_decode(field(l, "payload"));

    if (record.worker_id != worker || record.epoch_index != epoch) {
      throw IntegrityError("log store: record/manifest mismatch for " + worker);
    }
    if (!(codec::sha256_hex(record.payload) == record.digest) ||
        record.digest.hex != parts[2]) {
      throw IntegrityError("log store: digest mismatch for " + worker +
                           " epoch " + parts[1]);
    }
    store.clock_ = std::max(store.clock_, record.timestamp);
    store.records_[worker][epoch] = std::move(record);
  }
  return store;
}

}  // namespace fedledger::logstore
