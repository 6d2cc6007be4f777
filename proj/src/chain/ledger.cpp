#include "fedledger/chain/ledger.hpp"

#include <algorithm>
#include <sstream>

#include "fedledger/error.hpp"

namespace fedledger::chain {

namespace {

struct TxAbort {
  std::string reason;
};

}  // namespace

std::string to_string(TxStatus status) {
  switch (status) {
    case TxStatus::kCommitted: return "committed";
    case TxStatus::kMvccConflict: return "mvcc-conflict";
    case TxStatus::kRejected: return "rejected";
  }
  return "unknown";
}

struct TxContext::Snapshot {
  const std::map<std::string, std::vector<VersionedValue>>* history = nullptr;
};

std::optional<std::string> TxContext::get(const std::string& key) {
  const auto it = snap_.history->find(key);
  if (it == snap_.history->end() || it->second.empty()) {
    reads_.push_back({key, 0});
    return std::nullopt;
  }
  const VersionedValue& latest = it->second.back();
  reads_.push_back({key, latest.version});
  if (latest.deleted) return std::nullopt;
  return latest.value;
}

void TxContext::put(const std::string& key, std::string value) {
  writes_.push_back({key, std::move(value), false, 0});
}

void TxContext::del(const std::string& key) {
  writes_.push_back({key, "", true, 0});
}

std::vector<std::pair<std::string, std::string>> TxContext::scan_prefix(
    const std::string& prefix) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto it = snap_.history->lower_bound(prefix);
       it != snap_.history->end() && it->first.rfind(prefix, 0) == 0; ++it) {
    if (it->second.empty()) continue;
    const VersionedValue& latest = it->second.back();
    if (latest.deleted) continue;
    reads_.push_back({it->first, latest.version});
    out.emplace_back(it->first, latest.value);
  }
  return out;
}

void TxContext::abort(const std::string& reason) { throw TxAbort{reason}; }

void Ledger::create_channel(const std::string& channel,
                            std::set<std::string> members) {
  if (channels_.count(channel) != 0) {
    throw PreconditionError("ledger: channel exists: " + channel);
  }
  channels_[channel].members = std::move(members);
}

bool Ledger::has_channel(const std::string& channel) const {
  return channels_.count(channel) != 0;
}

void Ledger::register_worker(const std::string& worker,
                             const std::string& credential) {
  if (worker.empty() || credential.empty()) {
    throw PreconditionError("ledger: empty identity or credential");
  }
  credentials_[worker] = credential;
}

bool Ledger::credential_ok(const std::string& worker,
                           const std::string& credential) const {
  const auto it = credentials_.find(worker);
  return it != credentials_.end() && it->second == credential;
}

Ledger::Prepared Ledger::simulate(const std::string& channel,
                                  const TxRequest& request) {
  Prepared p;
  p.result.tx_id = "tx" + std::to_string(++tx_counter_);
  p.result.channel = channel;
  p.result.label = request.label;
  p.result.submit_tick = ++tick_;

  const auto chan_it = channels_.find(channel);
  if (chan_it == channels_.end()) {
    p.result.status = TxStatus::kRejected;
    p.result.error = "unknown channel";
    p.result.commit_tick = p.result.submit_tick;
    return p;
  }
  const Channel& chan = chan_it->second;
  if (!credential_ok(request.worker, request.credential)) {
    p.result.status = TxStatus::kRejected;
    p.result.error = "invalid credential for " + request.worker;
    p.result.commit_tick = p.result.submit_tick;
    return p;
  }
  if (!chan.members.empty() && chan.members.count(request.worker) == 0) {
    p.result.status = TxStatus::kRejected;
    p.result.error = "worker " + request.worker + " is not a channel member";
    p.result.commit_tick = p.result.submit_tick;
    return p;
  }

  TxContext::Snapshot snap{&chan.history};
  TxContext ctx(snap);
  try {
    request.program(ctx);
  } catch (const TxAbort& abort) {
    p.result.status = TxStatus::kRejected;
    p.result.error = abort.reason;
    p.result.reads = std::move(ctx.reads_);
    p.result.commit_tick = ++tick_;
    return p;
  } catch (const Error& error) {
    p.result.status = TxStatus::kRejected;
    p.result.error = error.what();
    p.result.reads = std::move(ctx.reads_);
    p.result.commit_tick = ++tick_;
    return p;
  }
  p.result.reads = std::move(ctx.reads_);
  p.result.writes = std::move(ctx.writes_);
  p.runnable = true;
  return p;
}

void Ledger::commit(Channel& chan, Prepared& prepared, bool force_conflict) {
  TxResult& r = prepared.result;
  r.commit_tick = ++tick_;
  if (!prepared.runnable) return;  // already rejected during simulation

  bool stale = force_conflict;
  // Read-only transactions never conflict: with an empty write-set there is
  // nothing to lose, so they commit as of their snapshot.
  if (!stale && !r.writes.empty()) {
    for (const ReadRecord& read : r.reads) {
      const auto it = chan.history.find(read.key);
      const std::int64_t current =
          (it == chan.history.end() || it->second.empty())
              ? 0
              : it->second.back().version;
      if (current != read.version) {
        stale = true;
        r.error = "stale read of " + read.key;
        break;
      }
    }
  } else {
    r.error = "injected conflict";
  }
  if (stale) {
    r.status = TxStatus::kMvccConflict;
    r.writes.clear();
    return;
  }

  ++commit_seq_;
  for (WriteRecord& write : r.writes) {
    auto& versions = chan.history[write.key];
    const std::int64_t next =
        versions.empty() ? 1 : versions.back().version + 1;
    write.version = next;
    versions.push_back(
        {write.value, next, write.deleted, commit_seq_, r.commit_tick});
  }
  r.status = TxStatus::kCommitted;
}

TxResult Ledger::submit(const std::string& channel, const TxRequest& request) {
  Prepared p = simulate(channel, request);
  if (p.runnable) {
    commit(channels_.at(channel), p, request.force_conflict);
  }
  log_.push_back(p.result);
  return log_.back();
}

std::vector<TxResult> Ledger::submit_concurrent(
    const std::string& channel, const std::vector<TxRequest>& requests) {
  // Simulate every request first so all share one snapshot view.
  std::vector<Prepared> prepared;
  prepared.reserve(requests.size());
  for (const TxRequest& request : requests) {
    prepared.push_back(simulate(channel, request));
  }
  std::vector<TxResult> out;
  out.reserve(requests.size());
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    if (prepared[i].runnable) {
      commit(channels_.at(channel), prepared[i], requests[i].force_conflict);
    }
    log_.push_back(prepared[i].result);
    out.push_back(prepared[i].result);
  }
  return out;
}

std::optional<std::string> Ledger::latest(const std::string& channel,
                                          const std::string& key) const {
  const auto chan_it = channels_.find(channel);
  if (chan_it == channels_.end()) return std::nullopt;
  const auto it = chan_it->second.history.find(key);
  if (it == chan_it->second.history.end() || it->second.empty()) {
    return std::nullopt;
  }
  const VersionedValue& latest = it->second.back();
  if (latest.deleted) return std::nullopt;
  return latest.value;
}

std::int64_t Ledger::latest_version(const std::string& channel,
                                    const std::string& key) const {
  const auto chan_it = channels_.find(channel);
  if (chan_it == channels_.end()) return 0;
  const auto it = chan_it->second.history.find(key);
  if (it == chan_it->second.history.end() || it->second.empty()) return 0;
  return it->second.back().version;
}

const std::vector<VersionedValue>* Ledger::key_history(
    const std::string& channel, const std::string& key) const {
  const auto chan_it = channels_.find(channel);
  if (chan_it == channels_.end()) return nullptr;
  const auto it = chan_it->second.history.find(key);
  if (it == chan_it->second.history.end()) return nullptr;
  return &it->second;
}

std::vector<std::pair<std::string, std::string>> Ledger::scan_prefix(
    const std::string& channel, const std::string& prefix) const {
  std::vector<std::pair<std::string, std::string>> out;
  const auto chan_it = channels_.find(channel);
  if (chan_it == channels_.end()) return out;
  const auto& history = chan_it->second.history;
  for (auto it = history.lower_bound(prefix);
       it != history.end() && it->first.rfind(prefix, 0) == 0; ++it) {
    if (it->second.empty() || it->second.back().deleted) continue;
    out.emplace_back(it->first, it->second.back().value);
  }
  return out;
}

std::vector<std::string> Ledger::channels() const {
  std::vector<std::string> out;
  out.reserve(channels_.size());
  for (const auto& [name, chan] : channels_) out.push_back(name);
  return out;
}

std::string Ledger::export_commit_log() const {
  std::ostringstream os;
  for (const TxResult& r : log_) {
    os << r.tx_id << '\t' << r.channel << '\t' << r.label << '\t'
       << to_string(r.status) << "\treads=";
    for (std::size_t i = 0; i < r.reads.size(); ++i) {
      if (i != 0) os << ',';
      os << r.reads[i].key << '@' << r.reads[i].version;
    }
    os << "\twrites=";
    for (std::size_t i = 0; i < r.writes.size(); ++i) {
      if (i != 0) os << ',';
      os << r.writes[i].key << '@' << r.writes[i].version;
    }
    os << "\tsubmit=" << r.submit_tick << "\tcommit=" << r.commit_tick << '\n';
  }
  return os.str();
}

}  // namespace fedledger::chain
