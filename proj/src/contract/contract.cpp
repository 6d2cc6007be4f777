#include "fedledger/contract/contract.hpp"

#include <algorithm>

#include <json.hpp>

#include "fedledger/error.hpp"

namespace fedledger::contract {

namespace {

bool valid_digest(const codec::HashDigest& digest) {
  if (digest.hex.size() != 64) return false;
  for (char c : digest.hex) {
    const bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    if (!ok) return false;
  }
  return true;
}

}  // namespace

std::string to_string(ClaimStatus status) {
  switch (status) {
    case ClaimStatus::kOpen: return "open";
    case ClaimStatus::kHashMismatchConfirmed: return "hash-mismatch-confirmed";
    case ClaimStatus::kTrojanConfirmed: return "trojan-confirmed";
    case ClaimStatus::kDismissed: return "dismissed";
  }
  return "unknown";
}

PublicContract::PublicContract(GasSchedule gas) : gas_(gas) {
  if (gas_.first_commit < 0 || gas_.next_commit < 0 || gas_.price_per_gas < 0) {
    throw PreconditionError("contract: negative gas schedule");
  }
}

void PublicContract::log_event(std::string line) {
  events_.push_back(std::move(line));
}

EscrowAccount& PublicContract::mutable_account(const std::string& worker) {
  const auto it = accounts_.find(worker);
  if (it == accounts_.end()) {
    throw ContractError("unknown worker: " + worker);
  }
  return it->second;
}

BreachClaim& PublicContract::mutable_claim(int claim_id) {
  for (auto& claim : claims_) {
    if (claim.claim_id == claim_id) return claim;
  }
  throw ContractError("unknown claim: " + std::to_string(claim_id));
}

void PublicContract::mirror_identity(const std::string& worker,
                                     const std::string& address) {
  if (worker.empty() || address.empty()) {
    throw ContractError("identity mapping needs worker and address");
  }
  if (accounts_.count(worker) != 0) {
    throw ContractError("identity already mapped: " + worker);
  }
  EscrowAccount account;
  account.worker_id = worker;
  account.public_address = address;
  accounts_[worker] = account;
  log_event("op=identity worker=" + worker + " address=" + address);
}

void PublicContract::fund(const std::string& worker, Currency amount) {
  if (amount <= 0) throw ContractError("fund: amount must be positive");
  EscrowAccount& account = mutable_account(worker);
  account.balance += amount;
  minted_ += amount;
  log_event("op=fund worker=" + worker + " amount=" + std::to_string(amount));
}

const EscrowAccount& PublicContract::register_and_deposit(
    const std::string& worker, Currency deposit) {
  EscrowAccount& account = mutable_account(worker);
  if (deposit <= 0) throw ContractError("deposit must be positive");
  if (account.registered) throw ContractError("already registered: " + worker);
  if (account.balance < deposit) {
    throw ContractError("insufficient balance for deposit: " + worker);
  }
  account.balance -= deposit;
  account.deposit_held += deposit;
  account.registered = true;
  log_event("op=register worker=" + worker +
            " deposit=" + std::to_string(deposit));
  return account;
}

void PublicContract::charge_gas(EscrowAccount& account, std::int64_t gas) {
  const Currency cost = gas * gas_.price_per_gas;
  if (account.balance < cost) {
    throw ContractError("insufficient gas balance for " + account.worker_id);
  }
  account.balance -= cost;
  account.gas_spent += gas;
  gas_burned_ += cost;
}

const HashCommitment& PublicContract::commit_hash(
    const std::string& worker, int epoch_index,
    const codec::HashDigest& digest) {
  EscrowAccount& account = mutable_account(worker);
  if (!account.registered) {
    throw ContractError("commit_hash: worker not registered: " + worker);
  }
  if (!valid_digest(digest)) {
    throw ContractError("commit_hash: digest is not 64-char lowercase hex");
  }
  auto& array = commitments_[worker];
  if (epoch_index != static_cast<int>(array.size())) {
    throw ContractError("commit_hash: expected epoch " +
                        std::to_string(array.size()) + ", got " +
                        std::to_string(epoch_index));
  }
  const std::int64_t gas =
      array.empty() ? gas_.first_commit : gas_.next_commit;
  charge_gas(account, gas);  // throws before any state change on shortfall
  array.push_back({worker, epoch_index, digest, gas});
  log_event("op=commit worker=" + worker +
            " epoch=" + std::to_string(epoch_index) + " digest=" + digest.hex +
            " gas=" + std::to_string(gas));
  return array.back();
}

const std::vector<HashCommitment>& PublicContract::commitments(
    const std::string& worker) const {
  static const std::vector<HashCommitment> kEmpty;
  const auto it = commitments_.find(worker);
  return it == commitments_.end() ? kEmpty : it->second;
}

std::optional<codec::HashDigest> PublicContract::committed_digest(
    const std::string& worker, int epoch_index) const {
  const auto it = commitments_.find(worker);
  if (it == commitments_.end()) return std::nullopt;
  if (epoch_index < 0 ||
      epoch_index >= static_cast<int>(it->second.size())) {
    return std::nullopt;
  }
  return it->second[static_cast<std::size_t>(epoch_index)].digest;
}

const BreachClaim& PublicContract::open_claim(const std::string& accuser,
                                              const std::string& accused,
                                              int epoch_begin, int epoch_end) {
  const EscrowAccount& a = mutable_account(accuser);
  const EscrowAccount& b = mutable_account(accused);
  if (!a.registered || !b.registered) {
    throw ContractError("open_claim: both parties must be registered");
  }
  if (accuser == accused) throw ContractError("open_claim: self-accusation");
  if (epoch_begin < 0 || epoch_end < epoch_begin) {
    throw ContractError("open_claim: invalid epoch range");
  }
  if (a.deposit_held <= 0) {
    throw ContractError("open_claim: accuser has no deposit to stake");
  }
  for (const BreachClaim& claim : claims_) {
    if (claim.accused == accused && claim.status == ClaimStatus::kOpen) {
      throw ContractError("open_claim: open claim already pending against " +
                          accused);
    }
  }
  BreachClaim claim;
  claim.claim_id = static_cast<int>(claims_.size()) + 1;
  claim.accuser = accuser;
  claim.accused = accused;
  claim.epoch_begin = epoch_begin;
  claim.epoch_end = epoch_end;
  claim.verification_contract_id = "vc" + std::to_string(claim.claim_id);
  claims_.push_back(claim);
  log_event("op=open-claim id=" + std::to_string(claim.claim_id) +
            " accuser=" + accuser + " accused=" + accused + " epochs=" +
            std::to_string(epoch_begin) + ".." + std::to_string(epoch_end) +
            " contract=" + claim.verification_contract_id);
  return claims_.back();
}

const BreachClaim& PublicContract::adjudicate_hashes(
    int claim_id,
    const std::function<codec::HashDigest(const std::string&, int)>& recompute) {
  BreachClaim& claim = mutable_claim(claim_id);
  if (claim.status != ClaimStatus::kOpen) {
    throw ContractError("adjudicate_hashes: claim not open");
  }
  for (int epoch = claim.epoch_begin; epoch <= claim.epoch_end; ++epoch) {
    const auto committed = committed_digest(claim.accused, epoch);
    if (!committed) {
      claim.status = ClaimStatus::kHashMismatchConfirmed;
      claim.detail = "no commitment for epoch " + std::to_string(epoch);
      log_event("op=adjudicate id=" + std::to_string(claim_id) +
                " result=hash-mismatch-confirmed epoch=" +
                std::to_string(epoch) + " reason=missing-commitment");
      return claim;
    }
    codec::HashDigest recomputed;
    try {
      recomputed = recompute(claim.accused, epoch);
    } catch (const Error& error) {
      claim.detail = std::string("suspended: ") + error.what();
      log_event("op=adjudicate id=" + std::to_string(claim_id) +
                " result=suspended epoch=" + std::to_string(epoch));
      return claim;  // stays open with the failure recorded
    }
    if (!(recomputed == *committed)) {
      claim.status = ClaimStatus::kHashMismatchConfirmed;
      claim.detail = "digest mismatch at epoch " + std::to_string(epoch);
      log_event("op=adjudicate id=" + std::to_string(claim_id) +
                " result=hash-mismatch-confirmed epoch=" +
                std::to_string(epoch));
      return claim;
    }
  }
  claim.detail = "hash phase passed";
  log_event("op=adjudicate id=" + std::to_string(claim_id) +
            " result=hash-phase-passed");
  return claim;
}

const BreachClaim& PublicContract::record_trojan_verdict(int claim_id,
                                                         bool confirmed) {
  BreachClaim& claim = mutable_claim(claim_id);
  if (claim.status != ClaimStatus::kOpen) {
    throw ContractError("record_trojan_verdict: claim not open");
  }
  claim.status =
      confirmed ? ClaimStatus::kTrojanConfirmed : ClaimStatus::kDismissed;
  log_event("op=verdict id=" + std::to_string(claim_id) +
            " result=" + to_string(claim.status));
  return claim;
}

const BreachClaim& PublicContract::dismiss_claim(int claim_id,
                                                 const std::string& reason) {
  BreachClaim& claim = mutable_claim(claim_id);
  if (claim.status != ClaimStatus::kOpen) {
    throw ContractError("dismiss_claim: claim not open");
  }
  claim.status = ClaimStatus::kDismissed;
  claim.detail = reason;
  log_event("op=verdict id=" + std::to_string(claim_id) +
            " result=dismissed reason=" + reason);
  return claim;
}

const BreachClaim& PublicContract::claim(int claim_id) const {
  for (const auto& claim : claims_) {
    if (claim.claim_id == claim_id) return claim;
  }
  throw ContractError("unknown claim: " + std::to_string(claim_id));
}

bool PublicContract::has_open_claims() const {
  return std::any_of(claims_.begin(), claims_.end(), [](const BreachClaim& c) {
    return c.status == ClaimStatus::kOpen;
  });
}

SettlementRecord PublicContract::settle(int claim_id) {
  BreachClaim& claim = mutable_claim(claim_id);
  if (claim.status == ClaimStatus::kOpen) {
    throw ContractError("settle: claim has no terminal determination");
  }
  if (claim.settled) throw ContractError("settle: already settled");

  const std::string loser =
      claim.status == ClaimStatus::kDismissed ? claim.accuser : claim.accused;
  EscrowAccount& loser_account = mutable_account(loser);
  if (loser_account.deposit_held <= 0) {
    throw ContractError("settle: loser holds no deposit");
  }

  SettlementRecord record;
  record.claim_id = claim_id;
  record.loser = loser;
  record.forfeited = loser_account.deposit_held;
  loser_account.deposit_held = 0;

  std::vector<std::string> recipients;
  for (const auto& [worker, account] : accounts_) {
    if (account.registered && worker != loser) recipients.push_back(worker);
  }
  if (recipients.empty()) {
    pool_ += record.forfeited;
    record.pool_remainder = record.forfeited;
  } else {
    const Currency share =
        record.forfeited / static_cast<Currency>(recipients.size());
    for (const std::string& worker : recipients) {
      accounts_.at(worker).balance += share;
      record.payouts[worker] = share;
    }
    record.pool_remainder =
        record.forfeited - share * static_cast<Currency>(recipients.size());
    pool_ += record.pool_remainder;
  }
  claim.settled = true;
  log_event("op=settle id=" + std::to_string(claim_id) + " loser=" + loser +
            " forfeited=" + std::to_string(record.forfeited) +
            " recipients=" + std::to_string(recipients.size()) +
            " remainder=" + std::to_string(record.pool_remainder));
  return record;
}

std::vector<RewardRecord> PublicContract::pay_rewards(
    const std::map<std::string, double>& avg_upload_latency,
    Currency base_reward, Currency speed_bonus) {
  if (base_reward < 0 || speed_bonus < 0) {
    throw ContractError("pay_rewards: negative reward knobs");
  }
  if (has_open_claims()) {
    throw ContractError("pay_rewards: open claims pending");
  }

  // Eligible workers kept their deposit; breached ones already forfeited.
  std::vector<std::string> eligible;
  for (const auto& [worker, account] : accounts_) {
    if (account.registered && account.deposit_held > 0) {
      eligible.push_back(worker);
    }
  }
  for (const std::string& worker : eligible) {
    if (avg_upload_latency.count(worker) == 0) {
      throw ContractError("pay_rewards: missing latency for " + worker);
    }
  }
  std::sort(eligible.begin(), eligible.end(),
            [&](const std::string& a, const std::string& b) {
              const double la = avg_upload_latency.at(a);
              const double lb = avg_upload_latency.at(b);
              if (la != lb) return la < lb;
              return a < b;
            });

  const Currency k = static_cast<Currency>(eligible.size());
  std::vector<RewardRecord> records;
  Currency wanted_total = 0;
  for (Currency rank = 0; rank < k; ++rank) {
    RewardRecord record;
    record.worker_id = eligible[static_cast<std::size_t>(rank)];
    record.rank = static_cast<int>(rank);
    record.reward =
        k > 1 ? base_reward + speed_bonus * (k - 1 - rank) / (k - 1)
              : base_reward + speed_bonus;
    wanted_total += record.reward;
    records.push_back(record);
  }

  const bool scaled = wanted_total > pool_;
  for (RewardRecord& record : records) {
    if (scaled) {
      record.reward =
          wanted_total == 0 ? 0 : record.reward * pool_ / wanted_total;
      record.scaled = true;
    }
    EscrowAccount& account = mutable_account(record.worker_id);
    record.deposit_returned = account.deposit_held;
    account.balance += account.deposit_held + record.reward;
    account.deposit_held = 0;
    pool_ -= record.reward;
    log_event("op=reward worker=" + record.worker_id +
              " rank=" + std::to_string(record.rank) +
              " deposit=" + std::to_string(record.deposit_returned) +
              " reward=" + std::to_string(record.reward) +
              (record.scaled ? " scaled=1" : ""));
  }
  return records;
}

const EscrowAccount& PublicContract::account(const std::string& worker) const {
  const auto it = accounts_.find(worker);
  if (it == accounts_.end()) throw ContractError("unknown worker: " + worker);
  return it->second;
}

std::vector<std::string> PublicContract::registered_workers() const {
  std::vector<std::string> out;
  for (const auto& [worker, account] : accounts_) {
    if (account.registered) out.push_back(worker);
  }
  return out;
}

Currency PublicContract::total_held() const {
  Currency total = pool_;
  for (const auto& [worker, account] : accounts_) {
    total += account.balance + account.deposit_held;
  }
  return total;
}

namespace {

ClaimStatus claim_status_from_string(const std::string& text) {
  if (text == "open") return ClaimStatus::kOpen;
  if (text == "hash-mismatch-confirmed") return ClaimStatus::kHashMismatchConfirmed;
  if (text == "trojan-confirmed") return ClaimStatus::kTrojanConfirmed;
  if (text == "dismissed") return ClaimStatus::kDismissed;
  throw ContractError("snapshot: unknown claim status " + text);
}

}  // namespace

std::string PublicContract::to_json_string() const {
  nlohmann::json doc;
  doc["gas"] = {{"first_commit", gas_.first_commit},
                {"next_commit", gas_.next_commit},
                {"price_per_gas", gas_.price_per_gas}};
  doc["pool"] = pool_;
  doc["minted"] = minted_;
  doc["gas_burned"] = gas_burned_;
  doc["accounts"] = nlohmann::json::array();
  for (const auto& [worker, account] : accounts_) {
    doc["accounts"].push_back({{"worker_id", account.worker_id},
                               {"public_address", account.public_address},
                               {"balance", account.balance},
                               {"deposit_held", account.deposit_held},
                               {"gas_spent", account.gas_spent},
                               {"registered", account.registered}});
  }
  doc["commitments"] = nlohmann::json::object();
  for (const auto& [worker, array] : commitments_) {
    nlohmann::json list = nlohmann::json::array();
    for (const HashCommitment& c : array) {
      list.push_back({{"epoch_index", c.epoch_index},
                      {"digest", c.digest.hex},
                      {"tx_gas", c.tx_gas}});
    }
    doc["commitments"][worker] = std::move(list);
  }
  doc["claims"] = nlohmann::json::array();
  for (const BreachClaim& claim : claims_) {
    doc["claims"].push_back(
        {{"claim_id", claim.claim_id},
         {"accuser", claim.accuser},
         {"accused", claim.accused},
         {"epoch_begin", claim.epoch_begin},
         {"epoch_end", claim.epoch_end},
         {"status", to_string(claim.status)},
         {"verification_contract_id", claim.verification_contract_id},
         {"settled", claim.settled},
         {"detail", claim.detail}});
  }
  doc["events"] = events_;
  return doc.dump(2) + "\n";
}

PublicContract PublicContract::from_json_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& error) {
    throw IntegrityError(std::string("contract snapshot parse: ") +
                         error.what());
  }
  try {
    GasSchedule gas;
    gas.first_commit = doc.at("gas").at("first_commit").get<std::int64_t>();
    gas.next_commit = doc.at("gas").at("next_commit").get<std::int64_t>();
    gas.price_per_gas = doc.at("gas").at("price_per_gas").get<Currency>();
    PublicContract contract(gas);
    contract.pool_ = doc.at("pool").get<Currency>();
    contract.minted_ = doc.at("minted").get<Currency>();
    contract.gas_burned_ = doc.at("gas_burned").get<Currency>();
    for (const auto& entry : doc.at("accounts")) {
      EscrowAccount account;
      account.worker_id = entry.at("worker_id").get<std::string>();
      account.public_address = entry.at("public_address").get<std::string>();
      account.balance = entry.at("balance").get<Currency>();
      account.deposit_held = entry.at("deposit_held").get<Currency>();
      account.gas_spent = entry.at("gas_spent").get<std::int64_t>();
      account.registered = entry.at("registered").get<bool>();
      contract.accounts_[account.worker_id] = account;
    }
    for (const auto& [worker, list] : doc.at("commitments").items()) {
      auto& array = contract.commitments_[worker];
      for (const auto& entry : list) {
        HashCommitment c;
        c.worker_id = worker;
        c.epoch_index = entry.at("epoch_index").get<int>();
        c.digest.hex = entry.at("digest").get<std::string>();
        c.tx_gas = entry.at("tx_gas").get<std::int64_t>();
        array.push_back(c);
      }
    }
    for (const auto& entry : doc.at("claims")) {
      BreachClaim claim;
      claim.claim_id = entry.at("claim_id").get<int>();
      claim.accuser = entry.at("accuser").get<std::string>();
      claim.accused = entry.at("accused").get<std::string>();
      claim.epoch_begin = entry.at("epoch_begin").get<int>();
      claim.epoch_end = entry.at("epoch_end").get<int>();
      claim.status = claim_status_from_string(entry.at("status").get<std::string>());
      claim.verification_contract_id =
          entry.at("verification_contract_id").get<std::string>();
      claim.settled = entry.at("settled").get<bool>();
      claim.detail = entry.at("detail").get<std::string>();
      contract.claims_.push_back(claim);
    }
    contract.events_ = doc.at("events").get<std::vector<std::string>>();
    return contract;
  } catch (const nlohmann::json::exception& error) {
    throw IntegrityError(std::string("contract snapshot fields: ") +
                         error.what());
  }
}

}  // namespace fedledger::contract
