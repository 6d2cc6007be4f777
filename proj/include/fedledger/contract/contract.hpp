#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedledger/codec/sha256.hpp"

namespace fedledger::contract {

// All currency is integer micro-units so conservation is exact.
using Currency = std::int64_t;
inline constexpr Currency kUnit = 1'000'000;

// Fixed charges per commitment, measured rather than simulated: the first
// commitment allocates the worker's hash array, later ones only append.
struct GasSchedule {
  std::int64_t first_commit = 95'000;
  std::int64_t next_commit = 25'000;
  Currency price_per_gas = 1;  // micro-units burned per gas unit
};

struct EscrowAccount {
  std::string worker_id;
  std::string public_address;
  Currency balance = 0;
  Currency deposit_held = 0;
  std::int64_t gas_spent = 0;  // cumulative gas units
  bool registered = false;
};

struct HashCommitment {
  std::string worker_id;
  int epoch_index = 0;
  codec::HashDigest digest;
  std::int64_t tx_gas = 0;
};

enum class ClaimStatus { kOpen, kHashMismatchConfirmed, kTrojanConfirmed, kDismissed };

std::string to_string(ClaimStatus status);

struct BreachClaim {
  int claim_id = 0;
  std::string accuser;
  std::string accused;
  int epoch_begin = 0;
  int epoch_end = 0;  // inclusive
  ClaimStatus status = ClaimStatus::kOpen;
  std::string verification_contract_id;
  bool settled = false;
  std::string detail;  // adjudication notes (mismatched epoch, suspension)
};

struct SettlementRecord {
  int claim_id = 0;
  std::string loser;
  Currency forfeited = 0;
  std::map<std::string, Currency> payouts;
  Currency pool_remainder = 0;
};

struct RewardRecord {
  std::string worker_id;
  int rank = -1;  // 0 = fastest uploader
  Currency deposit_returned = 0;
  Currency reward = 0;
  bool scaled = false;  // pool could not fund the full formula
};

// Simulated public smart contract: per-worker commitment arrays, deposit
// escrow, gas accounting, breach claims and settlement. A serialized state
// machine; every mutating call appends to the event log. Conservation
// invariant: sum of balances + deposits + pool == minted - gas burned.
class PublicContract {
 public:
  explicit PublicContract(GasSchedule gas = {});

  // One-to-one mapping to the private-chain identity; must exist before
  // registration.
  void mirror_identity(const std::string& worker, const std::string& address);
  // External inflow onto the worker's wallet.
  void fund(const std::string& worker, Currency amount);
  const EscrowAccount& register_and_deposit(const std::string& worker,
                                            Currency deposit);

  // Appends the digest at the worker's next dense epoch index and charges
  // gas. Commitments are immutable.
  const HashCommitment& commit_hash(const std::string& worker, int epoch_index,
                                    const codec::HashDigest& digest);
  const std::vector<HashCommitment>& commitments(const std::string& worker) const;
  std::optional<codec::HashDigest> committed_digest(const std::string& worker,
                                                    int epoch_index) const;

  const BreachClaim& open_claim(const std::string& accuser,
                                const std::string& accused, int epoch_begin,
                                int epoch_end);
  // Hash phase: compares each committed digest in range against the
  // recomputation supplied by the private chain. Any mismatch (or missing
  // commitment) confirms the breach; full agreement leaves the claim open
  // for the trojan phase. A recomputation failure suspends the claim with
  // the error recorded in detail.
  const BreachClaim& adjudicate_hashes(
      int claim_id,
      const std::function<codec::HashDigest(const std::string&, int)>& recompute);
  // Trojan-phase outcome from the detection report.
  const BreachClaim& record_trojan_verdict(int claim_id, bool confirmed);
  const BreachClaim& dismiss_claim(int claim_id, const std::string& reason);
  const BreachClaim& claim(int claim_id) const;
  bool has_open_claims() const;

  // Forfeits the loser's deposit and splits it equally among every other
  // registered worker; the non-divisible remainder goes to the pool.
  SettlementRecord settle(int claim_id);

  // Returns deposits and pays pool-funded rewards, linear in upload-speed
  // rank: base + bonus * (1 - rank/(K-1)). Requires no open claims; workers
  // without a held deposit (forfeited) get nothing. If the pool cannot fund
  // the formula, payouts scale proportionally and are flagged.
  std::vector<RewardRecord> pay_rewards(
      const std::map<std::string, double>& avg_upload_latency,
      Currency base_reward, Currency speed_bonus);

  const EscrowAccount& account(const std::string& worker) const;
  std::vector<std::string> registered_workers() const;
  Currency pool() const { return pool_; }
  Currency minted() const { return minted_; }
  Currency gas_burned() const { return gas_burned_; }
  // Sum of all balances, held deposits and the pool.
  Currency total_held() const;

  const std::vector<std::string>& event_log() const { return events_; }

  // Full-state snapshot; an audit resumes the state machine from exactly
  // what the run directory stored.
  std::string to_json_string() const;
  static PublicContract from_json_string(const std::string& text);

 private:
  EscrowAccount& mutable_account(const std::string& worker);
  BreachClaim& mutable_claim(int claim_id);
  void charge_gas(EscrowAccount& account, std::int64_t gas);
  void log_event(std::string line);

  GasSchedule gas_;
  std::map<std::string, EscrowAccount> accounts_;
  std::map<std::string, std::vector<HashCommitment>> commitments_;
  std::vector<BreachClaim> claims_;
  Currency pool_ = 0;
  Currency minted_ = 0;
  Currency gas_burned_ = 0;
  std::vector<std::string> events_;
};

}  // namespace fedledger::contract
