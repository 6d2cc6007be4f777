#include "fedledger/cli/orchestrator.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "fedledger/chain/chaincode.hpp"
#include "fedledger/chain/ledger.hpp"
#include "fedledger/codec/base64.hpp"
#include "fedledger/detect/detect.hpp"
#include "fedledger/detect/trojan.hpp"
#include "fedledger/error.hpp"
#include "fedledger/logstore/logstore.hpp"
#include "fedledger/nn/synthetic.hpp"
#include "fedledger/util/rng.hpp"
#include "fedledger/util/text.hpp"

namespace fedledger::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr double kEfficacyGate = 0.8;  // minimum backdoor accuracy

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IntegrityError("cannot write " + path.string());
  out << content;
  if (!out) throw IntegrityError("short write to " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("missing artifact: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string strip_newline(std::string text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
    text.pop_back();
  }
  return text;
}

std::string params_hex(const Eigen::VectorXf& params) {
  return codec::hex_encode(codec::serialize_float32(params));
}

Eigen::VectorXf params_from_hex(const std::string& hex, Eigen::Index dim,
                                const std::string& what) {
  Eigen::VectorXf params;
  try {
    params = codec::deserialize_float32(codec::hex_decode(strip_newline(hex)));
  } catch (const Error& error) {
    throw IntegrityError(what + ": " + error.what());
  }
  if (params.size() != dim) {
    throw IntegrityError(what + ": expected dim " + std::to_string(dim) +
                         ", got " + std::to_string(params.size()));
  }
  return params;
}

fs::path global_file(const fs::path& run_dir, int epoch) {
  return run_dir / "globals" / ("epoch" + zfill(epoch, 5) + ".f32hex");
}

}  // namespace

Population build_population(const ExperimentConfig& config) {
  Population pop;
  const nn::LabeledDataset train = nn::make_synthetic(
      config.dataset.train_count,
      mix64(config.fl.seed, hash_string("train-data")),
      config.dataset.noise_std);
  pop.validation = nn::make_synthetic(
      config.dataset.val_count, mix64(config.fl.seed, hash_string("val-data")),
      config.dataset.noise_std);

  std::vector<nn::LabeledDataset> parts;
  if (config.split.kind == "iid") {
    parts = detect::iid_split(train, config.fl.agents, config.fl.seed);
  } else {
    parts = detect::dirichlet_split(train, config.fl.agents,
                                    config.split.concentration, config.fl.seed);
  }

  const std::vector<std::string> ids = config.agent_ids();
  const int corrupt = config.corrupt_count();
  for (int i = 0; i < config.fl.agents; ++i) {
    fl::AgentSpec agent;
    agent.agent_id = ids[static_cast<std::size_t>(i)];
    agent.is_corrupt = i < corrupt;
    if (parts[static_cast<std::size_t>(i)].empty() && config.fl.local_epochs > 0) {
      throw PreconditionError(
          "split left " + agent.agent_id +
          " with no samples; raise dataset.train_count or the concentration");
    }
    agent.dataset = agent.is_corrupt
                        ? detect::poison_dataset(parts[static_cast<std::size_t>(i)],
                                                 config.trojan,
                                                 config.poison_fraction)
                        : parts[static_cast<std::size_t>(i)];
    pop.agents.push_back(std::move(agent));
  }
  if (corrupt > 0) {
    pop.poisoned_validation =
        detect::build_poisoned_validation(pop.validation, config.trojan);
  }
  return pop;
}

namespace {

std::map<std::string, std::string> credentials_for(
    const std::vector<std::string>& ids) {
  std::map<std::string, std::string> credentials;
  for (const std::string& id : ids) credentials[id] = "key:" + id;
  return credentials;
}

void write_manifest(const fs::path& run_dir, bool complete) {
  std::string text = complete ? "status\tcomplete\n" : "status\tincomplete\n";
  if (complete) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string rel =
          fs::relative(entry.path(), run_dir).generic_string();
      if (rel == "MANIFEST") continue;
      paths.push_back(rel);
    }
    std::sort(paths.begin(), paths.end());
    for (const std::string& rel : paths) text += "artifact\t" + rel + "\n";
  }
  write_file(run_dir / "MANIFEST", text);
}

struct RoundMeta {
  int round = 0;
  std::vector<std::string> selected;
  std::map<std::string, std::int64_t> weights;
  fl::AggregatorKind aggregator = fl::AggregatorKind::kFedAvg;
  float eta = 1.0f;
  std::string increment_digest;
  std::string global_after_digest;
};

std::string rounds_jsonl(const std::vector<fl::RoundRecord>& rounds) {
  std::string out;
  for (const fl::RoundRecord& round : rounds) {
    ordered_json line;
    line["round"] = round.round_index;
    line["selected"] = round.selected;
    line["weights"] = round.weights;
    line["aggregator"] = fl::to_string(round.aggregator);
    line["eta"] = static_cast<double>(round.eta);
    line["increment_digest"] =
        codec::hash_params(round.increment, codec::PayloadKind::kFloat32).hex;
    line["global_after_digest"] =
        codec::hash_params(round.global_after, codec::PayloadKind::kFloat32).hex;
    out += line.dump() + "\n";
  }
  return out;
}

std::vector<RoundMeta> load_rounds_meta(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<RoundMeta> rounds;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
      RoundMeta meta;
      meta.round = doc.at("round").get<int>();
      meta.selected = doc.at("selected").get<std::vector<std::string>>();
      meta.weights =
          doc.at("weights").get<std::map<std::string, std::int64_t>>();
      meta.aggregator =
          fl::aggregator_from_string(doc.at("aggregator").get<std::string>());
      meta.eta = static_cast<float>(doc.at("eta").get<double>());
      meta.increment_digest = doc.at("increment_digest").get<std::string>();
      meta.global_after_digest =
          doc.at("global_after_digest").get<std::string>();
      rounds.push_back(std::move(meta));
    } catch (const nlohmann::json::exception& error) {
      throw IntegrityError(std::string("rounds.jsonl: ") + error.what());
    }
  }
  if (rounds.empty()) throw IntegrityError("rounds.jsonl: no rounds");
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    if (rounds[i].round != static_cast<int>(i)) {
      throw IntegrityError("rounds.jsonl: non-contiguous round indices");
    }
  }
  return rounds;
}

std::string csv_escape(const std::string& field) {
  // Worker ids and statuses are alnum/_-; no quoting needed by construction.
  return field;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config,
                          const fs::path& run_dir) {
  config.validate();
  if (fs::exists(run_dir / "MANIFEST")) {
    throw PreconditionError("refusing to reuse run directory " +
                            run_dir.string());
  }
  fs::create_directories(run_dir);
  write_manifest(run_dir, false);
  write_file(run_dir / "config.json", config.to_json_string());

  Population pop = build_population(config);
  const std::vector<std::string> ids = config.agent_ids();

  chain::Ledger ledger;
  chain::FlChainConfig chain_config;
  chain_config.kind = config.fl.aggregator == fl::AggregatorKind::kFedAvg
                          ? codec::PayloadKind::kFloat32
                          : codec::PayloadKind::kSignBits;
  chain_config.dim = config.model.param_dim();
  chain_config.chunk_chars = config.chunk_chars;
  chain_config.shared_counter = config.shared_counter;
  chain::FlChaincode chaincode(ledger, chain_config);
  const std::map<std::string, std::string> credentials = credentials_for(ids);
  chaincode.setup(credentials);
  chain::Scheduler scheduler(config.effective_scheduler_seed(),
                             config.scheduler);

  contract::PublicContract contract;
  for (const std::string& id : ids) {
    contract.mirror_identity(id, "addr:" + id);
    contract.fund(id, config.economy.initial_balance);
    contract.register_and_deposit(id, config.economy.deposit);
  }
  logstore::LogStore logstore;

  fl::ProtocolEnv env;
  env.chaincode = &chaincode;
  env.scheduler = &scheduler;
  env.contract = &contract;
  env.logstore = &logstore;
  env.credentials = credentials;
  env.validation = pop.validation;
  env.compute_loo = true;

  const Eigen::VectorXf initial =
      nn::Model::init(config.model,
                      mix64(config.fl.seed, hash_string("model-init")))
          .params;
  const fl::ProtocolResult result =
      fl::run_protocol(config.fl, config.model, pop.agents, initial, env);

  // Persist the chain of global parameters and the per-round metadata.
  write_file(run_dir / "globals" / "initial.f32hex", params_hex(initial) + "\n");
  for (const fl::RoundRecord& round : result.rounds) {
    write_file(global_file(run_dir, round.round_index),
               params_hex(round.global_after) + "\n");
  }
  write_file(run_dir / "rounds.jsonl", rounds_jsonl(result.rounds));
  write_file(run_dir / "chain" / "commit_log.txt", ledger.export_commit_log());
  write_file(run_dir / "contract" / "state.json", contract.to_json_string());
  {
    std::string events;
    for (const std::string& line : contract.event_log()) events += line + "\n";
    write_file(run_dir / "contract" / "events.log", events);
  }
  logstore.save(run_dir / "logstore");

  RunSummary summary;
  summary.run_dir = run_dir;
  summary.aggregation_events = result.aggregation_events;
  const nn::Model final_model{config.model, result.final_params};
  summary.final_accuracy = nn::eval_accuracy(final_model, pop.validation);
  summary.final_loss = nn::eval_loss(final_model, pop.validation);

  detect::DetectionReport report;
  if (config.corrupt_count() == 0) {
    summary.status = "attack-absent";
  } else {
    summary.backdoor_accuracy =
        detect::backdoor_accuracy(final_model, pop.poisoned_validation);
    if (summary.backdoor_accuracy < kEfficacyGate) {
      // The detection verdict would be vacuous; report the failed attack
      // instead of a ranking.
      summary.status = "attack-failed";
    } else {
      summary.status = "ok";
      report = detect::detect(result.rounds, config.model,
                              pop.poisoned_validation, config.fl.kappa,
                              config.corrupt_count());
      summary.detection_ran = true;
      summary.flagged = report.flagged;
      write_file(run_dir / "detection" / "report.json", report.to_json());
      write_file(run_dir / "detection" / "ranking.txt", report.to_text());
    }
  }

  ordered_json result_doc;
  result_doc["status"] = summary.status;
  result_doc["final_accuracy"] = summary.final_accuracy;
  result_doc["final_loss"] = summary.final_loss;
  if (config.corrupt_count() > 0) {
    result_doc["backdoor_accuracy"] = summary.backdoor_accuracy;
  }
  result_doc["aggregation_events"] = summary.aggregation_events;
  result_doc["avg_upload_latency"] = result.avg_upload_latency;
  result_doc["flagged"] = summary.flagged;
  write_file(run_dir / "result.json", result_doc.dump(2) + "\n");

  write_reports(run_dir);
  write_manifest(run_dir, true);
  return summary;
}

namespace {

struct StoredRun {
  ExperimentConfig config;
  contract::PublicContract contract;
  logstore::LogStore logstore;
  std::vector<RoundMeta> rounds;
};

StoredRun load_run(const fs::path& run_dir) {
  const std::string manifest = read_file(run_dir / "MANIFEST");
  if (manifest.rfind("status\tcomplete", 0) != 0) {
    throw IntegrityError("run directory is not marked complete: " +
                         (run_dir / "MANIFEST").string());
  }
  StoredRun run;
  run.config = ExperimentConfig::load(run_dir / "config.json");
  run.contract = contract::PublicContract::from_json_string(
      read_file(run_dir / "contract" / "state.json"));
  run.logstore = logstore::LogStore::load(run_dir / "logstore");
  run.rounds = load_rounds_meta(run_dir / "rounds.jsonl");
  if (static_cast<int>(run.rounds.size()) != run.config.fl.rounds) {
    throw IntegrityError("rounds.jsonl does not match the configured rounds");
  }
  return run;
}

// Global epochs in which the worker participated, ascending: the mapping
// from the contract's dense per-worker commitment indices.
std::vector<int> participation(const std::vector<RoundMeta>& rounds,
                               const std::string& worker) {
  std::vector<int> epochs;
  for (const RoundMeta& meta : rounds) {
    if (std::find(meta.selected.begin(), meta.selected.end(), worker) !=
        meta.selected.end()) {
      epochs.push_back(meta.round);
    }
  }
  return epochs;
}

}  // namespace

AuditOutcome audit_run(const fs::path& run_dir, const std::string& accused,
                       const std::string& accuser, int kappa_override,
                       int adversaries_override) {
  StoredRun run = load_run(run_dir);
  const Eigen::Index dim = run.config.model.param_dim();
  std::ostringstream transcript;
  transcript << "audit-transcript\n";
  transcript << "step=load rounds=" << run.rounds.size()
             << " records=" << run.logstore.size() << "\n";

  const std::vector<int> accused_epochs = participation(run.rounds, accused);
  const int commitment_count =
      static_cast<int>(run.contract.commitments(accused).size());
  if (commitment_count != static_cast<int>(accused_epochs.size())) {
    throw IntegrityError(
        "commitment count for " + accused + " (" +
        std::to_string(commitment_count) +
        ") does not match its recorded participation (" +
        std::to_string(accused_epochs.size()) + ")");
  }
  if (commitment_count == 0) {
    throw ContractError("audit: " + accused + " never committed an update");
  }

  const contract::BreachClaim& opened =
      run.contract.open_claim(accuser, accused, 0, commitment_count - 1);
  const int claim_id = opened.claim_id;
  transcript << "step=open-claim id=" << claim_id << " accuser=" << accuser
             << " accused=" << accused << " commitments=0.."
             << commitment_count - 1 << "\n";

  // Hash phase: the accused's stored log payloads are disclosed under a
  // one-time grant and re-hashed against the public commitments.
  const std::string accused_grant =
      run.logstore.grant_access(claim_id, accused).grant_id;
  transcript << "step=grant worker=" << accused << " id=" << accused_grant
             << "\n";
  std::map<int, logstore::LogRecord> accused_records;
  for (logstore::LogRecord& record : run.logstore.fetch_logs(accused_grant)) {
    accused_records[record.epoch_index] = std::move(record);
  }
  const auto recompute = [&](const std::string& worker,
                             int dense_index) -> codec::HashDigest {
    const int epoch = accused_epochs[static_cast<std::size_t>(dense_index)];
    const auto it = accused_records.find(epoch);
    if (it == accused_records.end()) {
      throw IntegrityError("log record missing: logstore/" + worker +
                           "/epoch" + zfill(epoch, 5) + ".log");
    }
    return codec::sha256_hex(it->second.payload);
  };
  run.contract.adjudicate_hashes(claim_id, recompute);
  const contract::BreachClaim after_hashes = run.contract.claim(claim_id);
  transcript << "step=hash-phase result="
             << (after_hashes.status == contract::ClaimStatus::kOpen
                     ? std::string("passed")
                     : contract::to_string(after_hashes.status))
             << " detail=" << after_hashes.detail << "\n";
  if (after_hashes.status == contract::ClaimStatus::kOpen &&
      after_hashes.detail.rfind("suspended", 0) == 0) {
    // Recomputation failed; the claim stays open and nothing settles.
    AuditOutcome outcome;
    outcome.claim_id = claim_id;
    outcome.status = "suspended";
    transcript << "step=suspended\n";
    const fs::path transcript_path = run_dir / "audit" / "transcript.txt";
    write_file(transcript_path, transcript.str());
    outcome.transcript_path = transcript_path;
    return outcome;
  }

  const int assumed = adversaries_override > 0 ? adversaries_override
                                               : run.config.corrupt_count();
  const int kappa = kappa_override > 0 ? kappa_override : run.config.fl.kappa;

  if (after_hashes.status == contract::ClaimStatus::kOpen) {
    // Trojan phase: replay detection from the stored logs.
    if (run.config.fl.aggregator == fl::AggregatorKind::kSignAgg) {
      run.contract.dismiss_claim(
          claim_id, "sign-aggregation run: trojan forensics unsupported");
      transcript << "step=trojan-phase result=dismissed"
                 << " reason=sign-aggregation-unsupported\n";
    } else if (assumed == 0) {
      run.contract.dismiss_claim(claim_id, "assumed adversary count is zero");
      transcript << "step=trojan-phase result=dismissed"
                 << " reason=no-assumed-adversaries\n";
    } else {
      std::map<std::string, std::map<int, logstore::LogRecord>> records;
      for (const std::string& worker : run.contract.registered_workers()) {
        if (worker == accused) continue;  // already fetched
        const std::string grant =
            run.logstore.grant_access(claim_id, worker).grant_id;
        transcript << "step=grant worker=" << worker << " id=" << grant << "\n";
        for (logstore::LogRecord& record : run.logstore.fetch_logs(grant)) {
          records[worker][record.epoch_index] = std::move(record);
        }
      }
      records[accused] = std::move(accused_records);

      Eigen::VectorXf global_before =
          params_from_hex(read_file(run_dir / "globals" / "initial.f32hex"),
                          dim, "globals/initial.f32hex");
      std::vector<fl::RoundRecord> rounds;
      for (const RoundMeta& meta : run.rounds) {
        fl::RoundRecord round;
        round.round_index = meta.round;
        round.selected = meta.selected;
        round.weights = meta.weights;
        round.aggregator = meta.aggregator;
        round.eta = meta.eta;
        round.global_before = global_before;
        for (const std::string& worker : meta.selected) {
          const auto worker_it = records.find(worker);
          if (worker_it == records.end() ||
              worker_it->second.count(meta.round) == 0) {
            throw IntegrityError("log record missing: logstore/" + worker +
                                 "/epoch" + zfill(meta.round, 5) + ".log");
          }
          const logstore::LogRecord& record =
              worker_it->second.at(meta.round);
          if (record.kind != codec::PayloadKind::kFloat32) {
            throw IntegrityError("log record for " + worker +
                                 " does not carry float updates");
          }
          if (record.samples != meta.weights.at(worker)) {
            throw IntegrityError("log record weight for " + worker +
                                 " disagrees with the round metadata");
          }
          round.updates[worker] = codec::deserialize_float32(record.payload);
        }
        round.increment =
            fl::fed_avg_increment(round.updates, round.weights, round.eta);
        if (codec::hash_params(round.increment, codec::PayloadKind::kFloat32)
                .hex != meta.increment_digest) {
          throw IntegrityError(
              "re-aggregated increment digest mismatch at round " +
              std::to_string(meta.round) +
              "; a stored update or the round metadata was altered");
        }
        round.global_after =
            params_from_hex(read_file(global_file(run_dir, meta.round)), dim,
                            "globals/epoch" + zfill(meta.round, 5) + ".f32hex");
        if (codec::hash_params(round.global_after, codec::PayloadKind::kFloat32)
                .hex != meta.global_after_digest) {
          throw IntegrityError("stored global digest mismatch at round " +
                               std::to_string(meta.round));
        }
        global_before = round.global_after;
        rounds.push_back(std::move(round));
      }
      transcript << "step=rebuild rounds=" << rounds.size() << "\n";

      const nn::LabeledDataset clean_val = nn::make_synthetic(
          run.config.dataset.val_count,
          mix64(run.config.fl.seed, hash_string("val-data")),
          run.config.dataset.noise_std);
      const nn::LabeledDataset poisoned_val =
          detect::build_poisoned_validation(clean_val, run.config.trojan);
      const detect::DetectionReport report = detect::detect(
          rounds, run.config.model, poisoned_val, kappa, assumed);
      write_file(run_dir / "audit" / "report.json", report.to_json());
      write_file(run_dir / "audit" / "ranking.txt", report.to_text());
      transcript << "step=detect qualifying=" << report.qualifying_rounds.size()
                 << " no_signal=" << (report.no_signal ? "yes" : "no")
                 << " flagged=" << join(report.flagged, ',') << "\n";

      const bool confirmed =
          std::find(report.flagged.begin(), report.flagged.end(), accused) !=
          report.flagged.end();
      run.contract.record_trojan_verdict(claim_id, confirmed);
      transcript << "step=trojan-phase result="
                 << contract::to_string(run.contract.claim(claim_id).status)
                 << "\n";
    }
  }

  const contract::SettlementRecord settlement = run.contract.settle(claim_id);
  transcript << "step=settle loser=" << settlement.loser
             << " forfeited=" << settlement.forfeited
             << " remainder=" << settlement.pool_remainder << "\n";
  for (const auto& [worker, payout] : settlement.payouts) {
    transcript << "payout worker=" << worker << " amount=" << payout << "\n";
  }
  for (const std::string& worker : run.contract.registered_workers()) {
    const contract::EscrowAccount& account = run.contract.account(worker);
    transcript << "balance worker=" << worker << " balance=" << account.balance
               << " deposit=" << account.deposit_held
               << " gas_spent=" << account.gas_spent << "\n";
  }
  transcript << "conservation total_held=" << run.contract.total_held()
             << " minted=" << run.contract.minted()
             << " gas_burned=" << run.contract.gas_burned() << " ok="
             << (run.contract.total_held() + run.contract.gas_burned() ==
                         run.contract.minted()
                     ? "yes"
                     : "NO")
             << "\n";

  AuditOutcome outcome;
  outcome.claim_id = claim_id;
  outcome.status = contract::to_string(run.contract.claim(claim_id).status);
  outcome.loser = settlement.loser;
  outcome.forfeited = settlement.forfeited;
  transcript << "outcome status=" << outcome.status << "\n";

  const fs::path transcript_path = run_dir / "audit" / "transcript.txt";
  write_file(transcript_path, transcript.str());
  write_file(run_dir / "audit" / "contract_state.json",
             run.contract.to_json_string());
  outcome.transcript_path = transcript_path;
  return outcome;
}

std::string write_reports(const fs::path& run_dir) {
  if (!fs::exists(run_dir / "config.json")) {
    throw IntegrityError("not a run directory: " + run_dir.string());
  }
  const ExperimentConfig config = ExperimentConfig::load(run_dir / "config.json");
  const contract::PublicContract run_contract =
      contract::PublicContract::from_json_string(
          read_file(run_dir / "contract" / "state.json"));
  std::ostringstream summary;
  summary << "run seed=" << config.fl.seed
          << " aggregator=" << fl::to_string(config.fl.aggregator) << "\n";

  // Gas ledger, cross-checkable against the fixed schedule.
  {
    std::string csv = "worker,commitments,gas_spent\n";
    summary << "gas ledger:\n";
    for (const std::string& worker : run_contract.registered_workers()) {
      const auto& account = run_contract.account(worker);
      const std::size_t commits = run_contract.commitments(worker).size();
      csv += csv_escape(worker) + "," + std::to_string(commits) + "," +
             std::to_string(account.gas_spent) + "\n";
      summary << "  " << worker << " commitments=" << commits
              << " gas=" << account.gas_spent << "\n";
    }
    write_file(run_dir / "reports" / "gas.csv", csv);
  }

  // Claims and settlement summary; empty after a plain run.
  {
    const fs::path audited = run_dir / "audit" / "contract_state.json";
    const contract::PublicContract source =
        fs::exists(audited)
            ? contract::PublicContract::from_json_string(read_file(audited))
            : run_contract;
    std::string csv = "claim_id,accuser,accused,status,settled,loser\n";
    nlohmann::json state = nlohmann::json::parse(source.to_json_string());
    for (const auto& entry : state.at("claims")) {
      const std::string status = entry.at("status").get<std::string>();
      const bool settled = entry.at("settled").get<bool>();
      std::string loser;
      if (settled) {
        loser = status == "dismissed"
                    ? entry.at("accuser").get<std::string>()
                    : entry.at("accused").get<std::string>();
      }
      csv += std::to_string(entry.at("claim_id").get<int>()) + "," +
             entry.at("accuser").get<std::string>() + "," +
             entry.at("accused").get<std::string>() + "," + status + "," +
             (settled ? "1" : "0") + "," + loser + "\n";
      summary << "claim " << entry.at("claim_id").get<int>() << " "
              << entry.at("accuser").get<std::string>() << " vs "
              << entry.at("accused").get<std::string>() << ": " << status
              << "\n";
    }
    write_file(run_dir / "reports" / "settlement.csv", csv);
  }

  // Detection tables only exist when detection ran.
  const fs::path report_path = run_dir / "detection" / "report.json";
  if (fs::exists(report_path)) {
    const detect::DetectionReport report =
        detect::DetectionReport::from_json(read_file(report_path));
    {
      std::string csv = "round,backdoor_loss\n";
      for (std::size_t t = 0; t < report.backdoor_losses.size(); ++t) {
        csv += std::to_string(t) + "," +
               format_double(report.backdoor_losses[t]) + "\n";
      }
      write_file(run_dir / "reports" / "backdoor_loss.csv", csv);
    }
    {
      std::string csv = "round,agent,restricted_l2\n";
      for (std::size_t q = 0; q < report.qualifying_rounds.size(); ++q) {
        for (const auto& [agent, value] : report.per_round_l2[q]) {
          csv += std::to_string(report.qualifying_rounds[q]) + "," +
                 csv_escape(agent) + "," + format_double(value) + "\n";
        }
      }
      write_file(run_dir / "reports" / "agent_l2.csv", csv);
    }
    {
      std::string csv =
          "agent,avg_restricted_l2,qualifying_appearances,"
          "insufficient_signal,flagged\n";
      summary << "detection ranking (kappa=" << report.kappa << "):\n";
      for (const detect::AgentScore& score : report.ranking) {
        const bool flagged =
            std::find(report.flagged.begin(), report.flagged.end(),
                      score.agent_id) != report.flagged.end();
        csv += csv_escape(score.agent_id) + "," + format_double(score.avg_l2) +
               "," + std::to_string(score.qualifying_appearances) + "," +
               (score.insufficient_signal ? "1" : "0") + "," +
               (flagged ? "1" : "0") + "\n";
        summary << "  " << score.agent_id << " avg_l2=" << score.avg_l2
                << (flagged ? " FLAGGED" : "") << "\n";
      }
      write_file(run_dir / "reports" / "agent_avg.csv", csv);
    }
  } else {
    summary << "detection: not run (see result.json status)\n";
  }
  return summary.str();
}

}  // namespace fedledger::cli
