#include "fedledger/fl/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "fedledger/error.hpp"
#include "fedledger/util/rng.hpp"

namespace fedledger::fl {

void FLConfig::validate() const {
  if (rounds < 1) throw PreconditionError("fl config: rounds >= 1");
  if (agents < 1) throw PreconditionError("fl config: agents >= 1");
  if (corrupt_fraction < 0.0 || corrupt_fraction > 1.0) {
    throw PreconditionError("fl config: corrupt fraction in [0,1]");
  }
  if (selection_fraction <= 0.0 || selection_fraction > 1.0) {
    throw PreconditionError("fl config: selection fraction in (0,1]");
  }
  if (local_epochs < 0) throw PreconditionError("fl config: local epochs >= 0");
  if (local_batch < 1) throw PreconditionError("fl config: batch size >= 1");
  if (!(local_lr >= 0.0f)) throw PreconditionError("fl config: local lr >= 0");
  if (kappa < 1) throw PreconditionError("fl config: kappa >= 1");
}

int FLConfig::selected_per_round() const {
  // The 1e-9 slack keeps fractions like 1/3 * 30 from rounding up to 11.
  const int m = static_cast<int>(
      std::ceil(selection_fraction * static_cast<double>(agents) - 1e-9));
  return std::max(1, std::min(m, agents));
}

std::vector<int> sample_agents(const FLConfig& config, int round_index) {
  if (round_index < 0 || round_index >= config.rounds) {
    throw PreconditionError("sample_agents: round index out of range");
  }
  Rng rng(round_seed(config.seed, round_index, "agent-sampler"));
  std::vector<int> picked =
      rng.sample_without_replacement(config.agents,
                                     config.selected_per_round());
  std::sort(picked.begin(), picked.end());
  return picked;
}

Eigen::VectorXf local_update(const AgentSpec& agent,
                             const nn::ModelConfig& arch,
                             const Eigen::VectorXf& global,
                             const FLConfig& config,
                             std::uint64_t round_seed) {
  if (global.size() != arch.param_dim()) {
    throw ShapeError("local_update: global dim does not match architecture");
  }
  if (config.local_epochs == 0) {
    return Eigen::VectorXf::Zero(global.size());
  }
  nn::Model model;
  model.config = arch;
  model.params = global;
  nn::SgdOptions options;
  options.epochs = config.local_epochs;
  options.batch_size = config.local_batch;
  options.lr = config.local_lr;
  options.seed = round_seed;
  const nn::Model trained = nn::sgd_train(model, agent.dataset, options);
  return trained.params - global;
}

namespace {

// Leave-one-out metrics straight from the in-memory round (records are
// published once, after these are known).
logstore::LooMetrics loo_from_round(const RoundRecord& round,
                                    const std::string& exclude,
                                    const nn::ModelConfig& arch,
                                    const nn::LabeledDataset& validation) {
  logstore::LooMetrics loo;
  std::map<std::string, Eigen::VectorXf> updates;
  std::map<std::string, std::int64_t> weights;
  for (const auto& [agent, delta] : round.updates) {
    if (agent == exclude) continue;
    updates[agent] = delta;
    weights[agent] = round.weights.at(agent);
  }
  if (updates.empty() || validation.empty()) return loo;
  const Eigen::VectorXf increment =
      round.aggregator == AggregatorKind::kFedAvg
          ? fed_avg_increment(updates, weights, round.eta)
          : sign_agg_increment(updates, round.eta);
  nn::Model model;
  model.config = arch;
  model.params = round.global_before + increment;
  loo.present = true;
  loo.accuracy = nn::eval_accuracy(model, validation);
  loo.loss = nn::eval_loss(model, validation);
  return loo;
}

}  // namespace

ProtocolResult run_protocol(const FLConfig& config, const nn::ModelConfig& arch,
                            const std::vector<AgentSpec>& agents,
                            const Eigen::VectorXf& initial_params,
                            ProtocolEnv& env) {
  config.validate();
  arch.validate();
  if (static_cast<int>(agents.size()) != config.agents) {
    throw PreconditionError("run_protocol: agent list length != K");
  }
  if (env.chaincode == nullptr || env.scheduler == nullptr) {
    throw PreconditionError("run_protocol: chaincode and scheduler required");
  }
  if (initial_params.size() != arch.param_dim()) {
    throw ShapeError("run_protocol: initial params dim mismatch");
  }
  for (const AgentSpec& agent : agents) {
    if (env.credentials.count(agent.agent_id) == 0) {
      throw PreconditionError("run_protocol: no credential for " +
                              agent.agent_id);
    }
    if (agent.dataset.empty() && config.local_epochs > 0) {
      throw PreconditionError("run_protocol: empty dataset for " +
                              agent.agent_id);
    }
  }

  ProtocolResult result;
  env.chaincode->subscribe(
      [&result](const chain::AggregationEvent&) { ++result.aggregation_events; });

  const codec::PayloadKind kind = config.aggregator == AggregatorKind::kFedAvg
                                      ? codec::PayloadKind::kFloat32
                                      : codec::PayloadKind::kSignBits;
  std::map<std::string, double> latency_sum;
  std::map<std::string, std::int64_t> latency_count;
  // The public contract indexes commitments densely per worker; with C < 1
  // a worker's commitment sequence skips rounds it sat out.
  std::map<std::string, int> commit_counts;

  Eigen::VectorXf global = initial_params;
  for (int t = 0; t < config.rounds; ++t) {
    RoundRecord round;
    round.round_index = t;
    round.aggregator = config.aggregator;
    round.eta = config.eta;
    round.global_before = global;

    for (int index : sample_agents(config, t)) {
      round.selected.push_back(agents[static_cast<std::size_t>(index)].agent_id);
    }
    std::sort(round.selected.begin(), round.selected.end());

    env.chaincode->begin_epoch(t, round.selected);
    env.chaincode->announce_model(
        t, codec::hash_params(global, codec::PayloadKind::kFloat32));

    for (const std::string& agent_id : round.selected) {
      const auto it =
          std::find_if(agents.begin(), agents.end(), [&](const AgentSpec& a) {
            return a.agent_id == agent_id;
          });
      const AgentSpec& agent = *it;
      const Eigen::VectorXf delta = local_update(
          agent, arch, global, config,
          round_seed(config.seed, t, agent_id));
      round.updates[agent_id] = delta;
      round.weights[agent_id] = agent.sample_count();

      chain::UploadOutcome outcome;
      try {
        outcome = env.chaincode->upload_params(
            agent_id, env.credentials.at(agent_id), t, delta,
            agent.sample_count(), *env.scheduler);
      } catch (const TransportError& error) {
        throw TransportError(error.what(), t);
      }
      if (outcome.rejected > 0) {
        throw TransportError("upload rejected for " + agent_id, t);
      }
      for (const chain::TxResult& tx : outcome.txs) {
        if (tx.label.rfind("upload-batch:", 0) == 0 &&
            tx.status == chain::TxStatus::kCommitted) {
          latency_sum[agent_id] +=
              static_cast<double>(tx.commit_tick - tx.submit_tick);
          ++latency_count[agent_id];
        }
      }

      if (env.contract != nullptr) {
        // The digest covers exactly the bytes the chain stores.
        env.contract->commit_hash(agent_id, commit_counts[agent_id]++,
                                  codec::hash_params(delta, kind));
      }
    }

    round.increment = env.chaincode->aggregate(config.aggregator, config.eta);
    round.global_after = round.global_before + round.increment;
    global = round.global_after;

    if (env.logstore != nullptr) {
      for (const std::string& agent_id : round.selected) {
        logstore::LogRecord record;
        record.worker_id = agent_id;
        record.epoch_index = t;
        record.kind = kind;
        record.dim = arch.param_dim();
        record.samples = round.weights.at(agent_id);
        record.payload =
            codec::canonical_wire_bytes(round.updates.at(agent_id), kind);
        if (env.compute_loo) {
          record.loo = loo_from_round(round, agent_id, arch, env.validation);
        }
        env.logstore->publish(std::move(record));
      }
    }

    result.rounds.push_back(std::move(round));
  }

  result.final_params = global;
  for (const auto& [agent_id, total] : latency_sum) {
    result.avg_upload_latency[agent_id] =
        total / static_cast<double>(latency_count.at(agent_id));
  }
  return result;
}

}  // namespace fedledger::fl
