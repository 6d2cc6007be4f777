#include <doctest.h>

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fedledger/chain/chaincode.hpp"
#include "fedledger/chain/ledger.hpp"
#include "fedledger/chain/scheduler.hpp"
#include "fedledger/codec/wire.hpp"
#include "fedledger/error.hpp"
#include "fedledger/fl/aggregate.hpp"
#include "fedledger/util/rng.hpp"

using namespace fedledger;
using chain::TxRequest;
using chain::TxStatus;

namespace {

TxRequest put_tx(const std::string& worker, const std::string& key,
                 const std::string& value, bool read_first = true) {
  TxRequest req;
  req.worker = worker;
  req.credential = "key:" + worker;
  req.label = "put:" + key;
  req.program = [key, value, read_first](chain::TxContext& ctx) {
    if (read_first) ctx.get(key);
    ctx.put(key, value);
  };
  return req;
}

chain::Ledger make_ledger(const std::vector<std::string>& workers) {
  chain::Ledger ledger;
  for (const std::string& w : workers) ledger.register_worker(w, "key:" + w);
  ledger.create_channel("main");
  return ledger;
}

Eigen::VectorXf random_vec(Eigen::Index dim, Rng& rng) {
  Eigen::VectorXf v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    v(i) = static_cast<float>(rng.next_uniform(-1.0, 1.0));
  }
  return v;
}

bool exact_equal(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

struct CodeFixture {
  chain::Ledger ledger;
  chain::FlChaincode chaincode;

  CodeFixture(chain::FlChainConfig config, const std::vector<std::string>& workers)
      : chaincode(ledger, config) {
    std::map<std::string, std::string> credentials;
    for (const std::string& w : workers) credentials[w] = "key:" + w;
    chaincode.setup(credentials);
  }
};

}  // namespace

TEST_CASE("same-snapshot writers of one key: exactly one commits") {
  chain::Ledger ledger = make_ledger({"a", "b"});
  const std::vector<chain::TxResult> results = ledger.submit_concurrent(
      "main", {put_tx("a", "k", "from-a"), put_tx("b", "k", "from-b")});
  REQUIRE(results.size() == 2);
  CHECK(results[0].status == TxStatus::kCommitted);
  CHECK(results[1].status == TxStatus::kMvccConflict);
  CHECK(ledger.latest("main", "k") == "from-a");
  CHECK(ledger.latest_version("main", "k") == 1);
}

TEST_CASE("same-snapshot writers of different keys: both commit") {
  chain::Ledger ledger = make_ledger({"a", "b"});
  const std::vector<chain::TxResult> results = ledger.submit_concurrent(
      "main", {put_tx("a", "k1", "v1"), put_tx("b", "k2", "v2")});
  CHECK(results[0].status == TxStatus::kCommitted);
  CHECK(results[1].status == TxStatus::kCommitted);
  CHECK(ledger.latest("main", "k1") == "v1");
  CHECK(ledger.latest("main", "k2") == "v2");
}

TEST_CASE("read-only transactions never conflict") {
  chain::Ledger ledger = make_ledger({"a", "b"});
  ledger.submit("main", put_tx("a", "k", "v0"));
  TxRequest reader;
  reader.worker = "b";
  reader.credential = "key:b";
  reader.label = "read";
  std::string seen;
  reader.program = [&seen](chain::TxContext& ctx) {
    seen = ctx.get("k").value_or("");
  };
  const std::vector<chain::TxResult> results = ledger.submit_concurrent(
      "main", {put_tx("a", "k", "v1"), reader, reader});
  CHECK(results[0].status == TxStatus::kCommitted);
  CHECK(results[1].status == TxStatus::kCommitted);
  CHECK(results[2].status == TxStatus::kCommitted);
  CHECK(seen == "v0");  // snapshot read, not the concurrent write
}

TEST_CASE("rejections: unknown channel, bad credential, explicit abort") {
  chain::Ledger ledger = make_ledger({"a"});
  CHECK(ledger.submit("nope", put_tx("a", "k", "v")).status ==
        TxStatus::kRejected);

  TxRequest bad = put_tx("a", "k", "v");
  bad.credential = "wrong";
  CHECK(ledger.submit("main", bad).status == TxStatus::kRejected);

  TxRequest aborting;
  aborting.worker = "a";
  aborting.credential = "key:a";
  aborting.label = "abort";
  aborting.program = [](chain::TxContext& ctx) { ctx.abort("nope"); };
  const chain::TxResult res = ledger.submit("main", aborting);
  CHECK(res.status == TxStatus::kRejected);
  CHECK(res.error == "nope");
  CHECK(ledger.latest("main", "k") == std::nullopt);
}

TEST_CASE("versions are dense per key and history is append-only") {
  chain::Ledger ledger = make_ledger({"a"});
  for (int i = 0; i < 5; ++i) {
    ledger.submit("main", put_tx("a", "k", "v" + std::to_string(i)));
  }
  CHECK(ledger.latest_version("main", "k") == 5);
  const std::vector<chain::VersionedValue>* history =
      ledger.key_history("main", "k");
  REQUIRE(history != nullptr);
  REQUIRE(history->size() == 5);
  for (std::size_t i = 0; i < history->size(); ++i) {
    CHECK((*history)[i].version == static_cast<std::int64_t>(i + 1));
    CHECK((*history)[i].value == "v" + std::to_string(i));
  }
  CHECK(ledger.latest("main", "k") == "v4");
}

TEST_CASE("channel membership restricts submitters") {
  chain::Ledger ledger;
  ledger.register_worker("a", "key:a");
  ledger.register_worker("b", "key:b");
  ledger.create_channel("private", {"a"});
  CHECK(ledger.submit("private", put_tx("a", "k", "v")).status ==
        TxStatus::kCommitted);
  CHECK(ledger.submit("private", put_tx("b", "k", "v")).status ==
        TxStatus::kRejected);
}

TEST_CASE("randomized workloads serialize: commit-log replay equals final state") {
  Rng rng(404);
  for (int trial = 0; trial < 10; ++trial) {
    chain::Ledger ledger = make_ledger({"w0", "w1", "w2", "w3"});
    int committed = 0, conflicted = 0;
    for (int step = 0; step < 40; ++step) {
      std::vector<TxRequest> group;
      const int group_size = 1 + static_cast<int>(rng.next_below(4));
      for (int g = 0; g < group_size; ++g) {
        const std::string worker = "w" + std::to_string(rng.next_below(4));
        const std::string key = "k" + std::to_string(rng.next_below(6));
        group.push_back(put_tx(worker, key,
                               "s" + std::to_string(step) + "g" +
                                   std::to_string(g)));
      }
      for (const chain::TxResult& r : ledger.submit_concurrent("main", group)) {
        if (r.status == TxStatus::kCommitted) ++committed;
        if (r.status == TxStatus::kMvccConflict) ++conflicted;
      }
    }
    CHECK(committed > 0);

    // Serial replay of committed transactions in log order.
    std::map<std::string, std::string> replay;
    std::map<std::string, std::int64_t> versions;
    for (const chain::TxResult& tx : ledger.commit_log()) {
      if (tx.status != TxStatus::kCommitted || tx.channel != "main") continue;
      for (const chain::WriteRecord& w : tx.writes) {
        replay[w.key] = w.value;
        CHECK(w.version == ++versions[w.key]);  // dense versions in log order
      }
    }
    for (const auto& [key, value] : replay) {
      CHECK(ledger.latest("main", key) == value);
      CHECK(ledger.latest_version("main", key) == versions[key]);
    }
    CHECK(ledger.scan_prefix("main", "k").size() == replay.size());
  }
}

TEST_CASE("conflict groups: exactly one commit per same-key group") {
  Rng rng(405);
  for (int trial = 0; trial < 20; ++trial) {
    chain::Ledger ledger = make_ledger({"w0", "w1", "w2", "w3"});
    const int group_size = 2 + static_cast<int>(rng.next_below(3));
    std::vector<TxRequest> group;
    for (int g = 0; g < group_size; ++g) {
      group.push_back(
          put_tx("w" + std::to_string(g), "hot", "g" + std::to_string(g)));
    }
    int committed = 0;
    for (const chain::TxResult& r : ledger.submit_concurrent("main", group)) {
      if (r.status == TxStatus::kCommitted) ++committed;
    }
    CHECK(committed == 1);
  }
}

TEST_CASE("shard keys are worker id plus 1-based zero-padded batch number") {
  CHECK(chain::FlChaincode::shard_key("A", 0) == "A00001");
  CHECK(chain::FlChaincode::shard_key("A", 1) == "A00002");
  CHECK(chain::FlChaincode::shard_key("agent7", 12) == "agent700013");
  CHECK(chain::FlChaincode::global_key(3) == "GLOBAL00003");
  CHECK(chain::FlChaincode::worker_channel("w") == "ch:w");
}

TEST_CASE("upload writes shards, marks receipt, and gates aggregation") {
  chain::FlChainConfig config{codec::PayloadKind::kFloat32, 8};
  config.chunk_chars = 24;  // 64 hex chars -> 3 chunks
  CodeFixture fx(config, {"A", "B"});
  chain::Scheduler scheduler(1);

  fx.chaincode.begin_epoch(0, {"A", "B"});
  CHECK(fx.chaincode.expected_chunks() == 3);
  CHECK(fx.chaincode.payload_text_length() == 64);

  Rng rng(7);
  const Eigen::VectorXf delta_a = random_vec(8, rng);
  const Eigen::VectorXf delta_b = random_vec(8, rng);

  const chain::UploadOutcome out_a =
      fx.chaincode.upload_params("A", "key:A", 0, delta_a, 11, scheduler);
  CHECK(out_a.committed == 3);
  CHECK(out_a.rejected == 0);

  // A is received, B is not: the counter gate must hold.
  chain::EpochState st = fx.chaincode.state();
  CHECK(st.upload_counter == 1);
  CHECK_FALSE(st.aggregation_enabled);
  CHECK_THROWS_AS(fx.chaincode.aggregate(fl::AggregatorKind::kFedAvg, 1.0f),
                  PreconditionError);

  // Shard keys A00001..A00003 exist on the aggregation channel.
  for (int b = 0; b < 3; ++b) {
    CHECK(fx.ledger.latest("agg", chain::FlChaincode::shard_key("A", b))
              .has_value());
  }

  // A repeated upload by the same worker in the same epoch is rejected
  // shard by shard and leaves the state untouched.
  const chain::UploadOutcome dup =
      fx.chaincode.upload_params("A", "key:A", 0, delta_a, 11, scheduler);
  CHECK(dup.committed == 0);
  CHECK(dup.rejected == 3);
  CHECK(fx.chaincode.state().upload_counter == 1);

  fx.chaincode.upload_params("B", "key:B", 0, delta_b, 33, scheduler);
  st = fx.chaincode.state();
  CHECK(st.upload_counter == 2);
  CHECK(st.aggregation_enabled);
  CHECK(st.received == std::vector<std::string>{"A", "B"});

  const Eigen::VectorXf increment =
      fx.chaincode.aggregate(fl::AggregatorKind::kFedAvg, 1.0f);
  std::map<std::string, Eigen::VectorXf> updates{{"A", delta_a}, {"B", delta_b}};
  std::map<std::string, std::int64_t> weights{{"A", 11}, {"B", 33}};
  CHECK(exact_equal(increment, fl::fed_avg_increment(updates, weights, 1.0f)));
  CHECK(exact_equal(fx.chaincode.read_global_increment(0), increment));

  // The epoch is closed: nothing further may upload into it.
  CHECK(fx.chaincode.state().open == false);
}

TEST_CASE("single-worker fedavg aggregation returns the decoded delta") {
  chain::FlChainConfig config{codec::PayloadKind::kFloat32, 5};
  CodeFixture fx(config, {"solo"});
  chain::Scheduler scheduler(2);
  fx.chaincode.begin_epoch(0, {"solo"});
  Rng rng(9);
  const Eigen::VectorXf delta = random_vec(5, rng);
  fx.chaincode.upload_params("solo", "key:solo", 0, delta, 17, scheduler);
  CHECK(exact_equal(fx.chaincode.aggregate(fl::AggregatorKind::kFedAvg, 1.0f),
                    delta));
}

TEST_CASE("sign aggregation on chain equals the oracle, including ties") {
  chain::FlChainConfig config{codec::PayloadKind::kSignBits, 6};
  CodeFixture fx(config, {"p", "q"});
  chain::Scheduler scheduler(3);
  fx.chaincode.begin_epoch(0, {"p", "q"});
  Eigen::VectorXf dp(6), dq(6);
  dp << 1.0f, -1.0f, 0.0f, 2.0f, -3.0f, 0.0f;
  dq << 1.0f, 1.0f, -1.0f, -2.0f, -3.0f, 0.0f;
  fx.chaincode.upload_params("p", "key:p", 0, dp, 5, scheduler);
  fx.chaincode.upload_params("q", "key:q", 0, dq, 5, scheduler);
  const Eigen::VectorXf increment =
      fx.chaincode.aggregate(fl::AggregatorKind::kSignAgg, 0.5f);
  std::map<std::string, Eigen::VectorXf> updates{{"p", dp}, {"q", dq}};
  CHECK(exact_equal(increment, fl::sign_agg_increment(updates, 0.5f)));
  // Tie coordinates resolve positive: coordinate 1 sums to zero, and in
  // coordinate 2 the zero packs as +1 against q's -1.
  CHECK(increment(1) == 0.5f);
  CHECK(increment(2) == 0.5f);
  CHECK(increment(4) == -0.5f);
}

TEST_CASE("worker hash recomputed from the ledger matches the off-chain digest") {
  Rng rng(21);
  const Eigen::VectorXf delta = random_vec(40, rng);
  for (codec::PayloadKind kind :
       {codec::PayloadKind::kFloat32, codec::PayloadKind::kSignBits}) {
    CAPTURE(codec::to_string(kind));
    const codec::HashDigest off_chain = codec::hash_params(delta, kind);
    // Two different chunk sizes, one digest.
    for (int chunk_chars : {13, 1000}) {
      chain::FlChainConfig config{kind, 40};
      config.chunk_chars = chunk_chars;
      CodeFixture fx(config, {"W"});
      chain::Scheduler scheduler(4);
      fx.chaincode.begin_epoch(0, {"W"});
      fx.chaincode.upload_params("W", "key:W", 0, delta, 9, scheduler);
      CHECK(fx.chaincode.recompute_worker_hash("W", 0) == off_chain);
    }
  }
}

TEST_CASE("a tampered shard value changes the recomputed hash") {
  chain::FlChainConfig config{codec::PayloadKind::kFloat32, 6};
  CodeFixture fx(config, {"W"});
  chain::Scheduler scheduler(5);
  fx.chaincode.begin_epoch(0, {"W"});
  Rng rng(23);
  const Eigen::VectorXf delta = random_vec(6, rng);
  fx.chaincode.upload_params("W", "key:W", 0, delta, 9, scheduler);
  const codec::HashDigest honest = fx.chaincode.recompute_worker_hash("W", 0);

  // Overwrite the shard through a fresh transaction: the history keeps the
  // original version, but the latest value now decodes to different bytes.
  Eigen::VectorXf altered = delta;
  altered(2) += 0.25f;
  const std::string key = chain::FlChaincode::shard_key("W", 0);
  const std::string original = *fx.ledger.latest("agg", key);
  const std::string tampered_payload =
      codec::payload_text(altered, codec::PayloadKind::kFloat32);
  // Shard layout: FLB1|worker|epoch|batch|kind|dim|chunks|samples|payload.
  const std::string prefix = original.substr(0, original.rfind('|') + 1);
  TxRequest tamper = put_tx("W", key, prefix + tampered_payload);
  CHECK(fx.ledger.submit("agg", tamper).status == TxStatus::kCommitted);

  CHECK(fx.chaincode.recompute_worker_hash("W", 0) != honest);
  CHECK(fx.chaincode.recompute_worker_hash("W", 0) ==
        codec::hash_params(altered, codec::PayloadKind::kFloat32));
  // The pre-tamper version is still in the history, untouched.
  const auto* history = fx.ledger.key_history("agg", key);
  REQUIRE(history != nullptr);
  CHECK(history->front().value == original);
}

TEST_CASE("cache recovery reproduces the conflict-free ledger state") {
  const Eigen::Index dim = 24;
  Rng rng(31);
  std::vector<Eigen::VectorXf> deltas;
  std::vector<std::string> workers;
  for (int i = 0; i < 4; ++i) {
    workers.push_back("w" + std::to_string(i));
    deltas.push_back(random_vec(dim, rng));
  }

  auto run = [&](double conflict_rate, std::uint64_t seed) {
    chain::FlChainConfig config{codec::PayloadKind::kFloat32, dim};
    config.chunk_chars = 48;  // 192 hex chars -> 4 chunks per worker
    config.drain_retry_limit = 30;
    auto fx = std::make_unique<CodeFixture>(config, workers);
    chain::SchedulerConfig sched_config;
    sched_config.conflict_rate = conflict_rate;
    chain::Scheduler scheduler(seed, sched_config);
    fx->chaincode.begin_epoch(0, workers);
    int cached = 0;
    for (std::size_t i = 0; i < workers.size(); ++i) {
      const chain::UploadOutcome out = fx->chaincode.upload_params(
          workers[i], "key:" + workers[i], 0, deltas[i], 10, scheduler);
      cached += out.cached;
    }
    const Eigen::VectorXf inc =
        fx->chaincode.aggregate(fl::AggregatorKind::kFedAvg, 1.0f);
    return std::tuple(std::move(fx), inc, cached);
  };

  auto [clean_fx, clean_inc, clean_cached] = run(0.0, 1);
  CHECK(clean_cached == 0);

  bool exercised_cache = false;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto [fx, inc, cached] = run(0.5, seed);
    if (cached > 0) exercised_cache = true;
    CHECK(exact_equal(inc, clean_inc));
    // Every shard key holds byte-identical payload values.
    for (std::size_t i = 0; i < workers.size(); ++i) {
      for (int b = 0; b < 4; ++b) {
        const std::string key = chain::FlChaincode::shard_key(workers[i], b);
        CHECK(fx->ledger.latest("agg", key) ==
              clean_fx->ledger.latest("agg", key));
      }
      CHECK(fx->chaincode.recompute_worker_hash(workers[i], 0) ==
            clean_fx->chaincode.recompute_worker_hash(workers[i], 0));
    }
  }
  CHECK(exercised_cache);
}

TEST_CASE("empty cache drain is a no-op") {
  chain::FlChainConfig config{codec::PayloadKind::kFloat32, 4};
  CodeFixture fx(config, {"w"});
  chain::Scheduler scheduler(6);
  fx.chaincode.begin_epoch(0, {"w"});
  CHECK(fx.chaincode.cache_drain("w", "key:w", 0, scheduler).empty());
}

TEST_CASE("legacy shared counter makes concurrent shard uploads collide") {
  Rng rng(41);
  const Eigen::VectorXf delta = random_vec(24, rng);
  chain::SchedulerConfig sched_config;
  sched_config.max_group = 4;  // several shards share one snapshot
  int total_conflicts = 0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    chain::FlChainConfig config{codec::PayloadKind::kFloat32, 24};
    config.chunk_chars = 48;  // 4 chunks
    config.shared_counter = true;
    CodeFixture fx(config, {"w"});
    chain::Scheduler scheduler(seed, sched_config);
    fx.chaincode.begin_epoch(0, {"w"});
    const chain::UploadOutcome out =
        fx.chaincode.upload_params("w", "key:w", 0, delta, 5, scheduler);
    // Distinct shard keys, but every transaction bumps the shared counter:
    // within a snapshot group only the first can commit.
    total_conflicts += out.conflicts;
    CHECK(out.cached == out.conflicts);
    // Recovery still completes the upload and the state is correct.
    CHECK(fx.chaincode.state().aggregation_enabled);
    CHECK(exact_equal(fx.chaincode.aggregate(fl::AggregatorKind::kFedAvg, 1.0f),
                      delta));
  }
  CHECK(total_conflicts > 0);

  // The distinct-key default: same workload, zero conflicts.
  chain::FlChainConfig clean_config{codec::PayloadKind::kFloat32, 24};
  clean_config.chunk_chars = 48;
  CodeFixture clean_fx(clean_config, {"w"});
  chain::Scheduler clean_scheduler(1, sched_config);
  clean_fx.chaincode.begin_epoch(0, {"w"});
  const chain::UploadOutcome clean_out = clean_fx.chaincode.upload_params(
      "w", "key:w", 0, delta, 5, clean_scheduler);
  CHECK(clean_out.conflicts == 0);
  CHECK(clean_out.cached == 0);
}

TEST_CASE("model announcements travel over the private worker channel") {
  chain::FlChainConfig config{codec::PayloadKind::kFloat32, 4};
  CodeFixture fx(config, {"u", "v"});
  fx.chaincode.begin_epoch(0, {"u", "v"});
  const codec::HashDigest digest = codec::sha256_hex(std::string{"model-bytes"});
  fx.chaincode.announce_model(0, digest);
  const auto seen = fx.chaincode.read_model_announcement("u", "key:u", 0);
  REQUIRE(seen.has_value());
  CHECK(*seen == digest.hex);
  CHECK_FALSE(
      fx.chaincode.read_model_announcement("u", "key:u", 1).has_value());
  // Wrong credential cannot read the channel.
  CHECK_THROWS_AS(fx.chaincode.read_model_announcement("u", "bad", 0),
                  AccessDeniedError);
}

TEST_CASE("commit log export is line-delimited and deterministic") {
  auto build = [] {
    chain::Ledger ledger = make_ledger({"a", "b"});
    ledger.submit_concurrent(
        "main", {put_tx("a", "k", "v1"), put_tx("b", "k", "v2")});
    ledger.submit("main", put_tx("a", "k2", "v3"));
    return ledger.export_commit_log();
  };
  const std::string log = build();
  CHECK(log == build());
  CHECK(log.find("committed") != std::string::npos);
  CHECK(log.find("mvcc-conflict") != std::string::npos);
  CHECK(log.find("put:k2") != std::string::npos);
  // One line per transaction, newline-terminated.
  CHECK(std::count(log.begin(), log.end(), '\n') == 3);
}

TEST_CASE("logical ticks order submit and commit events") {
  chain::Ledger ledger = make_ledger({"a"});
  const std::int64_t before = ledger.now();
  const chain::TxResult res = ledger.submit("main", put_tx("a", "k", "v"));
  CHECK(res.submit_tick >= before);
  CHECK(res.commit_tick >= res.submit_tick);
  CHECK(ledger.now() > before);
}
