#include <doctest.h>

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fedledger/codec/base64.hpp"
#include "fedledger/codec/wire.hpp"
#include "fedledger/error.hpp"
#include "fedledger/fl/aggregate.hpp"
#include "fedledger/logstore/logstore.hpp"
#include "fedledger/nn/model.hpp"
#include "fedledger/util/rng.hpp"

using namespace fedledger;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fedledger_logstore" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

Eigen::VectorXf random_vec(Eigen::Index dim, Rng& rng) {
  Eigen::VectorXf v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    v(i) = static_cast<float>(rng.next_uniform(-1.0, 1.0));
  }
  return v;
}

logstore::LogRecord make_record(const std::string& worker, int epoch,
                                const Eigen::VectorXf& delta,
                                codec::PayloadKind kind, std::int64_t samples) {
  logstore::LogRecord record;
  record.worker_id = worker;
  record.epoch_index = epoch;
  record.kind = kind;
  record.dim = delta.size();
  record.samples = samples;
  record.payload = codec::canonical_wire_bytes(delta, kind);
  return record;
}

// Dense-only shape small enough for exact hand oracles.
nn::ModelConfig tiny_config() {
  nn::ModelConfig config;
  config.height = 2;
  config.width = 2;
  config.conv_filters = 0;
  config.hidden_units = 3;
  config.num_classes = 2;
  return config;
}

nn::LabeledDataset tiny_validation() {
  nn::LabeledDataset data;
  data.height = 2;
  data.width = 2;
  data.channels = 1;
  data.num_classes = 2;
  data.inputs.resize(4, 4);
  data.inputs << 1.0f, 0.9f, 0.0f, 0.1f,  //
      0.0f, 0.1f, 1.0f, 0.8f,             //
      0.9f, 1.0f, 0.1f, 0.0f,             //
      0.1f, 0.0f, 0.8f, 1.0f;
  data.labels = {0, 1, 0, 1};
  data.validate();
  return data;
}

}  // namespace

TEST_CASE("publish assigns digests and sequential timestamps, immutably") {
  logstore::LogStore store;
  Rng rng(11);
  const Eigen::VectorXf u = random_vec(6, rng);

  const auto r1 =
      store.publish(make_record("a", 0, u, codec::PayloadKind::kFloat32, 5));
  CHECK(r1.timestamp == 1);
  CHECK(r1.digest == codec::sha256_hex(codec::canonical_wire_bytes(
                         u, codec::PayloadKind::kFloat32)));
  const auto r2 =
      store.publish(make_record("a", 1, u, codec::PayloadKind::kFloat32, 5));
  CHECK(r2.timestamp == 2);
  CHECK(store.size() == 2);
  CHECK(store.has_record("a", 0));
  CHECK_FALSE(store.has_record("a", 2));
  CHECK_FALSE(store.has_record("b", 0));

  // (worker, epoch) is write-once; malformed records never enter.
  CHECK_THROWS_AS(
      store.publish(make_record("a", 0, u, codec::PayloadKind::kFloat32, 5)),
      PreconditionError);
  CHECK_THROWS_AS(
      store.publish(make_record("", 0, u, codec::PayloadKind::kFloat32, 5)),
      PreconditionError);
  CHECK_THROWS_AS(
      store.publish(make_record("a", -1, u, codec::PayloadKind::kFloat32, 5)),
      PreconditionError);
  logstore::LogRecord empty = make_record("c", 0, u,
                                          codec::PayloadKind::kFloat32, 5);
  empty.payload.clear();
  CHECK_THROWS_AS(store.publish(std::move(empty)), PreconditionError);
  CHECK(store.size() == 2);
}

TEST_CASE("a full run publishes rounds x selected records, index sorted") {
  logstore::LogStore store;
  Rng rng(12);
  const int rounds = 4;
  const std::vector<std::string> workers{"a", "b", "c"};
  for (int epoch = 0; epoch < rounds; ++epoch) {
    for (const std::string& w : workers) {
      store.publish(make_record(w, epoch, random_vec(5, rng),
                                codec::PayloadKind::kFloat32, 7));
    }
  }
  CHECK(store.size() == static_cast<std::size_t>(rounds) * workers.size());
  const auto index = store.index();
  REQUIRE(index.size() == store.size());
  for (std::size_t i = 1; i < index.size(); ++i) {
    const auto prev = std::make_pair(std::get<0>(index[i - 1]),
                                     std::get<1>(index[i - 1]));
    const auto cur =
        std::make_pair(std::get<0>(index[i]), std::get<1>(index[i]));
    CHECK(prev < cur);
  }
  for (int epoch = 0; epoch < rounds; ++epoch) {
    for (const std::string& w : workers) CHECK(store.has_record(w, epoch));
  }
}

TEST_CASE("grants disclose a subject's records exactly once") {
  logstore::LogStore store;
  Rng rng(13);
  // Publish out of epoch order; disclosure must come back sorted.
  for (int epoch : {2, 0, 1}) {
    store.publish(make_record("suspect", epoch, random_vec(4, rng),
                              codec::PayloadKind::kFloat32, 3));
  }
  store.publish(make_record("bystander", 0, random_vec(4, rng),
                            codec::PayloadKind::kFloat32, 3));

  const auto& g1 = store.grant_access(1, "suspect");
  CHECK(g1.grant_id == "grant1");
  CHECK(g1.claim_id == 1);
  CHECK_FALSE(g1.consumed);
  const auto& g2 = store.grant_access(2, "nobody");
  CHECK(g2.grant_id == "grant2");

  const std::vector<logstore::LogRecord> logs = store.fetch_logs("grant1");
  REQUIRE(logs.size() == 3);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    CHECK(logs[i].worker_id == "suspect");
    CHECK(logs[i].epoch_index == static_cast<int>(i));
  }
  // One-time: the same ticket never discloses twice.
  CHECK_THROWS_AS(store.fetch_logs("grant1"), AccessDeniedError);
  CHECK_THROWS_AS(store.fetch_logs("grant99"), AccessDeniedError);

  // A grant for a worker without records consumes but returns nothing.
  CHECK(store.fetch_logs("grant2").empty());
  CHECK_THROWS_AS(store.fetch_logs("grant2"), AccessDeniedError);
}

TEST_CASE("leave-one-out evaluation equals the direct aggregation oracle") {
  const nn::ModelConfig config = tiny_config();
  const nn::LabeledDataset validation = tiny_validation();
  const Eigen::Index dim = config.param_dim();
  const Eigen::VectorXf global_before = nn::Model::init(config, 99).params;
  Rng rng(14);

  logstore::LogStore store;
  std::map<std::string, Eigen::VectorXf> updates;
  std::map<std::string, std::int64_t> weights{{"a", 5}, {"b", 7}, {"c", 9}};
  for (const auto& [worker, samples] : weights) {
    updates[worker] = random_vec(dim, rng);
    store.publish(make_record(worker, 0, updates[worker],
                              codec::PayloadKind::kFloat32, samples));
  }

  auto oracle = [&](const std::string& excluded,
                    fl::AggregatorKind aggregator, float eta) {
    std::map<std::string, Eigen::VectorXf> kept = updates;
    std::map<std::string, std::int64_t> kept_weights = weights;
    kept.erase(excluded);
    kept_weights.erase(excluded);
    const Eigen::VectorXf increment =
        aggregator == fl::AggregatorKind::kFedAvg
            ? fl::fed_avg_increment(kept, kept_weights, eta)
            : fl::sign_agg_increment(kept, eta);
    nn::Model model;
    model.config = config;
    model.params = global_before + increment;
    return std::pair(nn::eval_accuracy(model, validation),
                     nn::eval_loss(model, validation));
  };

  for (const std::string excluded : {"a", "b", "c"}) {
    const auto got =
        store.leave_one_out_eval(0, excluded, config, global_before,
                                 fl::AggregatorKind::kFedAvg, 0.5f, validation);
    const auto want = oracle(excluded, fl::AggregatorKind::kFedAvg, 0.5f);
    CHECK(got.first == want.first);
    CHECK(got.second == want.second);
  }
  // Excluding a stranger keeps every update in.
  CHECK(store.leave_one_out_eval(0, "zz", config, global_before,
                                 fl::AggregatorKind::kFedAvg, 0.5f,
                                 validation) ==
        oracle("zz", fl::AggregatorKind::kFedAvg, 0.5f));

  // Sign-bit records feed the sign aggregator through the base64 path.
  logstore::LogStore sign_store;
  for (const auto& [worker, samples] : weights) {
    sign_store.publish(make_record(worker, 0, updates[worker],
                                   codec::PayloadKind::kSignBits, samples));
  }
  const auto got_signs =
      sign_store.leave_one_out_eval(0, "b", config, global_before,
                                    fl::AggregatorKind::kSignAgg, 1.0f,
                                    validation);
  CHECK(got_signs == oracle("b", fl::AggregatorKind::kSignAgg, 1.0f));

  // Excluding the only contributor leaves nothing to aggregate.
  logstore::LogStore solo;
  solo.publish(
      make_record("only", 0, updates["a"], codec::PayloadKind::kFloat32, 5));
  CHECK_THROWS_AS(
      solo.leave_one_out_eval(0, "only", config, global_before,
                              fl::AggregatorKind::kFedAvg, 1.0f, validation),
      IntegrityError);
  CHECK_THROWS_AS(
      solo.leave_one_out_eval(3, "zz", config, global_before,
                              fl::AggregatorKind::kFedAvg, 1.0f, validation),
      IntegrityError);
}

TEST_CASE("save/load round-trips every record bit-exactly") {
  logstore::LogStore store;
  Rng rng(15);
  for (int epoch = 0; epoch < 3; ++epoch) {
    for (const std::string w : {"a", "b"}) {
      logstore::LogRecord record = make_record(
          w, epoch, random_vec(9, rng),
          epoch == 2 ? codec::PayloadKind::kSignBits
                     : codec::PayloadKind::kFloat32,
          10 + epoch);
      record.loo.present = epoch != 1;
      record.loo.accuracy = 1.0 / 3.0;   // not representable in decimal
      record.loo.loss = 0.1 + epoch;
      store.publish(std::move(record));
    }
  }

  const fs::path dir1 = fresh_dir("save1");
  const fs::path dir2 = fresh_dir("save2");
  store.save(dir1);
  const logstore::LogStore loaded = logstore::LogStore::load(dir1);
  CHECK(loaded.index() == store.index());
  CHECK(loaded.size() == store.size());

  // Saving the loaded store reproduces the directory byte for byte.
  loaded.save(dir2);
  CHECK(read_file(dir2 / "MANIFEST") == read_file(dir1 / "MANIFEST"));
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir1)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(entry.path(), dir1);
    CHECK(read_file(dir2 / rel) == read_file(entry.path()));
  }
  CHECK(files == store.size() + 1);  // one per record plus MANIFEST

  // A reloaded store keeps publishing after the highest saved timestamp.
  logstore::LogStore resumed = logstore::LogStore::load(dir1);
  const auto receipt = resumed.publish(
      make_record("c", 0, random_vec(9, rng), codec::PayloadKind::kFloat32, 1));
  CHECK(receipt.timestamp == 7);
}

TEST_CASE("loading verifies digests and the manifest") {
  logstore::LogStore store;
  Rng rng(16);
  store.publish(
      make_record("w", 0, random_vec(5, rng), codec::PayloadKind::kFloat32, 2));
  const fs::path clean = fresh_dir("verify-clean");
  store.save(clean);

  SUBCASE("a flipped payload byte fails the digest check") {
    const fs::path dir = fresh_dir("verify-tamper");
    fs::copy(clean, dir, fs::copy_options::recursive |
                             fs::copy_options::overwrite_existing);
    const fs::path file = dir / "w" / "epoch00000.log";
    std::string text = read_file(file);
    const std::size_t pos = text.find("payload=") + std::string("payload=").size();
    REQUIRE(pos != std::string::npos);
    text[pos] = text[pos] == '0' ? '1' : '0';
    write_file(file, text);
    CHECK_THROWS_AS(logstore::LogStore::load(dir), IntegrityError);
  }

  SUBCASE("a manifest digest that disagrees with the record fails") {
    const fs::path dir = fresh_dir("verify-manifest");
    fs::copy(clean, dir, fs::copy_options::recursive |
                             fs::copy_options::overwrite_existing);
    std::string manifest = read_file(dir / "MANIFEST");
    const std::size_t tab = manifest.find('\t', manifest.find('\t') + 1) + 1;
    manifest[tab] = manifest[tab] == '0' ? '1' : '0';
    write_file(dir / "MANIFEST", manifest);
    CHECK_THROWS_AS(logstore::LogStore::load(dir), IntegrityError);
  }

  SUBCASE("a malformed manifest line fails") {
    const fs::path dir = fresh_dir("verify-line");
    fs::copy(clean, dir, fs::copy_options::recursive |
                             fs::copy_options::overwrite_existing);
    write_file(dir / "MANIFEST", read_file(dir / "MANIFEST") + "a\tb\n");
    CHECK_THROWS_AS(logstore::LogStore::load(dir), IntegrityError);
  }

  SUBCASE("an empty directory has no manifest") {
    const fs::path dir = fresh_dir("verify-empty");
    CHECK_THROWS_AS(logstore::LogStore::load(dir), IntegrityError);
  }

  SUBCASE("a record file missing from disk fails") {
    const fs::path dir = fresh_dir("verify-missing");
    fs::copy(clean, dir, fs::copy_options::recursive |
                             fs::copy_options::overwrite_existing);
    fs::remove(dir / "w" / "epoch00000.log");
    CHECK_THROWS_AS(logstore::LogStore::load(dir), IntegrityError);
  }
}
