#include "fedledger/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "fedledger/error.hpp"
#include "fedledger/util/rng.hpp"
#include "fedledger/util/text.hpp"

namespace fedledger::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown_keys(const json& object, const std::string& scope,
                         std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : object.items()) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(),
                    [&key](const char* name) { return key == name; });
    if (!known) {
      throw ConfigError(scope.empty() ? key : scope + "." + key,
                        "unknown key");
    }
  }
}

const json* find(const json& object, const char* key) {
  const auto it = object.find(key);
  return it == object.end() ? nullptr : &*it;
}

std::string scoped(const std::string& scope, const char* key) {
  return scope.empty() ? key : scope + "." + key;
}

template <typename T>
void read_number(const json& object, const std::string& scope, const char* key,
                 T& target) {
  const json* value = find(object, key);
  if (value == nullptr) return;
  if (!value->is_number()) {
    throw ConfigError(scoped(scope, key), "expected a number");
  }
  if constexpr (std::is_integral_v<T>) {
    if (!value->is_number_integer() && !value->is_number_unsigned()) {
      throw ConfigError(scoped(scope, key), "expected an integer");
    }
  }
  target = value->get<T>();
}

void read_u64(const json& object, const std::string& scope, const char* key,
              std::uint64_t& target) {
  const json* value = find(object, key);
  if (value == nullptr) return;
  const bool ok = value->is_number_unsigned() ||
                  (value->is_number_integer() && value->get<std::int64_t>() >= 0);
  if (!ok) {
    throw ConfigError(scoped(scope, key), "expected a non-negative integer");
  }
  target = value->get<std::uint64_t>();
}

void read_bool(const json& object, const std::string& scope, const char* key,
               bool& target) {
  const json* value = find(object, key);
  if (value == nullptr) return;
  if (!value->is_boolean()) {
    throw ConfigError(scoped(scope, key), "expected true or false");
  }
  target = value->get<bool>();
}

void read_string(const json& object, const std::string& scope, const char* key,
                 std::string& target) {
  const json* value = find(object, key);
  if (value == nullptr) return;
  if (!value->is_string()) {
    throw ConfigError(scoped(scope, key), "expected a string");
  }
  target = value->get<std::string>();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& error) {
    throw ConfigError("config", std::string("not valid JSON: ") + error.what());
  }
  if (!doc.is_object()) throw ConfigError("config", "top level must be an object");

  reject_unknown_keys(
      doc, "",
      {"rounds", "agents", "corrupt_fraction", "selection_fraction",
       "local_epochs", "local_batch", "local_lr", "eta", "kappa", "seed",
       "aggregator", "chunk_chars", "shared_counter", "model", "dataset",
       "split", "trojan", "poison_fraction", "scheduler", "scheduler_seed",
       "economy"});

  ExperimentConfig config;
  read_number(doc, "", "rounds", config.fl.rounds);
  read_number(doc, "", "agents", config.fl.agents);
  read_number(doc, "", "corrupt_fraction", config.fl.corrupt_fraction);
  read_number(doc, "", "selection_fraction", config.fl.selection_fraction);
  read_number(doc, "", "local_epochs", config.fl.local_epochs);
  read_number(doc, "", "local_batch", config.fl.local_batch);
  read_number(doc, "", "local_lr", config.fl.local_lr);
  read_number(doc, "", "eta", config.fl.eta);
  read_number(doc, "", "kappa", config.fl.kappa);
  read_u64(doc, "", "seed", config.fl.seed);
  std::string aggregator = fl::to_string(config.fl.aggregator);
  read_string(doc, "", "aggregator", aggregator);
  try {
    config.fl.aggregator = fl::aggregator_from_string(aggregator);
  } catch (const Error&) {
    throw ConfigError("aggregator", "must be \"fedavg\" or \"signsgd\"");
  }
  read_number(doc, "", "chunk_chars", config.chunk_chars);
  read_bool(doc, "", "shared_counter", config.shared_counter);
  read_number(doc, "", "poison_fraction", config.poison_fraction);
  if (find(doc, "scheduler_seed") != nullptr) {
    config.scheduler_seed_set = true;
    read_u64(doc, "", "scheduler_seed", config.scheduler_seed);
  }

  if (const json* model = find(doc, "model")) {
    reject_unknown_keys(*model, "model",
                        {"height", "width", "channels", "conv_filters",
                         "conv_kernel", "pool", "hidden_units", "num_classes",
                         "dropout"});
    read_number(*model, "model", "height", config.model.height);
    read_number(*model, "model", "width", config.model.width);
    read_number(*model, "model", "channels", config.model.channels);
    read_number(*model, "model", "conv_filters", config.model.conv_filters);
    read_number(*model, "model", "conv_kernel", config.model.conv_kernel);
    read_number(*model, "model", "pool", config.model.pool);
    read_number(*model, "model", "hidden_units", config.model.hidden_units);
    read_number(*model, "model", "num_classes", config.model.num_classes);
    read_number(*model, "model", "dropout", config.model.dropout);
  }

  if (const json* dataset = find(doc, "dataset")) {
    reject_unknown_keys(*dataset, "dataset",
                        {"train_count", "val_count", "noise_std"});
    read_number(*dataset, "dataset", "train_count", config.dataset.train_count);
    read_number(*dataset, "dataset", "val_count", config.dataset.val_count);
    read_number(*dataset, "dataset", "noise_std", config.dataset.noise_std);
  }

  if (const json* split = find(doc, "split")) {
    reject_unknown_keys(*split, "split", {"kind", "concentration"});
    read_string(*split, "split", "kind", config.split.kind);
    read_number(*split, "split", "concentration", config.split.concentration);
  }

  if (const json* trojan = find(doc, "trojan")) {
    reject_unknown_keys(*trojan, "trojan",
                        {"base_class", "target_class", "anchor_row",
                         "anchor_col", "value"});
    int base = config.trojan.base_class;
    int target = config.trojan.target_class;
    read_number(*trojan, "trojan", "base_class", base);
    read_number(*trojan, "trojan", "target_class", target);
    config.trojan = detect::TrojanSpec::plus_pattern(base, target);
    read_number(*trojan, "trojan", "anchor_row", config.trojan.anchor_row);
    read_number(*trojan, "trojan", "anchor_col", config.trojan.anchor_col);
    read_number(*trojan, "trojan", "value", config.trojan.value);
  }

  if (const json* scheduler = find(doc, "scheduler")) {
    reject_unknown_keys(*scheduler, "scheduler",
                        {"conflict_rate", "max_group", "shuffle_jobs"});
    read_number(*scheduler, "scheduler", "conflict_rate",
                config.scheduler.conflict_rate);
    read_number(*scheduler, "scheduler", "max_group", config.scheduler.max_group);
    read_bool(*scheduler, "scheduler", "shuffle_jobs",
              config.scheduler.shuffle_jobs);
  }

  if (const json* economy = find(doc, "economy")) {
    reject_unknown_keys(*economy, "economy",
                        {"initial_balance", "deposit", "reward_base",
                         "reward_bonus"});
    read_number(*economy, "economy", "initial_balance",
                config.economy.initial_balance);
    read_number(*economy, "economy", "deposit", config.economy.deposit);
    read_number(*economy, "economy", "reward_base", config.economy.reward_base);
    read_number(*economy, "economy", "reward_bonus",
                config.economy.reward_bonus);
  }

  config.validate();
  return config;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_string(buffer.str());
}

std::string ExperimentConfig::to_json_string() const {
  ordered_json doc;
  doc["rounds"] = fl.rounds;
  doc["agents"] = fl.agents;
  doc["corrupt_fraction"] = fl.corrupt_fraction;
  doc["selection_fraction"] = fl.selection_fraction;
  doc["local_epochs"] = fl.local_epochs;
  doc["local_batch"] = fl.local_batch;
  doc["local_lr"] = static_cast<double>(fl.local_lr);
  doc["eta"] = static_cast<double>(fl.eta);
  doc["kappa"] = fl.kappa;
  doc["seed"] = fl.seed;
  doc["aggregator"] = fl::to_string(fl.aggregator);
  doc["chunk_chars"] = chunk_chars;
  doc["shared_counter"] = shared_counter;
  doc["poison_fraction"] = poison_fraction;
  doc["scheduler_seed"] = effective_scheduler_seed();
  doc["model"] = {{"height", model.height},
                  {"width", model.width},
                  {"channels", model.channels},
                  {"conv_filters", model.conv_filters},
                  {"conv_kernel", model.conv_kernel},
                  {"pool", model.pool},
                  {"hidden_units", model.hidden_units},
                  {"num_classes", model.num_classes},
                  {"dropout", static_cast<double>(model.dropout)}};
  doc["dataset"] = {{"train_count", dataset.train_count},
                    {"val_count", dataset.val_count},
                    {"noise_std", static_cast<double>(dataset.noise_std)}};
  doc["split"] = {{"kind", split.kind},
                  {"concentration", split.concentration}};
  doc["trojan"] = {{"base_class", trojan.base_class},
                   {"target_class", trojan.target_class},
                   {"anchor_row", trojan.anchor_row},
                   {"anchor_col", trojan.anchor_col},
                   {"value", static_cast<double>(trojan.value)}};
  doc["scheduler"] = {{"conflict_rate", scheduler.conflict_rate},
                      {"max_group", scheduler.max_group},
                      {"shuffle_jobs", scheduler.shuffle_jobs}};
  doc["economy"] = {{"initial_balance", economy.initial_balance},
                    {"deposit", economy.deposit},
                    {"reward_base", economy.reward_base},
                    {"reward_bonus", economy.reward_bonus}};
  return doc.dump(2) + "\n";
}

void ExperimentConfig::validate() const {
  try {
    fl.validate();
  } catch (const Error& error) {
    throw ConfigError("fl", error.what());
  }
  try {
    model.validate();
  } catch (const Error& error) {
    throw ConfigError("model", error.what());
  }
  if (static_cast<Eigen::Index>(fl.kappa) > model.param_dim()) {
    throw ConfigError("kappa", "exceeds the parameter dimension " +
                                   std::to_string(model.param_dim()));
  }
  if (dataset.train_count < fl.agents) {
    throw ConfigError("dataset.train_count",
                      "needs at least one sample per agent");
  }
  if (dataset.val_count < 1) {
    throw ConfigError("dataset.val_count", "must be positive");
  }
  if (!(dataset.noise_std >= 0.0f)) {
    throw ConfigError("dataset.noise_std", "must be >= 0");
  }
  if (split.kind != "iid" && split.kind != "dirichlet") {
    throw ConfigError("split.kind", "must be \"iid\" or \"dirichlet\"");
  }
  if (split.kind == "dirichlet" && !(split.concentration > 0.0)) {
    throw ConfigError("split.concentration", "must be positive");
  }
  if (corrupt_count() > 0) {
    try {
      trojan.validate(model.height, model.width, model.num_classes);
    } catch (const Error& error) {
      throw ConfigError("trojan", error.what());
    }
    if (!(poison_fraction > 0.0 && poison_fraction <= 1.0)) {
      throw ConfigError("poison_fraction", "must be in (0, 1]");
    }
    if (!(trojan.value >= 0.0f && trojan.value <= 1.0f)) {
      throw ConfigError("trojan.value", "must be a pixel value in [0, 1]");
    }
  }
  if (scheduler.conflict_rate < 0.0 || scheduler.conflict_rate >= 1.0) {
    throw ConfigError("scheduler.conflict_rate", "must be in [0, 1)");
  }
  if (scheduler.max_group < 1) {
    throw ConfigError("scheduler.max_group", "must be >= 1");
  }
  if (chunk_chars < 1) {
    throw ConfigError("chunk_chars", "must be >= 1");
  }
  if (economy.deposit <= 0) {
    throw ConfigError("economy.deposit", "must be positive");
  }
  if (economy.reward_base < 0 || economy.reward_bonus < 0) {
    throw ConfigError("economy", "rewards must be >= 0");
  }
  // Worst case: selected every round, so R commitments of gas.
  const contract::GasSchedule gas;
  const contract::Currency worst_gas =
      gas.first_commit + gas.next_commit * (fl.rounds - 1);
  if (economy.initial_balance < economy.deposit + worst_gas) {
    throw ConfigError("economy.initial_balance",
                      "cannot cover the deposit plus worst-case gas " +
                          std::to_string(economy.deposit + worst_gas));
  }
}

int ExperimentConfig::corrupt_count() const {
  const int m = static_cast<int>(std::ceil(
      fl.corrupt_fraction * static_cast<double>(fl.agents) - 1e-9));
  return std::max(0, std::min(m, fl.agents));
}

std::uint64_t ExperimentConfig::effective_scheduler_seed() const {
  return scheduler_seed_set
             ? scheduler_seed
             : mix64(fl.seed, hash_string("scheduler"));
}

std::vector<std::string> ExperimentConfig::agent_ids() const {
  const int width =
      static_cast<int>(std::to_string(std::max(1, fl.agents - 1)).size());
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(fl.agents));
  for (int i = 0; i < fl.agents; ++i) {
    ids.push_back("agent" + zfill(i, width));
  }
  return ids;
}

}  // namespace fedledger::cli
