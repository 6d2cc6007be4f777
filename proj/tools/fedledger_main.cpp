// Command-line front end: run / audit / report / verify-formats.
// Exit codes: 0 success, 2 config error, 3 integrity error, 4 attack failed.

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedledger/cli/config.hpp"
#include "fedledger/cli/orchestrator.hpp"
#include "fedledger/codec/base64.hpp"
#include "fedledger/codec/sha256.hpp"
#include "fedledger/codec/wire.hpp"
#include "fedledger/error.hpp"
#include "fedledger/util/text.hpp"

namespace fs = std::filesystem;
using namespace fedledger;

namespace {

std::string timestamp_name() {
  // The directory name is the one artifact allowed to carry wall-clock time.
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y%m%d-%H%M%S", &utc);
  return buffer;
}

void check(bool ok, const std::string& what) {
  if (!ok) throw IntegrityError("verify-formats: " + what);
}

// Codec self-test against pinned external vectors.
void verify_formats() {
  using codec::base64_encode;
  check(base64_encode({}) == "", "base64 empty");
  check(base64_encode({'f'}) == "Zg==", "base64 'f'");
  check(base64_encode({'f', 'o'}) == "Zm8=", "base64 'fo'");
  check(base64_encode({'f', 'o', 'o'}) == "Zm9v", "base64 'foo'");
  check(base64_encode({'f', 'o', 'o', 'b'}) == "Zm9vYg==", "base64 'foob'");
  check(base64_encode({'f', 'o', 'o', 'b', 'a'}) == "Zm9vYmE=", "base64 'fooba'");
  check(base64_encode({'f', 'o', 'o', 'b', 'a', 'r'}) == "Zm9vYmFy",
        "base64 'foobar'");
  std::printf("base64 vectors ok\n");

  check(codec::sha256_hex(std::string{}).hex ==
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
        "sha256 empty string");
  check(codec::sha256_hex(std::string{"abc"}).hex ==
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
        "sha256 'abc'");
  std::printf("sha256 vectors ok\n");

  Eigen::VectorXf one(1);
  one << 1.0f;
  check(codec::hex_encode(codec::serialize_float32(one)) == "0000803f",
        "float32 1.0 little-endian bytes");
  Eigen::VectorXf vec(3);
  vec << -1.5f, 0.0f, 3.25f;
  check(codec::deserialize_float32(codec::serialize_float32(vec)) == vec,
        "float32 round trip");
  std::printf("float32 layout ok\n");

  // Sign payload arithmetic: dim 300,000,000 encodes to dim/6 base64 chars.
  const std::int64_t dim = 300'000'000;
  const std::int64_t bytes = dim / 8;
  const std::int64_t chars = (bytes + 2) / 3 * 4;
  check(chars == dim / 6, "base64 char count == dim/6");
  std::printf("sign payload arithmetic ok (dim=%lld chars=%lld)\n",
              static_cast<long long>(dim), static_cast<long long>(chars));
  std::printf("all format checks passed\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"accountable federated learning over a simulated hybrid ledger"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool seed_set = false;
  std::uint64_t seed = 0;
  CLI::App* run = app.add_subcommand("run", "execute a full experiment");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--out", out_dir, "run directory (default: timestamped)");
  run->add_option("--seed", seed, "override the config seed")
      ->each([&seed_set](const std::string&) { seed_set = true; });

  std::string run_dir;
  std::string accused;
  std::string accuser;
  int kappa_override = 0;
  int adversaries_override = 0;
  CLI::App* audit = app.add_subcommand("audit", "adjudicate a breach claim");
  audit->add_option("--run", run_dir, "completed run directory")->required();
  audit->add_option("--accused", accused, "worker under accusation")->required();
  audit->add_option("--accuser", accuser, "worker staking the claim")->required();
  audit->add_option("--kappa", kappa_override, "override top-k parameter count");
  audit->add_option("--assume-adversaries", adversaries_override,
                    "override the assumed adversary count");

  std::string report_dir;
  CLI::App* report = app.add_subcommand("report", "emit CSV and text tables");
  report->add_option("--run", report_dir, "completed run directory")->required();

  app.add_subcommand("verify-formats", "codec and digest self-test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    app.exit(error);
    return 2;
  }

  try {
    if (run->parsed()) {
      cli::ExperimentConfig config = cli::ExperimentConfig::load(config_path);
      if (seed_set) {
        config.fl.seed = seed;
        config.validate();
      }
      const fs::path dir =
          out_dir.empty()
              ? fs::path("run-" + timestamp_name() + "-seed" +
                         std::to_string(config.fl.seed))
              : fs::path(out_dir);
      const cli::RunSummary summary = cli::run_experiment(config, dir);
      std::cout << "run_dir=" << summary.run_dir.string() << "\n"
                << "status=" << summary.status << "\n"
                << "final_accuracy=" << summary.final_accuracy << "\n"
                << "final_loss=" << summary.final_loss << "\n";
      if (summary.backdoor_accuracy >= 0.0) {
        std::cout << "backdoor_accuracy=" << summary.backdoor_accuracy << "\n";
      }
      if (summary.detection_ran) {
        std::cout << "flagged=" << join(summary.flagged, ',') << "\n";
      }
      return summary.status == "attack-failed" ? 4 : 0;
    }
    if (audit->parsed()) {
      const cli::AuditOutcome outcome = cli::audit_run(
          run_dir, accused, accuser, kappa_override, adversaries_override);
      std::cout << "claim=" << outcome.claim_id << "\n"
                << "status=" << outcome.status << "\n";
      if (!outcome.loser.empty()) {
        std::cout << "loser=" << outcome.loser << "\n"
                  << "forfeited=" << outcome.forfeited << "\n";
      }
      std::cout << "transcript=" << outcome.transcript_path.string() << "\n";
      return 0;
    }
    if (report->parsed()) {
      std::cout << cli::write_reports(report_dir);
      return 0;
    }
    verify_formats();
    return 0;
  } catch (const ConfigError& error) {
    std::cerr << "config error: " << error.what() << "\n";
    return 2;
  } catch (const IntegrityError& error) {
    std::cerr << "integrity error: " << error.what() << "\n";
    return 3;
  } catch (const Error& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 1;
  }
}
