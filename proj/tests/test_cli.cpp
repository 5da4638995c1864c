#include <catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

#include "support.hpp"

using testsupport::run_command;

namespace {

const std::string kCli = SWITCHCERT_CLI;

std::string cli(const std::filesystem::path& out, const std::string& args) {
  return kCli + " --out " + out.string() + " " + args;
}

std::string config(const std::string& name) { return testsupport::source_path("configs/" + name); }

}  // namespace

TEST_CASE("cover reports the Lotka-Volterra sample counts", "[cli]") {
  const auto out = testsupport::scratch_dir("cli_cover");
  std::string text;
  CHECK(run_command(cli(out, "cover --config " + config("lotka_volterra.ini")), &text) == 0);
  CHECK(text.find("N=484") != std::string::npos);
  CHECK(text.find("M=5") != std::string::npos);
  CHECK(std::filesystem::exists(out / "samples.txt"));
  CHECK(std::filesystem::exists(out / "manifest_cover.json"));
}

TEST_CASE("argument and input errors exit with 2", "[cli]") {
  const auto out = testsupport::scratch_dir("cli_errors");
  std::string text;
  CHECK(run_command(cli(out, "cover --config /nonexistent.ini"), &text) == 2);
  CHECK(text.find("nonexistent") != std::string::npos);
  CHECK(run_command(cli(out, "train --config " + config("linear1d.ini") + " --mode 3")) == 2);
  CHECK(run_command(cli(out, "train --config " + config("linear1d.ini"))) == 2);
  CHECK(run_command(cli(out, "frobnicate")) == 2);
  CHECK(run_command(cli(out, "simulate --config " + config("linear1d.ini") + " --dt 0")) == 2);
}

TEST_CASE("sample cap exits with 3 and names the requirement", "[cli]") {
  const auto out = testsupport::scratch_dir("cli_cap");
  std::string text = testsupport::read_file(config("lotka_volterra.ini"));
  text.replace(text.find("[certificate]\n"), 14, "[certificate]\nmax_samples = 100\n");
  testsupport::write_file(out / "capped.ini", text);
  std::string output;
  CHECK(run_command(cli(out, "cover --config " + (out / "capped.ini").string()), &output) == 3);
  CHECK(output.find("N=484") != std::string::npos);
}

TEST_CASE("dwell with fixture constants", "[cli]") {
  const auto out = testsupport::scratch_dir("cli_dwell");
  std::string text;
  CHECK(run_command(cli(out, "dwell --zeta 1.52 --kappa 0.45"), &text) == 0);
  CHECK(text.find("0.9305") != std::string::npos);
  CHECK(run_command(cli(out, "dwell --zeta 0.5 --kappa 0.45")) == 2);
}

TEST_CASE("train, verify, dwell and simulate on the 1-D instance", "[cli]") {
  const auto out = testsupport::scratch_dir("cli_pipeline");
  const std::string cfg = config("linear1d.ini");
  REQUIRE(run_command(cli(out, "train --config " + cfg + " --all")) == 0);
  for (const char* f : {"bundle.json", "report.json", "train_log_mode1.csv", "train_log_mode2.csv",
                        "manifest_train.json"}) {
    CHECK(std::filesystem::exists(out / f));
  }
  CHECK(run_command(cli(out, "verify --config " + cfg)) == 0);
  const auto report = nlohmann::json::parse(testsupport::read_file(out / "verify.json"));
  CHECK(report.at("pass").get<bool>());

  std::string text;
  CHECK(run_command(cli(out, "dwell --config " + cfg), &text) == 0);
  CHECK(text.find("tau_d_min=") != std::string::npos);

  const std::string sim = "simulate --config " + cfg + " --x0 0.9 --tau-d 1.0 --horizon 2 --dt 0.01 --seed 3";
  CHECK(run_command(cli(out, sim)) == 0);
  const std::string first = testsupport::read_file(out / "trajectory.csv");
  CHECK(run_command(cli(out, sim)) == 0);
  CHECK(testsupport::read_file(out / "trajectory.csv") == first);
  CHECK(first.rfind("t,x1,mode,w1,u1,V_active,h,iss_margin,safe\n", 0) == 0);

  CHECK(run_command(cli(out, "simulate --config " + cfg + " --x0 0.9 --tau-d 0.01 --horizon 0.5 --dt 0.01"),
                    &text) == 0);
  CHECK(text.find("warning") != std::string::npos);

  // a different config hash is refused unless overridden
  testsupport::write_file(out / "edited.ini", testsupport::read_file(cfg) + "\n# edited\n");
  CHECK(run_command(cli(out, "verify --config " + (out / "edited.ini").string())) == 2);
  CHECK(run_command(cli(out, "verify --ignore-hash --config " + (out / "edited.ini").string())) == 0);

  testsupport::write_file(out / "broken.json", "{ not json");
  CHECK(run_command(cli(out, "verify --config " + cfg + " --checkpoint " + (out / "broken.json").string())) == 2);
}

TEST_CASE("shared-V training reports zeta = 1", "[cli]") {
  const auto out = testsupport::scratch_dir("cli_shared");
  std::string text;
  REQUIRE(run_command(cli(out, "train --config " + config("shared1d.ini") + " --shared-v"), &text) == 0);
  CHECK(text.find("zeta=1 ") != std::string::npos);
  CHECK(std::filesystem::exists(out / "train_log_shared.csv"));
  CHECK(run_command(cli(out, "dwell --config " + config("shared1d.ini")), &text) == 0);
  CHECK(text.find("tau_d_min=0") != std::string::npos);
}

TEST_CASE("no-certificate training exits with 11", "[cli]") {
  const auto out = testsupport::scratch_dir("cli_nocert");
  std::string text = testsupport::read_file(config("linear1d.ini"));
  text.replace(text.find("max_epochs = 60"), 15, "max_epochs = 0");
  testsupport::write_file(out / "zero.ini", text);
  CHECK(run_command(cli(out, "train --config " + (out / "zero.ini").string() + " --mode 1")) == 11);
}
