#include <catch_amalgamated.hpp>

#include <sstream>
#include <string>
#include <vector>

#include "cli_app.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using passivity::io::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

std::string data(const std::string& name) { return std::string(PASSIVITY_DATA_DIR) + "/" + name; }

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "passivity");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = passivity::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json run_json(std::vector<std::string> args) {
  args.push_back("--format");
  args.push_back("json");
  const auto r = run(args);
  REQUIRE(r.code == 0);
  return json::parse(r.out);
}

}  // namespace

TEST_CASE("analyze reports passivity and ergotropy", "[cli]") {
  const auto doc = run_json({"analyze", data("inverted_qutrit.json")});
  const auto& r = doc["result"];
  CHECK_FALSE(r["passive"].get<bool>());
  CHECK_THAT(r["ergotropy"].get<double>(), WithinAbs(0.5, 1e-12));
  CHECK(r["min_activation_k"].get<int>() == 1);
}

TEST_CASE("analyze on a Gibbs state", "[cli]") {
  const auto r = run_json({"analyze", data("gibbs_beta1.json")})["result"];
  CHECK(r["completely_passive"].get<bool>());
  CHECK(r["line"] == "gibbs");
  CHECK_THAT(r["gibbs"]["beta"].get<double>(), WithinAbs(1.0, 1e-9));
  CHECK_THAT(r["area"].get<double>(), WithinAbs(0.0, 1e-12));
}

TEST_CASE("analyze on the passive non-Gibbs qutrit", "[cli]") {
  const auto r = run_json({"analyze", data("activatable_qutrit.json")})["result"];
  CHECK(r["passive"].get<bool>());
  CHECK_FALSE(r["completely_passive"].get<bool>());
  CHECK_THAT(r["area"].get<double>(), WithinAbs(0.75204, 5e-5));
  CHECK(r["min_activation_k"].get<int>() == 3);
  CHECK(r["virtual_temperatures"].size() == 3);
}

TEST_CASE("kpass messages", "[cli]") {
  auto r = run({"kpass", data("gibbs_beta1.json")});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("completely passive"));
  r = run({"kpass", data("activatable_qutrit.json"), "--k-max", "1"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("k-passive up to 1"));
  r = run({"kpass", data("activatable_qutrit.json")});
  CHECK_THAT(r.out, ContainsSubstring("activatable at k = 3"));
}

TEST_CASE("hull output", "[cli]") {
  const auto r = run_json({"hull", data("activatable_qutrit.json")})["result"];
  CHECK(r["vertices"].size() == 3);
  CHECK_THAT(r["area"].get<double>(), WithinAbs(0.75204, 5e-5));
  const auto csv = run({"hull", data("activatable_qutrit.json")});
  CHECK(csv.code == 0);
  CHECK_THAT(csv.out, ContainsSubstring("role,id,epsilon,s,edge,q"));
  const auto k2 = run_json({"hull", data("activatable_qutrit.json"), "--k", "2"})["result"];
  CHECK(k2["points"].size() == 6);
}

TEST_CASE("hull on a rank-deficient state needs regularization", "[cli]") {
  auto r = run({"hull", data("half_half_qutrit.json")});
  CHECK(r.code == 2);
  CHECK_THAT(r.err, ContainsSubstring("--regularize"));
  r = run({"hull", data("half_half_qutrit.json"), "--regularize", "1e-6"});
  CHECK(r.code == 0);
}

TEST_CASE("escurve samples", "[cli]") {
  const auto r = run_json({"escurve", data("qutrit_spectrum.json"), "-n", "2"})["result"]["samples"];
  REQUIRE(r.size() == 2);
  // Ordered by increasing beta, from the maximally mixed state down.
  CHECK_THAT(r[0]["beta"].get<double>(), WithinAbs(0.0, 1e-12));
  CHECK_THAT(r[0]["E"].get<double>(), WithinAbs(1.0, 1e-9));
  CHECK_THAT(r[0]["S"].get<double>(), WithinAbs(std::log(3.0), 1e-9));
  CHECK_THAT(r[1]["E"].get<double>(), WithinAbs(0.0, 1e-6));
  CHECK(run({"escurve", data("qutrit_spectrum.json"), "-n", "1"}).code == 2);
}

TEST_CASE("small grid with rescaling", "[cli]") {
  const auto r = run_json({"grid", data("qutrit_spectrum.json"), "--nE", "6", "--nS", "5", "--rescale"})["result"];
  REQUIRE(r["values"].size() == 5);
  REQUIRE(r["values"][0].size() == 6);
  std::size_t finite = 0;
  for (const auto& row : r["rescaled"])
    for (const auto& v : row)
      if (!v.is_null()) {
        ++finite;
        CHECK(v.get<double>() >= 0.0);
        CHECK(v.get<double>() < 1.0);
      }
  CHECK(finite > 0);
  CHECK(r["equilibrium"].size() == 6);
}

TEST_CASE("single-point athermality", "[cli]") {
  const auto r = run_json({"athermality", data("qutrit_spectrum.json"), "-E", "0.5", "-S", "0.8"})["result"];
  CHECK(r["method"] == "exact_qutrit");
  CHECK(r["value"].get<double>() > 0.0);
  CHECK(run({"athermality", data("qutrit_spectrum.json"), "-E", "0.5", "-S", "1.5"}).code == 2);
}

TEST_CASE("trajectory output", "[cli]") {
  const auto r = run_json({"trajectory", data("half_half_qutrit.json"), "--regularize", "1e-9"})["result"];
  CHECK(r["terminated"] == "reached_equilibrium");
  CHECK(r["monotonicity"]["violations"].empty());
  CHECK_THAT(r["endpoint_beta"].get<double>(), WithinAbs(0.83, 0.02));
  const auto iso = run_json({"trajectory", data("half_half_qutrit.json"), "--regularize", "1e-9", "--mode", "isentropic"});
  CHECK_THAT(iso["result"]["endpoint_beta"].get<double>(), WithinAbs(1.32, 0.02));
}

TEST_CASE("fixed-step trajectories report violations", "[cli]") {
  const auto r = run({"trajectory", data("half_half_qutrit.json"), "--regularize", "1e-9", "--no-adapt",
                      "--max-steps", "400", "--step", "5e-3"});
  CHECK(r.code == 1);
  CHECK_THAT(r.err, ContainsSubstring("violation"));
}

TEST_CASE("input errors exit with code 2", "[cli]") {
  CHECK(run({"analyze", data("missing.json")}).code == 2);
  CHECK(run({"analyze", data("qutrit_spectrum.json")}).code == 2);
  CHECK(run({"analyze"}).code == 2);
  CHECK(run({"frobnicate", data("activatable_qutrit.json")}).code == 2);
  CHECK(run({"analyze", data("activatable_qutrit.json"), "--format", "xml"}).code == 2);
}

TEST_CASE("output is deterministic and carries a header", "[cli]") {
  const std::vector<std::string> args = {"grid", data("qutrit_spectrum.json"), "--nE", "4", "--nS", "4"};
  const auto a = run(args), b = run(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK_THAT(a.out, ContainsSubstring("# tool: passivity 0.1.0"));
  CHECK_THAT(a.out, ContainsSubstring("# config: "));
  CHECK_THAT(a.out, ContainsSubstring("# input_hash: fnv1a64:"));
  const auto doc = run_json({"analyze", data("activatable_qutrit.json")});
  CHECK(doc["meta"]["version"] == "0.1.0");
  CHECK(doc["meta"]["config"]["command"] == "analyze");
  CHECK(doc["meta"]["input_hash"].get<std::string>().rfind("fnv1a64:", 0) == 0);
}
