#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "vortex/cli.hpp"

namespace {

namespace fs = std::filesystem;

std::string data(const char* name) {
    return std::string(VORTEX_TEST_DATA_DIR) + "/" + name;
}

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = vortex::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

const std::string kWorkedToolId = "toolshed.g2.bx.psu.edu/repos/iuc/hisat2/hisat2/2.1.0";

}  // namespace

TEST_CASE("lint accepts a clean config silently") {
    auto r = run_cli({"lint", data("worked_example.yml")});
    CHECK(r.code == 0);
    CHECK(r.out.empty());
    CHECK(r.err.empty());
}

TEST_CASE("lint reports configuration errors with exit 1") {
    auto r = run_cli({"lint", data("cycle.yml")});
    CHECK(r.code == 1);
    CHECK(r.err.find("error: tools/") != std::string::npos);
    CHECK(r.err.find("inheritance cycle") != std::string::npos);
}

TEST_CASE("lint on a missing file is a usage error") {
    auto r = run_cli({"lint", data("no_such_file.yml")});
    CHECK(r.code == 2);
    CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("dispatch prints the decision as one JSON line") {
    auto r = run_cli({"dispatch", data("worked_example.yml"), "--tool", kWorkedToolId, "--roles",
                      "training_2024", "--input-size-gb", "0.1"});
    CHECK(r.code == 0);
    CHECK(r.err.empty());
    CHECK(r.out ==
          "{\"destination_id\":\"my_slurm_cluster\",\"cores\":6,\"mem_gb\":24,\"gpus\":1,"
          "\"env\":{\"_JAVA_OPTIONS\":\"-Xmx24G -Xms1G\"},\"params\":{\"nativeSpecification\":"
          "\"--nodes=1 --ntasks=6 --ntasks-per-node=6 --mem=24576\"}}\n");
}

TEST_CASE("dispatch honours multiple roles and larger inputs") {
    auto r = run_cli({"dispatch", data("worked_example.yml"), "--tool", kWorkedToolId,
                      "--input-size-gb", "8"});
    CHECK(r.code == 0);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["cores"] == 12);
    CHECK(doc["mem_gb"] == 48);
}

TEST_CASE("dispatch failures exit 1 and name the stage") {
    auto r = run_cli({"dispatch", data("conflict.yml"), "--tool", "conflicted", "--user", "bob"});
    CHECK(r.code == 1);
    CHECK(r.out.empty());
    CHECK(r.err == "error: combine: incompatible tag 'training'\n");
}

TEST_CASE("explain renders every stage and the decision") {
    auto r = run_cli({"explain", data("worked_example.yml"), "--tool", kWorkedToolId, "--roles",
                      "training_2024", "--input-size-gb", "0.1"});
    CHECK(r.code == 0);
    for (const char* heading :
         {"lookup:", "combine:", "flatten:", "match:", "rank:", "evaluate:", "decision:"})
        CHECK(r.out.find(heading) != std::string::npos);
    CHECK(r.out.find("rule 'hisat_small_input_rule'") != std::string::npos);
    CHECK(r.out.find("my_pulsar_cluster: excluded (cores 6 exceeds max_accepted_cores 4)") !=
          std::string::npos);
    CHECK(r.out.find("\"destination_id\":\"my_slurm_cluster\"") != std::string::npos);
}

TEST_CASE("explain --json emits one document with all six stages") {
    auto r = run_cli({"explain", data("worked_example.yml"), "--tool", kWorkedToolId, "--json"});
    CHECK(r.code == 0);
    auto doc = nlohmann::json::parse(r.out);
    for (const char* stage : {"lookup", "combine", "flatten", "match", "rank", "evaluate"}) {
        CHECK(doc.contains(stage));
        CHECK(doc[stage].contains("notes"));
    }
}

TEST_CASE("explain shows the partial trace when dispatch fails") {
    auto r = run_cli({"explain", data("conflict.yml"), "--tool", "conflicted", "--user", "bob"});
    CHECK(r.code == 1);
    CHECK(r.out.find("lookup:") != std::string::npos);
    CHECK(r.out.find("evaluate:") == std::string::npos);
    CHECK(r.err == "error: combine: incompatible tag 'training'\n");
}

TEST_CASE("explain --json reports failures as a JSON error document") {
    auto r = run_cli(
        {"explain", data("conflict.yml"), "--tool", "conflicted", "--user", "bob", "--json"});
    CHECK(r.code == 1);
    auto doc = nlohmann::json::parse(r.err);
    CHECK(doc["error"]["stage"] == "combine");
    CHECK(doc["error"]["message"] == "combine: incompatible tag 'training'");
}

TEST_CASE("dispatch with least-loaded follows the load feed") {
    auto r = run_cli({"dispatch", data("sim_config.yml"), "--tool", "anything", "--rank",
                      "least-loaded", "--load-source", data("load_feed.json")});
    CHECK(r.code == 0);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["destination_id"] == "cluster_b");
}

TEST_CASE("an unreadable load feed warns and falls back") {
    auto r = run_cli({"dispatch", data("sim_config.yml"), "--tool", "anything", "--rank",
                      "least-loaded", "--load-source", data("missing_feed.json"), "--seed", "4"});
    CHECK(r.code == 0);
    CHECK(r.err.find("warning:") != std::string::npos);
    CHECK(r.err.find("falling back to weighted-random") != std::string::npos);
    auto with_fallback = nlohmann::json::parse(r.out);

    auto direct = run_cli({"dispatch", data("sim_config.yml"), "--tool", "anything", "--rank",
                           "random", "--seed", "4"});
    CHECK(with_fallback["destination_id"] ==
          nlohmann::json::parse(direct.out)["destination_id"]);
}

TEST_CASE("simulate prints metrics JSON for a single strategy") {
    auto r = run_cli({"simulate", "--config", data("sim_config.yml"), "--destinations",
                      data("sim_destinations.json"), "--trace", data("sim_trace.jsonl"), "--seed",
                      "11"});
    CHECK(r.code == 0);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["jobs_completed"] == 8);
    CHECK(doc["jobs_unschedulable"] == 0);
    CHECK(doc["jobs_still_queued"] == 0);
    CHECK(doc.contains("p95_wait_s"));
    CHECK(doc["per_destination"].contains("cluster_a"));
    CHECK(doc["per_destination"].contains("cluster_b"));
}

TEST_CASE("simulate runs are reproducible") {
    std::vector<std::string> args = {"simulate",       "--config",
                                     data("sim_config.yml"), "--destinations",
                                     data("sim_destinations.json"), "--trace",
                                     data("sim_trace.jsonl"), "--rank",
                                     "random",         "--seed",
                                     "77"};
    auto first = run_cli(args);
    auto second = run_cli(args);
    CHECK(first.code == 0);
    CHECK(first.out == second.out);
}

TEST_CASE("simulate compares strategies when --rank repeats") {
    auto r = run_cli({"simulate", "--config", data("sim_config.yml"), "--destinations",
                      data("sim_destinations.json"), "--trace", data("sim_trace.jsonl"), "--rank",
                      "default", "--rank", "least-loaded", "--rank", "random"});
    CHECK(r.code == 0);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["baseline"] == "default");
    CHECK(doc["results"].contains("default"));
    CHECK(doc["results"].contains("least-loaded"));
    CHECK(doc["results"].contains("random"));
    CHECK(doc["mean_wait_delta_pct"].contains("least-loaded"));
}

TEST_CASE("simulate writes --out files and respects IO failures") {
    fs::path out_file = fs::temp_directory_path() / "vortex-cli-metrics.json";
    fs::remove(out_file);
    auto r = run_cli({"simulate", "--config", data("sim_config.yml"), "--destinations",
                      data("sim_destinations.json"), "--trace", data("sim_trace.jsonl"), "--out",
                      out_file.string()});
    CHECK(r.code == 0);
    CHECK(r.out.empty());
    REQUIRE(fs::exists(out_file));
    std::ifstream in(out_file);
    nlohmann::json doc = nlohmann::json::parse(in);
    CHECK(doc["jobs_completed"] == 8);

    auto bad = run_cli({"simulate", "--config", data("sim_config.yml"), "--destinations",
                        data("sim_destinations.json"), "--trace", data("sim_trace.jsonl"), "--out",
                        "/no/such/dir/metrics.json"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("cannot write") != std::string::npos);
}

TEST_CASE("simulate rejects duplicate --rank strategies") {
    auto r = run_cli({"simulate", "--config", data("sim_config.yml"), "--destinations",
                      data("sim_destinations.json"), "--trace", data("sim_trace.jsonl"), "--rank",
                      "random", "--rank", "random"});
    CHECK(r.code == 2);
    CHECK(r.err.find("duplicate --rank strategy 'random'") != std::string::npos);
}

TEST_CASE("simulate distinguishes unreadable inputs from malformed ones") {
    auto missing = run_cli({"simulate", "--config", data("sim_config.yml"), "--destinations",
                            data("absent.json"), "--trace", data("sim_trace.jsonl")});
    CHECK(missing.code == 2);

    fs::path bad_trace = fs::temp_directory_path() / "vortex-bad-trace.jsonl";
    {
        std::ofstream f(bad_trace);
        f << "{\"arrival_s\": 0, \"tool_id\": \"x\", \"service_s\": 0}\n";
    }
    auto malformed = run_cli({"simulate", "--config", data("sim_config.yml"), "--destinations",
                              data("sim_destinations.json"), "--trace", bad_trace.string()});
    CHECK(malformed.code == 1);
    CHECK(malformed.err.find("service_s") != std::string::npos);
}

TEST_CASE("fetch-db prints the tool entity count") {
    auto r = run_cli({"fetch-db", data("shared_db_tools.yml")});
    CHECK(r.code == 0);
    CHECK(r.out == "3 tool entities\n");
}

TEST_CASE("fetch-db flags malformed and missing databases") {
    fs::path broken = fs::temp_directory_path() / "vortex-broken-db.yml";
    {
        std::ofstream f(broken);
        f << "tools: [oops\n";
    }
    auto malformed = run_cli({"fetch-db", broken.string()});
    CHECK(malformed.code == 1);
    CHECK(malformed.err.find("syntax error") != std::string::npos);

    auto missing = run_cli({"fetch-db", data("absent_db.yml")});
    CHECK(missing.code == 2);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({"dispatch", data("worked_example.yml")}).code == 2);  // --tool missing
    CHECK(run_cli({"dispatch", data("worked_example.yml"), "--tool", "x", "--rank",
                   "bogus"}).code == 2);
    CHECK(run_cli({"dispatch", data("worked_example.yml"), "--tool", "x", "--input-size-gb",
                   "-3"}).code == 2);
    CHECK(run_cli({"simulate", "--config", data("sim_config.yml")}).code == 2);
}

TEST_CASE("help exits cleanly") {
    auto r = run_cli({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("lint") != std::string::npos);
    CHECK(r.out.find("simulate") != std::string::npos);
}

TEST_CASE("merged sources let a site override the shared database") {
    auto r = run_cli({"dispatch", data("shared_db_tools.yml"), data("site_override.yml"), "--tool",
                      "toolshed.example.org/repos/devteam/bwa/bwa/0.7.17"});
    CHECK(r.code == 0);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["destination_id"] == "site_cluster");
    CHECK(doc["cores"] == 4);   // halved by the site override
    CHECK(doc["mem_gb"] == 16); // shared expression re-evaluated with the new cores
    CHECK(doc["env"]["BWA_THREADS"] == "4");
}
