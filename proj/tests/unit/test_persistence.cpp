#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "procsight/error.hpp"
#include "procsight/hash.hpp"
#include "procsight/model_io.hpp"
#include "procsight/pipeline.hpp"

using namespace procsight;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

RnnModel sample_model(CellKind cell, SchemaId schema) {
    RnnModel m = make_model(cell, schema, 5);
    initialize_params(m.params, 31);
    m.params.all()[0] = 0.1 + 0.2; // not representable in decimal
    m.params.all()[1] = -0.0;
    m.params.all()[2] = 5e-324;
    if (schema == SchemaId::machine_10) {
        m.normalization.mean.assign(10, 1.0 / 3.0);
        m.normalization.stddev.assign(10, 2.0);
        m.normalization.stddev[4] = 0.0;
    }
    m.stamp = ArtifactStamp{"abc", 12, 1};
    return m;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PROCSIGHT_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

PipelineConfig small_config(const fs::path& out) {
    PipelineConfig c;
    c.seed = 21;
    c.out_dir = out.string();
    c.campaign.n_malicious = 12;
    c.campaign.n_benign = 12;
    c.train.epochs = 4;
    c.train.hidden_width = 8;
    c.repetitions = 2;
    c.horizon = 10;
    return c;
}

} // namespace

TEST_CASE("hashes") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // `printf 'hello\n' | git hash-object --stdin`
    CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("model save/load is bit exact") {
    for (CellKind cell : {CellKind::gru, CellKind::lstm}) {
        for (SchemaId schema : {SchemaId::complete_31, SchemaId::machine_10}) {
            const RnnModel m = sample_model(cell, schema);
            const fs::path path = fs::temp_directory_path() / "procsight_model_test.json";
            save_model(m, path.string());
            const RnnModel back = load_model(path.string());
            CHECK(back == m);
            CHECK(std::signbit(back.params.all()[1]));
            CHECK(std::memcmp(back.params.all().data(), m.params.all().data(), m.params.size() * sizeof(double)) ==
                  0);
            fs::remove(path);
        }
    }
}

TEST_CASE("model load failures") {
    const RnnModel m = sample_model(CellKind::gru, SchemaId::event_only_5);
    const std::string text = model_to_json(m);
    auto kind_of = [](const std::string& t) {
        try {
            model_from_json(t);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::io;
    };
    CHECK(kind_of(text.substr(0, text.size() / 2)) == ErrorKind::corruption);
    CHECK(kind_of("") == ErrorKind::corruption);

    auto j = nlohmann::json::parse(text);
    j["format_version"] = kModelFormatVersion + 1;
    CHECK(kind_of(j.dump()) == ErrorKind::version);

    auto tampered = nlohmann::json::parse(text);
    tampered["cell"] = "lstm";
    CHECK(kind_of(tampered.dump()) == ErrorKind::corruption);

    // truncated file on disk
    const fs::path path = fs::temp_directory_path() / "procsight_trunc.json";
    save_model(m, path.string());
    const std::string full = slurp(path);
    spit(path, full.substr(0, full.size() - 40));
    try {
        load_model(path.string());
        FAIL("expected corruption");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::corruption);
    }
    fs::remove(path);
}

TEST_CASE("exit codes") {
    CHECK(exit_code_for(ErrorKind::config) == 2);
    CHECK(exit_code_for(ErrorKind::precondition) == 2);
    CHECK(exit_code_for(ErrorKind::version) == 2);
    CHECK(exit_code_for(ErrorKind::numeric) == 4);
    CHECK(exit_code_for(ErrorKind::parse) == 3);
    CHECK(exit_code_for(ErrorKind::corruption) == 3);
}

TEST_CASE("pipeline config validation happens before any stage") {
    const fs::path out = fs::temp_directory_path() / "procsight_invalid";
    fs::remove_all(out);
    try {
        pipeline_config_from_json(R"({"schemas": ["event_only", "bogus_7"]})");
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
    }
    PipelineConfig c = small_config(out);
    c.horizon = 0;
    try {
        run_pipeline(c);
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
    }
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("pipeline config json round trip and hash") {
    PipelineConfig c = small_config("x");
    const auto back = pipeline_config_from_json(pipeline_config_to_json(c));
    CHECK(pipeline_config_to_json(back) == pipeline_config_to_json(c));
    PipelineConfig moved = c;
    moved.out_dir = "elsewhere";
    CHECK(config_hash(moved) == config_hash(c));
    moved.seed = 22;
    CHECK(config_hash(moved) != config_hash(c));
}

TEST_CASE("pipeline runs, is deterministic and resumes") {
    const fs::path a = fs::temp_directory_path() / "procsight_pipe_a", b = fs::temp_directory_path() / "procsight_pipe_b";
    fs::remove_all(a);
    fs::remove_all(b);
    const auto ra = run_pipeline(small_config(a));
    const auto rb = run_pipeline(small_config(b));
    REQUIRE(fs::exists(a / "report.csv"));
    CHECK(slurp(a / "report.csv") == slurp(b / "report.csv"));
    CHECK(slurp(a / "comparison.csv") == slurp(b / "comparison.csv"));
    const auto env = nlohmann::json::parse(slurp(a / "report.json"));
    CHECK(env.contains("config"));

    PipelineConfig again = small_config(a);
    again.resume = true;
    const auto rc = run_pipeline(again);
    CHECK(!rc.skipped_stages.empty());
    CHECK(slurp(a / "report.csv") == slurp(b / "report.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("cli end to end") {
    const fs::path dir = fs::temp_directory_path() / "procsight_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string d = dir.string();
    REQUIRE(run_cli("simulate --out " + d + "/camp --malicious 10 --benign 10 --seed 3") == 0);
    REQUIRE(run_cli("ingest --events " + d + "/camp/events.jsonl --hollows " + d + "/camp/hollows.jsonl --manifest " +
                    d + "/camp/manifest.json --out " + d + "/acts.jsonl") == 0);
    REQUIRE(run_cli("featurize --schema complete --activities " + d + "/acts.jsonl --out " + d + "/c.jsonl") == 0);
    REQUIRE(run_cli("featurize --schema machine --campaign " + d + "/camp --out " + d + "/m.jsonl") == 0);
    REQUIRE(run_cli("train --matrix " + d + "/c.jsonl --out " + d + "/c.model --test-out " + d +
                    "/c.test --epochs 3 --hidden 8 --seed 1") == 0);
    REQUIRE(run_cli("train --matrix " + d + "/m.jsonl --out " + d + "/m.model --test-out " + d +
                    "/m.test --epochs 3 --hidden 8 --seed 1") == 0);
    REQUIRE(run_cli("eval --model " + d + "/c.model --test " + d + "/c.test --horizon 10 --out " + d + "/c.csv") == 0);
    REQUIRE(run_cli("eval --model " + d + "/m.model --test " + d + "/m.test --horizon 10 --out " + d + "/m.csv") == 0);
    CHECK(run_cli("report --compare " + d + "/m.csv " + d + "/c.csv --out " + d + "/cmp.csv") == 0);
    CHECK(slurp(dir / "cmp.csv").rfind("t,f1_machine", 0) == 0);

    // exit codes
    CHECK(run_cli("") == 2);
    CHECK(run_cli("train --matrix " + d + "/c.jsonl --out " + d + "/z --hidden 0") == 2);
    CHECK(run_cli("featurize --schema nope --activities x --out y") == 2);
    CHECK(run_cli("ingest --events " + d + "/missing.jsonl --out " + d + "/x") == 3);
    spit(dir / "bad.model", slurp(dir / "c.model").substr(0, 100));
    CHECK(run_cli("eval --model " + d + "/bad.model --test " + d + "/c.test --out " + d + "/x.csv") == 3);
    auto j = nlohmann::json::parse(slurp(dir / "c.model"));
    j["format_version"] = 99;
    spit(dir / "future.model", j.dump());
    CHECK(run_cli("eval --model " + d + "/future.model --test " + d + "/c.test --out " + d + "/x.csv") == 2);
    fs::remove_all(dir);
}
