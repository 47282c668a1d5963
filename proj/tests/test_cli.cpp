#include <doctest.h>

#include <cmath>

#include "cli_support.hpp"

using namespace dude;
using namespace dude::testing;
using nlohmann::json;

namespace {

json small_config(const std::filesystem::path& out_dir) {
  return {{"task", {{"kind", "teacher_student"}, {"d", 6}, {"k", 5}, {"r_true", 2}, {"sigma", 0.05}}},
          {"method", "dude"},
          {"rank", 2},
          {"steps", 40},
          {"batch", 8},
          {"eval_every", 10},
          {"seeds", {42, 78}},
          {"out_dir", out_dir.string()}};
}

std::filesystem::path write_config(const TempDir& dir, const std::string& name, const json& doc) {
  const auto path = dir / name;
  spit(path, doc.dump(2));
  return path;
}

}  // namespace

TEST_CASE("run: identical config gives byte-identical artifacts") {
  TempDir tmp;
  const auto a = write_config(tmp, "a.json", small_config(tmp / "a"));
  const auto b = write_config(tmp, "b.json", small_config(tmp / "b"));
  REQUIRE(cli({"run", "--config", a.string()}).code == 0);
  REQUIRE(cli({"run", "--config", b.string()}).code == 0);
  for (const char* name : {"metrics_42.csv", "metrics_78.csv"}) {
    const std::string first = slurp(tmp / "a" / name);
    CHECK_FALSE(first.empty());
    CHECK(first == slurp(tmp / "b" / name));
  }
  CHECK(slurp(tmp / "a" / "metrics_42.csv") != slurp(tmp / "a" / "metrics_78.csv"));
}

TEST_CASE("run: metrics and summary layout") {
  TempDir tmp;
  const auto cfg = write_config(tmp, "c.json", small_config(tmp / "out"));
  const CliResult r = cli({"run", "--config", cfg.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("summary.json") != std::string::npos);

  const std::string csv = slurp(tmp / "out" / "metrics_42.csv");
  CHECK(csv.rfind("step,loss,grad_norm,lr,eval\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 41);
  // step 9 is the first evaluated step; step 0 has a blank eval cell.
  CHECK(csv.find("\n0,") != std::string::npos);
  const auto row0 = csv.substr(csv.find("\n0,") + 1);
  CHECK(row0.substr(0, row0.find('\n')).back() == ',');

  const json summary = json::parse(slurp(tmp / "out" / "summary.json"));
  for (const char* key : {"format_version", "method", "seed", "final_loss", "best_eval", "steps",
                          "tail_mean_loss", "config", "runs"}) {
    CHECK(summary.contains(key));
  }
  CHECK(summary["format_version"] == 1);
  CHECK(summary["method"] == "dude");
  CHECK(summary["steps"] == 40);
  CHECK(summary["runs"].size() == 2);
  CHECK(summary["config"]["task"]["d"] == 6);
  CHECK(summary["config"]["seeds"] == json({42, 78}));
}

TEST_CASE("run: overrides take precedence over the file") {
  TempDir tmp;
  const auto cfg = write_config(tmp, "c.json", small_config(tmp / "out"));
  REQUIRE(cli({"run", "--config", cfg.string(), "--seed", "7", "--method", "lora", "--rank",
               "1", "--lr", "0.01"})
              .code == 0);
  CHECK(std::filesystem::exists(tmp / "out" / "metrics_7.csv"));
  CHECK_FALSE(std::filesystem::exists(tmp / "out" / "metrics_42.csv"));
  const json summary = json::parse(slurp(tmp / "out" / "summary.json"));
  CHECK(summary["method"] == "lora");
  CHECK(summary["config"]["rank"] == 1);
  CHECK(summary["config"]["lr"] == 0.01);
}

TEST_CASE("run: configuration errors exit 1 and name the field") {
  TempDir tmp;
  SUBCASE("unknown method") {
    json doc = small_config(tmp / "out");
    doc["method"] = "qlora";
    const CliResult r = cli({"run", "--config", write_config(tmp, "c.json", doc).string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("method") != std::string::npos);
  }
  SUBCASE("rank above min(d, k)") {
    json doc = small_config(tmp / "out");
    doc["rank"] = 6;
    const CliResult r = cli({"run", "--config", write_config(tmp, "c.json", doc).string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("rank") != std::string::npos);
  }
  SUBCASE("full ignores rank") {
    json doc = small_config(tmp / "out");
    doc["method"] = "full";
    doc["rank"] = 99;
    doc["steps"] = 5;
    CHECK(cli({"run", "--config", write_config(tmp, "c.json", doc).string()}).code == 0);
  }
  SUBCASE("negative dimension, unknown key, missing out_dir") {
    json bad_d = small_config(tmp / "out");
    bad_d["task"]["d"] = -3;
    CliResult r = cli({"run", "--config", write_config(tmp, "d.json", bad_d).string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("task.d") != std::string::npos);

    json extra = small_config(tmp / "out");
    extra["momentum"] = 0.9;
    r = cli({"run", "--config", write_config(tmp, "e.json", extra).string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("momentum") != std::string::npos);

    json no_out = small_config(tmp / "out");
    no_out.erase("out_dir");
    r = cli({"run", "--config", write_config(tmp, "f.json", no_out).string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("out_dir") != std::string::npos);
  }
  SUBCASE("unreadable and malformed config") {
    CHECK(cli({"run", "--config", (tmp / "absent.json").string()}).code == 1);
    spit(tmp / "broken.json", "{ not json");
    CHECK(cli({"run", "--config", (tmp / "broken.json").string()}).code == 1);
  }
  SUBCASE("missing required flag") {
    CHECK(cli({"run"}).code == 1);
    CHECK(cli({}).code == 1);
  }
}

TEST_CASE("parse_config defaults") {
  const ExperimentConfig adam = parse_config(json{{"task", json::object()}, {"method", "lora"}, {"out_dir", "x"}});
  CHECK(adam.lr == 1e-3);
  CHECK(adam.warmup_frac == 0.03);
  CHECK(adam.eval_every == 50);
  const ExperimentConfig sgd =
      parse_config(json{{"task", json::object()}, {"method", "lora"}, {"optimizer", "sgd"}, {"out_dir", "x"}});
  CHECK(sgd.lr == 1e-2);
}

TEST_CASE("compare") {
  TempDir tmp;
  spit(tmp / "r1" / "summary.json", summary_with_loss("dude", 1.0));
  spit(tmp / "r2" / "summary.json", summary_with_loss("dude", 3.0));
  spit(tmp / "r3" / "summary.json", summary_with_loss("lora", 0.5));

  SUBCASE("mean and population std over hand-made summaries") {
    const CliResult r = cli({"compare", (tmp / "r1").string(), (tmp / "r2").string(), "--out",
                             (tmp / "cmp.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(slurp(tmp / "cmp.csv") ==
          "method,mean_final_loss,std_final_loss,best_final_loss,worst_final_loss,n_seeds\n"
          "dude,2,1,1,3,2\n");
  }
  SUBCASE("single run has zero std; rows are ordered by method") {
    const CliResult r = cli({"compare", (tmp / "r3").string(), (tmp / "r1").string(), "--out",
                             (tmp / "cmp.csv").string()});
    REQUIRE(r.code == 0);
    const std::string csv = slurp(tmp / "cmp.csv");
    CHECK(csv.find("dude,1,0,1,1,1\n") != std::string::npos);
    CHECK(csv.find("dude") < csv.find("lora"));
  }
  SUBCASE("missing summary exits 1 and names the path") {
    const CliResult r = cli({"compare", (tmp / "r1").string(), (tmp / "nowhere").string(),
                             "--out", (tmp / "cmp.csv").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("nowhere") != std::string::npos);
  }
  SUBCASE("multi-seed run directories contribute every seed") {
    const auto cfg = write_config(tmp, "c.json", small_config(tmp / "multi"));
    REQUIRE(cli({"run", "--config", cfg.string()}).code == 0);
    REQUIRE(cli({"compare", (tmp / "multi").string(), "--out", (tmp / "m.csv").string()}).code == 0);
    CHECK(slurp(tmp / "m.csv").find(",2\n") != std::string::npos);
  }
}

TEST_CASE("gradcheck") {
  SUBCASE("dude 5x4 r=2 seed 42") {
    const CliResult r = cli({"gradcheck", "--method", "dude", "--d", "5", "--k", "4", "--rank",
                             "2", "--seed", "42"});
    CHECK(r.code == 0);
    CHECK(r.out.find("gradcheck: PASS") != std::string::npos);
    CHECK(r.out.find("dude,5,4,2,m,") != std::string::npos);
  }
  SUBCASE("every method over the default grid") {
    const CliResult r = cli({"gradcheck", "--method", "all"});
    CHECK(r.code == 0);
    for (Method m : kAllMethods)
      CHECK(r.out.find(std::string(to_string(m)) + ",16,16,") != std::string::npos);
  }
  SUBCASE("d = 0 is an input error") {
    CHECK(cli({"gradcheck", "--method", "dude", "--d", "0", "--k", "4", "--rank", "1"}).code == 1);
  }
  SUBCASE("unknown method and oversize rank") {
    CHECK(cli({"gradcheck", "--method", "vera"}).code == 1);
    CHECK(cli({"gradcheck", "--method", "lora", "--d", "3", "--k", "3", "--rank", "4"}).code == 1);
  }
  SUBCASE("an impossible tolerance reports failure with exit 2") {
    const CliResult r = cli({"gradcheck", "--method", "dora", "--d", "4", "--k", "3", "--rank",
                             "2", "--tolerance", "1e-30"});
    CHECK(r.code == 2);
    CHECK(r.out.find("gradcheck: FAIL") != std::string::npos);
  }
}

TEST_CASE("svd") {
  TempDir tmp;
  SUBCASE("identity has zero residual") {
    spit(tmp / "i.csv", "1,0,0\n0,1,0\n0,0,1\n");
    REQUIRE(cli({"svd", "--in", (tmp / "i.csv").string(), "--rank", "3", "--out",
                 (tmp / "i").string()})
                .code == 0);
    CHECK(std::stod(slurp(tmp / "i_residual.txt")) == 0.0);
    CHECK(slurp(tmp / "i_sigma.csv") == "1\n1\n1\n");
    CHECK(slurp(tmp / "i_U.csv") == "1,0,0\n0,1,0\n0,0,1\n");
  }
  SUBCASE("[[1,2],[3,4]] at rank 1 leaves the second singular value") {
    spit(tmp / "w.csv", "1,2\n3,4\n");
    REQUIRE(cli({"svd", "--in", (tmp / "w.csv").string(), "--rank", "1", "--out",
                 (tmp / "w").string()})
                .code == 0);
    const double residual = std::stod(slurp(tmp / "w_residual.txt"));
    CHECK(residual == doctest::Approx(0.3660).epsilon(1e-3));
    CHECK(residual == doctest::Approx(std::sqrt(15.0 - std::sqrt(221.0))).epsilon(1e-12));
    const Matrix u = read_matrix_csv(tmp / "w_U.csv");
    const Matrix v = read_matrix_csv(tmp / "w_V.csv");
    CHECK(u.shape() == "2x1");
    CHECK(v.shape() == "2x1");
  }
  SUBCASE("non-numeric cell names row and column") {
    spit(tmp / "bad.csv", "1,2\n3,abc\n");
    const CliResult r = cli({"svd", "--in", (tmp / "bad.csv").string(), "--rank", "1", "--out",
                             (tmp / "bad").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("row 2") != std::string::npos);
    CHECK(r.err.find("column 2") != std::string::npos);
  }
  SUBCASE("ragged rows and bad rank") {
    spit(tmp / "rag.csv", "1,2,3\n4,5\n");
    CHECK(cli({"svd", "--in", (tmp / "rag.csv").string(), "--out", (tmp / "x").string()}).code == 1);
    spit(tmp / "ok.csv", "1,2\n3,4\n");
    CHECK(cli({"svd", "--in", (tmp / "ok.csv").string(), "--rank", "3", "--out",
               (tmp / "x").string()})
              .code == 1);
  }
}

TEST_CASE("matrix CSV round trip is exact") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Matrix m(4, 3);
  for (double& v : m.data()) v = normal(rng);
  TempDir tmp;
  spit(tmp / "m.csv", format_matrix_csv(m));
  CHECK(read_matrix_csv(tmp / "m.csv") == m);
}
