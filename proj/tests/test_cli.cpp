#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Run netquant(const std::string& args) {
  static const auto dir = nqtest::temp_dir("cli_io");
  const std::string cmd =
      std::string(NETQUANT_BIN) + " " + args + " >" + (dir / "out").string() + " 2>" + (dir / "err").string();
  Run r;
  const int status = std::system(cmd.c_str());
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(dir / "out");
  r.err = slurp(dir / "err");
  return r;
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

// Small SBM written by the synth command, shared by the cases below.
const fs::path& fixture() {
  static const fs::path dir = [] {
    auto d = nqtest::temp_dir("cli_graph");
    auto r = netquant("synth --nodes 120 --attr-dim 30 --p-in 0.15 --p-out 0.01 --out " + d.string());
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::string graph_args() {
  const auto& d = fixture();
  return "--edges " + (d / "edges.txt").string() + " --attributes " + (d / "attributes.txt").string() +
         " --labels " + (d / "labels.txt").string();
}

const std::string kSmall =
    " --set encoder.hidden=16 --set L=8 --set quant.hidden=8 --set M=2 --set K=16 --set batch_size=40";

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(netquant("").code == 2);
  CHECK(netquant("frobnicate").code == 2);
  auto bad_key = netquant("train " + graph_args() + " --set no_such_key=1 --out " +
                          nqtest::temp_dir("cli_badkey").string());
  CHECK(bad_key.code == 2);
  CHECK(bad_key.err.find("no_such_key") != std::string::npos);
  CHECK(netquant("encode --checkpoint /nonexistent/ck.nqck --out /tmp/x.nqcs").code == 2);
  CHECK(netquant("bench --synthetic 1000 --queries 0").code == 2);
}

TEST_CASE("train, encode, evaluate, recommend") {
  auto run = nqtest::temp_dir("cli_run");
  auto t = netquant("train " + graph_args() + kSmall + " --set epochs=2 --set no_rank_loss=true --quiet --out " +
                    run.string());
  REQUIRE(t.code == 0);
  CHECK(fs::exists(run / "checkpoint.nqck"));
  CHECK(fs::exists(run / "manifest.json"));
  std::istringstream log(slurp(run / "log.csv"));
  std::string line;
  std::getline(log, line);
  CHECK(line.rfind("epoch,l_a,l_r", 0) == 0);
  std::size_t rows = 0;
  while (std::getline(log, line)) {
    std::stringstream fields(line);
    std::string epoch, la, lr_term;
    std::getline(fields, epoch, ',');
    std::getline(fields, la, ',');
    std::getline(fields, lr_term, ',');
    CHECK(std::stod(lr_term) == 0.0);
    ++rows;
  }
  CHECK(rows == 2);

  auto store = run / "codes.nqcs";
  auto e = netquant("encode --checkpoint " + (run / "checkpoint.nqck").string() + " --out " + store.string());
  REQUIRE(e.code == 0);
  CHECK(e.out.find("120") != std::string::npos);
  CHECK(fs::exists(store));

  auto ev = netquant("evaluate --checkpoint " + (run / "checkpoint.nqck").string() +
                     " --protocol link --protocol path --train-ratios 20,40,60,80 --pairs-per-class 50 --lenient-path --out " +
                     (run / "eval").string());
  REQUIRE(ev.code == 0);
  auto link = slurp(run / "eval" / "link.csv");
  CHECK(count_lines(link) == 4);  // header + continuous, discrete, reconstructed
  auto path = slurp(run / "eval" / "path.csv");
  CHECK(count_lines(path) == 1 + 4 * 2);  // header + 4 ratios per variant

  auto rec = netquant("recommend --store " + store.string() + " --node 3 --k 5");
  REQUIRE(rec.code == 0);
  CHECK(count_lines(rec.out) == 1 + 5);  // header + k rows
}

TEST_CASE("evaluate: protocols needing labels refuse unlabelled graphs") {
  auto run = nqtest::temp_dir("cli_nolabel");
  const auto& d = fixture();
  const std::string plain = "--edges " + (d / "edges.txt").string() + " --attributes " + (d / "attributes.txt").string();
  REQUIRE(netquant("train " + plain + kSmall + " --set epochs=1 --quiet --out " + run.string()).code == 0);
  auto ev = netquant("evaluate --checkpoint " + (run / "checkpoint.nqck").string() + " " + plain +
                     " --protocol classify --out " + (run / "eval").string());
  CHECK(ev.code == 2);
  CHECK(ev.err.find("label") != std::string::npos);
}

TEST_CASE("evaluate: ndcg logs excluded isolated nodes") {
  auto dir = nqtest::temp_dir("cli_isolated");
  nqtest::write_text(dir / "edges.txt", "0 1\n1 2\n2 3\n3 0\n4 5\n5 6\n6 7\n7 4\n");
  nqtest::write_text(dir / "attrs.txt", "# dim=3\n0\n0\n0\n0\n1\n1\n1\n1\n2\n");
  const std::string g = "--edges " + (dir / "edges.txt").string() + " --attributes " + (dir / "attrs.txt").string();
  REQUIRE(netquant("train " + g + kSmall + " --set epochs=1 --set split.enabled=false --quiet --out " +
                   (dir / "run").string())
              .code == 0);
  auto ev = netquant("evaluate --checkpoint " + (dir / "run" / "checkpoint.nqck").string() + " " + g +
                     " --protocol ndcg --repeats 1 --out " + (dir / "eval").string());
  REQUIRE(ev.code == 0);
  CHECK(ev.err.find("excluded") != std::string::npos);
}

TEST_CASE("training abort exits with 3") {
  auto run = nqtest::temp_dir("cli_abort");
  auto t = netquant("train " + graph_args() + kSmall + " --set epochs=30 --set lr=1e9 --quiet --out " + run.string());
  CHECK(t.code == 3);
  CHECK(t.err.find("l_q") != std::string::npos);
}
