// Exercises the command-line surface: exit codes, the trivial scoring path,
// deterministic simulation and hypothesis combination.
// Usage: cli_smoke <path-to-eend> <scratch-dir>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
  std::printf("[%s] %s\n", ok ? "ok" : "FAILED", what.c_str());
  if (!ok) ++g_failures;
}

int run(const std::string& cmd) {
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: cli_smoke <eend-binary> <scratch-dir>\n");
    return 2;
  }
  std::string eend = argv[1];
  fs::path dir = argv[2];
  fs::remove_all(dir);
  fs::create_directories(dir);

  {
    std::ofstream rttm(dir / "a.rttm");
    rttm << "SPEAKER rec1 1 0.500 2.000 <NA> <NA> spkA <NA> <NA>\n"
         << "SPEAKER rec1 1 3.000 1.500 <NA> <NA> spkB <NA> <NA>\n";
  }

  // self-scoring prints DER 0.00
  check(run(eend + " score --ref " + (dir / "a.rttm").string() + " --hyp " +
            (dir / "a.rttm").string() + " --collar 0.25 > " + (dir / "score.out").string()) == 0,
        "score exits 0 on identical annotations");
  std::string score_out = slurp(dir / "score.out");
  check(score_out.find("0.00") != std::string::npos, "score reports DER 0.00");

  // usage errors exit 2, runtime errors exit 1
  check(run(eend + " score --no-such-flag 2> /dev/null") == 2, "unknown flag exits 2");
  check(run(eend + " 2> /dev/null") == 2, "missing subcommand exits 2");
  check(run(eend + " score --ref missing.rttm --hyp missing.rttm 2> /dev/null") == 1,
        "missing file exits 1");

  // simulation is deterministic directory-for-directory
  std::string sim = " simulate --nspk 2 --beta 2 --count 3 --seed 7 --feat-dim 8 "
                    "--min-utts 2 --max-utts 3 -o ";
  check(run(eend + sim + (dir / "sim1").string() + " > /dev/null") == 0, "simulate exits 0");
  check(run(eend + sim + (dir / "sim2").string() + " > /dev/null") == 0, "simulate re-run exits 0");
  check(slurp(dir / "sim1/ref.rttm") == slurp(dir / "sim2/ref.rttm"),
        "simulate rttm identical under one seed");
  check(slurp(dir / "sim1/mix_000001.feat") == slurp(dir / "sim2/mix_000001.feat"),
        "simulate features identical under one seed");

  // combining a hypothesis with itself returns it (modulo canonical formatting)
  check(run(eend + " combine " + (dir / "a.rttm").string() + " " + (dir / "a.rttm").string() +
            " -o " + (dir / "fused.rttm").string() + " --frame-period 0.05") == 0,
        "combine exits 0");
  std::string fused = slurp(dir / "fused.rttm");
  check(fused.find("0.500 2.000") != std::string::npos &&
            fused.find("3.000 1.500") != std::string::npos,
        "combine of identical hypotheses keeps the segments");

  // count subcommand
  check(run(eend + " count --ref " + (dir / "a.rttm").string() + " --hyp " +
            (dir / "a.rttm").string() + " > " + (dir / "count.out").string()) == 0,
        "count exits 0");
  check(slurp(dir / "count.out").find("accuracy\t1.0000") != std::string::npos,
        "count reports accuracy 1.0");

  std::printf("%s\n", g_failures == 0 ? "cli smoke: all checks passed" : "cli smoke: FAILURES");
  return g_failures == 0 ? 0 : 1;
}
