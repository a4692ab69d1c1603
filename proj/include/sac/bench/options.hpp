#pragma once

// Command-line surface of the benchmark driver.  Parsing is strict: an
// unknown flag, a bogus benchmark name, or a malformed number is a usage
// error (exit 2), never a silent default.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sac::bench {

enum class Format { kTable, kCsv, kJson };

struct Options {
  std::vector<std::string> benches;  // expanded: "all" never survives parsing
  std::optional<uint64_t> n;         // per-bench default when absent
  std::vector<uint64_t> ks{1, 16, 256};
  std::vector<uint64_t> threads{1};
  uint64_t reps = 10;
  uint64_t seed = 1;
  std::optional<uint64_t> granularity;
  Format format = Format::kTable;
  bool paper_scale = false;
  bool inject_fault = false;  // hidden hook: drives the mismatch exit path
};

inline const std::vector<std::string>& all_benches() {
  static const std::vector<std::string> names = {
      "sum", "spellcheck", "hash", "list", "tree", "filter", "readers"};
  return names;
}

// Input size when --n is absent.  The small sizes keep a full grid under a
// few minutes on a laptop; --paper-scale switches to the sizes the
// published measurements used (expect long runs).
inline uint64_t default_n(std::string_view bench, bool paper_scale) {
  if (paper_scale) {
    if (bench == "sum") return 100'000'000;
    if (bench == "spellcheck") return 1'000'000;
    if (bench == "hash") return 100'000'000;
    if (bench == "list") return 1'000'000;
    if (bench == "tree") return 1'000'000;
    if (bench == "filter") return 1'000'000;
    return uint64_t{1} << 20;  // readers
  }
  if (bench == "sum") return uint64_t{1} << 16;
  if (bench == "spellcheck") return uint64_t{1} << 12;
  if (bench == "hash") return uint64_t{1} << 20;
  if (bench == "list") return uint64_t{1} << 14;
  if (bench == "tree") return uint64_t{1} << 12;
  if (bench == "filter") return uint64_t{1} << 12;
  return uint64_t{1} << 16;  // readers
}

// Meaning varies by app: hash chunk length, filter leaf capacity, readers
// workers per cell.  Apps without a knob ignore it.
inline uint64_t default_granularity(std::string_view bench) {
  if (bench == "hash") return 64;
  if (bench == "filter") return 64;
  return 1;
}

// nullopt: proceed with the filled Options.  Otherwise the process exit
// code: 0 after --help, 2 on any usage error.
inline std::optional<int> parse_args(int argc, const char* const* argv,
                                     Options& opt) {
  CLI::App app{"self-adjusting computation benchmark driver"};
  app.get_formatter()->column_width(34);

  std::string bench = "all";
  std::string format = "table";
  uint64_t n_flag = 0;
  uint64_t gran_flag = 0;

  app.add_option("--bench", bench, "benchmark to run, or \"all\"")
      ->check(CLI::IsMember(
          {"sum", "spellcheck", "hash", "list", "tree", "filter", "readers",
           "all"}));
  auto* n_opt =
      app.add_option("--n", n_flag, "input size (default: per-benchmark)")
          ->check(CLI::PositiveNumber);
  app.add_option("--k", opt.ks, "batch sizes, comma separated")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  app.add_option("--threads", opt.threads, "worker counts, comma separated")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  app.add_option("--reps", opt.reps, "repetitions per timed phase")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", opt.seed, "seed for inputs and update batches")
      ->capture_default_str();
  auto* gran_opt =
      app.add_option("--granularity", gran_flag,
                     "per-benchmark grain: hash chunk length, filter leaf "
                     "capacity, readers per cell")
          ->check(CLI::PositiveNumber);
  app.add_option("--format", format, "table, csv, or json")
      ->capture_default_str()
      ->check(CLI::IsMember({"table", "csv", "json"}));
  app.add_flag("--paper-scale", opt.paper_scale,
               "use the input sizes from the published measurements");
  app.add_flag("--inject-oracle-fault", opt.inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  if (bench == "all") {
    opt.benches = all_benches();
  } else {
    opt.benches = {bench};
  }
  if (n_opt->count() > 0) opt.n = n_flag;
  if (gran_opt->count() > 0) opt.granularity = gran_flag;
  opt.format = format == "csv"    ? Format::kCsv
               : format == "json" ? Format::kJson
                                  : Format::kTable;

  // The slowest-thread reference for self-speedup is the smallest count,
  // so keep the list sorted; duplicate entries would only duplicate rows.
  std::sort(opt.threads.begin(), opt.threads.end());
  opt.threads.erase(std::unique(opt.threads.begin(), opt.threads.end()),
                    opt.threads.end());
  std::vector<uint64_t> ks;
  for (uint64_t k : opt.ks)
    if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
  opt.ks = std::move(ks);
  return std::nullopt;
}

}  // namespace sac::bench
