#pragma once

// Implementations behind the `mep` command-line subcommands.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mep/trainer.hpp"

namespace mep {

// "N" means seeds 0..N-1; "a,b,c" is an explicit list.
std::vector<std::uint64_t> parse_seeds(const std::string& spec);

// SHA-1 of "blob <len>\0<content>", as git computes object ids.
std::string git_blob_hash(const std::string& content);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

// Per-epoch mean and sample standard deviation across seed CSVs. Wall time
// is left out so the aggregate is reproducible byte for byte.
void write_aggregate_csv(const std::vector<std::filesystem::path>& seed_csvs,
                         const std::filesystem::path& out);
std::vector<std::string> aggregate_header();

int cmd_train(const TrainConfig& config, const std::vector<std::uint64_t>& seeds,
              const std::filesystem::path& out_dir, std::size_t jobs, std::ostream& log);

struct VerifyOptions {
  std::size_t instances = 10000;
  std::uint64_t seed = 0;
};
int cmd_verify(const VerifyOptions& options, std::ostream& out);

// Accepts per-epoch or aggregate CSVs; one curve per file in each panel.
int cmd_plot(const std::vector<std::filesystem::path>& csvs, const std::filesystem::path& output,
             std::ostream& err);

}  // namespace mep
