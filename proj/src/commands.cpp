#include "mep/commands.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mep/config.hpp"
#include "mep/plot.hpp"
#include "mep/theory.hpp"

namespace mep {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kMetrics = {"env_steps", "success_rate", "goal_entropy",
                                           "critic_loss", "actor_loss", "pearson_r"};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<std::string> epoch_header() { return split(kEpochCsvHeader, ','); }

std::string join_vec(const Vector& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + ")";
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  require(!spec.empty(), "empty seed specification");
  std::vector<std::uint64_t> seeds;
  auto parse_one = [&](const std::string& tok) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(tok, &used);
      if (used == tok.size()) return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
    }
    throw Error("bad seed '" + tok + "'");
  };
  if (spec.find(',') == std::string::npos) {
    const auto n = parse_one(spec);
    require(n > 0, "seed count must be positive");
    for (std::uint64_t s = 0; s < n; ++s) seeds.push_back(s);
    return seeds;
  }
  for (const auto& tok : split(spec, ',')) seeds.push_back(parse_one(tok));
  return seeds;
}

std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  require(ctx != nullptr, "cannot allocate hash context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  require(ok, "sha1 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot read " + path.string());
  CsvTable t;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && !line.empty(), path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line, ',');
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto row = split(line, ',');
    require(row.size() == t.header.size(),
            path.string() + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                std::to_string(row.size()) + " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<std::string> aggregate_header() {
  std::vector<std::string> h{"epoch", "n_seeds"};
  for (const auto& m : kMetrics) {
    h.push_back(m + "_mean");
    h.push_back(m + "_std");
  }
  return h;
}

void write_aggregate_csv(const std::vector<fs::path>& seed_csvs, const fs::path& out) {
  require(!seed_csvs.empty(), "nothing to aggregate");
  std::vector<CsvTable> tables;
  std::size_t rows = std::numeric_limits<std::size_t>::max();
  for (const auto& p : seed_csvs) {
    tables.push_back(read_csv(p));
    require(tables.back().header == epoch_header(), p.string() + " does not have the epoch schema");
    rows = std::min(rows, tables.back().rows.size());
  }
  const auto header = epoch_header();
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };

  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream csv(out, std::ios::trunc);
  require(static_cast<bool>(csv), "cannot write " + out.string());
  const auto agg = aggregate_header();
  for (std::size_t i = 0; i < agg.size(); ++i) csv << (i ? "," : "") << agg[i];
  csv << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    csv << tables.front().rows[r][0] << ',' << tables.size();
    for (const auto& m : kMetrics) {
      Vector vals;
      for (const auto& t : tables) {
        const std::string& cell = t.rows[r][col(m)];
        if (!cell.empty()) vals.push_back(std::stod(cell));
      }
      if (vals.empty()) {
        csv << ",,";
        continue;
      }
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      const double sd = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
      csv << ',' << fmt(mean) << ',' << fmt(sd);
    }
    csv << '\n';
  }
  require(static_cast<bool>(csv), "failed writing " + out.string());
}

int cmd_train(const TrainConfig& config, const std::vector<std::uint64_t>& seeds,
              const fs::path& out_dir, std::size_t jobs, std::ostream& log) {
  require(!seeds.empty(), "no seeds given");
  fs::create_directories(out_dir);

  std::vector<fs::path> csvs;
  for (auto s : seeds) csvs.push_back(out_dir / ("seed_" + std::to_string(s) + ".csv"));

  const std::string snapshot = config_to_text(config);
  nlohmann::json manifest;
  manifest["config_text"] = snapshot;
  manifest["config_hash"] = git_blob_hash(snapshot);
  manifest["env"] = config.env;
  manifest["method"] = to_string(config.method);
  manifest["seeds"] = seeds;
  manifest["output_dir"] = out_dir.string();
  manifest["seed_csvs"] = nlohmann::json::array();
  for (const auto& p : csvs) manifest["seed_csvs"].push_back(p.filename().string());
  manifest["aggregate_csv"] = "aggregate.csv";
  {
    std::ofstream mf(out_dir / "manifest.json", std::ios::trunc);
    require(static_cast<bool>(mf), "cannot write manifest in " + out_dir.string());
    mf << manifest.dump(2) << '\n';
  }

  std::vector<std::optional<std::string>> failures(seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      TrainConfig c = config;
      c.seed = seeds[i];
      try {
        const auto res = run_experiment(c, out_dir, "seed_" + std::to_string(seeds[i]));
        std::lock_guard lock(log_mutex);
        log << "seed " << seeds[i] << ": " << res.records.size() << " epochs, final success "
            << fmt(res.records.empty() ? 0.0 : res.records.back().success_rate) << ", best "
            << fmt(res.best_success) << '\n';
      } catch (const std::exception& e) {
        failures[i] = e.what();
        std::lock_guard lock(log_mutex);
        log << "seed " << seeds[i] << " failed: " << e.what() << '\n';
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<fs::path> done;
  for (std::size_t i = 0; i < seeds.size(); ++i)
    if (!failures[i]) done.push_back(csvs[i]);
  if (!done.empty()) {
    write_aggregate_csv(done, out_dir / "aggregate.csv");
    std::ostringstream sink;
    cmd_plot({out_dir / "aggregate.csv"}, out_dir / "aggregate.svg", sink);
  }
  const bool all_ok = done.size() == seeds.size();
  log << (all_ok ? "all seeds completed" : "some seeds failed") << "; outputs in " << out_dir.string()
      << '\n';
  return all_ok ? 0 : 1;
}

int cmd_verify(const VerifyOptions& options, std::ostream& out) {
  TheorySuiteOptions opts;
  opts.instances = options.instances;
  opts.majorization_instances = options.instances;
  opts.seed = options.seed;
  const TheorySuiteReport r = run_theory_suite(opts);

  out << "entropy increase: " << r.entropy_pass << "/" << r.instances << ", min delta "
      << fmt(r.entropy_min_delta) << " >= -1e-12\n";
  out << "entropy uniform equality: " << r.uniform_equality_pass << "/" << r.uniform_cases
      << " with |delta| < 1e-9\n";
  out << "lower bound: " << r.bound_pass << "/" << r.instances << ", min eta_H - eta_L "
      << fmt(r.bound_min_margin) << " > 0\n";
  out << "majorization: " << r.majorization_pass << "/" << r.majorization_instances
      << ", min partial-sum margin " << fmt(r.majorization_min_margin) << " >= -1e-12\n";
  if (r.entropy_pass != r.instances)
    out << "entropy increase violated at p = " << join_vec(r.entropy_worst) << '\n';
  if (r.bound_pass != r.instances)
    out << "lower bound violated at p = " << join_vec(r.bound_worst_p)
        << ", R = " << join_vec(r.bound_worst_r) << '\n';
  if (r.majorization_pass != r.majorization_instances)
    out << "majorization violated at p = " << join_vec(r.majorization_worst) << '\n';
  const bool ok = r.all_pass();
  out << (ok ? "verify: all checks passed" : "verify: FAILED") << '\n';
  return ok ? 0 : 1;
}

int cmd_plot(const std::vector<fs::path>& csvs, const fs::path& output, std::ostream& err) {
  try {
    require(!csvs.empty(), "plot needs at least one CSV");
    Panel success{"Mean success rate", "success rate", {}};
    Panel entropy{"Achieved-goal entropy", "entropy (nats)", {}};
    const auto per_epoch = epoch_header();
    const auto aggregate = aggregate_header();
    for (const auto& path : csvs) {
      const CsvTable t = read_csv(path);
      require(!t.rows.empty(), path.string() + " has no data rows");
      const bool is_agg = t.header.size() > 1 && t.header[1] == "n_seeds";
      const auto& expected = is_agg ? aggregate : per_epoch;
      for (std::size_t i = 0; i < std::max(expected.size(), t.header.size()); ++i) {
        const std::string got = i < t.header.size() ? t.header[i] : "<missing>";
        const std::string want = i < expected.size() ? expected[i] : "<none>";
        require(got == want, path.string() + ": bad column '" + got + "' at position " +
                                 std::to_string(i + 1) + " (expected '" + want + "')");
      }
      auto idx = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(t.header.begin(), t.header.end(), name) -
                                        t.header.begin());
      };
      std::string label = path.stem().string();
      if (is_agg && path.has_parent_path() && !path.parent_path().filename().empty())
        label = path.parent_path().filename().string();
      Series s_succ{label, {}, {}, {}}, s_ent{label, {}, {}, {}};
      for (const auto& row : t.rows) {
        const double x = std::stod(row[0]);
        auto val = [&](const std::string& name) {
          const auto& cell = row[idx(name)];
          return cell.empty() ? 0.0 : std::stod(cell);
        };
        s_succ.x.push_back(x);
        s_ent.x.push_back(x);
        if (is_agg) {
          s_succ.mean.push_back(val("success_rate_mean"));
          s_succ.stddev.push_back(val("success_rate_std"));
          s_ent.mean.push_back(val("goal_entropy_mean"));
          s_ent.stddev.push_back(val("goal_entropy_std"));
        } else {
          s_succ.mean.push_back(val("success_rate"));
          s_succ.stddev.push_back(0.0);
          s_ent.mean.push_back(val("goal_entropy"));
          s_ent.stddev.push_back(0.0);
        }
      }
      success.series.push_back(std::move(s_succ));
      entropy.series.push_back(std::move(s_ent));
    }
    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    write_svg(output, {success, entropy});
    return 0;
  } catch (const std::exception& e) {
    err << "plot: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mep
