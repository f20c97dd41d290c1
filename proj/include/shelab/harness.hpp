#pragma once
// Campaign harness: typed view of the configuration, the parallel replica
// runner (deterministic for any worker count), campaign implementations, and
// result persistence (config.json, replicas.csv, verdicts.json, summary.txt,
// plot CSVs).

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "shelab/config.hpp"
#include "shelab/grid.hpp"
#include "shelab/noise.hpp"
#include "shelab/observables.hpp"
#include "shelab/solver.hpp"
#include "shelab/stats.hpp"

namespace shelab {

// Typed accessors over the raw config; every getter validates.
struct ExperimentConfig {
  Config raw;

  std::string campaign() const;
  std::uint64_t base_seed() const;
  int replicas() const;
  int workers() const;
  double failure_budget() const;
  bool store_noise() const;
  std::string output_dir() const;

  NoiseModel noise_model() const;
  DiffusionSpec diffusion() const;
  ObservableSpec observable() const;
  LatticeGrid grid() const;            // dt defaulted to dx^2/2 when 0/absent
  std::vector<double> windows() const; // average.windows
  std::vector<double> times() const;   // average.times
  double max_lag() const;

  // Window/margin check: torus length >= max window + 12 sqrt(t_max).
  void validate() const;
};

struct ReplicaRecord {
  std::uint64_t replica = 0;
  std::uint64_t stream = 0;
  std::string status = "ok";  // ok | rejected | failed
  std::vector<double> values;
};

struct PlotTable {
  std::string name;                       // file stem, written as <name>.csv
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct CampaignResult {
  std::string kind;
  std::vector<std::string> value_names;   // replica CSV columns
  std::vector<ReplicaRecord> records;
  std::vector<TestVerdict> verdicts;
  // Aggregates are exactly the statistics recomputable from replicas.csv
  // (mean/var per value column); everything else lands in `derived`.
  std::vector<std::pair<std::string, double>> aggregates;
  std::vector<std::pair<std::string, double>> derived;
  std::vector<PlotTable> tables;
  std::vector<std::string> notes;
  bool all_pass() const;
};

// Runs fn(i) for i in [0, n) on `workers` threads (1 = inline).  Callbacks
// must write only into replica-indexed slots; the first exception is
// rethrown after all workers join.
void parallel_replicas(int n, int workers, const std::function<void(int)>& fn);

// Dispatch on campaign kind.  Throws ConfigError for unknown kinds/invalid
// config; statistical failures are verdicts, not exceptions.
CampaignResult run_campaign(const ExperimentConfig& cfg);

// Persistence.  Refuses to overwrite an existing result directory whose
// config.json digest differs (or equals: a completed run is never clobbered)
// unless force is set.  Returns the digest.
std::string write_campaign_output(const ExperimentConfig& cfg, const CampaignResult& result,
                                  bool force);

// Recompute scalar aggregates from a replicas.csv written above; used by the
// round-trip invariant test.
std::vector<std::pair<std::string, double>> recompute_aggregates_from_csv(
    const std::string& csv_path, const std::string& kind);

// Aggregates recomputable from records (mean/var per value column) -- the
// subset persisted for the round trip.
std::vector<std::pair<std::string, double>> basic_aggregates(const CampaignResult& result);

}  // namespace shelab
