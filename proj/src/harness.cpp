#include "shelab/harness.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace shelab {

namespace fs = std::filesystem;

std::string ExperimentConfig::campaign() const { return raw.get_text("campaign.kind"); }

std::uint64_t ExperimentConfig::base_seed() const {
  const long long s = raw.get_int("campaign.seed", 1);
  if (s < 0) throw ConfigError("campaign.seed must be nonnegative");
  return std::uint64_t(s);
}

int ExperimentConfig::replicas() const {
  const long long r = raw.get_int("campaign.replicas", 200);
  if (r < 1 || r > 100000000) throw ConfigError("campaign.replicas out of range");
  return int(r);
}

int ExperimentConfig::workers() const {
  const long long w = raw.get_int("campaign.workers", 1);
  if (w < 1 || w > 1024) throw ConfigError("campaign.workers out of range");
  return int(w);
}

double ExperimentConfig::failure_budget() const {
  const double b = raw.get_number("campaign.failure_budget", 1e-3);
  if (b < 0 || b > 1) throw ConfigError("campaign.failure_budget must be in [0,1]");
  return b;
}

bool ExperimentConfig::store_noise() const { return raw.get_bool("campaign.store_noise", false); }

std::string ExperimentConfig::output_dir() const {
  return raw.get_text("campaign.output_dir", "out");
}

NoiseModel ExperimentConfig::noise_model() const {
  const std::string kind = raw.get_text("noise.kind", "dirac");
  NoiseModel m;
  m.dim = int(raw.get_int("noise.dim", 1));
  if (kind == "dirac")
    m.kind = NoiseKind::dirac;
  else if (kind == "gaussian")
    m.kind = NoiseKind::gaussian_density;
  else if (kind == "exponential")
    m.kind = NoiseKind::exponential_density;
  else
    throw ConfigError("noise.kind must be dirac, gaussian or exponential");
  m.bandwidth = raw.get_number("noise.bandwidth", 1.0);
  m.rate = raw.get_number("noise.rate", 1.0);
  try {
    m.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("noise: ") + e.what());
  }
  return m;
}

DiffusionSpec ExperimentConfig::diffusion() const {
  const std::string kind = raw.get_text("sigma.kind", "linear");
  DiffusionSpec d;
  if (kind == "constant") {
    d = DiffusionSpec::constant(raw.get_number("sigma.a", 1.0));
  } else if (kind == "linear") {
    d.kind = SigmaKind::linear;
    d.b = raw.get_number("sigma.b", 1.0);
  } else if (kind == "affine") {
    d = DiffusionSpec::affine(raw.get_number("sigma.a", 0.5), raw.get_number("sigma.b", 0.5));
  } else {
    throw ConfigError("sigma.kind must be constant, linear or affine");
  }
  try {
    d.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("sigma: ") + e.what());
  }
  return d;
}

ObservableSpec ExperimentConfig::observable() const {
  const std::string kind = raw.get_text("observable.kind", "identity");
  if (kind == "identity") return ObservableSpec::identity();
  if (kind == "log") return ObservableSpec::logarithm();
  if (kind == "power") return ObservableSpec::power(raw.get_number("observable.exponent", 2.0));
  throw ConfigError("observable.kind must be identity, log or power");
}

LatticeGrid ExperimentConfig::grid() const {
  LatticeGrid g;
  const NoiseModel m = noise_model();
  g.dim = m.dim;
  g.sites = int(raw.get_int("grid.sites", 256));
  g.dx = raw.get_number("grid.dx", 0.25);
  // For space-time white noise the per-step site increment has sd
  // sqrt(dt/dx); dx^2/8 keeps that at 0.35/sqrt(8) ~ 0.125 so the positive
  // solution stays positive under the scheme (nonpositive-site fraction well
  // below 1e-4), where dx^2/2 was borderline.
  const double default_dt = m.kind == NoiseKind::dirac ? 0.125 * g.dx * g.dx : 0.01;
  g.dt = raw.get_number("grid.dt", default_dt);
  if (g.dt <= 0) g.dt = default_dt;
  try {
    g.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  return g;
}

std::vector<double> ExperimentConfig::windows() const {
  auto w = raw.get_list("average.windows", {16.0});
  if (w.empty()) throw ConfigError("average.windows must be nonempty");
  for (double v : w)
    if (!(v > 0)) throw ConfigError("average.windows entries must be positive");
  return w;
}

std::vector<double> ExperimentConfig::times() const {
  auto t = raw.get_list("average.times", {0.5});
  if (t.empty()) throw ConfigError("average.times must be nonempty");
  for (double v : t)
    if (v < 0) throw ConfigError("average.times entries must be nonnegative");
  return t;
}

double ExperimentConfig::max_lag() const { return raw.get_number("average.max_lag", 0.0); }

void ExperimentConfig::validate() const {
  // Exhaustive validation: collect every problem before reporting.
  std::vector<std::string> errors;
  auto attempt = [&](const std::function<void()>& check) {
    try {
      check();
    } catch (const std::exception& e) {
      errors.emplace_back(e.what());
    }
  };
  attempt([&] { (void)campaign(); });
  attempt([&] { (void)base_seed(); });
  attempt([&] { (void)replicas(); });
  attempt([&] { (void)workers(); });
  attempt([&] { (void)failure_budget(); });
  attempt([&] { (void)noise_model(); });
  attempt([&] { (void)diffusion(); });
  attempt([&] { (void)observable(); });
  attempt([&] {
    const LatticeGrid g = grid();
    const auto ws = windows();
    const auto ts = times();
    double wmax = 0, tmax = 0;
    for (double w : ws) {
      wmax = std::max(wmax, w);
      const long k = std::lround(w / g.dx);
      if (k < 1 || std::abs(k * g.dx - w) > 1e-9 * std::max(1.0, w))
        errors.emplace_back("average.windows entries must be positive multiples of grid.dx");
    }
    for (double t : ts) {
      tmax = std::max(tmax, t);
      const long k = std::lround(t / g.dt);
      if (k < 0 || std::abs(k * g.dt - t) > 1e-9 * std::max(1.0, t))
        errors.emplace_back("average.times entries must be nonnegative multiples of grid.dt");
    }
    if (g.length() < wmax + 12.0 * std::sqrt(tmax))
      errors.emplace_back("torus too small: need sites*dx >= max window + 12 sqrt(max time)");
  });
  if (!errors.empty()) {
    std::string joined = "invalid config:";
    for (const auto& e : errors) {
      joined += "\n  - ";
      joined += e;
    }
    throw ConfigError(joined);
  }
}

bool CampaignResult::all_pass() const {
  for (const auto& v : verdicts)
    if (!v.pass) return false;
  return true;
}

void parallel_replicas(int n, int workers, const std::function<void(int)>& fn) {
  if (n < 0) throw std::invalid_argument("parallel_replicas: n must be >= 0");
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << content;
}

nlohmann::json verdict_json(const TestVerdict& v) {
  return {{"name", v.name},         {"statistic", v.statistic}, {"p_value", v.p_value},
          {"threshold", v.threshold}, {"pass", v.pass},           {"n", v.n}};
}

}  // namespace

std::string write_campaign_output(const ExperimentConfig& cfg, const CampaignResult& result,
                                  bool force) {
  const fs::path dir = cfg.output_dir();
  const std::string digest = cfg.raw.digest();
  const fs::path config_path = dir / "config.json";
  if (fs::exists(config_path) && !force) {
    std::ifstream in(config_path);
    nlohmann::json old;
    in >> old;
    const std::string old_digest = old.value("digest", "");
    if (old_digest == digest)
      throw ConfigError("output dir already holds a completed run of this config (use force)");
    throw ConfigError("output dir holds results for a different config digest " + old_digest +
                      " (use force)");
  }
  fs::create_directories(dir);

  nlohmann::json cfg_doc;
  cfg_doc["digest"] = digest;
  cfg_doc["kind"] = result.kind;
  cfg_doc["canonical"] = cfg.raw.canonical_text();
  write_text_file(config_path, cfg_doc.dump(2) + "\n");

  std::ostringstream csv;
  csv << "replica,stream,status";
  for (const auto& name : result.value_names) csv << ',' << name;
  csv << '\n';
  for (const auto& rec : result.records) {
    csv << rec.replica << ',' << rec.stream << ',' << rec.status;
    for (double v : rec.values) csv << ',' << format_double(v);
    csv << '\n';
  }
  write_text_file(dir / "replicas.csv", csv.str());

  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : result.verdicts) verdicts.push_back(verdict_json(v));
  nlohmann::json aggregates = nlohmann::json::array();
  for (const auto& [name, value] : result.aggregates)
    aggregates.push_back({{"name", name}, {"value", value}});
  nlohmann::json derived = nlohmann::json::array();
  for (const auto& [name, value] : result.derived)
    derived.push_back({{"name", name}, {"value", value}});
  nlohmann::json vdoc;
  vdoc["kind"] = result.kind;
  vdoc["digest"] = digest;
  vdoc["all_pass"] = result.all_pass();
  vdoc["verdicts"] = verdicts;
  vdoc["aggregates"] = aggregates;
  vdoc["derived"] = derived;
  vdoc["notes"] = result.notes;
  write_text_file(dir / "verdicts.json", vdoc.dump(2) + "\n");

  std::ostringstream sum;
  sum << "campaign: " << result.kind << "\nconfig digest: " << digest << "\n";
  int ok = 0, rejected = 0, failed = 0;
  for (const auto& rec : result.records) {
    if (rec.status == "ok")
      ++ok;
    else if (rec.status == "rejected")
      ++rejected;
    else
      ++failed;
  }
  sum << "replicas: " << result.records.size() << " (ok " << ok << ", rejected " << rejected
      << ", failed " << failed << ")\n";
  sum << "aggregates:\n";
  for (const auto& [name, value] : result.aggregates)
    sum << "  " << name << " = " << format_double(value) << "\n";
  if (!result.derived.empty()) {
    sum << "derived:\n";
    for (const auto& [name, value] : result.derived)
      sum << "  " << name << " = " << format_double(value) << "\n";
  }
  sum << "verdicts:\n";
  for (const auto& v : result.verdicts)
    sum << "  [" << (v.pass ? "pass" : "FAIL") << "] " << v.name
        << " statistic=" << format_double(v.statistic) << " p=" << format_double(v.p_value)
        << " threshold=" << format_double(v.threshold) << " n=" << v.n << "\n";
  for (const auto& note : result.notes) sum << "note: " << note << "\n";
  sum << (result.all_pass() ? "RESULT: PASS\n" : "RESULT: FAIL\n");
  write_text_file(dir / "summary.txt", sum.str());

  for (const auto& table : result.tables) {
    std::ostringstream ts;
    for (std::size_t i = 0; i < table.header.size(); ++i)
      ts << (i ? "," : "") << table.header[i];
    ts << '\n';
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) ts << (i ? "," : "") << format_double(row[i]);
      ts << '\n';
    }
    write_text_file(dir / (table.name + ".csv"), ts.str());
  }
  return digest;
}

std::vector<std::pair<std::string, double>> basic_aggregates(const CampaignResult& result) {
  std::vector<std::pair<std::string, double>> out;
  const std::size_t cols = result.value_names.size();
  for (std::size_t c = 0; c < cols; ++c) {
    double sum = 0;
    long n = 0;
    for (const auto& rec : result.records)
      if (rec.status == "ok" && c < rec.values.size()) {
        sum += rec.values[c];
        ++n;
      }
    if (n == 0) continue;
    const double mean = sum / double(n);
    double var = 0;
    for (const auto& rec : result.records)
      if (rec.status == "ok" && c < rec.values.size())
        var += (rec.values[c] - mean) * (rec.values[c] - mean);
    var = n > 1 ? var / double(n - 1) : 0.0;
    out.emplace_back("mean(" + result.value_names[c] + ")", mean);
    out.emplace_back("var(" + result.value_names[c] + ")", var);
  }
  return out;
}

std::vector<std::pair<std::string, double>> recompute_aggregates_from_csv(
    const std::string& csv_path, const std::string& kind) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv " + csv_path);
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) names.push_back(col);
  }
  if (names.size() < 3 || names[0] != "replica" || names[1] != "stream" || names[2] != "status")
    throw std::runtime_error("unexpected csv header in " + csv_path);

  CampaignResult shadow;
  shadow.kind = kind;
  shadow.value_names.assign(names.begin() + 3, names.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    ReplicaRecord rec;
    std::getline(ss, cell, ',');
    rec.replica = std::stoull(cell);
    std::getline(ss, cell, ',');
    rec.stream = std::stoull(cell);
    std::getline(ss, cell, ',');
    rec.status = cell;
    while (std::getline(ss, cell, ',')) rec.values.push_back(std::stod(cell));
    shadow.records.push_back(std::move(rec));
  }
  return basic_aggregates(shadow);
}

}  // namespace shelab
