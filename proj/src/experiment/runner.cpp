#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "orthovae/errors.hpp"
#include "orthovae/experiment.hpp"
#include "orthovae/rng.hpp"
#include "orthovae/text_io.hpp"
#include "orthovae/tolerances.hpp"

namespace orthovae::experiment {

namespace fs = std::filesystem;
using linalg::Matrix;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> all_columns(std::size_t d) {
  std::vector<std::size_t> v(d);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_number(const json& j) { return j.is_number() ? j.get<double>() : kNaN; }

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  return std::to_string(
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());
}

std::string format_beta(double b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", b);
  return buf;
}

std::vector<models::TraceRow> truncate_trace(const std::vector<models::TraceRow>& trace,
                                             std::size_t last_step) {
  std::vector<models::TraceRow> out;
  for (const auto& r : trace) {
    if (r.step <= last_step) out.push_back(r);
  }
  return out;
}

// trace.csv back into rows; only step and delta_kl are needed for metrics
std::vector<models::TraceRow> parse_trace(const std::string& csv) {
  std::vector<models::TraceRow> rows;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = text::split(line, ',');
    if (cells.size() != 7) throw ConfigError("trace.csv: expected 7 columns");
    models::TraceRow r;
    r.step = static_cast<std::size_t>(text::parse_double(cells[0]));
    r.loss.rec_total = text::parse_double(cells[1]);
    r.loss.rec_det = text::parse_double(cells[2]);
    r.loss.rec_stoch = text::parse_double(cells[3]);
    r.loss.kl = text::parse_double(cells[4]);
    r.loss.kl_approx = text::parse_double(cells[5]);
    const double dk = text::parse_double(cells[6]);
    if (std::isfinite(dk)) r.delta_kl = dk;
    rows.push_back(r);
  }
  return rows;
}

json report_json(const metrics::MetricsReport& r) {
  json trace = json::array();
  for (const auto& [step, v] : r.delta_kl_trace) {
    trace.push_back({step, v ? number(*v) : json(nullptr)});
  }
  return {
      {"dto", number(r.dto)},
      {"dto_used", r.dto_used},
      {"dto_skipped", r.dto_skipped},
      {"dto_degenerate", r.dto_degenerate},
      {"disentanglement", number(r.disentanglement)},
      {"polarized_fraction", number(r.polarized_fraction)},
      {"active_set", r.active_set},
      {"delta_kl_trace", trace},
  };
}

json aggregate_json(const Aggregate& a) {
  return {{"mean", number(a.mean)}, {"std", number(a.std)}, {"count", a.count}};
}

Aggregate read_aggregate(const json& j) {
  return {read_number(j.at("mean")), read_number(j.at("std")), j.at("count").get<std::size_t>()};
}

void log_line(const RunOptions& o, std::mutex& m, const std::string& s) {
  if (!o.log) return;
  std::lock_guard lock(m);
  *o.log << s << '\n';
  o.log->flush();
}

// Runs job(i) for i in [0, n) on up to `jobs` threads. The first exception
// is rethrown after every worker has finished.
template <typename Job>
void parallel_for(std::size_t n, std::size_t jobs, Job job) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

fs::path run_dir_for(const ExperimentConfig& c, const RunOptions& o) { return *o.out / c.name; }

void prepare_run_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir / "config.json") && !overwrite) {
    throw ConfigError("run directory " + dir.string() + " exists; pass --overwrite");
  }
  fs::create_directories(dir);
}

void write_summary(const fs::path& dir, const RunSummary& s) {
  text::write_file(dir / "summary.json", summary_json(s));
  text::write_file(dir / "summary.csv", summary_csv(s));
}

}  // namespace

metrics::MetricsReport evaluate_model(const models::Autoencoder& model,
                                      const data::SyntheticDataset& test,
                                      const std::vector<models::TraceRow>& trace,
                                      std::uint64_t seed, std::size_t dto_samples) {
  metrics::MetricsReport r;
  const Matrix mu = model.encode_means(test.inputs);
  r.active_set = model.posterior() == models::PosteriorKind::point
                     ? all_columns(model.latent_dim())
                     : metrics::active_variables(mu, tol::kActiveStd);
  const auto d = metrics::dto(model.decoder(), mu, r.active_set, dto_samples);
  r.dto = d.dto;
  r.dto_used = d.used;
  r.dto_skipped = d.skipped;
  r.dto_degenerate = d.degenerate;
  r.disentanglement = metrics::disentanglement_score(mu, test.factors, test.factor_kinds,
                                                     derive_seed(seed, stream::kMetrics))
                          .score;
  std::vector<std::optional<double>> dk;
  for (const auto& row : trace) {
    dk.push_back(row.delta_kl);
    r.delta_kl_trace.emplace_back(row.step, row.delta_kl);
  }
  r.polarized_fraction =
      dk.empty() ? kNaN : metrics::polarized_fraction(dk, tol::kPolarizedDeltaKl);
  return r;
}

double random_decoder_dto(const ExperimentConfig& c, const data::SyntheticDataset& test,
                          std::uint64_t seed) {
  models::Autoencoder m(model_spec(c, test.inputs.cols()));
  Rng rng(derive_seed(seed, stream::kBaseline));
  m.init(rng);
  const Matrix mu = m.encode_means(test.inputs);
  return metrics::dto(m.decoder(), mu, all_columns(m.latent_dim()), c.dto_samples).dto;
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  double sum = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) {
      sum += v;
      ++a.count;
    }
  }
  if (a.count == 0) return {kNaN, kNaN, 0};
  a.mean = sum / static_cast<double>(a.count);
  double ss = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) ss += (v - a.mean) * (v - a.mean);
  }
  a.std = std::sqrt(ss / static_cast<double>(a.count));
  return a;
}

RunSummary summarize(const ExperimentConfig& c, std::vector<SeedOutcome> seeds) {
  RunSummary s;
  s.config = c;
  std::vector<double> dto, dis, pol, act, rnd;
  for (const auto& o : seeds) {
    dto.push_back(o.report.dto);
    dis.push_back(o.report.disentanglement);
    pol.push_back(o.report.polarized_fraction);
    act.push_back(static_cast<double>(o.report.active_set.size()));
    rnd.push_back(o.random_dto);
  }
  s.seeds = std::move(seeds);
  s.dto = aggregate(dto);
  s.disentanglement = aggregate(dis);
  s.polarized_fraction = aggregate(pol);
  s.active_count = aggregate(act);
  s.random_dto = aggregate(rnd);
  return s;
}

SeedOutcome run_seed(const ExperimentConfig& c, const data::DatasetSplits& splits,
                     std::uint64_t seed, const std::optional<fs::path>& seed_dir) {
  models::Autoencoder model(model_spec(c, splits.train.inputs.cols()));
  Rng init_rng(derive_seed(seed, stream::kInit));
  model.init(init_rng);

  const auto result = models::train(model, splits.train.inputs, splits.eval.inputs,
                                    train_config(c, seed));
  SeedOutcome out;
  out.seed = seed;
  out.epochs = result.epochs_completed;
  out.steps = result.steps;
  out.diverged = result.diverged;
  out.divergence = result.divergence;
  out.report = evaluate_model(model, splits.test, result.trace, seed, c.dto_samples);
  out.random_dto = random_decoder_dto(c, splits.test, seed);

  const std::size_t per_epoch =
      (splits.train.size() + c.batch_size - 1) / std::max<std::size_t>(c.batch_size, 1);
  for (const auto& [epochs, snap] : result.snapshots) {
    out.snapshots.push_back({epochs, evaluate_model(snap, splits.test,
                                                    truncate_trace(result.trace, epochs * per_epoch),
                                                    seed, c.dto_samples)});
  }

  if (seed_dir) {
    fs::create_directories(*seed_dir);
    text::write_file(*seed_dir / "model.ckpt", models::to_model_text(model));
    text::write_file(*seed_dir / "trace.csv", models::trace_csv(result.trace));
    for (const auto& [epochs, snap] : result.snapshots) {
      text::write_file(*seed_dir / ("model_e" + std::to_string(epochs) + ".ckpt"),
                       models::to_model_text(snap));
    }
    const json train_info = {{"seed", seed},
                             {"epochs", out.epochs},
                             {"steps", out.steps},
                             {"diverged", out.diverged},
                             {"divergence", out.divergence}};
    text::write_file(*seed_dir / "train.json", train_info.dump(2) + "\n");
    text::write_file(*seed_dir / "metrics.json", metrics_json(out));
  }
  return out;
}

RunSummary run_experiment(const ExperimentConfig& c, const RunOptions& options) {
  validate(c);
  std::optional<fs::path> dir;
  if (options.out) {
    dir = run_dir_for(c, options);
    prepare_run_dir(*dir, options.overwrite);
    text::write_file(*dir / "config.json", config_to_json(c));
  }
  const auto splits = load_splits(c.dataset);
  std::vector<SeedOutcome> outcomes(c.seeds.size());
  std::mutex log_mutex;
  parallel_for(c.seeds.size(), options.jobs, [&](std::size_t i) {
    const std::uint64_t seed = c.seeds[i];
    std::optional<fs::path> seed_dir;
    if (dir) seed_dir = *dir / std::to_string(seed);
    outcomes[i] = run_seed(c, splits, seed, seed_dir);
    const auto& o = outcomes[i];
    std::ostringstream line;
    line << c.name << " seed " << seed << ": dto " << text::format_double(o.report.dto)
         << " disent " << text::format_double(o.report.disentanglement) << " active "
         << o.report.active_set.size();
    if (o.diverged) line << " (diverged: " << o.divergence << ")";
    log_line(options, log_mutex, line.str());
  });
  auto s = summarize(c, std::move(outcomes));
  if (dir) write_summary(*dir, s);
  return s;
}

RunSummary recompute_metrics(const fs::path& run_dir, const RunOptions& options) {
  if (!fs::exists(run_dir / "config.json")) {
    throw ConfigError("no config.json in " + run_dir.string());
  }
  const auto c = parse_config(text::read_file(run_dir / "config.json"));
  const auto splits = load_splits(c.dataset);

  std::vector<std::uint64_t> seeds;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "model.ckpt")) continue;
    const auto name = entry.path().filename().string();
    if (name.empty() || !std::all_of(name.begin(), name.end(), ::isdigit)) continue;
    seeds.push_back(std::stoull(name));
  }
  if (seeds.empty()) throw ConfigError("no checkpoints under " + run_dir.string());
  std::sort(seeds.begin(), seeds.end());

  std::vector<SeedOutcome> outcomes(seeds.size());
  std::mutex log_mutex;
  parallel_for(seeds.size(), options.jobs, [&](std::size_t i) {
    const fs::path dir = run_dir / std::to_string(seeds[i]);
    SeedOutcome& o = outcomes[i];
    o.seed = seeds[i];
    if (fs::exists(dir / "train.json")) {
      const auto info = json::parse(text::read_file(dir / "train.json"));
      o.epochs = info.value("epochs", std::size_t{0});
      o.steps = info.value("steps", std::size_t{0});
      o.diverged = info.value("diverged", false);
      o.divergence = info.value("divergence", std::string{});
    }
    const auto model = models::from_model_text(text::read_file(dir / "model.ckpt"));
    std::vector<models::TraceRow> trace;
    if (fs::exists(dir / "trace.csv")) trace = parse_trace(text::read_file(dir / "trace.csv"));
    o.report = evaluate_model(model, splits.test, trace, o.seed, c.dto_samples);
    o.random_dto = random_decoder_dto(c, splits.test, o.seed);

    const std::size_t per_epoch = (splits.train.size() + c.batch_size - 1) / c.batch_size;
    for (std::size_t e : c.snapshot_epochs) {
      const fs::path p = dir / ("model_e" + std::to_string(e) + ".ckpt");
      if (!fs::exists(p)) continue;
      const auto snap = models::from_model_text(text::read_file(p));
      o.snapshots.push_back({e, evaluate_model(snap, splits.test, truncate_trace(trace, e * per_epoch),
                                               o.seed, c.dto_samples)});
    }
    text::write_file(dir / "metrics.json", metrics_json(o));
    log_line(options, log_mutex,
             c.name + " seed " + std::to_string(o.seed) + ": dto " +
                 text::format_double(o.report.dto));
  });
  auto s = summarize(c, std::move(outcomes));
  write_summary(run_dir, s);
  return s;
}

std::string metrics_json(const SeedOutcome& s) {
  json j = report_json(s.report);
  j["seed"] = s.seed;
  j["epochs"] = s.epochs;
  j["steps"] = s.steps;
  j["diverged"] = s.diverged;
  j["divergence"] = s.divergence;
  j["random_decoder_dto"] = number(s.random_dto);
  json snaps = json::array();
  for (const auto& snap : s.snapshots) {
    json e = report_json(snap.report);
    e.erase("delta_kl_trace");
    e["epochs"] = snap.epochs;
    snaps.push_back(e);
  }
  j["snapshots"] = snaps;
  j["timestamp"] = timestamp();
  return j.dump(2) + "\n";
}

std::string summary_json(const RunSummary& s) {
  json seeds = json::array();
  for (const auto& o : s.seeds) {
    seeds.push_back({{"seed", o.seed},
                     {"epochs", o.epochs},
                     {"diverged", o.diverged},
                     {"dto", number(o.report.dto)},
                     {"dto_degenerate", o.report.dto_degenerate},
                     {"disentanglement", number(o.report.disentanglement)},
                     {"polarized_fraction", number(o.report.polarized_fraction)},
                     {"active_set", o.report.active_set},
                     {"random_decoder_dto", number(o.random_dto)}});
  }
  const json j = {
      {"name", s.config.name},
      {"loss_convention", "sum over output coordinates, mean over batch"},
      {"config", json::parse(config_to_json(s.config))},
      {"dto", aggregate_json(s.dto)},
      {"disentanglement", aggregate_json(s.disentanglement)},
      {"polarized_fraction", aggregate_json(s.polarized_fraction)},
      {"active_count", aggregate_json(s.active_count)},
      {"random_decoder_dto", aggregate_json(s.random_dto)},
      {"seeds", seeds},
  };
  return j.dump(2) + "\n";
}

std::string summary_csv(const RunSummary& s) {
  std::ostringstream out;
  auto f = text::format_double;
  out << "seed,epochs,dto,disent,polarized_fraction,active_count,random_dto\n";
  for (const auto& o : s.seeds) {
    out << o.seed << ',' << o.epochs << ',' << f(o.report.dto) << ','
        << f(o.report.disentanglement) << ',' << f(o.report.polarized_fraction) << ','
        << o.report.active_set.size() << ',' << f(o.random_dto) << '\n';
  }
  out << "mean,," << f(s.dto.mean) << ',' << f(s.disentanglement.mean) << ','
      << f(s.polarized_fraction.mean) << ',' << f(s.active_count.mean) << ','
      << f(s.random_dto.mean) << '\n';
  out << "std,," << f(s.dto.std) << ',' << f(s.disentanglement.std) << ','
      << f(s.polarized_fraction.std) << ',' << f(s.active_count.std) << ','
      << f(s.random_dto.std) << '\n';
  return out.str();
}

std::vector<SweepPoint> sweep_beta(const ExperimentConfig& c, const RunOptions& options) {
  if (c.beta_sweep.empty()) throw ConfigError("sweep-beta: beta_sweep is empty");
  const std::size_t factors = load_dataset(c.dataset).factors.cols();
  std::vector<SweepPoint> points;
  for (double b : c.beta_sweep) {
    ExperimentConfig cb = c;
    cb.beta = b;
    cb.name = c.name + "_beta" + format_beta(b);
    cb.beta_sweep.clear();
    SweepPoint p;
    p.beta = b;
    p.summary = run_experiment(cb, options);
    p.overpruned = p.summary.active_count.mean < static_cast<double>(factors);
    points.push_back(std::move(p));
  }
  if (!options.out) return points;

  const fs::path dir = *options.out / (c.name + "_sweep");
  fs::create_directories(dir);
  auto f = text::format_double;
  auto table = [&](const char* metric, auto pick) {
    std::ostringstream out;
    out << "# beta " << metric << "_mean " << metric << "_std active_mean overpruned chosen\n";
    out << "# chosen beta " << f(c.beta) << "\n";
    for (const auto& p : points) {
      const Aggregate& a = pick(p.summary);
      out << f(p.beta) << ' ' << f(a.mean) << ' ' << f(a.std) << ' '
          << f(p.summary.active_count.mean) << ' ' << (p.overpruned ? 1 : 0) << ' '
          << (p.beta == c.beta ? 1 : 0) << '\n';
    }
    return out.str();
  };
  text::write_file(dir / "sweep_disent.dat",
                   table("disent", [](const RunSummary& s) -> const Aggregate& {
                     return s.disentanglement;
                   }));
  text::write_file(dir / "sweep_dto.dat", table("dto", [](const RunSummary& s) -> const Aggregate& {
                     return s.dto;
                   }));

  std::ostringstream gp;
  gp << "# gnuplot -p sweep.gp\n"
     << "set logscale x\n"
     << "set xlabel 'beta'\n"
     << "set multiplot layout 2,1\n"
     << "set arrow 1 from " << f(c.beta) << ", graph 0 to " << f(c.beta)
     << ", graph 1 nohead dashtype 2\n"
     << "set ylabel 'disentanglement'\n"
     << "plot 'sweep_disent.dat' using 1:2:3 with yerrorlines title 'disent', \\\n"
     << "     '' using 1:($5 > 0 ? $2 : 1/0) with points pt 7 title 'overpruned'\n"
     << "set ylabel 'DtO'\n"
     << "plot 'sweep_dto.dat' using 1:2:3 with yerrorlines title 'DtO', \\\n"
     << "     '' using 1:($5 > 0 ? $2 : 1/0) with points pt 7 title 'overpruned'\n"
     << "unset multiplot\n";
  text::write_file(dir / "sweep.gp", gp.str());
  return points;
}

std::string report(const fs::path& runs_root) {
  if (!fs::is_directory(runs_root)) throw ConfigError("no runs directory " + runs_root.string());
  std::map<std::string, json> found;
  for (const auto& entry : fs::recursive_directory_iterator(runs_root)) {
    if (entry.is_regular_file() && entry.path().filename() == "summary.json") {
      found[fs::relative(entry.path().parent_path(), runs_root).string()] =
          json::parse(text::read_file(entry.path()));
    }
  }
  std::ostringstream out;
  // beta multiplies a KL that competes with this reduction, so it is part of
  // reading any beta column
  out << "# loss: squared error summed over output coordinates, mean over the batch, + beta * KL\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %-14s %-9s %5s  %-15s %-15s %-15s %-7s %-15s\n", "run",
                "model", "beta", "seeds", "dto", "disent", "polarized", "active", "random dto");
  out << buf;
  auto pm = [](const json& a) {
    const Aggregate g = read_aggregate(a);
    char b[64];
    if (g.count == 0) return std::string("n/a");
    std::snprintf(b, sizeof b, "%.3f +- %.3f", g.mean, g.std);
    return std::string(b);
  };
  for (const auto& [name, j] : found) {
    const auto& cfg = j.at("config");
    std::snprintf(buf, sizeof buf, "%-28s %-14s %-9s %5zu  %-15s %-15s %-15s %-7.2f %-15s\n",
                  name.c_str(), cfg.at("model").get<std::string>().c_str(),
                  format_beta(cfg.at("beta").get<double>()).c_str(), j.at("seeds").size(),
                  pm(j.at("dto")).c_str(), pm(j.at("disentanglement")).c_str(),
                  pm(j.at("polarized_fraction")).c_str(),
                  read_number(j.at("active_count").at("mean")), pm(j.at("random_decoder_dto")).c_str());
    out << buf;
  }
  if (found.empty()) out << "(no runs)\n";
  return out.str();
}

}  // namespace orthovae::experiment
