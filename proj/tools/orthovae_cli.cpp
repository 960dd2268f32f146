#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "orthovae/data.hpp"
#include "orthovae/errors.hpp"
#include "orthovae/experiment.hpp"
#include "orthovae/text_io.hpp"

namespace fs = std::filesystem;
using namespace orthovae;

namespace {

struct Globals {
  std::string config_path;
  std::string dataset = "linear";
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
  std::string out = "runs";
  bool overwrite = false;
};

experiment::ExperimentConfig load_config(const Globals& g) {
  experiment::ExperimentConfig c =
      g.config_path.empty()
          ? experiment::default_config(data::parse_dataset_kind(g.dataset))
          : experiment::parse_config(text::read_file(g.config_path));
  if (!g.seeds.empty()) c.seeds = g.seeds;
  experiment::validate(c);
  return c;
}

experiment::RunOptions run_options(const Globals& g) {
  experiment::RunOptions o;
  o.jobs = g.jobs;
  o.out = fs::path(g.out);
  o.overwrite = g.overwrite;
  o.log = &std::cerr;
  return o;
}

void print_summary(const experiment::RunSummary& s) {
  std::printf("%s: dto %.4f +- %.4f, disent %.4f +- %.4f, polarized %.4f, active %.2f, "
              "random decoder dto %.4f +- %.4f (%zu seeds)\n",
              s.config.name.c_str(), s.dto.mean, s.dto.std, s.disentanglement.mean,
              s.disentanglement.std, s.polarized_fraction.mean, s.active_count.mean,
              s.random_dto.mean, s.random_dto.std, s.seeds.size());
}

int cmd_generate(const Globals& g, const std::vector<double>& ratios) {
  const auto c = load_config(g);
  std::vector<double> list = ratios;
  if (list.empty()) list.push_back(c.dataset.ratio);
  for (double r : list) {
    data::GeneratorSpec spec{c.dataset.kind, c.dataset.seed, r, c.dataset.samples};
    std::string stem = std::string(data::dataset_kind_name(spec.kind)) + "_seed" +
                       std::to_string(spec.seed);
    if (spec.kind == data::DatasetKind::linear) stem += "_r" + text::format_double(r);
    const fs::path path = fs::path(g.out) / (stem + ".csv");
    if (fs::exists(path) && !g.overwrite) {
      throw ConfigError(path.string() + " exists; pass --overwrite");
    }
    fs::create_directories(path.parent_path());
    data::write_dataset(path, data::generate(spec));
    std::printf("wrote %s (%zu rows)\n", path.string().c_str(), spec.samples);
    if (spec.kind == data::DatasetKind::nonlinear) break;  // ratio does not apply
  }
  return 0;
}

int cmd_theory_check(std::size_t problems, std::uint64_t seed) {
  bool ok = true;
  for (const auto& line : experiment::theory_check(problems, seed)) {
    std::printf("%s  %s: %s\n", line.pass ? "PASS" : "FAIL", line.name.c_str(),
                line.detail.c_str());
    ok = ok && line.pass;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orthovae: VAE decoder orthogonality experiments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "experiment config (JSON)");
  app.add_option("--dataset", g.dataset, "default config to use without --config")
      ->check(CLI::IsMember({"linear", "nonlinear"}));
  app.add_option("--seed-list", g.seeds, "override the config's seeds")->delimiter(',');
  app.add_option("--jobs", g.jobs, "seeds trained concurrently")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_flag("--overwrite", g.overwrite, "replace existing outputs");

  std::vector<double> ratios;
  auto* gen = app.add_subcommand("generate", "write dataset CSV and sidecar");
  gen->add_option("--ratios", ratios, "stretch ratios, one dataset each")->delimiter(',');

  auto* train = app.add_subcommand("train", "train every seed and write runs/<name>/");

  std::string run_dir;
  auto* met = app.add_subcommand("metrics", "recompute metrics for a finished run");
  met->add_option("--run", run_dir, "run directory (default: <out>/<config name>)");

  std::vector<double> betas;
  auto* sweep = app.add_subcommand("sweep-beta", "one run per beta plus plot data");
  sweep->add_option("--betas", betas, "beta values (default: config beta_sweep)")
      ->delimiter(',');

  std::size_t problems = 20;
  std::uint64_t theory_seed = 1;
  auto* theory = app.add_subcommand("theory-check", "worked examples and bound certificates");
  theory->add_option("--problems", problems, "random isolated problems")->capture_default_str();
  theory->add_option("--seed", theory_seed, "seed for the random problems")
      ->capture_default_str();

  auto* rep = app.add_subcommand("report", "table over every summary under --out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_generate(g, ratios);
    if (*train) {
      print_summary(experiment::run_experiment(load_config(g), run_options(g)));
      return 0;
    }
    if (*met) {
      const fs::path dir =
          run_dir.empty() ? fs::path(g.out) / load_config(g).name : fs::path(run_dir);
      print_summary(experiment::recompute_metrics(dir, run_options(g)));
      return 0;
    }
    if (*sweep) {
      auto c = load_config(g);
      if (!betas.empty()) c.beta_sweep = betas;
      for (const auto& p : experiment::sweep_beta(c, run_options(g))) {
        print_summary(p.summary);
        if (p.overpruned) std::printf("  overpruned: active count below factor count\n");
      }
      return 0;
    }
    if (*theory) return cmd_theory_check(problems, theory_seed);
    if (*rep) {
      std::cout << experiment::report(g.out);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
