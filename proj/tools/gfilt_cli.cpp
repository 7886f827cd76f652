#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>
#include <tbb/global_control.h>

#include "gfilt/graph/io.hpp"
#include "gfilt/harness/config.hpp"
#include "gfilt/harness/runner.hpp"

namespace {

struct CommonOptions {
  std::string config, preset, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs, steps;
  bool print_config = false;
};

void add_common(CLI::App* app, CommonOptions& o)
{
  app->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--preset", o.preset, "named experiment setup");
  app->add_option("--seed", o.seed, "base seed");
  app->add_option("--runs", o.runs, "number of runs");
  app->add_option("--steps", o.steps, "time steps per run");
  app->add_option("--out", o.out, "output directory");
  app->add_flag("--print-config", o.print_config, "print the resolved config and exit");
}

gfilt::ExperimentConfig resolve(const CommonOptions& o)
{
  gfilt::ExperimentConfig c;
  if (!o.config.empty()) {
    // A --preset supplies defaults that the file overrides.
    auto j = gfilt::read_config_json(o.config);
    if (!o.preset.empty() && !j.contains("preset")) j["preset"] = o.preset;
    c = gfilt::config_from_json(j);
  } else if (!o.preset.empty()) {
    c = gfilt::experiment_preset(o.preset);
  } else {
    throw gfilt::ConfigError("give --config or --preset (presets: seirs-covid, seirs-flu, lorenz-baseline, "
                             "lorenz-adaptive, sis-karate, seirs-variational, subpop-fcvf)");
  }
  if (o.seed) c.seed = *o.seed;
  if (o.runs) c.runs = *o.runs;
  if (o.steps) c.steps = *o.steps;
  if (!o.out.empty()) c.output = o.out;
  c.validate();
  return c;
}

std::filesystem::path output_dir(const gfilt::ExperimentConfig& c)
{
  return c.output.empty() ? std::filesystem::path("out") / c.name : std::filesystem::path(c.output);
}

int cmd_simulate(const gfilt::ExperimentConfig& c)
{
  if (c.model.kind == gfilt::ModelKind::Lorenz) {
    gfilt::LorenzSimulator sim(gfilt::detail::lorenz_params_from(c.model.lorenz, c.model.params), gfilt::lorenz_reference_state,
                               c.seed);
    const auto dir = output_dir(c);
    std::filesystem::create_directories(dir);
    std::ofstream f(dir / "truth.csv");
    f << "step,y1,y2,y3,o1,o3\n";
    for (std::size_t n = 1; n <= c.steps; ++n) {
      sim.step();
      const auto& y = sim.state();
      f << n << ',' << gfilt::format_number(y[0]) << ',' << gfilt::format_number(y[1]) << ',' << gfilt::format_number(y[2]);
      if (sim.has_observation())
        f << ',' << gfilt::format_number(sim.observation()[0]) << ',' << gfilt::format_number(sim.observation()[1]);
      else
        f << ",,";
      f << '\n';
    }
    std::cout << "wrote " << (dir / "truth.csv").string() << '\n';
    return 0;
  }
  auto net = gfilt::build_network(c.network);
  const auto dir = output_dir(c);
  std::filesystem::create_directories(dir);
  std::ofstream f(dir / "truth.csv");
  const bool simplex = c.filter.algorithm == gfilt::FilterKind::FactoredVariational || c.filter.algorithm == gfilt::FilterKind::Fcvf;
  if (simplex) {
    gfilt::NodeId zero = 0;
    auto sim = gfilt::detail::simplex_simulator(c, net, c.seed, &zero);
    f << "step,pop_S,pop_E,pop_I,pop_R,observed\n";
    for (std::size_t n = 1; n <= c.steps; ++n) {
      sim.step();
      const auto pop = gfilt::population_properties(std::span<const gfilt::Simplex3>(sim.state()));
      std::size_t observed = 0;
      for (const auto& o : sim.simplex_observation()) observed += o.has_value();
      for (const auto& o : sim.counts_observation()) observed += o.has_value();
      f << n;
      for (double v : pop) f << ',' << gfilt::format_number(v);
      f << ',' << observed << '\n';
    }
    std::cout << "subpopulation zero " << zero << ", wrote " << (dir / "truth.csv").string() << '\n';
    return 0;
  }
  gfilt::NodeId zero = 0;
  auto sim = gfilt::detail::compartment_simulator(c, net, c.seed, &zero);
  f << "step,pop_S,pop_E,pop_I,pop_R,positives,negatives\n";
  for (std::size_t n = 1; n <= c.steps; ++n) {
    sim.step();
    const auto pop = gfilt::population_properties(std::span<const gfilt::Compartment>(sim.state()));
    std::size_t pos = 0, neg = 0;
    for (auto o : sim.observation()) {
      pos += o == gfilt::TestResult::Positive;
      neg += o == gfilt::TestResult::Negative;
    }
    f << n;
    for (double v : pop) f << ',' << gfilt::format_number(v);
    f << ',' << pos << ',' << neg << '\n';
  }
  std::cout << "patient zero " << zero << ", wrote " << (dir / "truth.csv").string() << '\n';
  return 0;
}

int cmd_filter(const gfilt::ExperimentConfig& c)
{
  auto net = gfilt::build_network(c.network);
  const auto r = gfilt::run_single(c, net, c.seed);
  const auto dir = output_dir(c);
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "run.csv");
    gfilt::write_csv(f, r);
  }
  {
    std::ofstream f(dir / "run_timing.csv");
    gfilt::write_timing_csv(f, r);
  }
  if (r.inconclusive) std::cout << "filter never started (threshold not crossed)\n";
  std::cout << "final state error " << gfilt::format_number(r.state_error.back()) << ", wrote " << (dir / "run.csv").string()
            << '\n';
  return 0;
}

int cmd_experiment(const gfilt::ExperimentConfig& c)
{
  const auto e = gfilt::run_experiment(c);
  const auto dir = output_dir(c);
  gfilt::write_experiment(dir, e);
  std::cout << c.name << ": " << e.runs.size() << " runs kept from " << e.attempts << " attempts"
            << (e.partial ? " (partial: attempt budget exhausted)" : "") << ", wrote " << dir.string() << '\n';
  return e.partial ? 3 : 0;
}

int cmd_validate_graph(const std::string& path)
{
  const auto loaded = gfilt::load_edge_list(std::filesystem::path(path));
  const auto s = gfilt::degree_stats(loaded.net);
  std::printf("nodes %zu\nedges %zu\nself_loops_dropped %llu\nduplicates_merged %llu\n", s.nodes, s.edges,
              static_cast<unsigned long long>(loaded.net.self_loops_dropped()),
              static_cast<unsigned long long>(loaded.net.duplicates_merged()));
  std::printf("degree min %zu max %zu mean %.4f\nisolated %zu\n", s.min_degree, s.max_degree, s.mean_degree, s.isolated);
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Filtering for epidemic processes on graphs and the stochastic Lorenz system"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores)");
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "spdlog level");

  CommonOptions sim_o, filt_o, exp_o;
  auto* sim = app.add_subcommand("simulate", "write a ground-truth trajectory");
  add_common(sim, sim_o);
  auto* filt = app.add_subcommand("filter", "run one simulation and filter in lockstep");
  add_common(filt, filt_o);
  auto* exp = app.add_subcommand("experiment", "run an experiment with the die-out filter and write CSV");
  add_common(exp, exp_o);
  auto* val = app.add_subcommand("validate-graph", "load an edge list and report its statistics");
  std::string graph;
  val->add_option("graph", graph, "edge-list file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));
  std::optional<tbb::global_control> gc;
  if (threads > 0) gc.emplace(tbb::global_control::max_allowed_parallelism, threads);

  try {
    if (val->parsed()) return cmd_validate_graph(graph);
    const auto& o = sim->parsed() ? sim_o : filt->parsed() ? filt_o : exp_o;
    const auto c = resolve(o);
    if (o.print_config) {
      std::cout << gfilt::config_to_json(c).dump(2) << '\n';
      return 0;
    }
    if (sim->parsed()) return cmd_simulate(c);
    if (filt->parsed()) return cmd_filter(c);
    return cmd_experiment(c);
  } catch (const gfilt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
