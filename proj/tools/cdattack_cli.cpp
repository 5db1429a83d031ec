#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "cdattack/experiment.hpp"
#include "cdattack/io.hpp"

using namespace cdattack;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> delta;
  std::vector<std::size_t> deltas;
  std::optional<Index> k;
  std::string mode;
  std::string method;
  std::string out;
  std::string graph;
  std::string features;
  std::string edits;
};

RunConfig resolve(const Options& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  if (o.seed) c.seeds = {*o.seed};
  if (o.delta) c.deltas = {*o.delta};
  if (!o.deltas.empty()) c.deltas = o.deltas;
  if (o.k) c.attack.detector.communities = *o.k;
  if (o.mode == "local") c.attack.detector.encoder = EncoderMode::local;
  if (o.mode == "global") c.attack.detector.encoder = EncoderMode::global;
  if (!o.method.empty()) c.methods = {canonical_method(o.method)};
  if (!o.graph.empty()) {
    // A file graph has no planted blocks.
    c.graph_path = o.graph;
    c.target_partition = TargetPartition::spectral;
  }
  if (!o.features.empty()) c.features_path = o.features;
  if (!o.out.empty()) c.out_dir = o.out;
  validate(c);
  return c;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  f << j.dump(2) << '\n';
}

int report_exit(const MethodReport& r) {
  if (!r.ok) std::cerr << r.method << " failed: " << r.error << '\n';
  for (const std::string& w : r.warnings) std::cerr << "warning: " << w << '\n';
  return r.ok ? 0 : 1;
}

int cmd_generate(const Options& o) {
  RunConfig c = resolve(o);
  SbmConfig sbm = c.sbm;
  if (o.seed) sbm.seed += *o.seed;
  const Benchmark b = sbm_generate(sbm);
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  io::save_graph(b.graph, (dir / "graph.edges").string(), (dir / "features.csv").string());
  io::save_labels(b.blocks, (dir / "blocks.csv").string());
  for (const std::string& w : b.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "wrote " << b.graph.num_nodes() << " nodes, " << b.graph.num_edges() << " edges to " << dir << '\n';
  return 0;
}

int cmd_detect(const Options& o) {
  RunConfig c = resolve(o);
  if (c.graph_path.empty()) throw ConfigError("detect needs --graph");
  const Graph g = io::load_graph(c.graph_path, c.features_path.empty() ? std::nullopt
                                                                      : std::optional<std::string>(c.features_path));
  DetectorConfig d = c.attack.detector;
  d.seed = derive_seed(c.seeds.front(), 53);
  TrainedDetector t = train_detector(std::span<const Graph>(&g, 1), d);
  const std::string out = o.out.empty() ? "labels.csv" : o.out;
  io::save_labels(t.assignments.front().hard, out);
  std::cout << "trained " << t.stats.epochs << " epochs, loss " << t.stats.best_loss << ", labels in " << out << '\n';
  return 0;
}

// attack and baseline: generate edits for one seed and Δ, then score them.
int cmd_edit(const Options& o, const std::string& method) {
  RunConfig c = resolve(o);
  c.out_dir.clear();
  const std::uint64_t seed = c.seeds.front();
  const std::size_t delta = c.deltas.front();
  const Scenario s = prepare_scenario(c, seed);
  const MethodReport r = run_method(c, s, method, delta);
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  const std::string stem = "d" + std::to_string(delta) + "_s" + std::to_string(seed);
  if (r.ok) io::save_edits(r.edits, (dir / ("edits_" + stem + ".txt")).string());
  write_json(dir / ("report_" + stem + ".json"), report_json(c, r));
  return report_exit(r);
}

int cmd_evaluate(const Options& o) {
  RunConfig c = resolve(o);
  if (o.edits.empty()) throw ConfigError("evaluate needs --edits");
  const std::uint64_t seed = c.seeds.front();
  const std::size_t delta = c.deltas.front();
  const Scenario s = prepare_scenario(c, seed);
  const EditSet edits = io::load_edits(o.edits);
  validate_edits(s.graph, edits);
  const MethodReport r = evaluate_edits(c, s, o.method.empty() ? "CD-ATTACK" : o.method, delta, edits);
  const nlohmann::json j = report_json(c, r);
  if (o.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(o.out, j);
  }
  return report_exit(r);
}

int cmd_run(const Options& o, bool per_delta) {
  RunConfig c = resolve(o);
  if (c.out_dir.empty()) c.out_dir = "results";
  const ExperimentResult r = run_experiment(c);
  if (per_delta) {
    std::istringstream lines(r.summary_csv);
    std::string header;
    std::getline(lines, header);
    std::map<std::string, std::string> by_delta;
    for (std::string line; std::getline(lines, line);) {
      const auto a = line.find(',');
      const auto b = line.find(',', a + 1);
      by_delta[line.substr(a + 1, b - a - 1)] += line + '\n';
    }
    for (const auto& [delta, rows] : by_delta) {
      std::ofstream f(fs::path(c.out_dir) / ("summary_d" + delta + ".csv"));
      f << header << '\n' << rows;
    }
  }
  std::cout << r.summary_csv;
  int failed = 0;
  for (const MethodReport& run : r.runs) {
    if (!run.ok) {
      ++failed;
      std::cerr << run.method << " delta=" << run.delta << " seed=" << run.seed << " failed: " << run.error << '\n';
    }
  }
  if (failed > 0) std::cerr << failed << " of " << r.runs.size() << " runs failed\n";
  return r.all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Community-detection attack experiments"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Single run seed, overriding the config");
    sub->add_option("--k", o.k, "Number of communities")->check(CLI::PositiveNumber);
    sub->add_option("--mode", o.mode, "Detector encoder")->check(CLI::IsMember({"local", "global"}));
    sub->add_option("--out", o.out, "Output file or directory");
    sub->add_option("--graph", o.graph, "Edge file instead of a generated SBM")->check(CLI::ExistingFile);
    sub->add_option("--features", o.features, "Feature CSV for --graph")->check(CLI::ExistingFile);
  };

  auto* generate = app.add_subcommand("generate", "Write an SBM benchmark graph");
  common(generate);
  auto* detect = app.add_subcommand("detect", "Train the surrogate detector and write hard labels");
  common(detect);
  auto* attack = app.add_subcommand("attack", "Run CD-ATTACK for one seed and budget");
  common(attack);
  attack->add_option("--delta", o.delta, "Edit budget");
  auto* baseline = app.add_subcommand("baseline", "Run a heuristic baseline for one seed and budget");
  common(baseline);
  baseline->add_option("--delta", o.delta, "Edit budget");
  baseline->add_option("--method,--kind", o.method, "DICE, MBA or RTA")->required();
  auto* evaluate = app.add_subcommand("evaluate", "Score an edit file against a retrained surrogate");
  common(evaluate);
  evaluate->add_option("--delta", o.delta, "Edit budget the edits were generated under");
  evaluate->add_option("--edits", o.edits, "Edit file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--method", o.method, "Method label for the report");
  auto* sweep = app.add_subcommand("sweep", "Run every method over a range of budgets");
  common(sweep);
  sweep->add_option("--deltas", o.deltas, "Budgets to sweep")->delimiter(',');
  sweep->add_option("--method", o.method, "Restrict to one method");
  auto* run = app.add_subcommand("run", "Run the configured experiment");
  common(run);
  run->add_option("--delta", o.delta, "Edit budget");
  run->add_option("--method", o.method, "Restrict to one method");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return cmd_generate(o);
    if (*detect) return cmd_detect(o);
    if (*attack) return cmd_edit(o, "CD-ATTACK");
    if (*baseline) {
      if (canonical_method(o.method) == "CD-ATTACK") throw ConfigError("use the attack subcommand for CD-ATTACK");
      return cmd_edit(o, o.method);
    }
    if (*evaluate) return cmd_evaluate(o);
    if (*sweep) return cmd_run(o, true);
    if (*run) return cmd_run(o, false);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
