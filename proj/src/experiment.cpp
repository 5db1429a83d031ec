#include "cdattack/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "cdattack/baselines.hpp"
#include "cdattack/io.hpp"
#include "cdattack/perturb.hpp"

namespace cdattack {

using nlohmann::json;

namespace {

const char* to_string(EncoderMode m) { return m == EncoderMode::local ? "local" : "global"; }
const char* to_string(Normalization n) { return n == Normalization::with_self_loop ? "with_self_loop" : "decoupled"; }
const char* to_string(TargetPartition p) { return p == TargetPartition::planted ? "planted" : "spectral"; }

template <typename Enum>
Enum parse_enum(const json& j, const std::string& key, std::initializer_list<std::pair<const char*, Enum>> options) {
  const std::string s = j.get<std::string>();
  for (const auto& [name, value] : options) {
    if (s == name) return value;
  }
  throw ConfigError("unknown value '" + s + "' for '" + key + "'");
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void adam_to_json(json& j, const ad::AdamConfig& a) {
  j["learning_rate"] = a.learning_rate;
  j["lr_decay"] = a.decay;
}

void adam_from_json(const json& j, ad::AdamConfig& a) {
  read(j, "learning_rate", a.learning_rate);
  read(j, "lr_decay", a.decay);
}

json detector_json(const DetectorConfig& d) {
  json j{{"communities", d.communities}, {"hidden", d.hidden},          {"embedding", d.embedding},
         {"assign_hidden", d.assign_hidden}, {"gamma", d.gamma},        {"dropout", d.dropout},
         {"encoder", to_string(d.encoder)},  {"normalization", to_string(d.normalization)},
         {"ppr_alpha", d.ppr_alpha},         {"init_gain", d.init_gain}, {"max_epochs", d.max_epochs},
         {"patience", d.patience}};
  adam_to_json(j, d.adam);
  return j;
}

void detector_from_json(const json& j, DetectorConfig& d) {
  reject_unknown(j, "detector",
                 {"communities", "hidden", "embedding", "assign_hidden", "gamma", "dropout", "encoder",
                  "normalization", "ppr_alpha", "init_gain", "max_epochs", "patience", "learning_rate", "lr_decay"});
  read(j, "communities", d.communities);
  read(j, "hidden", d.hidden);
  read(j, "embedding", d.embedding);
  read(j, "assign_hidden", d.assign_hidden);
  read(j, "gamma", d.gamma);
  read(j, "dropout", d.dropout);
  if (j.contains("encoder")) {
    d.encoder = parse_enum(j["encoder"], "encoder", {std::pair{"local", EncoderMode::local},
                                                     std::pair{"global", EncoderMode::global}});
  }
  if (j.contains("normalization")) {
    d.normalization = parse_enum(j["normalization"], "normalization",
                                 {std::pair{"with_self_loop", Normalization::with_self_loop},
                                  std::pair{"decoupled", Normalization::decoupled}});
  }
  read(j, "ppr_alpha", d.ppr_alpha);
  read(j, "init_gain", d.init_gain);
  read(j, "max_epochs", d.max_epochs);
  read(j, "patience", d.patience);
  adam_from_json(j, d.adam);
}

json attack_json(const AttackConfig& a) {
  json j{{"mode", to_string(a.mode)},
         {"mode_threshold", a.mode_threshold},
         {"encoder_hidden", a.encoder_hidden},
         {"latent", a.latent},
         {"decoder_hidden", a.decoder_hidden},
         {"lambda_hide", a.lambda_hide},
         {"lambda_perturb", a.lambda_perturb},
         {"reward_baseline", a.reward_baseline},
         {"baseline_decay", a.baseline_decay},
         {"normalize_log_prob", a.normalize_log_prob},
         {"iterations", a.iterations},
         {"detector_epochs", a.detector_epochs},
         {"random_pool_factor", a.random_pool_factor}};
  adam_to_json(j, a.adam);
  return j;
}

void attack_from_json(const json& j, AttackConfig& a) {
  reject_unknown(j, "attack",
                 {"mode", "mode_threshold", "encoder_hidden", "latent", "decoder_hidden", "lambda_hide",
                  "lambda_perturb", "reward_baseline", "baseline_decay", "normalize_log_prob", "iterations",
                  "detector_epochs", "random_pool_factor", "learning_rate", "lr_decay"});
  if (j.contains("mode")) {
    a.mode = parse_enum(j["mode"], "mode",
                        {std::pair{"auto", AttackMode::automatic}, std::pair{"delete-only", AttackMode::delete_only},
                         std::pair{"delete+insert", AttackMode::delete_insert}});
  }
  read(j, "mode_threshold", a.mode_threshold);
  read(j, "encoder_hidden", a.encoder_hidden);
  read(j, "latent", a.latent);
  read(j, "decoder_hidden", a.decoder_hidden);
  read(j, "lambda_hide", a.lambda_hide);
  read(j, "lambda_perturb", a.lambda_perturb);
  read(j, "reward_baseline", a.reward_baseline);
  read(j, "baseline_decay", a.baseline_decay);
  read(j, "normalize_log_prob", a.normalize_log_prob);
  read(j, "iterations", a.iterations);
  read(j, "detector_epochs", a.detector_epochs);
  read(j, "random_pool_factor", a.random_pool_factor);
  adam_from_json(j, a.adam);
}

json edges_json(const std::vector<Edge>& edges) {
  json out = json::array();
  for (const Edge& e : edges) out.push_back({e.u, e.v});
  return out;
}

json score_json(const HidingScore& s) { return {{"m1", s.m1}, {"m2", s.m2}, {"tally", s.tally}}; }

std::string format_number(double x) {
  if (!std::isfinite(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8f", x);
  return buf;
}

std::string file_stem(const std::string& method) {
  std::string s;
  for (char c : method) {
    if (std::isalnum(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s;
}

DetectorConfig victim_config(const RunConfig& config, std::uint64_t seed) {
  DetectorConfig d = config.attack.detector;
  d.seed = derive_seed(seed, 53);
  return d;
}

Detector train_on(const Graph& g, const DetectorConfig& cfg) {
  return std::move(train_detector(std::span<const Graph>(&g, 1), cfg).detector);
}

}  // namespace

void to_json(json& j, const RunConfig& c) {
  j = json{{"graph_path", c.graph_path},
           {"features_path", c.features_path},
           {"sbm",
            {{"blocks", c.sbm.blocks},
             {"per_block", c.sbm.per_block},
             {"p_in", c.sbm.p_in},
             {"p_out", c.sbm.p_out},
             {"feature_dim", c.sbm.feature_dim},
             {"feature_noise", c.sbm.feature_noise},
             {"seed", c.sbm.seed}}},
           {"sbm_per_seed", c.sbm_per_seed},
           {"deltas", c.deltas},
           {"seeds", c.seeds},
           {"methods", c.methods},
           {"target_partition", to_string(c.target_partition)},
           {"targets_top", c.targets_top},
           {"targets_random", c.targets_random},
           {"target_community", c.target_community ? json(*c.target_community) : json(nullptr)},
           {"dice_delete_ratio", c.dice_delete_ratio},
           {"attack", attack_json(c.attack)},
           {"detector", detector_json(c.attack.detector)},
           {"out_dir", c.out_dir},
           {"workers", c.workers}};
}

void from_json(const json& j, RunConfig& c) {
  reject_unknown(j, "config",
                 {"graph_path", "features_path", "sbm", "sbm_per_seed", "deltas", "seeds", "methods",
                  "target_partition", "targets_top", "targets_random", "target_community", "dice_delete_ratio",
                  "attack", "detector", "out_dir", "workers"});
  read(j, "graph_path", c.graph_path);
  read(j, "features_path", c.features_path);
  if (j.contains("sbm")) {
    const json& s = j["sbm"];
    reject_unknown(s, "sbm", {"blocks", "per_block", "p_in", "p_out", "feature_dim", "feature_noise", "seed"});
    read(s, "blocks", c.sbm.blocks);
    read(s, "per_block", c.sbm.per_block);
    read(s, "p_in", c.sbm.p_in);
    read(s, "p_out", c.sbm.p_out);
    read(s, "feature_dim", c.sbm.feature_dim);
    read(s, "feature_noise", c.sbm.feature_noise);
    read(s, "seed", c.sbm.seed);
  }
  read(j, "sbm_per_seed", c.sbm_per_seed);
  read(j, "deltas", c.deltas);
  read(j, "seeds", c.seeds);
  read(j, "methods", c.methods);
  if (j.contains("target_partition")) {
    c.target_partition = parse_enum(j["target_partition"], "target_partition",
                                    {std::pair{"planted", TargetPartition::planted},
                                     std::pair{"spectral", TargetPartition::spectral}});
  }
  read(j, "targets_top", c.targets_top);
  read(j, "targets_random", c.targets_random);
  if (j.contains("target_community")) {
    if (j["target_community"].is_null()) {
      c.target_community.reset();
    } else {
      int community = 0;
      read(j, "target_community", community);
      c.target_community = community;
    }
  }
  read(j, "dice_delete_ratio", c.dice_delete_ratio);
  if (j.contains("attack")) attack_from_json(j["attack"], c.attack);
  if (j.contains("detector")) detector_from_json(j["detector"], c.attack.detector);
  read(j, "out_dir", c.out_dir);
  read(j, "workers", c.workers);
}

void validate(const RunConfig& c) {
  if (c.attack.detector.communities < 2) throw ConfigError("K must be at least 2");
  if (!(c.attack.lambda_hide < 0.0)) throw ConfigError("lambda_hide must be negative");
  if (c.seeds.empty()) throw ConfigError("at least one seed is required");
  if (c.deltas.empty()) throw ConfigError("at least one budget is required");
  if (c.methods.empty()) throw ConfigError("at least one method is required");
  for (const std::string& m : c.methods) canonical_method(m);
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (c.targets_top < 0 || c.targets_random < 0 || c.targets_top + c.targets_random < 1) {
    throw ConfigError("target selection needs a positive count");
  }
  if (c.dice_delete_ratio < 0.0 || c.dice_delete_ratio > 1.0) throw ConfigError("dice_delete_ratio must lie in [0, 1]");
  if (!c.graph_path.empty()) {
    if (!std::filesystem::exists(c.graph_path)) throw ConfigError("graph file '" + c.graph_path + "' does not exist");
    if (!c.features_path.empty() && !std::filesystem::exists(c.features_path)) {
      throw ConfigError("feature file '" + c.features_path + "' does not exist");
    }
    if (c.target_partition == TargetPartition::planted) {
      throw ConfigError("planted target partition needs a generated SBM");
    }
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  RunConfig c = j.get<RunConfig>();
  validate(c);
  return c;
}

std::string canonical_method(const std::string& name) {
  std::string s = file_stem(name);
  if (s == "cdattack") return "CD-ATTACK";
  if (s == "dice") return "DICE";
  if (s == "mba") return "MBA";
  if (s == "rta") return "RTA";
  throw ConfigError("unknown method '" + name + "'");
}

Scenario prepare_scenario(const RunConfig& config, std::uint64_t seed) {
  Scenario s;
  s.seed = seed;
  const Index k = config.attack.detector.communities;
  std::vector<int> planted;
  if (config.graph_path.empty()) {
    SbmConfig sbm = config.sbm;
    if (config.sbm_per_seed) sbm.seed += seed;
    Benchmark b = sbm_generate(sbm);
    s.graph = std::move(b.graph);
    planted = std::move(b.blocks);
    s.warnings = std::move(b.warnings);
  } else {
    s.graph = io::load_graph(config.graph_path, config.features_path.empty()
                                                    ? std::nullopt
                                                    : std::optional<std::string>(config.features_path));
  }
  s.partition = config.target_partition == TargetPartition::planted && !planted.empty()
                    ? planted
                    : spectral_partition(s.graph, k, derive_seed(seed, 51));
  TargetSelection sel = select_targets(s.graph, s.partition, config.targets_top, config.targets_random,
                                       derive_seed(seed, 52), config.target_community);
  s.targets = std::move(sel.targets);
  s.warnings.insert(s.warnings.end(), sel.warnings.begin(), sel.warnings.end());

  s.victim = train_on(s.graph, victim_config(config, seed));
  s.clean = s.victim->detect(make_context(s.graph, s.victim->config()));

  DetectorConfig global = victim_config(config, seed);
  global.encoder = EncoderMode::global;
  global.seed = derive_seed(seed, 54);
  s.global_encoder = train_on(s.graph, global);
  return s;
}

GeneratedEdits generate_edits(const RunConfig& config, const Scenario& scenario, const std::string& method,
                              std::size_t delta) {
  const std::string name = canonical_method(method);
  GeneratedEdits out;
  if (delta == 0) return out;
  const std::uint64_t seed = scenario.seed;
  if (name == "CD-ATTACK") {
    AttackConfig cfg = config.attack;
    cfg.budget = delta;
    cfg.seed = derive_seed(seed, 56);
    cfg.detector.seed = derive_seed(seed, 55);
    const Detector attacker = train_on(scenario.graph, cfg.detector);
    out.attack = train_attack(scenario.graph, scenario.targets, cfg, attacker);
    out.edits = out.attack->edits;
    return out;
  }
  BaselineResult r;
  if (name == "DICE") {
    r = dice(scenario.graph, scenario.targets, delta, derive_seed(seed, 57), config.dice_delete_ratio);
  } else if (name == "MBA") {
    r = mba(scenario.graph, scenario.targets, scenario.partition, delta, derive_seed(seed, 58));
  } else {
    r = rta(scenario.graph, scenario.targets, delta, derive_seed(seed, 59));
  }
  out.edits = std::move(r.edits);
  out.warnings = std::move(r.warnings);
  return out;
}

MethodReport evaluate_edits(const RunConfig& config, const Scenario& scenario, const std::string& method,
                            std::size_t delta, const EditSet& edits) {
  MethodReport r;
  r.method = canonical_method(method);
  r.delta = delta;
  r.seed = scenario.seed;
  r.edits = edits;
  const int k = static_cast<int>(config.attack.detector.communities);

  const Graph attacked = apply_edits(scenario.graph, edits);
  r.clean = hiding_score(scenario.clean.hard, scenario.targets, k);
  const Detector victim_hat = train_on(attacked, victim_config(config, scenario.seed));
  Detector scorer = victim_hat;
  const Assignment hat = scorer.detect(make_context(attacked, scorer.config()));
  r.attacked = hiding_score(hat.hard, scenario.targets, k);
  if (scenario.targets.size() >= 2) {
    r.hide_clean = hide_loss(scenario.clean.soft, scenario.targets);
    r.hide = hide_loss(hat.soft, scenario.targets);
  }
  r.transfer = transfer_eval(attacked, scenario.targets, k, derive_seed(scenario.seed, 60));

  Detector local = *scenario.victim;
  Detector global = *scenario.global_encoder;
  r.perturb.budget = delta;
  r.perturb.edits_used = budget_used(scenario.graph, attacked);
  r.perturb.l_perturb_local = perturb_loss(local, scenario.graph, attacked);
  r.perturb.l_perturb_global = perturb_loss(global, scenario.graph, attacked);
  r.ok = true;
  return r;
}

MethodReport run_method(const RunConfig& config, const Scenario& scenario, const std::string& method,
                        std::size_t delta) {
  const auto start = std::chrono::steady_clock::now();
  MethodReport r;
  try {
    GeneratedEdits gen = generate_edits(config, scenario, method, delta);
    r = evaluate_edits(config, scenario, method, delta, gen.edits);
    r.warnings = std::move(gen.warnings);
  } catch (const std::exception& e) {
    r = MethodReport{};
    r.method = method;
    r.delta = delta;
    r.seed = scenario.seed;
    r.ok = false;
    r.error = e.what();
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

json report_json(const RunConfig& config, const MethodReport& r) {
  json j{{"config", config},
         {"method", r.method},
         {"delta", r.delta},
         {"seed", r.seed},
         {"ok", r.ok},
         {"wall_time_s", r.wall_seconds},
         {"warnings", r.warnings}};
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j["clean"] = score_json(r.clean);
  j["attacked"] = score_json(r.attacked);
  j["transfer"] = score_json(r.transfer);
  j["hide_clean"] = r.hide_clean;
  j["hide"] = r.hide;
  j["edits_used"] = r.perturb.edits_used;
  j["budget"] = r.perturb.budget;
  j["l_perturb_local"] = r.perturb.l_perturb_local;
  j["l_perturb_global"] = r.perturb.l_perturb_global;
  j["edits"] = {{"deleted", edges_json(r.edits.deleted)}, {"inserted", edges_json(r.edits.inserted)}};
  return j;
}

std::string summary_csv(const std::vector<MethodReport>& runs, const std::vector<std::string>& methods,
                        const std::vector<std::size_t>& deltas) {
  std::ostringstream out;
  out << "method,delta,m1_mean,m1_std,m2_mean,m2_std,l_perturb_local,l_perturb_global\n";
  auto mean_std = [](const std::vector<double>& xs) -> std::pair<double, double> {
    if (xs.empty()) return {std::nan(""), std::nan("")};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
  };
  for (const std::string& raw : methods) {
    const std::string method = canonical_method(raw);
    for (std::size_t delta : deltas) {
      std::vector<double> m1s, m2s, local, global;
      for (const MethodReport& r : runs) {
        if (!r.ok || r.method != method || r.delta != delta) continue;
        m1s.push_back(r.attacked.m1);
        m2s.push_back(r.attacked.m2);
        local.push_back(r.perturb.l_perturb_local);
        global.push_back(r.perturb.l_perturb_global);
      }
      const auto [m1_mean, m1_std] = mean_std(m1s);
      const auto [m2_mean, m2_std] = mean_std(m2s);
      out << method << ',' << delta << ',' << format_number(m1_mean) << ',' << format_number(m1_std) << ','
          << format_number(m2_mean) << ',' << format_number(m2_std) << ',' << format_number(mean_std(local).first)
          << ',' << format_number(mean_std(global).first) << '\n';
    }
  }
  return out.str();
}

ExperimentResult run_experiment(const RunConfig& config) {
  validate(config);
  const std::size_t per_seed = config.methods.size() * config.deltas.size();
  std::vector<std::vector<MethodReport>> slots(config.seeds.size());
  std::mutex writer;
  const std::filesystem::path out_dir = config.out_dir;
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir / "reports");

  auto emit = [&](const MethodReport& r) {
    if (out_dir.empty()) return;
    const std::lock_guard<std::mutex> lock(writer);
    std::ofstream f(out_dir / "reports" /
                    (file_stem(r.method) + "_d" + std::to_string(r.delta) + "_s" + std::to_string(r.seed) + ".json"));
    f << report_json(config, r).dump(2) << '\n';
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      const std::uint64_t seed = config.seeds[i];
      std::vector<MethodReport>& slot = slots[i];
      slot.reserve(per_seed);
      std::optional<Scenario> scenario;
      std::string failure;
      try {
        scenario = prepare_scenario(config, seed);
      } catch (const std::exception& e) {
        failure = std::string("scenario: ") + e.what();
      }
      for (const std::string& method : config.methods) {
        for (std::size_t delta : config.deltas) {
          MethodReport r;
          if (scenario) {
            r = run_method(config, *scenario, method, delta);
            r.warnings.insert(r.warnings.begin(), scenario->warnings.begin(), scenario->warnings.end());
          } else {
            r.method = canonical_method(method);
            r.delta = delta;
            r.seed = seed;
            r.error = failure;
          }
          emit(r);
          slot.push_back(std::move(r));
        }
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::min<std::size_t>(config.workers, config.seeds.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  ExperimentResult result;
  for (auto& slot : slots) {
    for (MethodReport& r : slot) {
      result.all_ok = result.all_ok && r.ok;
      result.runs.push_back(std::move(r));
    }
  }
  result.summary_csv = summary_csv(result.runs, config.methods, config.deltas);
  if (!out_dir.empty()) {
    std::ofstream f(out_dir / "summary.csv");
    f << result.summary_csv;
  }
  return result;
}

}  // namespace cdattack
