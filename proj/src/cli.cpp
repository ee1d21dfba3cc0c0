#include "maxent/cli.hpp"

#include "maxent/comparison.hpp"
#include "maxent/diagnostics.hpp"
#include "maxent/error.hpp"
#include "maxent/io.hpp"
#include "maxent/kl_lab.hpp"
#include "maxent/projection.hpp"
#include "maxent/target.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

namespace maxent {
namespace {

constexpr const char* kModule = "cli_harness";
namespace fs = std::filesystem;

[[noreturn]] void fail(ErrorKind kind, const std::string& what) { throw Error(kind, kModule, what); }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::uint64_t parse_seed(const std::string& s) {
  Config c;
  c.set("seed", s);
  return c.get_uint("seed", 0);
}

Config snapshot(const TrainRun& run) {
  Config c = to_config(run.cfg);
  c.set("env", run.env);
  return c;
}

std::vector<std::string> metrics_header() {
  return {"step", "episodic_reward", "critic_loss", "actor_loss", "fkl_mse", "mean_log_std", "alpha", "epsilon"};
}

std::vector<std::string> metrics_fields(const LogRow& r) {
  return {std::to_string(r.step),     format_optional(r.episodic_reward), format_optional(r.critic_loss),
          format_optional(r.actor_loss), format_optional(r.fkl_mse),      format_optional(r.mean_log_std),
          format_double(r.alpha),     format_double(r.epsilon)};
}

Agent load_agent(const fs::path& checkpoint, const std::string& env) {
  Agent agent = Agent::from_checkpoint(load_checkpoint(checkpoint));
  if (!env.empty() && env != agent.env_spec().name) {
    fail(ErrorKind::kInvalidArgument,
         "checkpoint was trained on " + agent.env_spec().name + ", not " + env);
  }
  return agent;
}

std::vector<Eigen::VectorXd> read_states(const fs::path& path, int state_dim) {
  std::vector<Eigen::VectorXd> states;
  std::istringstream in(read_file(path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    for (char& c : line) {
      if (c == ',' || c == '\t' || c == '\r') c = ' ';
    }
    std::istringstream ls(line);
    std::vector<double> v;
    std::string tok;
    while (ls >> tok) {
      char* end = nullptr;
      const double x = std::strtod(tok.c_str(), &end);
      if (*end != '\0') fail(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
      v.push_back(x);
    }
    if (v.empty()) continue;
    if (int(v.size()) != state_dim) {
      fail(ErrorKind::kDimensionMismatch, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                              std::to_string(state_dim) + " values");
    }
    states.push_back(Eigen::Map<Eigen::VectorXd>(v.data(), Eigen::Index(v.size())));
  }
  if (states.empty()) fail(ErrorKind::kParse, path.string() + " contains no states");
  return states;
}

// Pre-squash moments of the true marginal, by projecting it with the same quadrature.
std::pair<double, double> oracle_presquash_moments(const BoltzmannTarget& target, const Eigen::VectorXd& s,
                                                   int dim, const QuadratureConfig& quad) {
  const std::vector<double> x = quad.grid();
  Eigen::VectorXd a(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) a(k) = std::tanh(x[k]);
  const Eigen::VectorXd p =
      oracle_marginal_at(target, s, dim, a, default_points_per_dim(target.action_dim));
  std::vector<double> lq(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) lq[k] = std::log(p(k));
  const SquashedMoments m = squashed_moments(lq, quad);
  return {m.mean, m.var};
}

int cmd_train(const std::string& env, const std::string& algo, const std::string& config_file,
              const std::string& seed, const std::string& out, const std::string& steps,
              const std::string& epsilon, const std::string& alpha) {
  Config file = config_file.empty() ? Config{} : Config::load(config_file);
  if (!algo.empty()) file.set("algorithm", algo);
  if (!seed.empty()) file.set("seed", seed);
  if (!steps.empty()) file.set("steps_L", steps);
  if (!epsilon.empty()) file.set("epsilon", epsilon);
  if (!alpha.empty()) file.set("alpha", alpha);
  const TrainRun run = resolve_train_config(file, env);
  const TrainingLog log = run_training(run, out);
  std::ostringstream os;
  os << "trained " << algorithm_name(run.cfg.algorithm) << " on " << run.env << " for " << run.cfg.steps_L
     << " steps";
  if (!log.episode_returns.empty()) os << "; last episodic reward " << format_double(log.episode_returns.back());
  log_info(os.str());
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& env, int episodes, const std::string& out,
             std::uint64_t seed) {
  const Agent agent = load_agent(checkpoint, env);
  auto e = make_env(agent.env_spec().name);
  const EvalResult r = evaluate(*e, agent, episodes, seed);
  fs::create_directories(out);
  CsvWriter csv(fs::path(out) / "eval.csv", {"episode", "return"});
  for (std::size_t k = 0; k < r.returns.size(); ++k) csv.row({std::to_string(k), format_double(r.returns[k])});
  csv.row({"mean", format_double(r.mean_return)});
  csv.close();
  std::cout << "mean_return " << format_double(r.mean_return) << "\n";
  return 0;
}

int cmd_diag_projection(const std::string& checkpoint, const std::string& env, const std::string& states_file,
                        const std::string& out) {
  const Agent agent = load_agent(checkpoint, env);
  const auto states = read_states(states_file, agent.env_spec().state_dim);
  const AgentConfig& cfg = agent.config();
  const MarginalSource src = agent.critic().marginals();
  const int N = agent.env_spec().action_dim;
  const bool oracle = N <= kMaxOracleDim;
  const BoltzmannTarget target = target_from_critic(agent.critic(), cfg.alpha);
  fs::create_directories(out);
  CsvWriter csv(fs::path(out) / "projection.csv",
                {"state_index", "dim", "f_star", "sigma_star", "fd_stationarity_norm", "oracle_mean", "oracle_var"});
  for (std::size_t si = 0; si < states.size(); ++si) {
    const ProjectionResult p = project_state(src, cfg.alpha, states[si], cfg.quad);
    for (int i = 0; i < N; ++i) {
      const auto w = squashed_weights(marginal_log_grid(src, cfg.alpha, states[si], i, cfg.quad), cfg.quad);
      const double fd = fd_stationarity_norm(w, cfg.quad, p.f_star(i), p.sigma_star(i));
      std::string om;
      std::string ov;
      if (oracle) {
        const auto [m, v] = oracle_presquash_moments(target, states[si], i, cfg.quad);
        om = format_double(m);
        ov = format_double(v);
      }
      csv.row({std::to_string(si), std::to_string(i), format_double(p.f_star(i)), format_double(p.sigma_star(i)),
               format_double(fd), om, ov});
    }
  }
  csv.close();
  return 0;
}

int cmd_diag_marginals(const std::string& checkpoint, const std::string& env, const std::string& out,
                       std::uint64_t seed) {
  const Agent agent = load_agent(checkpoint, env);
  auto e = make_env(agent.env_spec().name);
  const Eigen::VectorXd state = e->reset(seed);
  const BoltzmannTarget target = target_from_critic(agent.critic(), agent.config().alpha);
  const DistributionComparison cmp = compare_marginals(agent.critic(), target, state);
  fs::create_directories(out);
  CsvWriter csv(fs::path(out) / "marginals.csv", {"dim", "grid_x", "density_oracle", "density_vdna"});
  CsvWriter sum(fs::path(out) / "marginals_summary.csv", {"dim", "tv", "mean_err", "var_err"});
  for (std::size_t d = 0; d < cmp.dims.size(); ++d) {
    const DimComparison& c = cmp.dims[d];
    for (Eigen::Index k = 0; k < c.grid.size(); ++k) {
      csv.row({std::to_string(d), format_double(c.grid(k)), format_double(c.oracle(k)), format_double(c.vdna(k))});
    }
    sum.row({std::to_string(d), format_double(c.tv_vdna), format_double(c.mean_err), format_double(c.var_err)});
  }
  csv.close();
  sum.close();
  return 0;
}

int cmd_kl_lab(const std::string& config_file, const std::string& out) {
  const Config c = config_file.empty() ? Config{} : Config::load(config_file);
  static const std::set<std::string> known = {"mu_star", "sigma_star", "mu0",  "sigma0",
                                              "epochs",  "samples_per_step", "lr", "seeds"};
  for (const auto& [k, v] : c.values()) {
    if (!known.count(k) && k.rfind("manifest.", 0) != 0) fail(ErrorKind::kParse, "unknown kl-lab key '" + k + "'");
  }
  KlLabConfig base;
  base.mu_star = c.get_double("mu_star", base.mu_star);
  base.sigma_star = c.get_double("sigma_star", base.sigma_star);
  base.mu0 = c.get_double("mu0", base.mu0);
  base.sigma0 = c.get_double("sigma0", base.sigma0);
  base.epochs = int(c.get_int("epochs", base.epochs));
  base.samples_per_step = int(c.get_int("samples_per_step", base.samples_per_step));
  base.lr = c.get_double("lr", base.lr);
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(c.get_string("seeds", "0,1,2,3,4"))) seeds.push_back(parse_seed(s));

  fs::create_directories(out);
  CsvWriter summary(fs::path(out) / "kl_lab_summary.csv",
                    {"seed", "initial_kl", "final_kl", "initial_param_error", "final_param_error",
                     "kl_decreased", "error_ratio"});
  for (std::uint64_t seed : seeds) {
    KlLabConfig cfg = base;
    cfg.seed = seed;
    const auto rows = run_kl_lab(cfg);
    std::string text;
    text += "# mu_star=" + format_double(cfg.mu_star) + " sigma_star=" + format_double(cfg.sigma_star) +
            " mu0=" + format_double(cfg.mu0) + " sigma0=" + format_double(cfg.sigma0) +
            " epochs=" + std::to_string(cfg.epochs) + " samples_per_step=" + std::to_string(cfg.samples_per_step) +
            " lr=" + format_double(cfg.lr) + " seed=" + std::to_string(seed) + "\r\n";
    text += "epoch,mu,sigma,kl_estimate,kl_exact,sigma_clamped\r\n";
    for (const auto& r : rows) {
      text += std::to_string(r.epoch) + "," + format_double(r.mu) + "," + format_double(r.sigma) + "," +
              format_double(r.kl_estimate) + "," + format_double(r.kl_exact) + "," +
              (r.sigma_clamped ? "1" : "0") + "\r\n";
    }
    write_file_atomic(fs::path(out) / ("kl_lab_seed" + std::to_string(seed) + ".csv"), text);
    const double e0 = kl_lab_param_error(rows.front(), cfg);
    const double e1 = kl_lab_param_error(rows.back(), cfg);
    summary.row({std::to_string(seed), format_double(rows.front().kl_exact), format_double(rows.back().kl_exact),
                 format_double(e0), format_double(e1), rows.back().kl_exact < rows.front().kl_exact ? "1" : "0",
                 format_double(e1 / e0)});
  }
  summary.close();
  return 0;
}

int cmd_compare(const std::string& algos, const std::string& env, const std::string& seeds_list,
                const std::string& out, const std::string& config_file, const std::string& steps, int threads) {
  const Config file = config_file.empty() ? Config{} : Config::load(config_file);
  std::vector<TrainRun> runs;
  std::vector<std::string> dirs;
  for (const auto& a : split_list(algos)) {
    for (const auto& s : split_list(seeds_list)) {
      Config c = file;
      c.set("algorithm", algorithm_name(parse_algorithm(a)));
      c.set("seed", s);
      if (!steps.empty()) c.set("steps_L", steps);
      runs.push_back(resolve_train_config(c, env));
      dirs.push_back((fs::path(out) / (algorithm_name(runs.back().cfg.algorithm) + "_seed" + s)).string());
    }
  }
  if (runs.empty()) fail(ErrorKind::kInvalidArgument, "compare needs at least one algorithm and seed");
  std::vector<TrainingLog> logs(runs.size());
  std::vector<std::string> errors(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        logs[i] = run_training(runs[i], dirs[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::max(1, threads); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!errors[i].empty()) fail(ErrorKind::kIo, dirs[i] + ": " + errors[i]);
  }

  const long window = 1000;
  std::map<std::uint64_t, double> bidir_final;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].cfg.algorithm == Algorithm::kBidirectional) {
      bidir_final[runs[i].cfg.seed] = final_window_return(logs[i], window);
    }
  }
  CsvWriter csv(fs::path(out) / "summary.csv",
                {"algorithm", "seed", "final_return", "baseline_return", "threshold", "steps_to_threshold"});
  std::cout << std::left << std::setw(22) << "algorithm" << std::setw(8) << "seed" << std::setw(26) << "final_return"
            << "steps_to_threshold\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& cfg = runs[i].cfg;
    const double fin = final_window_return(logs[i], window);
    const double base = warmup_baseline_return(logs[i], cfg.warmup_steps);
    const auto it = bidir_final.find(cfg.seed);
    const double thr = eighty_percent_threshold(base, it != bidir_final.end() ? it->second : fin);
    const long reach = steps_to_reach(logs[i], thr, window, cfg.warmup_steps);
    csv.row({algorithm_name(cfg.algorithm), std::to_string(cfg.seed), format_double(fin), format_double(base),
             format_double(thr), std::to_string(reach)});
    std::cout << std::setw(22) << algorithm_name(cfg.algorithm) << std::setw(8) << cfg.seed << std::setw(26)
              << (format_double(fin) + " ") << reach << "\n";
  }
  csv.close();
  return 0;
}

}  // namespace

TrainRun resolve_train_config(const Config& file, const std::string& env_override) {
  const std::set<std::string> known = [] {
    std::set<std::string> k;
    const Config defaults = to_config(AgentConfig{});
    for (const auto& [key, v] : defaults.values()) k.insert(key);
    k.insert("env");
    return k;
  }();
  for (const auto& [k, v] : file.values()) {
    if (!known.count(k) && k.rfind("manifest.", 0) != 0) fail(ErrorKind::kParse, "unknown config key '" + k + "'");
  }
  TrainRun run;
  run.env = env_override.empty() ? file.get_string("env", "") : env_override;
  if (run.env.empty()) fail(ErrorKind::kInvalidArgument, "no environment given (--env or `env` config key)");
  make_env(run.env);  // validates the name
  run.cfg = agent_config_from(file);
  run.cfg.validate();
  return run;
}

std::string manifest_text(const TrainRun& run, const fs::path& out) {
  const Config snap = snapshot(run);
  std::string text = "# run manifest; reload with --config\n";
  text += "manifest.artifact_version = " + std::string(kArtifactVersion) + "\n";
  text += "manifest.config_hash = " + git_blob_hash(snap.serialize()) + "\n";
  text += "manifest.output_dir = " + out.string() + "\n";
  text += "manifest.seed = " + std::to_string(run.cfg.seed) + "\n";
  text += "manifest.start_time = " + utc_timestamp() + "\n";
  text += snap.serialize();
  return text;
}

TrainingLog run_training(const TrainRun& run, const fs::path& out) {
  fs::create_directories(out);
  write_file_atomic(out / "manifest.txt", manifest_text(run, out));
  auto env = make_env(run.env);
  Agent agent(env->spec(), run.cfg);
  CsvWriter metrics(out / "metrics.csv", metrics_header());
  long last_ckpt = -1;
  const TrainObserver observer = [&](const LogRow& row, const Agent& a) {
    metrics.row(metrics_fields(row));
    if (run.cfg.checkpoint_every > 0 && row.step % run.cfg.checkpoint_every == 0) {
      save_checkpoint(out / ("checkpoint_" + std::to_string(row.step) + ".ckpt"), a.to_checkpoint(row.step));
      last_ckpt = row.step;
    }
    if (log_level() == LogLevel::kDebug && row.step % 1000 == 0) {
      log_debug("step " + std::to_string(row.step) + " episodic_reward " + format_optional(row.episodic_reward));
    }
  };
  TrainingLog log = train(*env, agent, observer);
  if (run.cfg.steps_L > 0 && last_ckpt != run.cfg.steps_L) {
    save_checkpoint(out / ("checkpoint_" + std::to_string(run.cfg.steps_L) + ".ckpt"),
                    agent.to_checkpoint(run.cfg.steps_L));
  }
  metrics.close();
  return log;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Maximum-entropy RL toolkit: reverse-KL SAC, Forward SAC and Bidirectional SAC", "maxent"};
  app.require_subcommand(1);

  std::string env, algo, config_file, seed, out, steps, epsilon, alpha, checkpoint, states, algos, seeds;
  int episodes = 10;
  int threads = 1;
  std::uint64_t eval_seed = 12345;

  auto* train = app.add_subcommand("train", "Train an agent");
  train->add_option("--env", env, "Environment name");
  train->add_option("--algo", algo, "sac | forward-critic | forward-actor | bidirectional");
  train->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Run seed");
  train->add_option("--out", out, "Output directory")->required();
  train->add_option("--steps", steps, "Environment steps L");
  train->add_option("--epsilon", epsilon, "Weight of the forward MSE term");
  train->add_option("--alpha", alpha, "Temperature");

  auto* eval = app.add_subcommand("eval", "Evaluate the deterministic policy of a checkpoint");
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--env", env);
  eval->add_option("--episodes", episodes)->check(CLI::PositiveNumber);
  eval->add_option("--out", out)->required();
  eval->add_option("--seed", eval_seed, "Seed of the first evaluation episode");

  auto* dproj = app.add_subcommand("diag-projection", "Dump forward projections at given states");
  dproj->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  dproj->add_option("--env", env);
  dproj->add_option("--states", states, "One state per line")->required()->check(CLI::ExistingFile);
  dproj->add_option("--out", out)->required();

  auto* dmarg = app.add_subcommand("diag-marginals", "Compare VDN-a marginals with the grid oracle");
  dmarg->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  dmarg->add_option("--env", env);
  dmarg->add_option("--out", out)->required();
  dmarg->add_option("--seed", eval_seed, "Reset seed of the probe state");

  auto* kl = app.add_subcommand("kl-lab", "Sampled reverse-KL descent between 1-D Gaussians");
  kl->add_option("--config", config_file)->check(CLI::ExistingFile);
  kl->add_option("--out", out)->required();

  auto* cmp = app.add_subcommand("compare", "Train several algorithms and seeds and summarize");
  cmp->add_option("--algos", algos)->required();
  cmp->add_option("--env", env)->required();
  cmp->add_option("--seeds", seeds)->required();
  cmp->add_option("--out", out)->required();
  cmp->add_option("--config", config_file)->check(CLI::ExistingFile);
  cmp->add_option("--steps", steps);
  cmp->add_option("--threads", threads)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train) return cmd_train(env, algo, config_file, seed, out, steps, epsilon, alpha);
    if (*eval) return cmd_eval(checkpoint, env, episodes, out, eval_seed);
    if (*dproj) return cmd_diag_projection(checkpoint, env, states, out);
    if (*dmarg) return cmd_diag_marginals(checkpoint, env, out, eval_seed);
    if (*kl) return cmd_kl_lab(config_file, out);
    if (*cmp) return cmd_compare(algos, env, seeds, out, config_file, steps, threads);
  } catch (const Error& e) {
    std::cerr << "error [" << e.module() << "]: " << e.detail() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [" << kModule << "]: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace maxent
