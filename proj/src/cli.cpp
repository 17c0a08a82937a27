#include "sottac/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "sottac/checks.hpp"
#include "sottac/serialize.hpp"

namespace sottac::cli {

namespace fs = std::filesystem;

namespace {

std::string_view to_string(Solver s) { return s == Solver::Cg ? "cg" : "fixed_point"; }

Solver parse_solver(std::string_view s) {
  if (s == "cg") return Solver::Cg;
  if (s == "fixed_point") return Solver::FixedPoint;
  throw ContractViolation("unknown solver '" + std::string(s) + "' (expected cg or fixed_point)");
}

Weighting parse_weighting(std::string_view s) {
  if (s == "advantage") return Weighting::Advantage;
  if (s == "q") return Weighting::Q;
  if (s == "unit") return Weighting::Unit;
  throw ContractViolation("unknown weighting '" + std::string(s) +
                          "' (expected advantage, q or unit)");
}

std::string number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string iso_utc(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::size_t worker_count(std::size_t jobs, int requested) {
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SOTTAC_WORKERS")) {
    const long w = std::strtol(env, nullptr, 10);
    if (w > 0) hw = static_cast<std::size_t>(w);
  }
  if (requested > 0) hw = static_cast<std::size_t>(requested);
  return std::max<std::size_t>(1, std::min(jobs, hw));
}

struct Job {
  TrainConfig config;
  RunResult result;
  std::string error;  // set when train() threw something other than a numerical abort
};

// One worker per job slot; jobs share nothing and results land by index.
void run_jobs(std::vector<Job>& jobs, std::size_t workers) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        jobs[i].result = train(jobs[i].config);
      } catch (const std::exception& e) {
        jobs[i].error = e.what();
      }
    }
  };
  if (workers <= 1) {
    work();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

struct CommonArgs {
  std::string env;
  std::string method;
  std::string seeds;
  std::optional<int> episodes;
  std::optional<double> alpha;
  std::optional<double> lambda;
  std::optional<double> gamma;
  std::string config_path;
  std::string out_dir = ".";
  std::string weighting;
  bool normalize_adv = false;
  bool enforce_step_bound = false;
  int workers = 0;
  std::optional<int> h12_every;
  std::optional<int> critic_inner;
};

void add_common(CLI::App& app, CommonArgs& a) {
  app.add_option("--env", a.env, "cartpole, reacher or tinymdp");
  app.add_option("--method", a.method, "reinforce, natural, acgn1 or acgn2");
  app.add_option("--seeds", a.seeds, "comma-separated seeds (default 42,100,2026,777,1234)");
  app.add_option("--episodes", a.episodes, "total episode budget per seed");
  app.add_option("--alpha", a.alpha, "actor step size");
  app.add_option("--lambda", a.lambda, "damping of the curvature system");
  app.add_option("--gamma", a.gamma, "discount factor");
  app.add_option("--config", a.config_path, "JSON config overriding the presets");
  app.add_option("--out", a.out_dir, "output directory");
  app.add_option("--weighting", a.weighting, "advantage or q");
  app.add_flag("--normalize-adv", a.normalize_adv, "standardize advantages per batch");
  app.add_flag("--enforce-step-bound", a.enforce_step_bound, "cap alpha by the step-size bound");
  app.add_option("--workers", a.workers, "worker threads (default: min(#seeds, cores))");
  app.add_option("--h12-every", a.h12_every, "batches between interaction diagnostics");
  app.add_option("--critic-inner", a.critic_inner, "critic steps per batch");
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json load_config_file(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config file " + path);
  try {
    Json j = Json::parse(f);
    if (!j.is_object()) throw UsageError("config file must hold a JSON object");
    return j;
  } catch (const Json::parse_error& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& text, const Json& file) {
  std::vector<std::uint64_t> seeds;
  if (!text.empty()) {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        if (item.empty() || item[0] == '-') throw std::invalid_argument("negative");
        seeds.push_back(std::stoull(item, &used));
        if (used != item.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw UsageError("invalid seed '" + item + "'");
      }
    }
  } else if (file.contains("seeds")) {
    try {
      seeds = file.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const Json::exception&) {
      throw UsageError("config file: seeds must be a list of nonnegative integers");
    }
  } else {
    seeds = kDefaultSeeds;
  }
  if (seeds.empty()) throw UsageError("no seeds given");
  return seeds;
}

std::string pick_name(const std::string& flag, const Json& file, const char* key,
                      const char* fallback) {
  if (!flag.empty()) return flag;
  if (file.contains(key) && file.at(key).is_string()) return file.at(key).get<std::string>();
  return fallback;
}

// Presets, then the config file, then flags.
TrainConfig effective_config(const std::string& env, Method method, const Json& file,
                             const CommonArgs& a, std::optional<int> default_episodes = {}) {
  TrainConfig c = preset(env, method);
  if (default_episodes) c.total_episodes = *default_episodes;
  Json body = file;
  body.erase("seeds");
  body["env"] = env;
  body["method"] = std::string(to_string(method));
  c = config_from_json(body, c);
  if (a.episodes) c.total_episodes = *a.episodes;
  if (a.alpha) c.alpha = *a.alpha;
  if (a.lambda) c.damping = *a.lambda;
  if (a.gamma) c.gamma = *a.gamma;
  if (!a.weighting.empty()) {
    const Weighting w = parse_weighting(a.weighting);
    if (w == Weighting::Unit) throw UsageError("--weighting must be advantage or q");
    c.weighting = w;
  }
  if (a.normalize_adv) c.normalize_advantages = true;
  if (a.enforce_step_bound) c.enforce_step_bound = true;
  if (a.h12_every) c.h12_every = *a.h12_every;
  if (a.critic_inner) c.critic_inner = *a.critic_inner;
  c.validate();
  return c;
}

void check_names(const std::string& env, const std::string& method) {
  if (!is_known_env(env))
    throw UsageError("unknown environment '" + env + "' (expected cartpole, reacher or tinymdp)");
  if (!is_known_method(method))
    throw UsageError("unknown method '" + method +
                     "' (expected reinforce, natural, acgn1 or acgn2)");
}

std::size_t count_if_batches(const RunResult& r, bool UpdateReport::*flag) {
  return static_cast<std::size_t>(std::count_if(r.batches.begin(), r.batches.end(),
                                                [&](const BatchRecord& b) {
                                                  return b.actor_updated && b.report.*flag;
                                                }));
}

Json h12_summary(const RunResult& r) {
  Json arr = Json::array();
  for (std::size_t i = 0; i < r.batches.size(); ++i) {
    const auto& b = r.batches[i];
    if (!b.h12) continue;
    Json e;
    e["batch"] = i;
    e["available"] = b.h12->available;
    e["bound"] = b.h12->bound;
    e["g_pi"] = b.h12->g_pi;
    e["g_q"] = b.h12->g_q;
    e["critic_jacobian"] = b.h12->critic_jacobian;
    arr.push_back(std::move(e));
  }
  return arr;
}

int cmd_run(const CommonArgs& a, std::ostream& out, std::ostream& err) {
  const Json file = load_config_file(a.config_path);
  const std::string env = pick_name(a.env, file, "env", "cartpole");
  const std::string method_name = pick_name(a.method, file, "method", "acgn2");
  check_names(env, method_name);
  const Method method = parse_method(method_name);
  const auto seeds = parse_seeds(a.seeds, file);
  const TrainConfig base = effective_config(env, method, file, a);
  if (!base.timescales_ordered())
    err << "warning: critic step beta * n_inner does not exceed the actor alpha\n";

  fs::create_directories(a.out_dir);
  std::vector<Job> jobs;
  for (auto s : seeds) {
    Job j;
    j.config = base;
    j.config.seed = s;
    jobs.push_back(std::move(j));
  }
  const std::size_t workers = worker_count(jobs.size(), a.workers);
  const auto started = std::chrono::system_clock::now();
  run_jobs(jobs, workers);
  const auto finished = std::chrono::system_clock::now();

  Json manifest;
  manifest["artifact"] = {{"name", "sottac"}, {"version", kArtifactVersion}};
  manifest["command"] = "run";
  manifest["started_at"] = iso_utc(started);
  manifest["finished_at"] = iso_utc(finished);
  manifest["config"] = config_to_json(base);
  manifest["seeds"] = seeds;
  manifest["workers"] = workers;

  bool ok = true;
  Json runs = Json::array();
  std::size_t max_len = 0;
  for (const auto& j : jobs) max_len = std::max(max_len, j.result.returns.size());
  std::vector<double> finals, totals, steps;
  std::vector<std::vector<double>> per_episode(max_len);
  for (const auto& j : jobs) {
    const auto& r = j.result;
    const std::string stem = std::string(to_string(method)) + "_" + env + "_" +
                             std::to_string(j.config.seed);
    const std::string csv_name = "returns_" + stem + ".csv";
    Json e;
    e["seed"] = j.config.seed;
    e["csv"] = csv_name;
    if (!j.error.empty()) {
      ok = false;
      e["status"] = "error";
      e["failure"] = j.error;
      err << "seed " << j.config.seed << ": " << j.error << "\n";
      runs.push_back(std::move(e));
      continue;
    }
    {
      std::ofstream f(fs::path(a.out_dir) / csv_name, std::ios::binary | std::ios::trunc);
      f << returns_csv(r);
    }
    const std::string policy_name = "policy_" + stem + ".sotp";
    const std::string critic_name = "critic_" + stem + ".sotc";
    save_params((fs::path(a.out_dir) / policy_name).string(), kPolicyMagic, r.final_theta);
    save_params((fs::path(a.out_dir) / critic_name).string(), kCriticMagic, r.final_omega);
    if (r.aborted) {
      ok = false;
      err << "seed " << j.config.seed << ": " << r.failure << "\n";
    }
    const double step_ns = mean_step_ns(r);
    e["status"] = r.aborted ? "aborted" : "ok";
    if (r.aborted) e["failure"] = r.failure;
    e["policy"] = policy_name;
    e["critic"] = critic_name;
    e["episodes"] = r.returns.size();
    e["final_mean"] = r.final_mean;
    e["episodes_to_threshold"] =
        r.episodes_to_threshold ? Json(*r.episodes_to_threshold) : Json(nullptr);
    e["total_seconds"] = static_cast<double>(r.total_wall_ns) * 1e-9;
    e["mean_step_ns"] = step_ns;
    e["actor_updates"] = std::count_if(r.batches.begin(), r.batches.end(),
                                       [](const BatchRecord& b) { return b.actor_updated; });
    e["screening_batches"] = count_if_batches(r, &UpdateReport::screening_triggered);
    e["fallback_batches"] = count_if_batches(r, &UpdateReport::fallback_used);
    e["curvature_products"] = r.curvature_products;
    if (base.h12_every > 0) e["h12"] = h12_summary(r);
    runs.push_back(std::move(e));

    finals.push_back(r.final_mean);
    totals.push_back(static_cast<double>(r.total_wall_ns) * 1e-9);
    steps.push_back(step_ns);
    for (std::size_t i = 0; i < r.returns.size(); ++i) per_episode[i].push_back(r.returns[i]);

    out << "seed " << j.config.seed << ": final-50 mean " << std::fixed << std::setprecision(2)
        << r.final_mean << ", episodes to threshold "
        << (r.episodes_to_threshold ? std::to_string(*r.episodes_to_threshold) : "none")
        << ", " << std::setprecision(3) << static_cast<double>(r.total_wall_ns) * 1e-9 << " s"
        << (r.aborted ? " (aborted)" : "") << "\n";
  }
  manifest["runs"] = std::move(runs);

  Json agg;
  std::vector<double> ep_mean, ep_std;
  for (const auto& v : per_episode) {
    ep_mean.push_back(mean_of(v));
    ep_std.push_back(std_of(v));
  }
  agg["std_kind"] = "sample";
  agg["episode_return_mean"] = ep_mean;
  agg["episode_return_std"] = ep_std;
  agg["final_mean_mean"] = mean_of(finals);
  agg["final_mean_std"] = std_of(finals);
  agg["total_seconds_mean"] = mean_of(totals);
  agg["total_seconds_std"] = std_of(totals);
  agg["mean_step_ns_mean"] = mean_of(steps);
  agg["mean_step_ns_std"] = std_of(steps);
  manifest["aggregates"] = std::move(agg);

  const std::string manifest_name =
      "manifest_" + std::string(to_string(method)) + "_" + env + ".json";
  std::ofstream(fs::path(a.out_dir) / manifest_name, std::ios::binary | std::ios::trunc)
      << manifest.dump(2) << "\n";
  out << "wrote " << (fs::path(a.out_dir) / manifest_name).string() << "\n";
  return ok ? kOk : kFailure;
}

int cmd_bench(const CommonArgs& a, std::ostream& out, std::ostream& err) {
  constexpr int kBenchEpisodes = 300;
  const Json file = load_config_file(a.config_path);
  const std::string env = pick_name(a.env, file, "env", "cartpole");
  std::vector<std::string> methods;
  const std::string single = pick_name(a.method, file, "method", "");
  if (!single.empty()) methods.push_back(single);
  else methods = {"reinforce", "natural", "acgn2", "acgn1"};
  for (const auto& m : methods) check_names(env, m);
  const auto seeds = parse_seeds(a.seeds, file);

  std::vector<Job> jobs;
  for (const auto& m : methods) {
    const TrainConfig c = effective_config(env, parse_method(m), file, a, kBenchEpisodes);
    for (auto s : seeds) {
      Job j;
      j.config = c;
      j.config.seed = s;
      jobs.push_back(std::move(j));
    }
  }
  // Timed regions share the core with other workers otherwise.
  run_jobs(jobs, a.workers > 0 ? worker_count(jobs.size(), a.workers) : 1);

  // Per-update cost on matched batches: an ACGN2 driver run produces the
  // batches and every method computes its step on the same ones.
  std::map<std::pair<std::string, std::uint64_t>, double> matched;
  std::vector<TrainConfig> timed;
  for (const auto& m : methods)
    timed.push_back(effective_config(env, parse_method(m), file, a, kBenchEpisodes));
  bool ok = true;
  for (auto s : seeds) {
    TrainConfig driver = effective_config(env, Method::Acgn2, file, a, kBenchEpisodes);
    driver.seed = s;
    for (auto& c : timed) c.seed = s;
    try {
      for (const auto& c : matched_update_costs(driver, timed)) {
        double sum = 0.0;
        for (auto ns : c.step_ns) sum += static_cast<double>(ns);
        matched[{std::string(to_string(c.method)), s}] =
            c.step_ns.empty() ? 0.0 : sum / static_cast<double>(c.step_ns.size());
      }
    } catch (const NumericalError& e) {
      ok = false;
      err << "matched timing, seed " << s << ": " << e.what() << "\n";
    }
  }

  fs::create_directories(a.out_dir);
  const fs::path path = fs::path(a.out_dir) / ("bench_" + env + ".csv");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << "method,seed,total_seconds,mean_step_ns\n";
  std::map<std::string, std::vector<double>> per_method;
  for (const auto& j : jobs) {
    const std::string m(to_string(j.config.method));
    if (!j.error.empty() || j.result.aborted) {
      ok = false;
      err << m << " seed " << j.config.seed << ": "
          << (j.error.empty() ? j.result.failure : j.error) << "\n";
      if (!j.error.empty()) continue;
    }
    const auto it = matched.find({m, j.config.seed});
    const double step = it == matched.end() ? 0.0 : it->second;
    f << m << "," << j.config.seed << ","
      << number(static_cast<double>(j.result.total_wall_ns) * 1e-9) << "," << number(step)
      << "\n";
    per_method[m].push_back(step);
  }
  std::vector<std::pair<double, std::string>> order;
  for (const auto& [m, v] : per_method) order.emplace_back(median_of(v), m);
  std::sort(order.begin(), order.end());
  out << "median ns per update:";
  for (std::size_t i = 0; i < order.size(); ++i)
    out << (i ? " < " : " ") << order[i].second << " (" << std::fixed << std::setprecision(0)
        << order[i].first << ")";
  out << "\nwrote " << path.string() << "\n";
  return ok ? kOk : kFailure;
}

struct CheckArgs {
  std::vector<std::string> only;
  checks::CheckOptions options;
};

int cmd_check(const CheckArgs& a, std::ostream& out) {
  for (const auto& n : a.only)
    if (!checks::is_known_check(n)) {
      std::string names;
      for (const auto& k : checks::check_names()) names += (names.empty() ? "" : ", ") + k;
      throw UsageError("unknown check '" + n + "' (available: " + names + ")");
    }
  try {
    bool ok = true;
    for (const auto& name : a.only.empty() ? checks::check_names() : a.only) {
      const auto r = checks::run_check(name, a.options);
      ok = ok && r.passed;
      out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << std::fixed
          << std::setprecision(2) << r.seconds << " s): " << r.detail << "\n";
      out.flush();
    }
    return ok ? kOk : kFailure;
  } catch (const ContractViolation& e) {
    throw UsageError(e.what());
  }
}

}  // namespace

Json config_to_json(const TrainConfig& c) {
  Json j;
  j["env"] = c.env;
  j["method"] = std::string(to_string(c.method));
  j["gamma"] = c.gamma;
  j["episodes_per_batch"] = c.episodes_per_batch;
  j["total_episodes"] = c.total_episodes;
  j["max_episode_len"] = c.max_episode_len;
  j["alpha"] = c.alpha;
  j["damping"] = c.damping;
  j["cg_iters"] = c.cg_iters;
  j["cg_tol"] = c.cg_tol;
  j["screening"] = c.screening;
  j["solver"] = std::string(to_string(c.solver));
  j["fallback_alpha"] = c.fallback_alpha;
  j["spectrum_iters"] = c.spectrum_iters;
  j["policy_hidden"] = c.policy_hidden;
  j["weighting"] = std::string(to_string(c.weighting));
  j["curvature_weighting"] = std::string(to_string(c.curvature_weighting));
  j["clamp_q_weights"] = c.clamp_q_weights;
  j["occupancy_weighting"] = c.occupancy_weighting;
  j["normalize_advantages"] = c.normalize_advantages;
  j["critic_beta"] = c.critic_beta;
  j["critic_inner"] = c.critic_inner;
  j["warmup_batches"] = c.warmup_batches;
  j["critic_hidden"] = c.critic_hidden;
  j["reward_shift"] = c.reward_shift ? Json(*c.reward_shift) : Json(nullptr);
  j["effective_reward_shift"] = c.effective_reward_shift();
  j["h12_every"] = c.h12_every;
  j["enforce_step_bound"] = c.enforce_step_bound;
  j["threshold"] = c.threshold;
  j["threshold_window"] = c.threshold_window;
  return j;
}

TrainConfig config_from_json(const Json& j, TrainConfig c) {
  if (!j.is_object()) throw ContractViolation("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "env") c.env = value.get<std::string>();
      else if (key == "method") c.method = parse_method(value.get<std::string>());
      else if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "episodes_per_batch") c.episodes_per_batch = value.get<int>();
      else if (key == "total_episodes") c.total_episodes = value.get<int>();
      else if (key == "max_episode_len") c.max_episode_len = value.get<int>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "damping" || key == "lambda") c.damping = value.get<double>();
      else if (key == "cg_iters") c.cg_iters = value.get<int>();
      else if (key == "cg_tol") c.cg_tol = value.get<double>();
      else if (key == "screening") c.screening = value.get<bool>();
      else if (key == "solver") c.solver = parse_solver(value.get<std::string>());
      else if (key == "fallback_alpha") c.fallback_alpha = value.get<double>();
      else if (key == "spectrum_iters") c.spectrum_iters = value.get<int>();
      else if (key == "policy_hidden") c.policy_hidden = value.get<std::size_t>();
      else if (key == "weighting") c.weighting = parse_weighting(value.get<std::string>());
      else if (key == "curvature_weighting")
        c.curvature_weighting = parse_weighting(value.get<std::string>());
      else if (key == "clamp_q_weights") c.clamp_q_weights = value.get<bool>();
      else if (key == "occupancy_weighting") c.occupancy_weighting = value.get<bool>();
      else if (key == "normalize_advantages") c.normalize_advantages = value.get<bool>();
      else if (key == "critic_beta") c.critic_beta = value.get<double>();
      else if (key == "critic_inner") c.critic_inner = value.get<int>();
      else if (key == "warmup_batches") c.warmup_batches = value.get<int>();
      else if (key == "critic_hidden") c.critic_hidden = value.get<std::size_t>();
      else if (key == "reward_shift")
        c.reward_shift = value.is_null() ? std::nullopt : std::optional(value.get<double>());
      else if (key == "effective_reward_shift") continue;  // derived, written for the record
      else if (key == "h12_every") c.h12_every = value.get<int>();
      else if (key == "enforce_step_bound") c.enforce_step_bound = value.get<bool>();
      else if (key == "threshold") c.threshold = value.get<double>();
      else if (key == "threshold_window") c.threshold_window = value.get<int>();
      else throw ContractViolation("unknown config key '" + key + "'");
    } catch (const Json::exception& e) {
      throw ContractViolation("config key '" + key + "': " + e.what());
    }
  }
  return c;
}

std::string returns_csv(const RunResult& r) {
  std::string s = std::string(kCsvHeader) + "\n";
  for (std::size_t i = 0; i < r.returns.size(); ++i) {
    const auto& b = r.batches.at(static_cast<std::size_t>(r.episode_batch[i]));
    s += std::to_string(i);
    s += ',';
    s += number(r.returns[i]);
    s += ',';
    s += number(b.critic_loss);
    s += ',';
    s += number(b.actor_updated ? b.report.grad_norm : 0.0);
    s += ',';
    s += (b.actor_updated && b.report.screening_triggered) ? '1' : '0';
    s += ',';
    s += std::to_string(b.actor_updated ? b.update_wall_ns : 0);
    s += '\n';
  }
  return s;
}

double mean_step_ns(const RunResult& r) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < r.returns.size(); ++i) {
    const auto& b = r.batches.at(static_cast<std::size_t>(r.episode_batch[i]));
    if (!b.actor_updated) continue;
    sum += static_cast<double>(b.update_wall_ns);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Second-order two-timescale actor-critic benchmarks", "sottac"};
  app.require_subcommand(1);
  CommonArgs run_args, bench_args;
  CheckArgs check_args;
  auto* run = app.add_subcommand("run", "train one method over several seeds");
  add_common(*run, run_args);
  auto* bench = app.add_subcommand("bench", "time all methods with matched budgets");
  add_common(*bench, bench_args);
  auto* check = app.add_subcommand("check", "run the numerical invariant suite");
  check->add_option("--only", check_args.only, "checks to run (default: all)")->delimiter(',');
  check->add_option("--d", check_args.options.d, "policy dimension of TinyMdp instances");
  check->add_option("--trials", check_args.options.trials, "random instances per check");
  check->add_option("--probes", check_args.options.probes, "probes for curvature-sign");
  check->add_option("--seed", check_args.options.seed, "seed of the random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (run->parsed()) return cmd_run(run_args, out, err);
    if (bench->parsed()) return cmd_bench(bench_args, out, err);
    return cmd_check(check_args, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace sottac::cli
