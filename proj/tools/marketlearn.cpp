// Command-line front end: market sessions, regret experiments, the bound
// verification sweep and penalty/scoring-rule conversion.
//
// Options may also come from a flat key=value file given with --config;
// anything passed on the command line takes precedence.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "marketlearn/marketlearn.hpp"

namespace ml = marketlearn;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ml::InvalidInput("cannot read config file '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ml::InvalidInput(path + ":" + std::to_string(lineno) + ": expected key=value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

// Appends "--key value" for each config entry the selected subcommand
// understands and the user did not already pass.
std::vector<std::string> merge_config(const CLI::App& app, std::vector<std::string> args) {
  std::string config_path;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (config_path.empty()) return kept;

  const CLI::App* sub = nullptr;
  for (const auto& a : kept)
    if (const auto* s = app.get_subcommand_no_throw(a)) {
      sub = s;
      break;
    }
  if (!sub) throw ml::InvalidInput("--config needs a subcommand");

  std::set<std::string> given;
  for (const auto& a : kept)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));

  for (const auto& [key, value] : read_config(config_path)) {
    if (given.count(key)) continue;
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) {
      bool elsewhere = false;
      for (const auto* other : app.get_subcommands({}))
        elsewhere = elsewhere || other->get_option_no_throw("--" + key) != nullptr;
      if (!elsewhere) throw ml::InvalidInput("unknown config key '" + key + "'");
      continue;
    }
    kept.push_back("--" + key);
    kept.push_back(value);
  }
  return kept;
}

// Writes to the named file, or to stdout when the name is empty.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw ml::Error("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  bool to_stdout() const { return !file_.is_open(); }

 private:
  std::ofstream file_;
};

struct SimulateArgs {
  std::string market = "lmsr";
  double b = 1.0;
  std::size_t n = 2;
  std::size_t trades = 100;
  std::uint64_t seed = 1;
  std::string out;
  std::string msr_out;
};

int run_simulate(const SimulateArgs& a) {
  const ml::MarketKind market = ml::parse_market(a.market);
  const auto cf = ml::make_market(market, a.b, a.n);
  const auto session = ml::simulate_session(cf, a.trades, a.seed);

  Sink sink(a.out);
  ml::write_session_header(sink.stream(), a.n);
  for (const auto& row : session.rows) ml::write_session_row(sink.stream(), row);

  if (!a.msr_out.empty()) {
    Sink msr(a.msr_out);
    ml::write_msr_mirror(msr.stream(), ml::matching_rule(market, a.b), a.n, session);
  }

  const bool ok = session.max_maker_loss <= session.loss_bound + 1e-9;
  std::ostream& summary = sink.to_stdout() ? std::cerr : std::cout;
  summary << ml::format_number(session.max_maker_loss) << ','
          << ml::format_number(session.loss_bound) << ',' << (ok ? "pass" : "fail") << '\n';
  return ok ? 0 : 1;
}

int run_regret(const ml::ExperimentConfig& cfg) {
  const auto summary = ml::run_experiment(cfg);
  std::cout << summary.summary_line() << '\n';
  return summary.passed ? 0 : 1;
}

int run_verify(std::uint64_t seed) {
  const auto lines = ml::verify_all(seed);
  ml::write_check_lines(std::cout, lines);
  return ml::all_passed(lines) ? 0 : 1;
}

int run_convert(const std::string& from, double b, std::size_t n) {
  const ml::ScoringRule rule = from == "log-rule" ? ml::make_log_rule(b) : ml::make_quadratic_rule(b);
  const ml::PenaltyFunction alpha = ml::penalty_from_rule(rule);
  const ml::ScoringRule back = ml::rule_from_penalty(alpha, n);

  ml::SplitMix64 rng(0);
  double drift = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto p = rng.simplex_point(n);
    drift = std::max(drift, ml::max_abs_diff(rule.scores(p), back.scores(p)));
  }
  std::cout << "penalty," << alpha.describe() << '\n'
            << "roundtrip_max_score_diff," << ml::format_number(drift) << '\n';
  return drift <= 1e-9 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-function prediction markets and no-regret learning", "marketlearn"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  std::string config_path;
  app.add_option("--config", config_path, "key=value file; command-line options win");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "random trades against a market maker");
  simulate->add_option("--market", sim.market)->check(CLI::IsMember({"lmsr", "quad"}));
  simulate->add_option("--b", sim.b, "liquidity")->check(CLI::PositiveNumber);
  simulate->add_option("--n", sim.n, "outcomes")->check(CLI::Range(2, 1000000));
  simulate->add_option("--trades", sim.trades);
  simulate->add_option("--seed", sim.seed);
  simulate->add_option("--out", sim.out, "session CSV (stdout when omitted)");
  simulate->add_option("--msr-out", sim.msr_out, "equivalent scoring-rule session CSV");

  ml::ExperimentConfig exp;
  std::string algo = "reduction", market = "lmsr", gen = "uniform";
  double rate = 0.0;
  auto* regret = app.add_subcommand("regret", "run a learner on a generated loss sequence");
  regret->add_option("--algo", algo)->check(CLI::IsMember({"wm", "ogd", "ftl", "reduction"}));
  regret->add_option("--market", market)->check(CLI::IsMember({"lmsr", "quad"}));
  regret->add_option("--b", exp.b, "liquidity")->check(CLI::PositiveNumber);
  regret->add_option("--n", exp.n, "experts")->check(CLI::Range(2, 1000000));
  regret->add_option("--t", exp.t, "rounds")->check(CLI::PositiveNumber);
  regret->add_option("--gen", gen)->check(CLI::IsMember({"alt", "bernoulli", "uniform", "adaptive"}));
  regret->add_option("--rate", rate, "override eta or eps")->check(CLI::PositiveNumber);
  regret->add_option("--seed", exp.seed);
  regret->add_option("--out", exp.out, "regret trace CSV");

  std::uint64_t verify_seed = 1;
  auto* verify = app.add_subcommand("verify", "check every bound and equivalence");
  verify->add_option("--seed", verify_seed);

  std::string from = "log-rule";
  double conv_b = 1.0;
  std::size_t conv_n = 3;
  auto* convert = app.add_subcommand("convert", "scoring rule to penalty and back");
  convert->add_option("--from", from)->check(CLI::IsMember({"log-rule", "quad-rule"}));
  convert->add_option("--b", conv_b)->check(CLI::PositiveNumber);
  convert->add_option("--n", conv_n)->check(CLI::Range(2, 1000000));

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ml::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim);
    if (regret->parsed()) {
      exp.algo = ml::parse_algo(algo);
      exp.market = ml::parse_market(market);
      exp.generator = ml::parse_generator(gen);
      if (regret->count("--rate")) exp.rate = rate;
      return run_regret(exp);
    }
    if (verify->parsed()) return run_verify(verify_seed);
    if (convert->parsed()) return run_convert(from, conv_b, conv_n);
  } catch (const ml::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
