#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hyperq/error.hpp"
#include "hyperq/experiment.hpp"

namespace {

using hyperq::exp::Settings;

// Registers string-valued flags; only flags given on the command line reach the settings.
struct FlagSet {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;

  void add(CLI::App* app, const std::string& name, const std::string& help) {
    options[name] = app->add_option("--" + name, values[name], help);
  }

  Settings resolve() const {
    Settings s;
    if (!config_path.empty()) s = Settings::read_file(config_path);
    Settings flags;
    for (const auto& [name, opt] : options) {
      if (opt->count() > 0) flags.set(name, values.at(name));
    }
    s.merge(flags);
    return s;
  }
};

void add_env_flags(CLI::App* app, FlagSet& f) {
  f.add(app, "env", "environment: chain or pointmass");
  f.add(app, "dims", "chain action dimensions");
  f.add(app, "bins", "sub-actions per dimension");
  f.add(app, "horizon", "episode time limit");
  f.add(app, "early-termination", "chain ends on a full match (true/false)");
}

void report(const std::string& line) { std::cerr << line << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypergraph action-value experiments"};
  app.require_subcommand(1);

  FlagSet predict_flags;
  auto* predict = app.add_subcommand("predict", "bandit reward-prediction study");
  predict->add_option("--config", predict_flags.config_path, "key = value config file");
  predict_flags.add(predict, "sizes", "sub-actions per dimension, comma separated");
  predict_flags.add(predict, "dims", "action dimensions");
  predict_flags.add(predict, "seeds", "reward functions per size");
  predict_flags.add(predict, "variants", "e.g. baseline,r1-sum,r3-uni");
  predict_flags.add(predict, "iterations", "training iterations");
  predict_flags.add(predict, "updates-per-iteration", "Adam updates per iteration");
  predict_flags.add(predict, "minibatch", "minibatch size");
  predict_flags.add(predict, "effective-lr", "learning rate before division by edge count");
  predict_flags.add(predict, "workers", "worker threads (0: all cores)");
  predict_flags.add(predict, "seed", "master seed");
  predict_flags.add(predict, "out", "output directory");

  FlagSet rl_flags;
  auto* rl = app.add_subcommand("rl", "train Q-learning agents");
  rl->add_option("--config", rl_flags.config_path, "key = value config file");
  add_env_flags(rl, rl_flags);
  rl_flags.add(rl, "rank", "hypergraph ranks, comma separated (may be empty)");
  rl_flags.add(rl, "mixer", "sum or universal");
  rl_flags.add(rl, "baseline", "also train the flat single-edge agent (true/false)");
  rl_flags.add(rl, "seeds", "seeds per agent");
  rl_flags.add(rl, "steps", "environment steps per run");
  rl_flags.add(rl, "eval-period", "steps between evaluations");
  rl_flags.add(rl, "eval-episodes", "episodes per evaluation");
  rl_flags.add(rl, "torso-hidden", "shared torso widths, comma separated");
  rl_flags.add(rl, "head-hidden", "hidden units split across the blocks");
  rl_flags.add(rl, "match-flat-params", "shrink the flat head to the rank-1 parameter count (true/false)");
  rl_flags.add(rl, "minibatch", "minibatch size");
  rl_flags.add(rl, "replay-capacity", "replay memory size");
  rl_flags.add(rl, "target-period", "updates between target syncs");
  rl_flags.add(rl, "warmup", "transitions before learning starts");
  rl_flags.add(rl, "gamma", "discount");
  rl_flags.add(rl, "lr", "Adam learning rate");
  rl_flags.add(rl, "adam-epsilon", "Adam epsilon");
  rl_flags.add(rl, "epsilon-final", "final exploration rate");
  rl_flags.add(rl, "epsilon-final-step", "step at which exploration reaches its final value");
  rl_flags.add(rl, "eval-epsilon", "exploration rate during evaluation");
  rl_flags.add(rl, "workers", "worker threads (0: all cores)");
  rl_flags.add(rl, "seed", "master seed");
  rl_flags.add(rl, "out", "output directory");

  FlagSet reps_flags;
  auto* reps = app.add_subcommand("analyze-reps", "per-hyperedge greedy representation statistics");
  reps->add_option("--config", reps_flags.config_path, "key = value config file");
  reps_flags.add(reps, "ckpt-dir", "directory of .ckpt files");
  add_env_flags(reps, reps_flags);
  reps_flags.add(reps, "env-seed", "environment seed");
  reps_flags.add(reps, "steps", "greedy steps per model");
  reps_flags.add(reps, "out", "output directory");

  double agent = 0, other = 0, human = 0, random = 0;
  auto* scores = app.add_subcommand("scores", "human-normalized and relative scores");
  scores->add_option("--agent", agent, "agent score")->required();
  auto* other_opt = scores->add_option("--baseline", other, "score of the agent compared against");
  scores->add_option("--human", human, "human score")->required();
  scores->add_option("--random", random, "random-policy score")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (predict->parsed()) {
      const auto config = hyperq::exp::predict_config(predict_flags.resolve());
      hyperq::exp::cmd_predict(config, report);
      std::cout << "wrote " << config.out_dir.string() << '\n';
    } else if (rl->parsed()) {
      const auto config = hyperq::exp::rl_config(rl_flags.resolve());
      hyperq::exp::cmd_rl(config, report);
      std::cout << "wrote " << config.out_dir.string() << '\n';
    } else if (reps->parsed()) {
      const auto config = hyperq::exp::analyze_config(reps_flags.resolve());
      const auto stats = hyperq::exp::cmd_analyze_representations(config);
      std::cout << hyperq::exp::representation_csv(stats, {});
    } else if (scores->parsed()) {
      std::printf("normalized %.17g\n", hyperq::exp::normalized_score(agent, human, random));
      if (other_opt->count() > 0) {
        std::printf("baseline_normalized %.17g\n", hyperq::exp::normalized_score(other, human, random));
        std::printf("relative %.17g\n", hyperq::exp::relative_score(agent, other, human, random));
      }
    }
  } catch (const hyperq::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == hyperq::ErrorCode::usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
