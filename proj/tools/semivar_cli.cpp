// Command-line runner for steady-state mean-semivariance policy optimization:
// exact and sample-based solvers over the bundled benchmark environments,
// beta sweeps with CSV outputs, policy evaluation, reward histograms and the
// exactness verification suite.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semivar/experiment.hpp"

using namespace semivar;

namespace {

struct EnvFlags {
    std::string environment = "figure1";
    std::string mdp_file;
    int quantiles = 64;
    int states = 5;
    int actions = 3;
    std::uint64_t env_seed = 0;
    double reward_scale = 1.0;
};

void add_env_flags(CLI::App* cmd, EnvFlags& flags) {
    cmd->add_option("--env", flags.environment,
                    "environment: figure1 | bandit | portfolio | random | file")
        ->default_val("figure1");
    cmd->add_option("--mdp-file", flags.mdp_file, "mdp file (with --env file)");
    cmd->add_option("--quantiles", flags.quantiles, "bandit discretization level");
    cmd->add_option("--states", flags.states, "random environment state count");
    cmd->add_option("--actions", flags.actions, "random environment action count");
    cmd->add_option("--env-seed", flags.env_seed, "random environment seed");
    cmd->add_option("--reward-scale", flags.reward_scale, "random environment reward scale");
}

void apply_env_flags(ExperimentConfig& config, const EnvFlags& flags) {
    config.environment = flags.environment;
    config.mdp_file = flags.mdp_file;
    config.bandit_quantiles = flags.quantiles;
    config.random_states = flags.states;
    config.random_actions = flags.actions;
    config.random_seed = flags.env_seed;
    config.random_reward_scale = flags.reward_scale;
}

void print_row(const FrontierRow& row) {
    std::printf("beta,algorithm,seed,eta,zeta,zeta_minus,xi_minus,iterations,converged,wall_time\n");
    std::printf("%s,%s,%llu,%s,%s,%s,%s,%d,%d,%s\n", csv_format(row.beta).c_str(),
                row.algorithm.c_str(), static_cast<unsigned long long>(row.seed),
                csv_format(row.eta).c_str(), csv_format(row.zeta).c_str(),
                csv_format(row.zeta_minus).c_str(), csv_format(row.xi_minus).c_str(),
                row.iterations, row.converged ? 1 : 0, csv_format(row.wall_time).c_str());
}

GaeSign parse_gae_sign(const std::string& s) {
    if (s == "standard") return GaeSign::standard;
    if (s == "paper") return GaeSign::paper;
    throw ValidationError("--gae-sign must be standard or paper");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"steady-state mean-semivariance policy optimization toolkit"};
    app.require_subcommand(1);

    // ---- solve -------------------------------------------------------------
    EnvFlags solve_env;
    std::string solve_algo = "msvtrpi";
    double solve_beta = 1.0;
    std::uint64_t solve_seed = 1;
    std::string solve_out;
    ExperimentConfig solve_config;
    CLI::App* solve = app.add_subcommand("solve", "run an exact solver once");
    add_env_flags(solve, solve_env);
    solve->add_option("--algo", solve_algo, "msvtrpi | mvpi | msvpg")->default_val("msvtrpi");
    solve->add_option("--beta", solve_beta, "risk trade-off");
    solve->add_option("--seed", solve_seed, "cell seed (bookkeeping only)");
    solve->add_option("--eps-mu", solve_config.solver.eps_mu, "KL trust-region radius");
    solve->add_option("--max-iters", solve_config.solver.max_iters, "iteration cap");
    solve->add_option("--msvpg-lr", solve_config.msvpg_learning_rate, "gradient step size");
    solve->add_option("--msvpg-iters", solve_config.msvpg_iters, "gradient steps");
    solve->add_option("--out", solve_out, "output directory for trace and policy");

    // ---- sample ------------------------------------------------------------
    EnvFlags sample_env;
    std::string sample_algo = "msvac";
    double sample_beta = 1.0;
    std::uint64_t sample_seed = 1;
    std::string sample_out;
    std::string sample_gae_sign = "standard";
    std::string sample_actor_reward = "g";
    ExperimentConfig sample_config;
    CLI::App* sample = app.add_subcommand("sample", "run a sample-based learner once");
    add_env_flags(sample, sample_env);
    sample->add_option("--algo", sample_algo, "msvac | msvpo")->default_val("msvac");
    sample->add_option("--beta", sample_beta, "risk trade-off");
    sample->add_option("--seed", sample_seed, "rollout seed");
    sample->add_option("--alpha", sample_config.sampling.alpha, "estimator mixing rate");
    sample->add_option("--lr", sample_config.sampling.policy_lr, "policy learning rate");
    sample->add_option("--value-lr", sample_config.sampling.value_lr, "value learning rate");
    sample->add_option("--batch", sample_config.sampling.batch_size, "steps per update");
    sample->add_option("--iters", sample_config.sample_iters, "update rounds");
    sample->add_option("--clip", sample_config.sampling.clip, "ratio clip half-width");
    sample->add_option("--epochs", sample_config.sampling.epochs, "epochs per batch");
    sample->add_option("--gae-lambda", sample_config.sampling.gae_lambda, "advantage decay");
    sample->add_option("--gae-sign", sample_gae_sign, "standard | paper");
    sample->add_option("--actor-reward", sample_actor_reward, "g | f");
    sample->add_option("--out", sample_out, "output directory for trace and policy");

    // ---- sweep -------------------------------------------------------------
    EnvFlags sweep_env;
    std::string sweep_config_path;
    std::vector<std::string> sweep_algos;
    std::vector<double> sweep_beta_grid;
    std::vector<std::uint64_t> sweep_seeds;
    std::string sweep_out;
    std::string sweep_gae_sign;
    double sweep_eps_mu = -1.0, sweep_alpha = -1.0;
    bool sweep_normalized = false;
    int sweep_threads = 0;
    CLI::App* sweep = app.add_subcommand("sweep", "run a beta grid of cells");
    add_env_flags(sweep, sweep_env);
    sweep->add_option("--config", sweep_config_path, "experiment config file (json)");
    sweep->add_option("--algo", sweep_algos, "algorithms to run (repeatable)");
    sweep->add_option("--beta-grid", sweep_beta_grid, "beta values (repeatable)");
    sweep->add_option("--seeds", sweep_seeds, "seed list (repeatable)");
    sweep->add_option("--eps-mu", sweep_eps_mu, "KL trust-region radius");
    sweep->add_option("--alpha", sweep_alpha, "estimator mixing rate");
    sweep->add_option("--gae-sign", sweep_gae_sign, "standard | paper");
    sweep->add_flag("--normalized-msv", sweep_normalized,
                    "double beta for the downside-criterion algorithms");
    sweep->add_option("--threads", sweep_threads, "worker pool size (0 = all cores)");
    sweep->add_option("--out", sweep_out, "output directory");

    // ---- eval --------------------------------------------------------------
    std::string eval_mdp, eval_policy;
    double eval_beta = 1.0;
    CLI::App* eval = app.add_subcommand("eval", "exact statistics of a stored policy");
    eval->add_option("--mdp-file", eval_mdp, "mdp file")->required();
    eval->add_option("--policy-file", eval_policy, "policy file")->required();
    eval->add_option("--beta", eval_beta, "risk trade-off for the criterion column");

    // ---- hist --------------------------------------------------------------
    EnvFlags hist_env;
    std::string hist_policy_file, hist_out;
    int hist_steps = 1000000, hist_bins = 60, hist_burn_in = 1000;
    std::uint64_t hist_seed = 1;
    CLI::App* hist = app.add_subcommand("hist", "simulated steady reward histogram");
    add_env_flags(hist, hist_env);
    hist->add_option("--policy-file", hist_policy_file, "policy file (default: uniform)");
    hist->add_option("--steps", hist_steps, "simulated steps after burn-in");
    hist->add_option("--seed", hist_seed, "simulation seed");
    hist->add_option("--bins", hist_bins, "histogram bins");
    hist->add_option("--burn-in", hist_burn_in, "discarded steps");
    hist->add_option("--out", hist_out, "output csv (default: stdout)");

    // ---- verify ------------------------------------------------------------
    std::uint64_t verify_seed = 0;
    int verify_instances = 100;
    double verify_bias = 0.0;
    CLI::App* verify = app.add_subcommand("verify", "exactness checks on random instances");
    verify->add_option("--seed", verify_seed, "suite seed");
    verify->add_option("--instances", verify_instances, "number of random instances");
    verify->add_option("--adv-bias", verify_bias,
                       "test hook: bias injected into the identity check");

    // ---- env ---------------------------------------------------------------
    CLI::App* env = app.add_subcommand("env", "environment utilities");
    env->require_subcommand(1);
    EnvFlags export_env;
    std::string export_out;
    CLI::App* env_export = env->add_subcommand("export", "write an environment to a file");
    add_env_flags(env_export, export_env);
    env_export->add_option("--out", export_out, "output mdp file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            ExperimentConfig config = solve_config;
            apply_env_flags(config, solve_env);
            config.algorithms = {solve_algo};
            config.beta_grid = {solve_beta};
            config.seeds = {solve_seed};
            config.out_dir = solve_out;
            config.validate();
            TabularMdp mdp = build_environment(config);
            FrontierRow row = run_cell(mdp, config, solve_algo, solve_beta, solve_seed);
            print_row(row);
            return row.converged ? 0 : 2;
        }

        if (sample->parsed()) {
            ExperimentConfig config = sample_config;
            apply_env_flags(config, sample_env);
            config.sampling.gae_sign = parse_gae_sign(sample_gae_sign);
            config.sampling.actor_reward =
                sample_actor_reward == "f" ? ActorReward::f : ActorReward::g;
            config.algorithms = {sample_algo};
            config.beta_grid = {sample_beta};
            config.seeds = {sample_seed};
            config.out_dir = sample_out;
            config.validate();
            TabularMdp mdp = build_environment(config);
            FrontierRow row = run_cell(mdp, config, sample_algo, sample_beta, sample_seed);
            print_row(row);
            return 0;
        }

        if (sweep->parsed()) {
            ExperimentConfig config;
            if (!sweep_config_path.empty()) {
                std::ifstream in(sweep_config_path);
                if (!in) throw ValidationError("cannot open config: " + sweep_config_path);
                json doc;
                in >> doc;
                config = experiment_config_from_json(doc);
            }
            if (sweep->count("--env") > 0 || sweep_config_path.empty())
                apply_env_flags(config, sweep_env);
            if (!sweep_algos.empty()) config.algorithms = sweep_algos;
            if (!sweep_beta_grid.empty()) config.beta_grid = sweep_beta_grid;
            if (!sweep_seeds.empty()) config.seeds = sweep_seeds;
            if (sweep_eps_mu > 0.0) config.solver.eps_mu = sweep_eps_mu;
            if (sweep_alpha > 0.0) config.sampling.alpha = sweep_alpha;
            if (!sweep_gae_sign.empty())
                config.sampling.gae_sign = parse_gae_sign(sweep_gae_sign);
            if (sweep_normalized) config.normalized_msv = true;
            if (sweep_threads > 0) config.threads = sweep_threads;
            if (!sweep_out.empty()) config.out_dir = sweep_out;
            config.validate();

            ExperimentReport report = run_experiment(config);
            std::printf("cells completed: %zu, failed: %zu\n", report.rows.size(),
                        report.failures.size());
            for (const std::string& f : report.failures)
                std::fprintf(stderr, "failure: %s\n", f.c_str());
            std::printf("outputs in %s\n", config.out_dir.c_str());
            return report.failures.empty() ? 0 : 1;
        }

        if (eval->parsed()) {
            RiskStats stats = evaluate_policy(eval_mdp, eval_policy);
            std::printf("eta,zeta,zeta_minus,eta_minus,xi_minus,beta\n");
            std::printf("%s,%s,%s,%s,%s,%s\n", csv_format(stats.eta).c_str(),
                        csv_format(stats.zeta).c_str(), csv_format(stats.zeta_minus).c_str(),
                        csv_format(stats.eta_minus).c_str(),
                        csv_format(msv_value(stats, eval_beta)).c_str(),
                        csv_format(eval_beta).c_str());
            return 0;
        }

        if (hist->parsed()) {
            ExperimentConfig config;
            apply_env_flags(config, hist_env);
            TabularMdp mdp = build_environment(config);
            TabularPolicy policy =
                hist_policy_file.empty()
                    ? TabularPolicy::uniform(mdp.n_states(), mdp.n_actions())
                    : load_policy(hist_policy_file);
            auto bins =
                reward_histogram(mdp, policy, hist_steps, hist_seed, hist_bins, hist_burn_in);
            if (hist_out.empty()) {
                std::printf("bin_left,bin_right,count\n");
                for (const HistogramBin& b : bins)
                    std::printf("%s,%s,%lld\n", csv_format(b.left).c_str(),
                                csv_format(b.right).c_str(), b.count);
            } else {
                save_histogram(bins, hist_out);
                std::printf("histogram written to %s\n", hist_out.c_str());
            }
            return 0;
        }

        if (verify->parsed()) {
            VerifyOptions options;
            options.advantage_bias = verify_bias;
            VerifyReport report = verify_suite(verify_seed, verify_instances, options);
            std::printf("instances: %d\n", report.instances);
            std::printf("identity failures: %d\n", report.identity_failures);
            std::printf("derivative failures: %d\n", report.derivative_failures);
            std::printf("gradient failures: %d\n", report.gradient_failures);
            std::printf("distribution-shift failures: %d\n", report.lemma_failures);
            std::printf("improvement-bound failures: %d\n", report.bound_failures);
            for (const std::string& f : report.failures)
                std::fprintf(stderr, "failure: %s\n", f.c_str());
            std::printf(report.passed() ? "all checks passed\n" : "checks FAILED\n");
            return report.passed() ? 0 : 1;
        }

        if (env_export->parsed()) {
            ExperimentConfig config;
            apply_env_flags(config, export_env);
            TabularMdp mdp = build_environment(config);
            save_mdp(mdp, export_out);
            std::printf("wrote %s (%d states, %d actions)\n", export_out.c_str(),
                        mdp.n_states(), mdp.n_actions());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
