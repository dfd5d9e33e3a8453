#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "semivar/environments.hpp"
#include "semivar/io.hpp"
#include "semivar/risk.hpp"
#include "semivar/sampling.hpp"
#include "semivar/solvers.hpp"

namespace semivar {

// ---------------------------------------------------------------------------
// experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    // environment selection
    std::string environment = "figure1"; // figure1 | bandit | portfolio | random | file
    int bandit_quantiles = 64;
    int random_states = 5;
    int random_actions = 3;
    std::uint64_t random_seed = 0;
    double random_reward_scale = 1.0;
    std::string mdp_file;

    std::vector<std::string> algorithms = {"msvtrpi"};
    SolverConfig solver;
    SamplingConfig sampling;
    int sample_iters = 2000;      // update rounds for the sample-based algorithms
    double msvpg_learning_rate = 0.5;
    int msvpg_iters = 2000;

    std::vector<double> beta_grid = {0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0};
    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = "out";
    bool normalized_msv = false; // double beta for the downside-criterion algorithms
    int threads = 0;             // 0 = hardware concurrency (capped by SEMIVAR_RL_THREADS)
    int eval_steps = 100000;
    int burn_in = 1000;

    void validate() const {
        if (beta_grid.empty()) throw ValidationError("experiment: beta grid must be nonempty");
        for (double b : beta_grid)
            if (b < 0.0) throw ValidationError("experiment: beta grid must be nonnegative");
        if (seeds.empty()) throw ValidationError("experiment: seed list must be nonempty");
        for (std::size_t i = 0; i < seeds.size(); ++i)
            for (std::size_t j = i + 1; j < seeds.size(); ++j)
                if (seeds[i] == seeds[j])
                    throw ValidationError("experiment: seeds must be distinct");
        if (algorithms.empty())
            throw ValidationError("experiment: algorithm list must be nonempty");
        for (const std::string& algo : algorithms)
            if (algo != "msvtrpi" && algo != "mvpi" && algo != "msvpg" && algo != "msvac" &&
                algo != "msvpo")
                throw ValidationError("experiment: unknown algorithm " + algo);
        if (environment != "figure1" && environment != "bandit" && environment != "portfolio" &&
            environment != "random" && environment != "file")
            throw ValidationError("experiment: unknown environment " + environment);
        if (environment == "file" && mdp_file.empty())
            throw ValidationError("experiment: environment 'file' needs mdp_file");
        solver.validate();
        sampling.validate();
    }
};

inline json experiment_config_to_json(const ExperimentConfig& c) {
    json doc;
    doc["environment"] = c.environment;
    doc["bandit_quantiles"] = c.bandit_quantiles;
    doc["random_states"] = c.random_states;
    doc["random_actions"] = c.random_actions;
    doc["random_seed"] = c.random_seed;
    doc["random_reward_scale"] = c.random_reward_scale;
    doc["mdp_file"] = c.mdp_file;
    doc["algorithms"] = c.algorithms;
    doc["solver"] = {{"eps_mu", c.solver.eps_mu},
                     {"max_iters", c.solver.max_iters},
                     {"convergence_tol_xi", c.solver.convergence_tol_xi},
                     {"convergence_tol_tv", c.solver.convergence_tol_tv},
                     {"dual_lo", c.solver.dual_lo},
                     {"dual_hi", c.solver.dual_hi},
                     {"dual_tol", c.solver.dual_tol},
                     {"bound_terms_max_states", c.solver.bound_terms_max_states},
                     {"force_bound_terms", c.solver.force_bound_terms}};
    doc["sampling"] = {{"alpha", c.sampling.alpha},
                       {"policy_lr", c.sampling.policy_lr},
                       {"value_lr", c.sampling.value_lr},
                       {"gae_lambda", c.sampling.gae_lambda},
                       {"gae_sign", c.sampling.gae_sign == GaeSign::standard ? "standard" : "paper"},
                       {"clip", c.sampling.clip},
                       {"epochs", c.sampling.epochs},
                       {"batch_size", c.sampling.batch_size},
                       {"avc_coef", c.sampling.avc_coef},
                       {"actor_reward", c.sampling.actor_reward == ActorReward::g ? "g" : "f"}};
    doc["sample_iters"] = c.sample_iters;
    doc["msvpg_learning_rate"] = c.msvpg_learning_rate;
    doc["msvpg_iters"] = c.msvpg_iters;
    doc["beta_grid"] = c.beta_grid;
    doc["seeds"] = c.seeds;
    doc["out_dir"] = c.out_dir;
    doc["normalized_msv"] = c.normalized_msv;
    doc["threads"] = c.threads;
    doc["eval_steps"] = c.eval_steps;
    doc["burn_in"] = c.burn_in;
    return doc;
}

inline ExperimentConfig experiment_config_from_json(const json& doc) {
    ExperimentConfig c;
    auto get = [&](const char* key, auto& field) {
        using T = std::remove_reference_t<decltype(field)>;
        if (doc.contains(key)) field = doc[key].get<T>();
    };
    get("environment", c.environment);
    get("bandit_quantiles", c.bandit_quantiles);
    get("random_states", c.random_states);
    get("random_actions", c.random_actions);
    get("random_seed", c.random_seed);
    get("random_reward_scale", c.random_reward_scale);
    get("mdp_file", c.mdp_file);
    get("algorithms", c.algorithms);
    if (doc.contains("solver")) {
        const json& s = doc["solver"];
        auto gets = [&](const char* key, auto& field) {
            using T = std::remove_reference_t<decltype(field)>;
            if (s.contains(key)) field = s[key].get<T>();
        };
        gets("eps_mu", c.solver.eps_mu);
        gets("max_iters", c.solver.max_iters);
        gets("convergence_tol_xi", c.solver.convergence_tol_xi);
        gets("convergence_tol_tv", c.solver.convergence_tol_tv);
        gets("dual_lo", c.solver.dual_lo);
        gets("dual_hi", c.solver.dual_hi);
        gets("dual_tol", c.solver.dual_tol);
        gets("bound_terms_max_states", c.solver.bound_terms_max_states);
        gets("force_bound_terms", c.solver.force_bound_terms);
    }
    if (doc.contains("sampling")) {
        const json& s = doc["sampling"];
        auto gets = [&](const char* key, auto& field) {
            using T = std::remove_reference_t<decltype(field)>;
            if (s.contains(key)) field = s[key].get<T>();
        };
        gets("alpha", c.sampling.alpha);
        gets("policy_lr", c.sampling.policy_lr);
        gets("value_lr", c.sampling.value_lr);
        gets("gae_lambda", c.sampling.gae_lambda);
        gets("clip", c.sampling.clip);
        gets("epochs", c.sampling.epochs);
        gets("batch_size", c.sampling.batch_size);
        gets("avc_coef", c.sampling.avc_coef);
        if (s.contains("gae_sign"))
            c.sampling.gae_sign =
                s["gae_sign"].get<std::string>() == "paper" ? GaeSign::paper : GaeSign::standard;
        if (s.contains("actor_reward"))
            c.sampling.actor_reward =
                s["actor_reward"].get<std::string>() == "f" ? ActorReward::f : ActorReward::g;
    }
    get("sample_iters", c.sample_iters);
    get("msvpg_learning_rate", c.msvpg_learning_rate);
    get("msvpg_iters", c.msvpg_iters);
    get("beta_grid", c.beta_grid);
    get("seeds", c.seeds);
    get("out_dir", c.out_dir);
    get("normalized_msv", c.normalized_msv);
    get("threads", c.threads);
    get("eval_steps", c.eval_steps);
    get("burn_in", c.burn_in);
    return c;
}

inline TabularMdp build_environment(const ExperimentConfig& c) {
    if (c.environment == "figure1") return figure1_mdp();
    if (c.environment == "bandit")
        return bandit_as_mdp(BanditSpec::standard(), c.bandit_quantiles);
    if (c.environment == "portfolio") return portfolio_mdp(PortfolioConfig::defaults());
    if (c.environment == "random")
        return random_ergodic_mdp(c.random_states, c.random_actions, c.random_seed,
                                  c.random_reward_scale);
    if (c.environment == "file") return load_mdp(c.mdp_file);
    throw ValidationError("unknown environment: " + c.environment);
}

// ---------------------------------------------------------------------------
// sweep runner
// ---------------------------------------------------------------------------

struct FrontierRow {
    double beta = 0.0;
    std::string algorithm;
    std::uint64_t seed = 0;
    double eta = 0.0;
    double zeta = 0.0;
    double zeta_minus = 0.0;
    double xi_minus = 0.0;
    int iterations = 0;
    bool converged = false;
    double wall_time = 0.0;
};

struct ExperimentReport {
    std::vector<FrontierRow> rows;
    std::vector<std::string> failures; // "cell: message" per failed cell
};

namespace detail {

inline int worker_pool_size(int requested) {
    int n = requested > 0 ? requested
                          : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* cap = std::getenv("SEMIVAR_RL_THREADS")) {
        int limit = std::atoi(cap);
        if (limit > 0) n = std::min(n, limit);
    }
    return n;
}

inline bool is_msv_family(const std::string& algo) { return algo != "mvpi"; }

inline std::string cell_name(const std::string& algo, double beta, std::uint64_t seed) {
    std::ostringstream name;
    name << algo << "_beta" << beta << "_seed" << seed;
    return name.str();
}

/// Runs the sample-based loop for one cell and returns the final state plus
/// a training trace of the running estimates.
struct SampleRun {
    TabularPolicy policy;
    RunningStats stats;
    std::vector<std::array<double, 3>> curve; // eta_hat, zeta_minus_hat, xi_hat
    int iterations = 0;
};

inline SampleRun run_sample_algorithm(const std::string& algo, const TabularMdp& mdp,
                                      const SamplingConfig& sampling, int iters,
                                      std::uint64_t seed) {
    SampleRun out{TabularPolicy::uniform(mdp.n_states(), mdp.n_actions()), RunningStats{}, {}, 0};
    out.stats.alpha = sampling.alpha;
    ValueTable values = ValueTable::zeros(mdp.n_states(), sampling.value_lr);
    Simulator sim(mdp, seed);
    for (int k = 0; k < iters; ++k) {
        Batch batch = sim.run(out.policy, sampling.batch_size);
        SampleUpdateResult step =
            algo == "msvac" ? msvac_update(out.policy, values, out.stats, batch, sampling)
                            : msvpo_update(out.policy, values, out.stats, batch, sampling);
        out.policy = step.policy;
        values = step.values;
        out.stats = step.stats;
        double xi_hat = out.stats.eta_hat - sampling.beta * out.stats.zeta_minus_hat;
        out.curve.push_back({out.stats.eta_hat, out.stats.zeta_minus_hat, xi_hat});
        ++out.iterations;
    }
    return out;
}

} // namespace detail

/// Runs one (algorithm, beta, seed) cell against a prebuilt environment.
/// Writes trace_<cell>.csv and policy_<cell>.json into out_dir when set.
inline FrontierRow run_cell(const TabularMdp& mdp, const ExperimentConfig& config,
                            const std::string& algo, double beta, std::uint64_t seed) {
    auto t0 = std::chrono::steady_clock::now();
    double effective_beta =
        (config.normalized_msv && detail::is_msv_family(algo)) ? 2.0 * beta : beta;

    FrontierRow row;
    row.beta = beta;
    row.algorithm = algo;
    row.seed = seed;

    TabularPolicy policy = TabularPolicy::uniform(mdp.n_states(), mdp.n_actions());
    RiskStats stats;
    bool wrote_trace = false;
    std::string trace_path;
    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        trace_path = config.out_dir + "/trace_" + detail::cell_name(algo, beta, seed) + ".csv";
    }

    if (algo == "msvtrpi" || algo == "mvpi" || algo == "msvpg") {
        SolverConfig solver = config.solver;
        solver.beta = effective_beta;
        SolveResult result =
            algo == "msvtrpi" ? msvtrpi(mdp, solver)
            : algo == "mvpi"
                ? mvpi(mdp, solver)
                : msvpg_ascent(mdp, TabularPolicy::uniform(mdp.n_states(), mdp.n_actions()),
                               solver, config.msvpg_learning_rate, config.msvpg_iters);
        policy = result.policy;
        stats = result.stats;
        row.iterations = result.iterations;
        row.converged = result.converged;
        if (!trace_path.empty()) {
            CsvWriter trace(trace_path,
                            {"iteration", "eta", "zeta_minus", "xi_minus", "kl_step",
                             "dual_temperature", "optimality_residual", "lower_bound_rhs"});
            for (std::size_t k = 0; k < result.trace.size(); ++k) {
                const IterationRecord& rec = result.trace[k];
                trace.write_row({std::to_string(k), csv_format(rec.eta),
                                 csv_format(rec.zeta_minus), csv_format(rec.xi_minus),
                                 csv_format(rec.kl_step), csv_format(rec.dual_temperature),
                                 csv_format(rec.optimality_residual),
                                 csv_format(rec.lower_bound_rhs)});
            }
            wrote_trace = true;
        }
    } else {
        SamplingConfig sampling = config.sampling;
        sampling.beta = effective_beta;
        detail::SampleRun run = detail::run_sample_algorithm(algo, mdp, sampling,
                                                             config.sample_iters, seed);
        policy = run.policy;
        stats = risk_stats(mdp, policy);
        row.iterations = run.iterations;
        row.converged = true;
        if (!trace_path.empty()) {
            CsvWriter trace(trace_path, {"iteration", "eta_hat", "zeta_minus_hat", "xi_hat"});
            for (std::size_t k = 0; k < run.curve.size(); ++k)
                trace.write_row({std::to_string(k), csv_format(run.curve[k][0]),
                                 csv_format(run.curve[k][1]), csv_format(run.curve[k][2])});
            wrote_trace = true;
        }
    }

    if (algo == "msvtrpi" || algo == "msvpg") {
        // exact solvers report exact statistics of the final policy
        stats = risk_stats(mdp, policy);
    }
    row.eta = stats.eta;
    row.zeta = stats.zeta;
    row.zeta_minus = stats.zeta_minus;
    row.xi_minus = msv_value(stats, effective_beta);
    row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!config.out_dir.empty()) {
        save_policy(policy, config.out_dir + "/policy_" +
                                detail::cell_name(algo, beta, seed) + ".json");
    }
    (void)wrote_trace;
    return row;
}

/// Executes every (algorithm, beta, seed) cell on a shared worker pool,
/// writes frontier.csv, per-cell traces and report.txt, and echoes the
/// resolved configuration for provenance. Per-cell failures are recorded and
/// do not abort the remaining cells.
inline ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    TabularMdp mdp = build_environment(config);

    struct Cell {
        std::string algo;
        double beta;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const std::string& algo : config.algorithms)
        for (double beta : config.beta_grid)
            for (std::uint64_t seed : config.seeds) cells.push_back({algo, beta, seed});

    ExperimentReport report;
    report.rows.resize(cells.size());
    std::vector<char> ok(cells.size(), 0);
    std::vector<std::string> errors(cells.size());

    std::atomic<std::size_t> next{0};
    int pool = detail::worker_pool_size(config.threads);
    auto worker = [&]() {
        while (true) {
            std::size_t k = next.fetch_add(1);
            if (k >= cells.size()) break;
            try {
                report.rows[k] =
                    run_cell(mdp, config, cells[k].algo, cells[k].beta, cells[k].seed);
                ok[k] = 1;
            } catch (const std::exception& e) {
                errors[k] = detail::cell_name(cells[k].algo, cells[k].beta, cells[k].seed) +
                            ": " + e.what();
            }
        }
    };
    std::vector<std::thread> threads;
    for (int t = 1; t < pool; ++t) threads.emplace_back(worker);
    worker();
    for (std::thread& t : threads) t.join();

    std::vector<FrontierRow> rows;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (ok[k])
            rows.push_back(report.rows[k]);
        else
            report.failures.push_back(errors[k]);
    }
    report.rows = std::move(rows);

    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        {
            std::ofstream echo(config.out_dir + "/config.json");
            echo << experiment_config_to_json(config).dump(1) << "\n";
        }
        CsvWriter frontier(config.out_dir + "/frontier.csv",
                           {"beta", "algorithm", "seed", "eta", "zeta", "zeta_minus",
                            "xi_minus", "iterations", "converged", "wall_time"});
        for (const FrontierRow& row : report.rows)
            frontier.write_row({csv_format(row.beta), row.algorithm, std::to_string(row.seed),
                                csv_format(row.eta), csv_format(row.zeta),
                                csv_format(row.zeta_minus), csv_format(row.xi_minus),
                                std::to_string(row.iterations),
                                row.converged ? "1" : "0", csv_format(row.wall_time)});
        std::ofstream rep(config.out_dir + "/report.txt");
        rep << "cells: " << cells.size() << "\n";
        rep << "completed: " << report.rows.size() << "\n";
        rep << "failed: " << report.failures.size() << "\n";
        for (const std::string& f : report.failures) rep << "failure: " << f << "\n";
    }
    return report;
}

// ---------------------------------------------------------------------------
// policy evaluation and histograms
// ---------------------------------------------------------------------------

/// Exact steady statistics of a stored policy on a stored MDP.
inline RiskStats evaluate_policy(const std::string& mdp_path, const std::string& policy_path) {
    TabularMdp mdp = load_mdp(mdp_path);
    TabularPolicy policy = load_policy(policy_path);
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw DimensionError("evaluate_policy: policy is " + std::to_string(policy.n_states()) +
                             "x" + std::to_string(policy.n_actions()) + ", mdp needs " +
                             std::to_string(mdp.n_states()) + "x" +
                             std::to_string(mdp.n_actions()));
    return risk_stats(mdp, policy);
}

struct HistogramBin {
    double left = 0.0;
    double right = 0.0;
    long long count = 0;
};

/// Histogram of the steady per-step reward after burn-in.
inline std::vector<HistogramBin> reward_histogram(const TabularMdp& mdp,
                                                  const TabularPolicy& policy, int n_steps,
                                                  std::uint64_t seed, int n_bins,
                                                  int burn_in = 1000) {
    if (n_steps < 1) throw ValidationError("reward_histogram: n_steps must be >= 1");
    if (n_bins < 1) throw ValidationError("reward_histogram: n_bins must be >= 1");
    Simulator sim(mdp, seed);
    sim.burn_in(policy, burn_in);
    Batch batch = sim.run(policy, n_steps);
    double lo = batch.steps[0].reward, hi = lo;
    for (const Transition& t : batch.steps) {
        lo = std::min(lo, t.reward);
        hi = std::max(hi, t.reward);
    }
    std::vector<HistogramBin> bins(static_cast<std::size_t>(n_bins));
    if (hi <= lo) {
        // degenerate stream: one occupied bin
        bins.assign(1, {lo, hi, static_cast<long long>(batch.steps.size())});
        return bins;
    }
    double width = (hi - lo) / n_bins;
    for (int b = 0; b < n_bins; ++b) {
        bins[static_cast<std::size_t>(b)].left = lo + b * width;
        bins[static_cast<std::size_t>(b)].right = lo + (b + 1) * width;
    }
    for (const Transition& t : batch.steps) {
        int b = std::min(n_bins - 1, static_cast<int>((t.reward - lo) / width));
        bins[static_cast<std::size_t>(b)].count += 1;
    }
    return bins;
}

inline void save_histogram(const std::vector<HistogramBin>& bins, const std::string& path) {
    CsvWriter out(path, {"bin_left", "bin_right", "count"});
    for (const HistogramBin& b : bins)
        out.write_row({csv_format(b.left), csv_format(b.right), std::to_string(b.count)});
}

// ---------------------------------------------------------------------------
// verification suite
// ---------------------------------------------------------------------------

struct VerifyOptions {
    int max_states = 6;
    int max_actions = 6;
    double advantage_bias = 0.0; // test instrumentation: corrupts the identity check
};

struct VerifyReport {
    int instances = 0;
    int identity_failures = 0;
    int derivative_failures = 0;
    int gradient_failures = 0;
    int lemma_failures = 0;
    int bound_failures = 0;
    std::vector<std::string> failures;

    bool passed() const { return failures.empty(); }
};

/// One-command execution of the exactness checks on random instances: the
/// two-sided difference identity, derivative and gradient against central
/// finite differences, the state-action distribution-shift bound, and the
/// trust-region improvement bound on a realized step. Failures carry the
/// instance seed for replay.
inline VerifyReport verify_suite(std::uint64_t seed, int n_instances,
                                 VerifyOptions options = {}) {
    if (n_instances < 1) throw ValidationError("verify_suite: n_instances must be >= 1");
    VerifyReport report;
    Rng pick(seed);
    for (int i = 0; i < n_instances; ++i) {
        std::uint64_t inst_seed = pick.raw();
        int S = 2 + static_cast<int>(pick.raw() % static_cast<std::uint64_t>(options.max_states - 1));
        int A = 2 + static_cast<int>(pick.raw() % static_cast<std::uint64_t>(options.max_actions - 1));
        double beta = 0.5 * static_cast<double>(pick.raw() % 5);
        ++report.instances;
        auto fail = [&](const char* check, const std::string& detail) {
            report.failures.push_back(std::string(check) + " seed=" + std::to_string(inst_seed) +
                                      " S=" + std::to_string(S) + " A=" + std::to_string(A) +
                                      " beta=" + std::to_string(beta) + ": " + detail);
        };
        try {
            TabularMdp mdp = random_ergodic_mdp(S, A, inst_seed);
            TabularPolicy mu = random_policy(S, A, inst_seed + 1);
            TabularPolicy mu_prime = random_policy(S, A, inst_seed + 2);

            // two-sided difference identity
            MsvDiffReport diff = msv_difference_exact(mdp, mu, mu_prime, beta);
            double gap = std::abs(diff.lhs - (diff.rhs + options.advantage_bias));
            if (gap > 1e-8) {
                ++report.identity_failures;
                fail("identity", "gap " + std::to_string(gap));
            }

            // derivative against central finite differences
            double exact_d = msv_directional_derivative(mdp, mu, mu_prime, beta);
            double h = 1e-5;
            double fd_d = (msv_value(mdp, mu.mix(mu_prime, h), beta) -
                           msv_value(mdp, mu.mix(mu_prime, -h), beta)) /
                          (2.0 * h);
            if (std::abs(exact_d - fd_d) > 1e-4 * std::max(1.0, std::abs(fd_d))) {
                ++report.derivative_failures;
                fail("derivative", "exact " + std::to_string(exact_d) + " fd " +
                                       std::to_string(fd_d));
            }

            // gradient against central finite differences over logits
            Matrix exact_g = msv_policy_gradient_exact(mdp, mu, beta);
            Matrix fd_g(S, A);
            double hg = 1e-6;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    Matrix up = mu.logits(), dn = mu.logits();
                    up(s, a) += hg;
                    dn(s, a) -= hg;
                    fd_g(s, a) = (msv_value(mdp, TabularPolicy::from_logits(up), beta) -
                                  msv_value(mdp, TabularPolicy::from_logits(dn), beta)) /
                                 (2.0 * hg);
                }
            double scale = std::max(fd_g.cwiseAbs().maxCoeff(), 1e-12);
            if ((exact_g - fd_g).cwiseAbs().maxCoeff() / scale > 1e-6) {
                ++report.gradient_failures;
                fail("gradient",
                     "rel err " +
                         std::to_string((exact_g - fd_g).cwiseAbs().maxCoeff() / scale));
            }

            // distribution-shift bound and improvement bound on a realized step
            SolverConfig solver;
            solver.beta = beta;
            solver.eps_mu = 0.05;
            auto [next, diag] = msvtrpi_step(mdp, mu, solver);
            TrustRegionBoundReport bound = trust_region_bound_report(mdp, mu, next, beta);
            if (!bound.lemma_holds) {
                ++report.lemma_failures;
                fail("lemma", "rho_l1 " + std::to_string(bound.rho_l1) + " bound " +
                                  std::to_string(bound.rho_l1_bound));
            }
            if (!bound.bound_holds) {
                ++report.bound_failures;
                fail("bound", "lhs " + std::to_string(bound.lhs) + " rhs " +
                                  std::to_string(bound.rhs));
            }
        } catch (const std::exception& e) {
            fail("exception", e.what());
        }
    }
    return report;
}

} // namespace semivar
