// mixcast: experiment runner for online prediction on mixing sources.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "mixcast/blocking.hpp"
#include "mixcast/config.hpp"
#include "mixcast/errors.hpp"
#include "mixcast/harness.hpp"
#include "mixcast/oracle.hpp"
#include "mixcast/rng.hpp"
#include "mixcast/svg.hpp"

namespace fs = std::filesystem;
using namespace mixcast;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join_states(const std::vector<int>& states) {
    std::string out;
    for (std::size_t i = 0; i < states.size(); ++i)
        out += (i ? "|" : "") + std::to_string(states[i]);
    return out;
}

std::string join_values(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "|" : "") + fmt(xs[i]);
    return out;
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool per_step = false;
};

ExperimentConfig load_config(const CommonOpts& opts) {
    if (opts.config_path.empty()) throw ConfigError("--config is required");
    auto cfg = ExperimentConfig::load(opts.config_path);
    if (opts.seed) cfg.seeds = {*opts.seed};
    if (!opts.out.empty()) cfg.out_dir = opts.out;
    return cfg;
}

Trajectory sample_configured(const ExperimentConfig& cfg, const MarkovProcess* markov,
                             std::uint64_t seed) {
    if (markov) return markov->sample(cfg.T, seed);
    return sample_ar(cfg.make_ar(), cfg.T, seed);
}

// ---- simulate ----------------------------------------------------------

void cmd_simulate(const CommonOpts& opts) {
    const auto cfg = load_config(opts);
    std::optional<MarkovProcess> markov;
    if (cfg.process_kind == "markov") markov = cfg.make_markov();
    fs::create_directories(cfg.out_dir);
    for (const auto seed : cfg.seeds) {
        const auto traj = sample_configured(cfg, markov ? &*markov : nullptr, seed);
        write_trajectory_csv(traj, cfg.out_dir + "/traj_" + std::to_string(seed) + ".csv");
    }
    std::cout << "wrote " << cfg.seeds.size() << " trajectories to " << cfg.out_dir << "\n";
}

// ---- oracle ------------------------------------------------------------

void cmd_oracle(const CommonOpts& opts) {
    const auto cfg = load_config(opts);
    if (cfg.process_kind != "markov")
        throw UnsupportedError("the optimal risk is only exact for finite Markov sources");
    const auto p = cfg.make_markov();
    const auto opt = optimal_risk(p, cfg.make_loss(), cfg.context_len());
    std::cout << "L_star," << fmt(opt.value) << "\n";
    std::cout << "context,action,risk\n";
    for (const auto& pc : opt.per_context)
        std::cout << join_states(pc.context) << ',' << join_values(pc.opt.action) << ','
                  << fmt(pc.opt.risk) << "\n";
}

// ---- bounds ------------------------------------------------------------

struct BoundsOpts {
    std::vector<double> horizons;
    double epsilon = 0.1;
    double L = 0.0;  // 0: use the schedule at T
    double C1 = 1.0, C2 = 1.0;
    bool use_mu = false;  // evaluate the tail at mu_T instead of T
};

void cmd_bounds(const CommonOpts& opts, const BoundsOpts& b) {
    const auto cfg = load_config(opts);
    if (cfg.process_kind != "markov")
        throw UnsupportedError("exact beta coefficients need a finite Markov source");
    const auto p = cfg.make_markov();
    const int d = cfg.context_len();
    const int m_eff = d * cfg.dim;
    std::cout << "T,mu,a,beta_a,beta_a_minus_d,D,tail\n";
    for (const double T : b.horizons) {
        const auto counts = default_block_counts(static_cast<std::size_t>(T));
        const double L = b.L > 0.0 ? b.L : Schedule{cfg.L0, m_eff}(T);
        const double beta_a = p.beta(static_cast<int>(counts.a));
        const double beta_shift = counts.a > static_cast<std::size_t>(d)
                                      ? p.beta(static_cast<int>(counts.a) - d)
                                      : 1.0;
        const double base = b.use_mu ? static_cast<double>(counts.mu) : T;
        const auto report = concentration_bound(base, b.epsilon, L, m_eff, b.C1, b.C2);
        std::cout << T << ',' << counts.mu << ',' << counts.a << ',' << fmt(beta_a) << ','
                  << fmt(beta_shift) << ',' << fmt(report.D) << ',' << fmt(report.tail) << "\n";
    }
}

// ---- blocks ------------------------------------------------------------

void cmd_blocks(const CommonOpts& opts, std::size_t deviation_seeds) {
    const auto cfg = load_config(opts);
    const auto counts = default_block_counts(cfg.T);
    const auto part = block_partition(cfg.T, counts.mu, counts.a);
    std::cout << "j,kind,start,end\n";
    for (std::size_t j = 0; j < part.mu; ++j) {
        std::cout << (j + 1) << ",H," << part.h_blocks[j].front() << ','
                  << part.h_blocks[j].back() << "\n";
        std::cout << (j + 1) << ",T," << part.t_blocks[j].front() << ','
                  << part.t_blocks[j].back() << "\n";
    }
    if (!part.remainder.empty())
        std::cout << "0,R," << part.remainder.front() << ',' << part.remainder.back() << "\n";

    if (deviation_seeds > 0) {
        if (cfg.process_kind != "markov")
            throw UnsupportedError("deviation tables need a finite Markov source");
        const auto p = cfg.make_markov();
        const auto loss = cfg.make_loss();
        const int d = cfg.context_len();
        const int m_eff = d * cfg.dim;
        const double L = Schedule{cfg.L0, m_eff}(static_cast<double>(cfg.T));
        std::vector<Predictor> fns;
        for (auto& f : make_witness_family(m_eff, cfg.dim, L, 5, 6, 424242))
            fns.push_back(f.as_predictor());
        std::cout << "seed,dev_trajectory,dev_blocks\n";
        for (std::size_t s = 0; s < deviation_seeds; ++s) {
            const std::uint64_t seed = cfg.seeds.front() + s;
            const auto traj = p.sample(cfg.T, seed);
            const double dev_t = uniform_deviation(traj, fns, loss, d, p);
            std::uint64_t sm = seed ^ 0xB10C5EED0B10C5EEull;
            const auto blocks = resample_independent_blocks(p, part, splitmix64(sm));
            const double dev_b = uniform_deviation(blocks, fns, loss, d, p);
            std::cout << seed << ',' << fmt(dev_t) << ',' << fmt(dev_b) << "\n";
        }
    }
}

// ---- run ---------------------------------------------------------------

struct StrategyResult {
    std::string name;
    std::uint64_t seed;
    RunMetrics metrics;
};

std::vector<StrategyResult> run_one_seed(const ExperimentConfig& cfg, const MarkovProcess* markov,
                                         const LossFn& loss, std::uint64_t seed) {
    const int d = cfg.context_len();
    const auto traj = sample_configured(cfg, markov, seed);
    std::vector<StrategyResult> results;

    {
        LipschitzErmStrategy erm(cfg.make_strategy_config(), loss, d, cfg.dim);
        results.push_back({"erm", seed, run_online(traj, erm, loss, d)});
    }
    if (cfg.baseline_histogram) {
        HistogramExpertStrategy hist(cfg.histogram_resolutions, cfg.histogram_eta, loss, d,
                                     cfg.dim);
        results.push_back({"histogram", seed, run_online(traj, hist, loss, d)});
    }
    if (cfg.baseline_constant) {
        ConstantStrategy c(std::vector<double>(cfg.dim, 0.5));
        results.push_back({"constant", seed, run_online(traj, c, loss, d)});
    }
    if (cfg.baseline_oracle && markov) {
        OracleStrategy o(*markov, loss);
        results.push_back({"oracle", seed, run_online(traj, o, loss, d)});
    }
    return results;
}

void write_metrics_csv(const std::string& path, const RunMetrics& m,
                       const std::optional<double>& l_star) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "checkpoint,avg_loss,gap,L_budget,retrained\n";
    for (const auto& cp : m.checkpoints) {
        double budget = 0.0;
        bool retrained = false;
        for (const auto& [rt, rl] : m.retrains) {
            if (rt <= cp.t) budget = rl;
            if (rt == cp.t) retrained = true;
        }
        os << cp.t << ',' << fmt(cp.avg) << ',';
        if (l_star) os << fmt(cp.avg - *l_star);
        os << ',' << fmt(budget) << ',' << (retrained ? 1 : 0) << "\n";
    }
}

void write_per_step_csv(const std::string& path, const RunMetrics& m, int d) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "t,loss\n";
    for (std::size_t i = 0; i < m.losses.size(); ++i)
        os << (i + d + 1) << ',' << fmt(m.losses[i]) << "\n";
}

void write_report(const std::string& out_dir,
                  const std::map<std::string, std::vector<const RunMetrics*>>& by_strategy,
                  const std::optional<double>& l_star) {
    // summary.csv: per-strategy medians across seeds.
    std::ofstream os(out_dir + "/summary.csv");
    if (!os) throw IoError("cannot open " + out_dir + "/summary.csv");
    os << "strategy,median_final_avg,median_final_gap,l_star\n";
    for (const auto& [name, runs] : by_strategy) {
        std::vector<double> finals;
        for (const auto* m : runs) finals.push_back(m->final_avg);
        const double med = median(finals);
        os << name << ',' << fmt(med) << ',';
        if (l_star) os << fmt(med - *l_star) << ',' << fmt(*l_star) << "\n";
        else os << ",\n";
    }

    // report.svg: median running-average curve per strategy.
    ChartSpec spec;
    spec.title = "average loss vs horizon";
    spec.x_label = "t (log2 scale)";
    spec.y_label = "average loss";
    spec.log2_x = true;
    for (const auto& [name, runs] : by_strategy) {
        ChartSeries series;
        series.name = name;
        const std::size_t points = runs.front()->checkpoints.size();
        for (std::size_t i = 0; i < points; ++i) {
            std::vector<double> vals;
            for (const auto* m : runs)
                if (i < m->checkpoints.size()) vals.push_back(m->checkpoints[i].avg);
            series.points.emplace_back(static_cast<double>(runs.front()->checkpoints[i].t),
                                       median(vals));
        }
        spec.series.push_back(std::move(series));
    }
    if (l_star) spec.hlines.push_back({"L*", *l_star});
    write_line_chart(spec, out_dir + "/report.svg");
}

void cmd_run(const CommonOpts& opts) {
    const auto cfg = load_config(opts);
    std::optional<MarkovProcess> markov;
    if (cfg.process_kind == "markov") markov = cfg.make_markov();
    const auto loss = cfg.make_loss();
    std::optional<double> l_star;
    if (markov) l_star = optimal_risk(*markov, loss, cfg.context_len()).value;
    fs::create_directories(cfg.out_dir);

    // Seeds fan out concurrently; every task only touches its own files.
    std::vector<std::future<std::vector<StrategyResult>>> futures;
    for (const auto seed : cfg.seeds)
        futures.push_back(std::async(std::launch::async, [&, seed] {
            return run_one_seed(cfg, markov ? &*markov : nullptr, loss, seed);
        }));

    std::map<std::string, std::vector<RunMetrics>> by_strategy;
    for (auto& fut : futures) {
        for (auto& res : fut.get()) {
            res.metrics.l_star = l_star;
            const std::string base =
                cfg.out_dir + "/metrics_" + res.name + "_" + std::to_string(res.seed);
            write_metrics_csv(base + ".csv", res.metrics, l_star);
            if (opts.per_step)
                write_per_step_csv(cfg.out_dir + "/losses_" + res.name + "_" +
                                       std::to_string(res.seed) + ".csv",
                                   res.metrics, cfg.context_len());
            by_strategy[res.name].push_back(std::move(res.metrics));
        }
    }

    std::map<std::string, std::vector<const RunMetrics*>> views;
    for (const auto& [name, runs] : by_strategy)
        for (const auto& m : runs) views[name].push_back(&m);
    write_report(cfg.out_dir, views, l_star);

    for (const auto& [name, runs] : by_strategy) {
        std::vector<double> finals;
        for (const auto* m : views[name]) finals.push_back(m->final_avg);
        std::cout << name << ": median final avg " << fmt(median(finals));
        if (l_star) std::cout << " (gap " << fmt(median(finals) - *l_star) << ")";
        std::cout << "\n";
    }
}

// ---- report ------------------------------------------------------------

RunMetrics read_metrics_csv(const std::string& path, std::optional<double>& l_star_out) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != "checkpoint,avg_loss,gap,L_budget,retrained")
        throw IoError("bad metrics header in " + path);
    RunMetrics m;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f_t, f_avg, f_gap, f_budget, f_retrained;
        std::getline(ss, f_t, ',');
        std::getline(ss, f_avg, ',');
        std::getline(ss, f_gap, ',');
        std::getline(ss, f_budget, ',');
        std::getline(ss, f_retrained, ',');
        Checkpoint cp{std::stoul(f_t), std::stod(f_avg)};
        if (!f_gap.empty()) l_star_out = cp.avg - std::stod(f_gap);
        m.checkpoints.push_back(cp);
    }
    if (m.checkpoints.empty()) throw IoError("no checkpoints in " + path);
    m.final_avg = m.checkpoints.back().avg;
    return m;
}

void cmd_report(const CommonOpts& opts) {
    const std::string out_dir = opts.out.empty() ? "out" : opts.out;
    std::map<std::string, std::vector<RunMetrics>> by_strategy;
    std::optional<double> l_star;
    for (const auto& entry : fs::directory_iterator(out_dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("metrics_", 0) != 0 || entry.path().extension() != ".csv") continue;
        const auto stem = name.substr(8, name.size() - 12);  // strategy_seed
        const auto us = stem.rfind('_');
        if (us == std::string::npos) continue;
        by_strategy[stem.substr(0, us)].push_back(read_metrics_csv(entry.path().string(), l_star));
    }
    if (by_strategy.empty()) throw ConfigError("no metrics files under " + out_dir);
    std::map<std::string, std::vector<const RunMetrics*>> views;
    for (const auto& [name, runs] : by_strategy)
        for (const auto& m : runs) views[name].push_back(&m);
    write_report(out_dir, views, l_star);
    std::cout << "rebuilt summary.csv and report.svg under " << out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"online prediction lab for mixing processes"};
    app.require_subcommand(1);

    CommonOpts common;
    BoundsOpts bounds;
    std::size_t deviation_seeds = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config = true) {
        auto* opt = sub->add_option("--config", common.config_path, "experiment config file");
        if (needs_config) opt->required();
        sub->add_option("--seed", common.seed, "override run.seeds with a single seed");
        sub->add_option("--out", common.out, "override the output directory");
        sub->add_flag("--per-step", common.per_step, "also write the full per-step loss log");
    };

    add_common(app.add_subcommand("simulate", "write trajectory csv files per seed"));
    add_common(app.add_subcommand("run", "run strategies and write metrics + report"));
    add_common(app.add_subcommand("oracle", "print the optimal risk and per-context table"));
    auto* sub_bounds =
        app.add_subcommand("bounds", "tail bound and mixing report per horizon");
    add_common(sub_bounds);
    sub_bounds->add_option("--T", bounds.horizons, "horizons to report")->required();
    sub_bounds->add_option("--eps", bounds.epsilon, "deviation threshold");
    sub_bounds->add_option("--L", bounds.L, "Lipschitz budget (default: schedule at T)");
    sub_bounds->add_option("--C1", bounds.C1, "tail constant C1");
    sub_bounds->add_option("--C2", bounds.C2, "tail constant C2");
    sub_bounds->add_flag("--use-mu", bounds.use_mu, "evaluate the tail at mu_T instead of T");
    auto* sub_blocks = app.add_subcommand("blocks", "print the H/T partition table");
    add_common(sub_blocks);
    sub_blocks->add_option("--deviation-seeds", deviation_seeds,
                           "also print a per-seed deviation table");
    auto* sub_report = app.add_subcommand("report", "rebuild summary and chart from metrics");
    sub_report->add_option("--out", common.out, "directory holding metrics csv files");

    try {
        app.parse(argc, argv);
        if (app.got_subcommand("simulate")) cmd_simulate(common);
        else if (app.got_subcommand("run")) cmd_run(common);
        else if (app.got_subcommand("oracle")) cmd_oracle(common);
        else if (app.got_subcommand("bounds")) cmd_bounds(common, bounds);
        else if (app.got_subcommand("blocks")) cmd_blocks(common, deviation_seeds);
        else if (app.got_subcommand("report")) cmd_report(common);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
