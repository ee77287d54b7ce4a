#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mixcast/lipschitz_fn.hpp"
#include "mixcast/loss.hpp"
#include "mixcast/oracle.hpp"
#include "mixcast/process.hpp"
#include "mixcast/spectral_mlp.hpp"

namespace mixcast {

/**
 * The online game: at each round the loop queries the strategy with the last
 * d observations, records the loss against the revealed observation, and only
 * then hands the observation to the strategy. The call order is the
 * no-lookahead guarantee.
 */
class Strategy {
public:
    virtual ~Strategy() = default;
    virtual std::vector<double> predict(std::span<const double> context) = 0;
    virtual void observe(std::span<const double> /*x*/) {}
    virtual std::vector<std::pair<std::size_t, double>> retrain_log() const { return {}; }
};

struct Checkpoint {
    std::size_t t;   // game time (1-based)
    double avg;      // running average over scored rounds so far
};

struct RunMetrics {
    int d = 0;
    std::vector<double> losses;  // one entry per scored round (t = d+1..T)
    std::vector<Checkpoint> checkpoints;
    std::vector<std::pair<std::size_t, double>> retrains;  // (t, budget used)
    double final_avg = 0.0;
    std::optional<double> l_star;

    // Running average at game time t, recomputed from the per-step log.
    double avg_up_to(std::size_t t) const;
};

RunMetrics run_online(const Trajectory& traj, Strategy& strategy, const LossFn& loss, int d);

struct RetrainPolicy {
    enum class Kind { Doubling, FixedInterval };
    Kind kind = Kind::Doubling;
    std::size_t interval = 0;

    static RetrainPolicy doubling() { return {Kind::Doubling, 0}; }
    static RetrainPolicy fixed(std::size_t p) { return {Kind::FixedInterval, p}; }
    bool due(std::size_t t) const;
};

enum class FitterKind { Envelope, Mlp };

/**
 * The growing-capacity ERM strategy: at each retrain time it refits a
 * Lipschitz-constrained regressor on all past (context, next observation)
 * pairs with budget L_t from the schedule, and predicts with the last fitted
 * function in between (midpoint of the prediction cube before the first fit).
 */
class LipschitzErmStrategy : public Strategy {
public:
    struct Config {
        FitterKind fitter = FitterKind::Envelope;
        Schedule schedule{};
        RetrainPolicy retrain = RetrainPolicy::doubling();
        double frozen_budget = 0.0;  // >0: ignore the schedule and use this L
        MlpConfig mlp{};
        McshaneOptions mcshane{};
    };

    LipschitzErmStrategy(Config cfg, LossFn loss, int d, int n);

    std::vector<double> predict(std::span<const double> context) override;
    void observe(std::span<const double> x) override;
    std::vector<std::pair<std::size_t, double>> retrain_log() const override { return retrains_; }

    bool fitted() const { return envelope_.has_value() || mlp_.has_value(); }
    const std::optional<LipschitzFn>& envelope() const { return envelope_; }
    const std::optional<SpectralMlp>& mlp() const { return mlp_; }

private:
    void refit();

    Config cfg_;
    LossFn loss_;
    int d_;
    int n_;
    std::size_t t_ = 0;
    std::vector<double> history_;  // all observations, row-major
    std::optional<LipschitzFn> envelope_;
    std::optional<SpectralMlp> mlp_;
    std::vector<std::pair<std::size_t, double>> retrains_;
};

/**
 * Baseline in the experts style: each expert predicts the per-cell empirical
 * loss minimiser on a uniform grid over the context cube at its resolution,
 * and the experts are mixed by exponential weighting on their past losses.
 */
class HistogramExpertStrategy : public Strategy {
public:
    HistogramExpertStrategy(std::vector<int> resolutions, double learning_rate, LossFn loss,
                            int d, int n);

    std::vector<double> predict(std::span<const double> context) override;
    void observe(std::span<const double> x) override;

    const std::vector<double>& weights() const { return weights_; }

private:
    struct Cell {
        double count = 0.0;
        std::vector<double> sum;
        std::vector<std::vector<double>> targets;  // kept for quantile losses
    };
    struct Expert {
        int resolution;
        std::vector<Cell> cells;
    };

    std::size_t cell_of(const Expert& e, std::span<const double> context) const;
    std::vector<double> expert_prediction(const Expert& e, std::size_t cell) const;

    LossFn loss_;
    int d_;
    int n_;
    double eta_;
    std::vector<Expert> experts_;
    std::vector<double> weights_;
    // Round state between predict and the following observe.
    bool pending_ = false;
    std::vector<std::size_t> pending_cells_;
    std::vector<std::vector<double>> pending_preds_;
};

// Plays the exact optimal action for the decoded context; the convergence
// reference for everything else.
class OracleStrategy : public Strategy {
public:
    OracleStrategy(const MarkovProcess& p, const LossFn& loss);
    std::vector<double> predict(std::span<const double> context) override;

private:
    const MarkovProcess& process_;
    std::vector<std::vector<double>> actions_;  // per context row
};

class ConstantStrategy : public Strategy {
public:
    explicit ConstantStrategy(std::vector<double> value) : value_(std::move(value)) {}
    std::vector<double> predict(std::span<const double>) override { return value_; }

private:
    std::vector<double> value_;
};

struct GapCurve {
    std::vector<std::pair<std::size_t, double>> points;  // (t, avg - L*)
    double final_gap = 0.0;
};

GapCurve compare_to_optimal(const RunMetrics& metrics, double l_star);
GapCurve compare_to_optimal(const RunMetrics& metrics, const OptimalRisk& optimal);

}  // namespace mixcast
