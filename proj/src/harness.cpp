#include "mixcast/harness.hpp"

#include <algorithm>
#include <cmath>

#include "mixcast/errors.hpp"

namespace mixcast {

double RunMetrics::avg_up_to(std::size_t t) const {
    if (t <= static_cast<std::size_t>(d)) return 0.0;
    const std::size_t count = std::min(losses.size(), t - static_cast<std::size_t>(d));
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) acc += losses[i];
    return acc / static_cast<double>(count);
}

RunMetrics run_online(const Trajectory& traj, Strategy& strategy, const LossFn& loss, int d) {
    const std::size_t T = traj.size();
    if (T < static_cast<std::size_t>(d) + 1)
        throw TooShortError("trajectory must be longer than the context length");
    const std::size_t n = traj.dim;

    RunMetrics metrics;
    metrics.d = d;
    metrics.losses.reserve(T - d);

    // Warmup: the first d observations arrive unscored.
    for (std::size_t t = 0; t < static_cast<std::size_t>(d); ++t) strategy.observe(traj.obs(t));

    double acc = 0.0;
    std::size_t next_checkpoint = 2;
    for (std::size_t t = static_cast<std::size_t>(d); t < T; ++t) {
        const auto context = traj.window(t - d, d);
        const auto y = strategy.predict(context);
        if (y.size() != n) throw PredictionOutOfRangeError("prediction dimension mismatch");
        for (double v : y)
            if (!(v >= 0.0 && v <= 1.0))
                throw PredictionOutOfRangeError("prediction outside [0,1]");
        const double u = loss.eval(y, traj.obs(t));
        metrics.losses.push_back(u);
        acc += u;
        strategy.observe(traj.obs(t));

        const std::size_t game_t = t + 1;  // 1-based time
        while (next_checkpoint < game_t) next_checkpoint *= 2;
        if (game_t == next_checkpoint || game_t == T) {
            metrics.checkpoints.push_back(
                {game_t, acc / static_cast<double>(metrics.losses.size())});
            if (game_t == next_checkpoint) next_checkpoint *= 2;
        }
    }
    metrics.final_avg = acc / static_cast<double>(metrics.losses.size());
    metrics.retrains = strategy.retrain_log();
    return metrics;
}

bool RetrainPolicy::due(std::size_t t) const {
    switch (kind) {
        case Kind::Doubling: return t >= 2 && (t & (t - 1)) == 0;
        case Kind::FixedInterval: return interval > 0 && t % interval == 0;
    }
    return false;
}

LipschitzErmStrategy::LipschitzErmStrategy(Config cfg, LossFn loss, int d, int n)
    : cfg_(cfg), loss_(loss), d_(d), n_(n) {
    if (d < 1 || n < 1) throw ConfigError("context length and dimension must be >= 1");
}

std::vector<double> LipschitzErmStrategy::predict(std::span<const double> context) {
    if (envelope_) return envelope_->eval(context);
    if (mlp_) {
        auto y = mlp_->forward(context);
        for (double& v : y) v = std::clamp(v, 0.0, 1.0);
        return y;
    }
    return std::vector<double>(n_, 0.5);
}

void LipschitzErmStrategy::observe(std::span<const double> x) {
    history_.insert(history_.end(), x.begin(), x.end());
    ++t_;
    if (cfg_.retrain.due(t_) && t_ >= static_cast<std::size_t>(d_) + 1) refit();
}

void LipschitzErmStrategy::refit() {
    const double budget =
        cfg_.frozen_budget > 0.0 ? cfg_.frozen_budget : cfg_.schedule(static_cast<double>(t_));
    std::vector<FitSample> samples;
    samples.reserve(t_ - d_);
    for (std::size_t i = static_cast<std::size_t>(d_); i < t_; ++i) {
        FitSample s;
        s.x.assign(history_.begin() + (i - d_) * n_, history_.begin() + i * n_);
        s.y.assign(history_.begin() + i * n_, history_.begin() + (i + 1) * n_);
        samples.push_back(std::move(s));
    }
    if (cfg_.fitter == FitterKind::Envelope) {
        envelope_ = mcshane_fit(samples, budget, loss_, cfg_.mcshane);
    } else {
        MlpConfig mc = cfg_.mlp;
        mc.seed = cfg_.mlp.seed + t_;  // still deterministic per retrain time
        mlp_ = mlp_fit(samples, budget, loss_, mc);
    }
    retrains_.emplace_back(t_, budget);
}

HistogramExpertStrategy::HistogramExpertStrategy(std::vector<int> resolutions,
                                                 double learning_rate, LossFn loss, int d, int n)
    : loss_(loss), d_(d), n_(n), eta_(learning_rate) {
    if (resolutions.empty()) throw ConfigError("histogram strategy needs >= 1 resolution");
    for (int r : resolutions) {
        if (r < 1) throw ConfigError("histogram resolution must be >= 1");
        Expert e;
        e.resolution = r;
        std::size_t cells = 1;
        for (int i = 0; i < d * n; ++i) {
            if (cells > (std::size_t(1) << 24) / static_cast<std::size_t>(r))
                throw ContextExplosionError("histogram grid too fine");
            cells *= static_cast<std::size_t>(r);
        }
        e.cells.resize(cells);
        experts_.push_back(std::move(e));
    }
    weights_.assign(experts_.size(), 1.0 / static_cast<double>(experts_.size()));
}

std::size_t HistogramExpertStrategy::cell_of(const Expert& e,
                                             std::span<const double> context) const {
    std::size_t idx = 0;
    for (double v : context) {
        const int r = e.resolution;
        int bin = static_cast<int>(v * r);
        bin = std::clamp(bin, 0, r - 1);
        idx = idx * static_cast<std::size_t>(r) + static_cast<std::size_t>(bin);
    }
    return idx;
}

std::vector<double> HistogramExpertStrategy::expert_prediction(const Expert& e,
                                                               std::size_t cell) const {
    const Cell& c = e.cells[cell];
    if (c.count == 0.0) return std::vector<double>(n_, 0.5);
    std::vector<double> pred(n_);
    if (loss_.kind() == LossKind::Squared) {
        for (int j = 0; j < n_; ++j) pred[j] = c.sum[j] / c.count;
    } else {
        const double level = loss_.kind() == LossKind::Absolute ? 0.5 : loss_.tau();
        std::vector<double> col(c.targets.size());
        for (int j = 0; j < n_; ++j) {
            for (std::size_t i = 0; i < c.targets.size(); ++i) col[i] = c.targets[i][j];
            std::sort(col.begin(), col.end());
            const auto idx = static_cast<std::size_t>(
                std::ceil(level * static_cast<double>(col.size()) - 1e-12)) - 1;
            pred[j] = col[std::min(idx, col.size() - 1)];
        }
    }
    return pred;
}

std::vector<double> HistogramExpertStrategy::predict(std::span<const double> context) {
    pending_cells_.clear();
    pending_preds_.clear();
    std::vector<double> mix(n_, 0.0);
    for (std::size_t i = 0; i < experts_.size(); ++i) {
        const std::size_t cell = cell_of(experts_[i], context);
        auto pred = expert_prediction(experts_[i], cell);
        for (int j = 0; j < n_; ++j) mix[j] += weights_[i] * pred[j];
        pending_cells_.push_back(cell);
        pending_preds_.push_back(std::move(pred));
    }
    pending_ = true;
    return mix;
}

void HistogramExpertStrategy::observe(std::span<const double> x) {
    if (!pending_) return;  // warmup rounds carry no context yet
    // Exponential-weights update in log space, then renormalise.
    std::vector<double> logw(experts_.size());
    for (std::size_t i = 0; i < experts_.size(); ++i)
        logw[i] = std::log(std::max(weights_[i], 1e-300)) -
                  eta_ * loss_.eval(pending_preds_[i], x);
    const double mx = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    for (std::size_t i = 0; i < experts_.size(); ++i) {
        weights_[i] = std::exp(logw[i] - mx);
        total += weights_[i];
    }
    for (double& w : weights_) w /= total;

    for (std::size_t i = 0; i < experts_.size(); ++i) {
        Cell& c = experts_[i].cells[pending_cells_[i]];
        if (c.sum.empty()) c.sum.assign(n_, 0.0);
        c.count += 1.0;
        for (int j = 0; j < n_; ++j) c.sum[j] += x[j];
        if (loss_.kind() != LossKind::Squared) c.targets.emplace_back(x.begin(), x.end());
    }
    pending_ = false;
}

OracleStrategy::OracleStrategy(const MarkovProcess& p, const LossFn& loss) : process_(p) {
    actions_.resize(p.context_count());
    for (std::size_t r = 0; r < p.context_count(); ++r) {
        const auto states = p.context_states(r);
        actions_[r] = optimal_action(p, loss, states).action;
    }
}

std::vector<double> OracleStrategy::predict(std::span<const double> context) {
    const int d = process_.order();
    const std::size_t n = static_cast<std::size_t>(process_.dim());
    std::vector<int> states(d);
    for (int i = 0; i < d; ++i)
        states[i] = process_.state_of(context.subspan(i * n, n));
    return actions_[process_.context_index(states)];
}

GapCurve compare_to_optimal(const RunMetrics& metrics, double l_star) {
    GapCurve curve;
    curve.points.reserve(metrics.checkpoints.size());
    for (const auto& cp : metrics.checkpoints) curve.points.emplace_back(cp.t, cp.avg - l_star);
    curve.final_gap = metrics.final_avg - l_star;
    return curve;
}

GapCurve compare_to_optimal(const RunMetrics& metrics, const OptimalRisk& optimal) {
    return compare_to_optimal(metrics, optimal.value);
}

}  // namespace mixcast
