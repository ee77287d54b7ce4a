#include "mixcast/lipschitz_fn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>

#include "mixcast/errors.hpp"
#include "mixcast/rng.hpp"

namespace mixcast {

double Schedule::operator()(double T) const {
    const double lg = std::max(std::log(T), 1.0);
    return L0 * std::pow(lg, 1.0 / (static_cast<double>(m_eff) + 2.0));
}

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

struct Group {
    std::vector<double> point;
    double weight = 0.0;                  // sample count
    std::vector<double> target_sum;      // per output coordinate
    std::vector<std::size_t> members;    // indices into the sample span
};

struct PairConstraint {
    std::size_t g, h;
    double bound;  // L * distance
};

// Dykstra's alternating projections in the weighted norm; returns the
// projection of the per-group means onto the constraint intersection, which
// is exactly the constrained least-squares optimum.
std::vector<double> dykstra_coordinate(const std::vector<double>& means,
                                       const std::vector<double>& weights,
                                       const std::vector<PairConstraint>& pairs,
                                       const McshaneOptions& opt, std::size_t* sweeps_used) {
    std::vector<double> v = means;
    std::vector<double> corr_g(pairs.size(), 0.0), corr_h(pairs.size(), 0.0);
    double prev_obj = 0.0;
    for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const auto& pc = pairs[k];
            double ug = v[pc.g] + corr_g[k];
            double uh = v[pc.h] + corr_h[k];
            double zg = ug, zh = uh;
            const double gap = ug - uh;
            if (std::abs(gap) > pc.bound) {
                const double excess = (std::abs(gap) - pc.bound) * (gap > 0 ? 1.0 : -1.0);
                const double wg = weights[pc.g], wh = weights[pc.h];
                zg = ug - excess * wh / (wg + wh);
                zh = uh + excess * wg / (wg + wh);
            }
            corr_g[k] = ug - zg;
            corr_h[k] = uh - zh;
            v[pc.g] = zg;
            v[pc.h] = zh;
        }
        double viol = 0.0;
        for (const auto& pc : pairs)
            viol = std::max(viol, std::abs(v[pc.g] - v[pc.h]) - pc.bound);
        double obj = 0.0;
        for (std::size_t g = 0; g < v.size(); ++g) {
            const double dlt = v[g] - means[g];
            obj += weights[g] * dlt * dlt;
        }
        if (viol <= opt.constraint_tol && std::abs(obj - prev_obj) <= opt.objective_tol) {
            if (sweeps_used) *sweeps_used = sweep + 1;
            return v;
        }
        prev_obj = obj;
    }
    throw NoConvergenceError("Dykstra sweeps exhausted before reaching tolerance");
}

// Feasibility pass: cyclic projections until the worst violation is within
// tolerance. Used by the subgradient path, where any feasible point will do.
bool make_feasible(std::vector<double>& v, const std::vector<double>& weights,
                   const std::vector<PairConstraint>& pairs, double tol, std::size_t max_sweeps) {
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double viol = 0.0;
        for (const auto& pc : pairs) {
            const double gap = v[pc.g] - v[pc.h];
            if (std::abs(gap) > pc.bound) {
                const double excess = (std::abs(gap) - pc.bound) * (gap > 0 ? 1.0 : -1.0);
                const double wg = weights[pc.g], wh = weights[pc.h];
                v[pc.g] -= excess * wh / (wg + wh);
                v[pc.h] += excess * wg / (wg + wh);
            }
        }
        for (const auto& pc : pairs)
            viol = std::max(viol, std::abs(v[pc.g] - v[pc.h]) - pc.bound);
        if (viol <= tol) return true;
    }
    return false;
}

// 1-D minimiser of the summed scalar loss over a value list (mean / lower
// median / lower quantile).
double scalar_loss_minimum(const LossFn& loss, std::vector<double> ys) {
    if (loss.kind() == LossKind::Squared) {
        double acc = 0.0;
        for (double y : ys) acc += y;
        return acc / static_cast<double>(ys.size());
    }
    const double level = loss.kind() == LossKind::Absolute ? 0.5 : loss.tau();
    std::sort(ys.begin(), ys.end());
    const std::size_t idx = static_cast<std::size_t>(
        std::ceil(level * static_cast<double>(ys.size()) - 1e-12)) - 1;
    return ys[std::min(idx, ys.size() - 1)];
}

}  // namespace

LipschitzFn::LipschitzFn(std::vector<std::vector<double>> points,
                         std::vector<std::vector<double>> values, double L)
    : points_(std::move(points)), values_(std::move(values)), budget_(L) {
    if (points_.size() != values_.size() || points_.empty())
        throw ConfigError("anchor points and values must match and be nonempty");
    if (!(L > 0.0)) throw ConfigError("Lipschitz budget must be positive");
}

std::vector<double> LipschitzFn::eval(std::span<const double> x) const {
    const std::size_t out = output_dim();
    std::vector<double> result(out);
    std::vector<double> dist(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) dist[i] = distance(points_[i], x);
    for (std::size_t j = 0; j < out; ++j) {
        double upper = std::numeric_limits<double>::infinity();
        double lower = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < points_.size(); ++i) {
            upper = std::min(upper, values_[i][j] + budget_ * dist[i]);
            lower = std::max(lower, values_[i][j] - budget_ * dist[i]);
        }
        result[j] = std::clamp(0.5 * (upper + lower), 0.0, 1.0);
    }
    return result;
}

Predictor LipschitzFn::as_predictor() const {
    return [fn = *this](std::span<const double> x) { return fn.eval(x); };
}

double LipschitzFn::max_pair_violation() const {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points_.size(); ++i)
        for (std::size_t k = i + 1; k < points_.size(); ++k) {
            const double d = budget_ * distance(points_[i], points_[k]);
            for (std::size_t j = 0; j < output_dim(); ++j)
                worst = std::max(worst, std::abs(values_[i][j] - values_[k][j]) - d);
        }
    return worst;
}

LipschitzFn mcshane_fit(std::span<const FitSample> samples, double L, const LossFn& loss,
                        const McshaneOptions& opt) {
    if (samples.empty()) throw ConfigError("mcshane_fit needs at least one sample");
    if (!(L > 0.0)) throw ConfigError("Lipschitz budget must be positive");
    const std::size_t out_dim = samples.front().y.size();

    // Group identical sample points; the grouped problem is equivalent.
    std::map<std::vector<double>, std::size_t> index;
    std::vector<Group> groups;
    for (std::size_t t = 0; t < samples.size(); ++t) {
        auto [it, inserted] = index.try_emplace(samples[t].x, groups.size());
        if (inserted) {
            Group g;
            g.point = samples[t].x;
            g.target_sum.assign(out_dim, 0.0);
            groups.push_back(std::move(g));
        }
        Group& g = groups[it->second];
        g.weight += 1.0;
        for (std::size_t j = 0; j < out_dim; ++j) g.target_sum[j] += samples[t].y[j];
        g.members.push_back(t);
    }

    const std::size_t m = groups.size();
    std::vector<PairConstraint> pairs;
    const std::size_t in_dim = samples.front().x.size();
    if (in_dim == 1) {
        // On a line, distances are additive, so the adjacent constraints
        // imply every other pair by telescoping; the feasible set is
        // unchanged and the solve goes from O(m^2) to O(m) constraints.
        std::vector<std::size_t> order(m);
        for (std::size_t g = 0; g < m; ++g) order[g] = g;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return groups[a].point[0] < groups[b].point[0];
        });
        for (std::size_t i = 0; i + 1 < m; ++i)
            pairs.push_back({order[i], order[i + 1],
                             L * distance(groups[order[i]].point, groups[order[i + 1]].point)});
    } else {
        pairs.reserve(m * (m - 1) / 2);
        for (std::size_t g = 0; g < m; ++g)
            for (std::size_t h = g + 1; h < m; ++h)
                pairs.push_back({g, h, L * distance(groups[g].point, groups[h].point)});
    }

    std::vector<double> weights(m);
    for (std::size_t g = 0; g < m; ++g) weights[g] = groups[g].weight;

    std::vector<std::vector<double>> fitted(m, std::vector<double>(out_dim));

    if (loss.kind() == LossKind::Squared) {
        // Constrained least squares: project the group means onto the
        // constraint intersection with Dykstra.
        for (std::size_t j = 0; j < out_dim; ++j) {
            std::vector<double> means(m);
            for (std::size_t g = 0; g < m; ++g) means[g] = groups[g].target_sum[j] / weights[g];
            const auto v = dykstra_coordinate(means, weights, pairs, opt, nullptr);
            for (std::size_t g = 0; g < m; ++g) fitted[g][j] = v[g];
        }
    } else {
        // Projected subgradient on the grouped objective, coordinate by
        // coordinate (the losses are separable across output coordinates).
        for (std::size_t j = 0; j < out_dim; ++j) {
            std::vector<std::vector<double>> group_targets(m);
            for (std::size_t g = 0; g < m; ++g)
                for (std::size_t t : groups[g].members) group_targets[g].push_back(samples[t].y[j]);

            auto objective = [&](const std::vector<double>& v) {
                double acc = 0.0;
                for (std::size_t g = 0; g < m; ++g)
                    for (double y : group_targets[g]) acc += loss.eval1(v[g], y);
                return acc;
            };

            std::vector<double> v(m);
            for (std::size_t g = 0; g < m; ++g)
                v[g] = scalar_loss_minimum(loss, group_targets[g]);
            if (!make_feasible(v, weights, pairs, opt.constraint_tol, opt.max_sweeps))
                throw NoConvergenceError("feasibility sweeps exhausted");

            std::vector<double> best = v;
            double best_obj = objective(v);
            std::vector<double> grad(m);
            for (std::size_t k = 1; k <= opt.subgrad_iters; ++k) {
                for (std::size_t g = 0; g < m; ++g) {
                    double acc = 0.0;
                    for (double y : group_targets[g]) acc += loss.grad1(v[g], y);
                    grad[g] = acc;
                }
                const double step = opt.subgrad_step0 / std::sqrt(static_cast<double>(k));
                double moved = 0.0;
                for (std::size_t g = 0; g < m; ++g) {
                    const double delta = step * grad[g] / weights[g];
                    v[g] -= delta;
                    moved = std::max(moved, std::abs(delta));
                }
                if (!make_feasible(v, weights, pairs, opt.constraint_tol, opt.max_sweeps))
                    throw NoConvergenceError("feasibility sweeps exhausted");
                const double obj = objective(v);
                if (obj < best_obj - opt.objective_tol) {
                    best_obj = obj;
                    best = v;
                } else if (moved <= opt.objective_tol) {
                    break;
                }
            }
            for (std::size_t g = 0; g < m; ++g) fitted[g][j] = best[g];
        }
    }

    std::vector<std::vector<double>> points(m);
    for (std::size_t g = 0; g < m; ++g) points[g] = groups[g].point;
    return LipschitzFn(std::move(points), std::move(fitted), L);
}

double empirical_lipschitz(
    const Predictor& fn,
    std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs) {
    if (pairs.empty()) throw ConfigError("empirical_lipschitz needs at least one pair");
    double worst = 0.0;
    for (const auto& [a, b] : pairs) {
        const double dx = distance(a, b);
        if (dx == 0.0) throw DegeneratePairError("identical points in a Lipschitz pair");
        const auto fa = fn(a);
        const auto fb = fn(b);
        double dy = 0.0;
        for (std::size_t j = 0; j < fa.size(); ++j) {
            const double d = fa[j] - fb[j];
            dy += d * d;
        }
        worst = std::max(worst, std::sqrt(dy) / dx);
    }
    return worst;
}

std::vector<LipschitzFn> make_witness_family(int m_eff, int out_dim, double L, std::size_t count,
                                             std::size_t anchors_per_fn, std::uint64_t seed) {
    Xoshiro256pp rng(seed);
    std::vector<LipschitzFn> family;
    family.reserve(count);
    for (std::size_t f = 0; f < count; ++f) {
        std::vector<FitSample> anchors(anchors_per_fn);
        for (auto& a : anchors) {
            a.x.resize(m_eff);
            a.y.resize(out_dim);
            for (auto& v : a.x) v = rng.uniform();
            for (auto& v : a.y) v = rng.uniform();
        }
        family.push_back(mcshane_fit(anchors, L, LossFn::squared()));
    }
    return family;
}

namespace {

void write_row(std::ostream& os, std::span<const double> row) {
    char buf[64];
    for (std::size_t i = 0; i < row.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", row[i]);
        os << (i ? " " : "") << buf;
    }
    os << "\n";
}

}  // namespace

void LipschitzFn::save(std::ostream& os) const {
    os << "mixcast-predictor v1\n";
    os << "kind envelope\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", budget_);
    os << "L " << buf << "\n";
    os << "input_dim " << input_dim() << "\n";
    os << "output_dim " << output_dim() << "\n";
    os << "anchors " << points_.size() << "\n";
    for (std::size_t i = 0; i < points_.size(); ++i) {
        write_row(os, points_[i]);
        write_row(os, values_[i]);
    }
}

LipschitzFn LipschitzFn::load(std::istream& is) {
    std::string word, version, kind;
    is >> word >> version;
    if (word != "mixcast-predictor" || version != "v1") throw IoError("bad predictor header");
    is >> word >> kind;
    if (kind != "envelope") throw IoError("expected an envelope predictor, got " + kind);
    double L = 0;
    std::size_t in = 0, out = 0, count = 0;
    is >> word >> L >> word >> in >> word >> out >> word >> count;
    if (!is) throw IoError("truncated predictor file");
    std::vector<std::vector<double>> points(count, std::vector<double>(in));
    std::vector<std::vector<double>> values(count, std::vector<double>(out));
    for (std::size_t i = 0; i < count; ++i) {
        for (auto& v : points[i]) is >> v;
        for (auto& v : values[i]) is >> v;
    }
    if (!is) throw IoError("truncated predictor file");
    return LipschitzFn(std::move(points), std::move(values), L);
}

}  // namespace mixcast
