#include "mixcast/spectral_mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "mixcast/errors.hpp"
#include "mixcast/rng.hpp"

namespace mixcast {

double spectral_norm(const Matrix& w, int iters, double rel_tol) {
    if (w.rows == 0 || w.cols == 0) return 0.0;
    // Fixed pseudo-random start vector, independent of the matrix values.
    std::vector<double> v(w.cols);
    std::uint64_t sm = 0x5C2D1E4F3B8A6C70ull;
    double norm = 0.0;
    for (auto& x : v) {
        x = 0.5 + static_cast<double>(splitmix64(sm) >> 11) * 0x1.0p-53;
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;

    std::vector<double> wx(w.rows), gram(w.cols);
    double sigma_prev = 0.0;
    for (int it = 0; it < iters; ++it) {
        matvec(w, v, wx);
        // gram = W^T (W v)
        for (std::size_t j = 0; j < w.cols; ++j) gram[j] = 0.0;
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double r = wx[i];
            if (r == 0.0) continue;
            for (std::size_t j = 0; j < w.cols; ++j) gram[j] += w(i, j) * r;
        }
        double gn = 0.0;
        for (double x : gram) gn += x * x;
        gn = std::sqrt(gn);
        if (gn == 0.0) return 0.0;
        const double sigma = std::sqrt(gn);  // |W^T W v| -> sigma^2
        for (std::size_t j = 0; j < w.cols; ++j) v[j] = gram[j] / gn;
        if (std::abs(sigma - sigma_prev) <= rel_tol * std::max(sigma, 1e-300)) return sigma;
        sigma_prev = sigma;
    }
    return sigma_prev;
}

Matrix project_spectral(Matrix w, double cap) {
    if (!(cap > 0.0)) throw ConfigError("spectral cap must be positive");
    const double sigma = spectral_norm(w);
    if (sigma > cap) {
        const double scale = cap / sigma;
        for (double& x : w.a) x *= scale;
    }
    return w;
}

SpectralMlp::SpectralMlp(std::vector<Matrix> weights, std::vector<std::vector<double>> biases,
                         std::vector<double> caps)
    : w_(std::move(weights)), b_(std::move(biases)), caps_(std::move(caps)) {
    if (w_.empty() || w_.size() != b_.size() || w_.size() != caps_.size())
        throw ConfigError("layer weights, biases and caps must align");
    for (std::size_t i = 0; i < w_.size(); ++i) {
        if (b_[i].size() != w_[i].rows) throw ConfigError("bias size must match layer rows");
        if (i + 1 < w_.size() && w_[i + 1].cols != w_[i].rows)
            throw ConfigError("layer dimensions must chain");
    }
}

std::vector<double> SpectralMlp::forward(std::span<const double> x) const {
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        next.assign(w_[l].rows, 0.0);
        matvec(w_[l], cur, next);
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += b_[l][i];
        if (l + 1 < w_.size())
            for (double& v : next) v = std::max(v, 0.0);
        cur.swap(next);
    }
    return cur;
}

Predictor SpectralMlp::as_predictor() const {
    return [mlp = *this](std::span<const double> x) { return mlp.forward(x); };
}

double SpectralMlp::lipschitz_bound() const {
    double prod = 1.0;
    for (const auto& w : w_) prod *= spectral_norm(w);
    return prod;
}

void SpectralMlp::project_layers() {
    for (std::size_t l = 0; l < w_.size(); ++l) w_[l] = project_spectral(std::move(w_[l]), caps_[l]);
}

double mlp_loss(const SpectralMlp& mlp, std::span<const FitSample> batch, const LossFn& loss) {
    double acc = 0.0;
    for (const auto& s : batch) acc += loss.eval(mlp.forward(s.x), s.y);
    return acc / static_cast<double>(batch.size());
}

MlpGradients mlp_loss_gradients(const SpectralMlp& mlp, std::span<const FitSample> batch,
                                const LossFn& loss) {
    const std::size_t k = mlp.layer_count();
    MlpGradients g;
    g.weight.reserve(k);
    g.bias.reserve(k);
    for (std::size_t l = 0; l < k; ++l) {
        g.weight.emplace_back(mlp.weight(l).rows, mlp.weight(l).cols);
        g.bias.emplace_back(mlp.weight(l).rows, 0.0);
    }

    std::vector<std::vector<double>> pre(k), act(k + 1);
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (const auto& s : batch) {
        // Forward pass caching pre-activations.
        act[0].assign(s.x.begin(), s.x.end());
        for (std::size_t l = 0; l < k; ++l) {
            pre[l].assign(mlp.weight(l).rows, 0.0);
            matvec(mlp.weight(l), act[l], pre[l]);
            for (std::size_t i = 0; i < pre[l].size(); ++i) pre[l][i] += mlp.bias(l)[i];
            act[l + 1] = pre[l];
            if (l + 1 < k)
                for (double& v : act[l + 1]) v = std::max(v, 0.0);
        }

        // Backward pass.
        std::vector<double> delta(act[k].size());
        loss.grad(act[k], s.y, delta);
        for (double& v : delta) v *= inv_batch;
        for (std::size_t li = k; li-- > 0;) {
            for (std::size_t i = 0; i < mlp.weight(li).rows; ++i) {
                const double dv = delta[i];
                if (dv == 0.0) continue;
                g.bias[li][i] += dv;
                for (std::size_t j = 0; j < mlp.weight(li).cols; ++j)
                    g.weight[li](i, j) += dv * act[li][j];
            }
            if (li == 0) break;
            std::vector<double> prev(mlp.weight(li).cols, 0.0);
            for (std::size_t i = 0; i < mlp.weight(li).rows; ++i) {
                const double dv = delta[i];
                if (dv == 0.0) continue;
                for (std::size_t j = 0; j < mlp.weight(li).cols; ++j)
                    prev[j] += dv * mlp.weight(li)(i, j);
            }
            // Rectifier subgradient: zero where the pre-activation was clipped.
            for (std::size_t j = 0; j < prev.size(); ++j)
                if (pre[li - 1][j] <= 0.0) prev[j] = 0.0;
            delta.swap(prev);
        }
    }
    return g;
}

SpectralMlp mlp_fit(std::span<const FitSample> samples, double budget, const LossFn& loss,
                    const MlpConfig& cfg) {
    if (samples.empty()) throw ConfigError("mlp_fit needs at least one sample");
    if (cfg.layers < 1) throw ConfigError("mlp needs at least one layer");
    if (!(budget > 0.0)) throw ConfigError("Lipschitz budget must be positive");

    const std::size_t in_dim = samples.front().x.size();
    const std::size_t out_dim = samples.front().y.size();
    const double cap = std::pow(budget, 1.0 / static_cast<double>(cfg.layers));

    Xoshiro256pp rng(cfg.seed);
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    std::vector<double> caps(cfg.layers, cap);
    for (int l = 0; l < cfg.layers; ++l) {
        const std::size_t rows = (l == cfg.layers - 1) ? out_dim : static_cast<std::size_t>(cfg.width);
        const std::size_t cols = (l == 0) ? in_dim : static_cast<std::size_t>(cfg.width);
        Matrix w(rows, cols);
        const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (double& x : w.a) x = rng.uniform(-s, s);
        weights.push_back(std::move(w));
        biases.emplace_back(rows, 0.0);
    }
    SpectralMlp mlp(std::move(weights), std::move(biases), std::move(caps));
    mlp.project_layers();

    SpectralMlp best = mlp;
    double best_loss = mlp_loss(mlp, samples, loss);

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<FitSample> batch;
    const std::size_t batch_size = std::min<std::size_t>(std::max(cfg.batch, 1), samples.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the run's own generator keeps training reproducible.
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        const double lr = cfg.lr / (1.0 + 0.01 * static_cast<double>(epoch));
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            batch.clear();
            for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i)
                batch.push_back(samples[order[i]]);
            const auto g = mlp_loss_gradients(mlp, batch, loss);
            for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
                auto& w = mlp.weight(l);
                for (std::size_t i = 0; i < w.a.size(); ++i) w.a[i] -= lr * g.weight[l].a[i];
                auto& b = mlp.bias(l);
                for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * g.bias[l][i];
            }
            mlp.project_layers();
        }
        const double cur = mlp_loss(mlp, samples, loss);
        if (cur < best_loss) {
            best_loss = cur;
            best = mlp;
        }
    }
    return best;
}

namespace {

void write_numbers(std::ostream& os, std::span<const double> xs) {
    char buf[64];
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", xs[i]);
        os << (i ? " " : "") << buf;
    }
    os << "\n";
}

}  // namespace

void SpectralMlp::save(std::ostream& os) const {
    os << "mixcast-predictor v1\n";
    os << "kind mlp\n";
    char lbuf[64];
    double budget = 1.0;
    for (double c : caps_) budget *= c;
    std::snprintf(lbuf, sizeof lbuf, "%.17g", budget);
    os << "L " << lbuf << "\n";
    os << "layers " << w_.size() << "\n";
    os << "dims " << input_dim();
    for (const auto& w : w_) os << ' ' << w.rows;
    os << "\n";
    os << "caps";
    char buf[64];
    for (double c : caps_) {
        std::snprintf(buf, sizeof buf, "%.17g", c);
        os << ' ' << buf;
    }
    os << "\n";
    for (std::size_t l = 0; l < w_.size(); ++l) {
        write_numbers(os, w_[l].a);
        write_numbers(os, b_[l]);
    }
}

SpectralMlp SpectralMlp::load(std::istream& is) {
    std::string word, version, kind;
    is >> word >> version;
    if (word != "mixcast-predictor" || version != "v1") throw IoError("bad predictor header");
    is >> word >> kind;
    if (kind != "mlp") throw IoError("expected an mlp predictor, got " + kind);
    double budget = 0.0;
    std::size_t layers = 0;
    is >> word >> budget >> word >> layers;
    std::vector<std::size_t> dims(layers + 1);
    is >> word;
    for (auto& d : dims) is >> d;
    std::vector<double> caps(layers);
    is >> word;
    for (auto& c : caps) is >> c;
    if (!is) throw IoError("truncated predictor file");
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix w(dims[l + 1], dims[l]);
        for (auto& x : w.a) is >> x;
        std::vector<double> b(dims[l + 1]);
        for (auto& x : b) is >> x;
        weights.push_back(std::move(w));
        biases.push_back(std::move(b));
    }
    if (!is) throw IoError("truncated predictor file");
    return SpectralMlp(std::move(weights), std::move(biases), std::move(caps));
}

}  // namespace mixcast
