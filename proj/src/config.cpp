#include "mixcast/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mixcast/errors.hpp"

namespace mixcast {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& value, int line) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string tok;
    while (ss >> tok) {
        // commas are accepted as separators too
        std::replace(tok.begin(), tok.end(), ',', ' ');
        std::stringstream ts(tok);
        double v;
        while (ts >> v) out.push_back(v);
        if (!ts.eof()) throw ConfigError("bad number in '" + value + "'", line);
    }
    return out;
}

std::vector<std::vector<double>> parse_rows(const std::string& value, int line) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(value);
    std::string row;
    while (std::getline(ss, row, ';')) {
        const auto nums = parse_numbers(row, line);
        if (!nums.empty()) rows.push_back(nums);
    }
    return rows;
}

bool parse_bool(const std::string& value, int line) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("expected true/false, got '" + value + "'", line);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_numbers(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? " " : "") + fmt(xs[i]);
    return out;
}

std::string fmt_rows(const std::vector<std::vector<double>>& rows) {
    std::string out;
    for (std::size_t i = 0; i < rows.size(); ++i) out += (i ? " ; " : "") + fmt_numbers(rows[i]);
    return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig c;
    c.kernel.clear();
    c.embedding.clear();
    std::stringstream ss(text);
    std::string raw;
    int line = 0;
    while (std::getline(ss, raw)) {
        ++line;
        const auto no_comment = raw.substr(0, raw.find('#'));
        const auto entry = trim(no_comment);
        if (entry.empty()) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value", line);
        const auto key = trim(entry.substr(0, eq));
        const auto value = trim(entry.substr(eq + 1));
        if (value.empty()) throw ConfigError("empty value for " + key, line);

        if (key == "process.kind") c.process_kind = value;
        else if (key == "process.states") c.states = std::stoi(value);
        else if (key == "process.order") c.order = std::stoi(value);
        else if (key == "process.dim") c.dim = std::stoi(value);
        else if (key == "process.kernel") c.kernel = parse_rows(value, line);
        else if (key == "process.embedding") c.embedding = parse_rows(value, line);
        else if (key == "process.ergodic") c.ergodic = parse_bool(value, line);
        else if (key == "process.ar_coeffs") c.ar_coeffs = parse_numbers(value, line);
        else if (key == "process.ar_noise") c.ar_noise = std::stod(value);
        else if (key == "process.ar_init") c.ar_init = parse_numbers(value, line);
        else if (key == "loss.kind") c.loss_kind = value;
        else if (key == "loss.tau") c.loss_tau = std::stod(value);
        else if (key == "strategy.fitter") c.fitter = value;
        else if (key == "strategy.L0") c.L0 = std::stod(value);
        else if (key == "strategy.retrain") c.retrain = value;
        else if (key == "strategy.retrain_interval") c.retrain_interval = std::stoul(value);
        else if (key == "strategy.frozen_L") c.frozen_L = std::stod(value);
        else if (key == "strategy.mlp_layers") c.mlp_layers = std::stoi(value);
        else if (key == "strategy.mlp_width") c.mlp_width = std::stoi(value);
        else if (key == "strategy.mlp_epochs") c.mlp_epochs = std::stoi(value);
        else if (key == "strategy.mlp_batch") c.mlp_batch = std::stoi(value);
        else if (key == "strategy.mlp_lr") c.mlp_lr = std::stod(value);
        else if (key == "baseline.histogram") c.baseline_histogram = parse_bool(value, line);
        else if (key == "baseline.histogram_resolutions") {
            c.histogram_resolutions.clear();
            for (double v : parse_numbers(value, line))
                c.histogram_resolutions.push_back(static_cast<int>(v));
        } else if (key == "baseline.histogram_eta") c.histogram_eta = std::stod(value);
        else if (key == "baseline.constant") c.baseline_constant = parse_bool(value, line);
        else if (key == "baseline.oracle") c.baseline_oracle = parse_bool(value, line);
        else if (key == "run.T") c.T = std::stoul(value);
        else if (key == "run.seeds") {
            c.seeds.clear();
            for (double v : parse_numbers(value, line))
                c.seeds.push_back(static_cast<std::uint64_t>(v));
        } else if (key == "run.out") c.out_dir = value;
        else if (key == "run.d") c.d = std::stoi(value);
        else throw ConfigError("unknown key '" + key + "'", line);
    }

    if (c.process_kind != "markov" && c.process_kind != "ar")
        throw ConfigError("process.kind must be markov or ar (got '" + c.process_kind + "')");
    if (c.loss_kind != "squared" && c.loss_kind != "absolute" && c.loss_kind != "pinball")
        throw ConfigError("loss.kind must be squared, absolute or pinball");
    if (c.fitter != "envelope" && c.fitter != "mlp")
        throw ConfigError("strategy.fitter must be envelope or mlp");
    if (c.retrain != "doubling" && c.retrain != "fixed")
        throw ConfigError("strategy.retrain must be doubling or fixed");
    if (c.retrain == "fixed" && c.retrain_interval == 0)
        throw ConfigError("strategy.retrain_interval must be set for the fixed policy");
    if (c.seeds.empty()) throw ConfigError("run.seeds must list at least one seed");
    if (c.T < 2) throw ConfigError("run.T must be >= 2");
    if (!(c.L0 > 0.0)) throw ConfigError("strategy.L0 must be positive");
    if (c.frozen_L < 0.0) throw ConfigError("strategy.frozen_L must be >= 0");
    if (c.mlp_layers < 1 || c.mlp_width < 1 || c.mlp_epochs < 0 || c.mlp_batch < 1)
        throw ConfigError("mlp settings must be positive");
    if (!(c.mlp_lr > 0.0)) throw ConfigError("strategy.mlp_lr must be positive");
    if (!(c.histogram_eta > 0.0)) throw ConfigError("baseline.histogram_eta must be positive");
    for (int r : c.histogram_resolutions)
        if (r < 1) throw ConfigError("histogram resolutions must be >= 1");
    if (c.d < 0) throw ConfigError("run.d must be >= 0");
    if (c.states < 1 || c.order < 1 || c.dim < 1)
        throw ConfigError("process sizes must be >= 1");
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse(buf.str());
}

std::string ExperimentConfig::emit() const {
    std::ostringstream os;
    os << "process.kind = " << process_kind << "\n";
    if (process_kind == "markov") {
        os << "process.states = " << states << "\n";
        os << "process.order = " << order << "\n";
        os << "process.dim = " << dim << "\n";
        if (!kernel.empty()) os << "process.kernel = " << fmt_rows(kernel) << "\n";
        if (!embedding.empty()) os << "process.embedding = " << fmt_rows(embedding) << "\n";
        os << "process.ergodic = " << (ergodic ? "true" : "false") << "\n";
    } else {
        os << "process.ar_coeffs = " << fmt_numbers(ar_coeffs) << "\n";
        os << "process.ar_noise = " << fmt(ar_noise) << "\n";
        os << "process.ar_init = " << fmt_numbers(ar_init) << "\n";
    }
    os << "loss.kind = " << loss_kind << "\n";
    if (loss_kind == "pinball") os << "loss.tau = " << fmt(loss_tau) << "\n";
    os << "strategy.fitter = " << fitter << "\n";
    os << "strategy.L0 = " << fmt(L0) << "\n";
    os << "strategy.retrain = " << retrain << "\n";
    if (retrain == "fixed") os << "strategy.retrain_interval = " << retrain_interval << "\n";
    if (frozen_L > 0.0) os << "strategy.frozen_L = " << fmt(frozen_L) << "\n";
    if (fitter == "mlp") {
        os << "strategy.mlp_layers = " << mlp_layers << "\n";
        os << "strategy.mlp_width = " << mlp_width << "\n";
        os << "strategy.mlp_epochs = " << mlp_epochs << "\n";
        os << "strategy.mlp_batch = " << mlp_batch << "\n";
        os << "strategy.mlp_lr = " << fmt(mlp_lr) << "\n";
    }
    os << "baseline.histogram = " << (baseline_histogram ? "true" : "false") << "\n";
    if (baseline_histogram) {
        os << "baseline.histogram_resolutions =";
        for (int r : histogram_resolutions) os << ' ' << r;
        os << "\n";
        os << "baseline.histogram_eta = " << fmt(histogram_eta) << "\n";
    }
    os << "baseline.constant = " << (baseline_constant ? "true" : "false") << "\n";
    os << "baseline.oracle = " << (baseline_oracle ? "true" : "false") << "\n";
    os << "run.T = " << T << "\n";
    os << "run.seeds =";
    for (auto s : seeds) os << ' ' << s;
    os << "\n";
    os << "run.out = " << out_dir << "\n";
    if (d > 0) os << "run.d = " << d << "\n";
    return os.str();
}

MarkovProcess ExperimentConfig::make_markov() const {
    if (process_kind != "markov") throw ConfigError("config does not describe a markov process");
    if (kernel.empty()) throw ConfigError("process.kernel is required");
    if (embedding.empty()) throw ConfigError("process.embedding is required");
    if (static_cast<int>(embedding.size()) != states)
        throw ConfigError("process.embedding must have one row per state");
    for (const auto& row : embedding)
        if (static_cast<int>(row.size()) != dim)
            throw ConfigError("process.embedding rows must have process.dim coordinates");
    std::size_t rows = 1;
    for (int i = 0; i < order; ++i) rows *= static_cast<std::size_t>(states);
    if (kernel.size() != rows)
        throw ConfigError("process.kernel must have K^d rows (" + std::to_string(rows) + ")");
    Matrix k(rows, static_cast<std::size_t>(states));
    for (std::size_t r = 0; r < rows; ++r) {
        if (kernel[r].size() != static_cast<std::size_t>(states))
            throw ConfigError("process.kernel row " + std::to_string(r) + " must have K entries");
        for (int c = 0; c < states; ++c) k(r, c) = kernel[r][c];
    }
    MarkovProcess::Options opt;
    opt.require_ergodic = ergodic;
    return MarkovProcess::build(std::move(k), embedding, order, opt);
}

ArProcess ExperimentConfig::make_ar() const {
    if (process_kind != "ar") throw ConfigError("config does not describe an ar process");
    ArProcess p;
    p.coeffs = ar_coeffs;
    p.noise_half_width = ar_noise;
    p.init = ar_init.empty() ? std::vector<double>(ar_coeffs.size(), 0.5) : ar_init;
    p.validate();
    return p;
}

LossFn ExperimentConfig::make_loss() const {
    if (loss_kind == "squared") return LossFn::squared();
    if (loss_kind == "absolute") return LossFn::absolute();
    return LossFn::pinball(loss_tau);
}

LipschitzErmStrategy::Config ExperimentConfig::make_strategy_config() const {
    LipschitzErmStrategy::Config sc;
    sc.fitter = fitter == "mlp" ? FitterKind::Mlp : FitterKind::Envelope;
    sc.schedule = Schedule{L0, context_len() * dim};
    sc.retrain = retrain == "fixed" ? RetrainPolicy::fixed(retrain_interval)
                                    : RetrainPolicy::doubling();
    sc.frozen_budget = frozen_L;
    sc.mlp = MlpConfig{mlp_layers, mlp_width, mlp_epochs, mlp_batch, mlp_lr, 1};
    return sc;
}

}  // namespace mixcast
