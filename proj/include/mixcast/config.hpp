#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mixcast/harness.hpp"
#include "mixcast/loss.hpp"
#include "mixcast/process.hpp"

namespace mixcast {

/**
 * Declarative experiment description, stored as flat `key = value` text with
 * dotted section prefixes. Numeric lists use spaces; matrix rows use ';'.
 * `emit` writes the canonical form, and parse(emit(c)) reproduces it exactly.
 */
struct ExperimentConfig {
    // process
    std::string process_kind = "markov";  // markov | ar
    int states = 2;
    int order = 1;
    int dim = 1;
    std::vector<std::vector<double>> kernel;     // K^d rows of K entries
    std::vector<std::vector<double>> embedding;  // K rows of n coordinates
    bool ergodic = true;
    std::vector<double> ar_coeffs;
    double ar_noise = 0.0;
    std::vector<double> ar_init;

    // loss
    std::string loss_kind = "squared";  // squared | absolute | pinball
    double loss_tau = 0.5;

    // strategy
    std::string fitter = "envelope";  // envelope | mlp
    double L0 = 1.0;
    std::string retrain = "doubling";  // doubling | fixed
    std::size_t retrain_interval = 0;
    double frozen_L = 0.0;
    int mlp_layers = 2;
    int mlp_width = 16;
    int mlp_epochs = 100;
    int mlp_batch = 32;
    double mlp_lr = 0.25;

    // baselines
    bool baseline_histogram = false;
    std::vector<int> histogram_resolutions = {1, 2, 4};
    double histogram_eta = 2.0;
    bool baseline_constant = false;
    bool baseline_oracle = false;

    // run
    std::size_t T = 10000;
    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = "out";
    int d = 0;  // context length for strategies; 0 means the process order

    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    std::string emit() const;

    int context_len() const { return d > 0 ? d : order; }

    MarkovProcess make_markov() const;
    ArProcess make_ar() const;
    LossFn make_loss() const;
    LipschitzErmStrategy::Config make_strategy_config() const;
};

}  // namespace mixcast
