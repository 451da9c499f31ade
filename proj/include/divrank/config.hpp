#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "divrank/augmentation.hpp"
#include "divrank/retrieval.hpp"
#include "divrank/scl.hpp"
#include "divrank/synthetic.hpp"
#include "divrank/token_classifier.hpp"
#include "divrank/transformer.hpp"

namespace divrank {

using ConfigMap = std::map<std::string, std::string>;

/// Every tunable of a run. Defaults are the reference hyper-parameters;
/// `dim` and `heads` describe the encoder, the corpus fixes d.
struct ExperimentConfig {
    std::uint64_t seed = 0;

    GeneratorConfig generator;

    // stage 1
    double tau = 0.2;
    double alpha = 0.01;
    double beta = 0.02;
    double epsilon = 0.01;
    double lr_g = 1e-5;
    int scl_epochs = 1;
    long scl_max_steps = 0;
    int irrelevant_cap = 64;
    bool pair_prototype_relevant = true;
    bool pair_prototype_irrelevant = true;
    bool ema_swap_convention = false;

    // stage 2
    int layers = 8;
    int heads = 4;
    int ffn_dim = 0;  // 0: 2·d
    int budget = 200;
    double lr_phi = 1e-4;
    int ttc_epochs = 1;
    long ttc_max_steps = 0;
    AugmentationConfig augmentation;

    int batch = 32;

    // retrieval
    int X = 1;
    std::vector<int> ks{10, 20};
    double mmr_lambda = 0.7;
    double dbscan_eps = 0.4;
    int dbscan_min_pts = 3;
    double dbscan_sim_threshold = 0.5;

    bool skip_scl = false;
    bool skip_ttc = false;
    int threads = 0;  // 0: DIVRANK_THREADS or the OpenMP default

    void validate() const;

    /// Sets one key; throws ConfigError for an unknown key or a bad value.
    void set(const std::string& key, const std::string& value);
    void apply(const ConfigMap& values);
    /// Every key with its current value, in key order.
    ConfigMap to_map() const;
    std::vector<std::string> keys() const;

    SclTrainConfig scl_config() const;
    TtcTrainConfig ttc_config() const;
    TransformerConfig transformer_config(int dim) const;
    PostProcessConfig post_process_config(int k) const;
    ClusterConfig cluster_config() const;
    int max_k() const;
};

/// Flat `key = value` lines; blank lines and '#' comments are ignored.
ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::string& path);
std::string format_config(const ConfigMap& values);

std::vector<int> parse_int_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

}  // namespace divrank
