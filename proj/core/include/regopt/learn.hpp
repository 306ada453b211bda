#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "regopt/coverage.hpp"

namespace regopt {

// Deterministic feature layout over (tests, control points):
// [0, tests.size()) is a one-hot test indicator in first-appearance order,
// followed per declaration by one [0,1]-scaled feature (numeric) or a
// one-hot group over the declared values (categorical).
struct FeatureEncoding {
    std::vector<std::string> tests;
    std::vector<ControlPointDecl> declarations;

    struct Block {
        std::string name; // "test" or the control point name
        std::size_t offset = 0;
        std::size_t width = 0;
    };

    std::size_t feature_count() const;
    std::vector<Block> blocks() const;
    std::optional<std::size_t> test_index(std::string_view test) const;

    // Tests absent from the encoding produce an all-zero test block and set
    // *unknown_test. Missing control points encode neutrally (numeric 0.5,
    // categorical uniform mixture). Out-of-domain values throw.
    std::vector<double> encode(std::string_view test,
                               const std::map<std::string, ControlValue>& controls,
                               bool* unknown_test = nullptr) const;

    bool operator==(const FeatureEncoding&) const = default;
};

struct TrainConfig {
    std::uint64_t seed = 1;
    std::uint32_t epochs = 200;
    double learning_rate = 0.1;
    double l2 = 1e-4;
    std::uint32_t hidden_width = 0; // 0 = logistic regression
    std::uint32_t batch_size = 32;
    double heldout_fraction = 0.2;
    double unconditional_threshold = 0.99; // satisfied-run fraction

    bool operator==(const TrainConfig&) const = default;
};

enum class BinModelKind { unconditional, unreachable, learned };

// Per-bin predictor. Parameter layout for learned models:
//   hidden_width == 0: [w_0 .. w_{F-1}, bias]
//   hidden_width == H: [W1 row-major (H x F), b1 (H), w2 (H), b2]
struct BinModel {
    std::string bin_id;
    BinModelKind kind = BinModelKind::learned;
    std::uint32_t hidden_width = 0;
    std::vector<double> params;
    std::uint32_t epochs_kept = 0;
    double heldout_accuracy = 0.0;
    std::optional<double> heldout_auc; // absent when held-out split is single-class
    std::uint64_t positive_rows = 0;
    std::uint64_t total_rows = 0;

    bool operator==(const BinModel&) const = default;
};

struct ModelSet {
    int format_version = 1;
    CoverageSpace space;
    FeatureEncoding encoding;
    TrainConfig config;
    std::vector<BinModel> models; // one per bin, in space order

    const BinModel* find(std::string_view bin_id) const;

    bool operator==(const ModelSet&) const = default;
};

struct EncodedDataset {
    FeatureEncoding encoding;
    std::vector<std::vector<double>> rows;           // one per run
    std::vector<std::vector<std::uint8_t>> labels;   // [bin index][row]: per-run satisfaction
};

// One row per run; label for (bin, run) is 1 iff the run's own hits meet the
// bin's at_least threshold (per-run satisfaction, not cumulative).
EncodedDataset encode(const Regression& regression);

// Sigmoid probability of one learned model at a feature vector.
double model_probability(std::uint32_t hidden_width, std::size_t feature_count,
                         std::span<const double> params, std::span<const double> features);

// Weighted cross-entropy objective with L2 on non-bias weights, plus the
// deterministic mini-batch schedule used by train(). Exposed so the analytic
// gradient can be verified against finite differences from the outside.
class BinTrainer {
public:
    BinTrainer(std::vector<std::vector<double>> rows, std::vector<std::uint8_t> labels,
               const TrainConfig& config, std::uint64_t stream_seed);

    std::size_t feature_count() const { return features_; }
    std::size_t param_count() const;
    double positive_weight() const { return pos_weight_; }

    std::vector<double> initial_params();

    double loss(std::span<const double> params) const;
    std::vector<double> gradient(std::span<const double> params) const;

    struct Fit {
        std::vector<double> params;
        std::uint32_t epochs_kept = 0;
        std::vector<double> epoch_losses; // full training loss after each epoch
    };
    // Gradient descent with step-halving whenever an epoch raises the full
    // training loss (the raising epoch is rolled back), so the per-epoch loss
    // sequence is non-increasing.
    Fit fit();

private:
    std::vector<std::vector<double>> rows_;
    std::vector<std::uint8_t> labels_;
    TrainConfig config_;
    std::uint64_t stream_seed_;
    std::size_t features_ = 0;
    double pos_weight_ = 1.0;
};

// Fits one predictor per bin. Bins satisfied by >= unconditional_threshold of
// the runs become kind unconditional, bins satisfied by none unreachable;
// the rest are trained on an 80/20 stratified split. Fully deterministic
// given config.seed; per-bin streams are splitmix64(seed ^ stable_hash(id)).
ModelSet train(const Regression& regression, const TrainConfig& config);

struct Prediction {
    std::map<std::string, double> probability; // bin id -> [0,1]
    bool unknown_test = false;
};

// unconditional -> 1.0, unreachable -> 0.0, learned -> sigmoid output.
Prediction predict(const ModelSet& models, std::string_view test,
                   const std::map<std::string, ControlValue>& controls);

struct InfluenceEntry {
    std::string feature; // "test" or a control point name
    double score = 0.0;
};

// Per learned bin: feature groups ranked by mean absolute first-layer
// weight, normalized to sum 1.
struct InfluenceReport {
    std::vector<std::pair<std::string, std::vector<InfluenceEntry>>> bins;
};

InfluenceReport analyze(const ModelSet& models);

void write_influence_csv(const InfluenceReport& report, std::ostream& out);

} // namespace regopt
