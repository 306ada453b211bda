#include "regopt/learn.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "regopt/errors.hpp"
#include "regopt/format.hpp"
#include "regopt/parallel.hpp"
#include "regopt/prng.hpp"

namespace regopt {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow; the BCE loss is softplus on logits.
double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

void fisher_yates(std::vector<std::size_t>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_index(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace

std::size_t FeatureEncoding::feature_count() const {
    std::size_t n = tests.size();
    for (const ControlPointDecl& d : declarations)
        n += d.is_numeric() ? 1 : d.categorical().values.size();
    return n;
}

std::vector<FeatureEncoding::Block> FeatureEncoding::blocks() const {
    std::vector<Block> out;
    out.push_back({"test", 0, tests.size()});
    std::size_t offset = tests.size();
    for (const ControlPointDecl& d : declarations) {
        const std::size_t width = d.is_numeric() ? 1 : d.categorical().values.size();
        out.push_back({d.name, offset, width});
        offset += width;
    }
    return out;
}

std::optional<std::size_t> FeatureEncoding::test_index(std::string_view test) const {
    auto it = std::find(tests.begin(), tests.end(), test);
    if (it == tests.end()) return std::nullopt;
    return static_cast<std::size_t>(it - tests.begin());
}

std::vector<double> FeatureEncoding::encode(std::string_view test,
                                            const std::map<std::string, ControlValue>& controls,
                                            bool* unknown_test) const {
    std::vector<double> f(feature_count(), 0.0);
    const auto ti = test_index(test);
    if (ti)
        f[*ti] = 1.0;
    if (unknown_test) *unknown_test = !ti.has_value();

    std::size_t offset = tests.size();
    for (const ControlPointDecl& d : declarations) {
        auto it = controls.find(d.name);
        if (d.is_numeric()) {
            const NumericRange& r = d.numeric();
            if (it == controls.end()) {
                f[offset] = 0.5;
            } else {
                const double* v = std::get_if<double>(&it->second);
                if (!v || *v < r.lo || *v > r.hi)
                    throw ValidationError("control value for '" + d.name +
                                          "' outside declared domain");
                f[offset] = (r.hi > r.lo) ? (*v - r.lo) / (r.hi - r.lo) : 0.5;
            }
            offset += 1;
        } else {
            const auto& values = d.categorical().values;
            if (it == controls.end()) {
                const double u = 1.0 / static_cast<double>(values.size());
                for (std::size_t k = 0; k < values.size(); ++k) f[offset + k] = u;
            } else {
                const std::string* v = std::get_if<std::string>(&it->second);
                auto pos = v ? std::find(values.begin(), values.end(), *v) : values.end();
                if (pos == values.end())
                    throw ValidationError("control value for '" + d.name +
                                          "' outside declared domain");
                f[offset + static_cast<std::size_t>(pos - values.begin())] = 1.0;
            }
            offset += values.size();
        }
    }
    return f;
}

EncodedDataset encode(const Regression& regression) {
    EncodedDataset ds;
    for (const RunRecord& run : regression.runs)
        if (!ds.encoding.test_index(run.test)) ds.encoding.tests.push_back(run.test);
    ds.encoding.declarations = regression.declarations;

    ds.rows.reserve(regression.runs.size());
    for (const RunRecord& run : regression.runs)
        ds.rows.push_back(ds.encoding.encode(run.test, run.controls));

    const auto& bins = regression.space.bins();
    ds.labels.assign(bins.size(), std::vector<std::uint8_t>(regression.runs.size(), 0));
    for (std::size_t r = 0; r < regression.runs.size(); ++r) {
        for (const auto& [id, count] : regression.runs[r].bins_hit) {
            const auto idx = regression.space.index_of(id);
            if (!idx) throw ValidationError("unknown bin id '" + id + "'");
            if (count >= bins[*idx].at_least) ds.labels[*idx][r] = 1;
        }
    }
    return ds;
}

namespace {

double model_logit(std::uint32_t hidden_width, std::size_t feature_count,
                   std::span<const double> params, std::span<const double> features) {
    if (hidden_width == 0) {
        double z = params[feature_count];
        for (std::size_t i = 0; i < feature_count; ++i) z += params[i] * features[i];
        return z;
    }
    const std::size_t h = hidden_width;
    const std::size_t f = feature_count;
    const double* w1 = params.data();          // h x f, row-major
    const double* b1 = w1 + h * f;
    const double* w2 = b1 + h;
    const double b2 = w2[h];
    double z = b2;
    for (std::size_t j = 0; j < h; ++j) {
        double pre = b1[j];
        for (std::size_t i = 0; i < f; ++i) pre += w1[j * f + i] * features[i];
        if (pre > 0.0) z += w2[j] * pre;
    }
    return z;
}

} // namespace

double model_probability(std::uint32_t hidden_width, std::size_t feature_count,
                         std::span<const double> params, std::span<const double> features) {
    return sigmoid(model_logit(hidden_width, feature_count, params, features));
}

BinTrainer::BinTrainer(std::vector<std::vector<double>> rows, std::vector<std::uint8_t> labels,
                       const TrainConfig& config, std::uint64_t stream_seed)
    : rows_(std::move(rows)),
      labels_(std::move(labels)),
      config_(config),
      stream_seed_(stream_seed) {
    if (rows_.empty() || rows_.front().empty())
        throw TrainingError("no feature rows to train on");
    if (rows_.size() != labels_.size())
        throw TrainingError("row/label count mismatch");
    features_ = rows_.front().size();

    std::uint64_t pos = 0;
    for (std::uint8_t y : labels_) pos += y;
    const std::uint64_t neg = labels_.size() - pos;
    if (pos > 0 && neg > 0)
        pos_weight_ = std::clamp(static_cast<double>(neg) / static_cast<double>(pos), 1.0, 100.0);
}

std::size_t BinTrainer::param_count() const {
    const std::size_t h = config_.hidden_width;
    return h == 0 ? features_ + 1 : h * features_ + h + h + 1;
}

std::vector<double> BinTrainer::initial_params() {
    std::vector<double> p(param_count(), 0.0);
    const std::size_t h = config_.hidden_width;
    if (h == 0) return p; // convex; zero start

    SplitMix64 rng(stream_seed_ ^ 0xA5A5A5A5A5A5A5A5ULL);
    const double r1 = 1.0 / std::sqrt(static_cast<double>(features_));
    for (std::size_t i = 0; i < h * features_; ++i)
        p[i] = (2.0 * rng.next_unit() - 1.0) * r1;
    const double r2 = 1.0 / std::sqrt(static_cast<double>(h));
    for (std::size_t j = 0; j < h; ++j)
        p[h * features_ + h + j] = (2.0 * rng.next_unit() - 1.0) * r2;
    return p;
}

double BinTrainer::loss(std::span<const double> params) const {
    const std::size_t h = config_.hidden_width;
    double sum = 0.0;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const double z = model_logit(static_cast<std::uint32_t>(h), features_, params, rows_[i]);
        const double cw = labels_[i] ? pos_weight_ : 1.0;
        sum += cw * (labels_[i] ? softplus(-z) : softplus(z));
    }
    double reg = 0.0;
    if (h == 0) {
        for (std::size_t i = 0; i < features_; ++i) reg += params[i] * params[i];
    } else {
        for (std::size_t i = 0; i < h * features_; ++i) reg += params[i] * params[i];
        const double* w2 = params.data() + h * features_ + h;
        for (std::size_t j = 0; j < h; ++j) reg += w2[j] * w2[j];
    }
    return sum / static_cast<double>(rows_.size()) + 0.5 * config_.l2 * reg;
}

namespace {

// Accumulates d(mean weighted BCE)/d(theta) for one example into grad.
void accumulate_example_gradient(std::uint32_t hidden_width, std::size_t f,
                                 std::span<const double> params,
                                 std::span<const double> x, double residual_scaled,
                                 std::vector<double>& grad) {
    const std::size_t h = hidden_width;
    if (h == 0) {
        for (std::size_t i = 0; i < f; ++i) grad[i] += residual_scaled * x[i];
        grad[f] += residual_scaled;
        return;
    }
    const double* w1 = params.data();
    const double* b1 = w1 + h * f;
    const double* w2 = b1 + h;
    for (std::size_t j = 0; j < h; ++j) {
        double pre = b1[j];
        for (std::size_t i = 0; i < f; ++i) pre += w1[j * f + i] * x[i];
        grad[h * f + h + j] += residual_scaled * (pre > 0.0 ? pre : 0.0); // dL/dw2
        if (pre > 0.0) {
            const double up = residual_scaled * w2[j];
            grad[h * f + j] += up; // dL/db1
            for (std::size_t i = 0; i < f; ++i) grad[j * f + i] += up * x[i];
        }
    }
    grad[h * f + h + h] += residual_scaled; // dL/db2
}

void add_l2_gradient(std::uint32_t hidden_width, std::size_t f, double l2,
                     std::span<const double> params, std::vector<double>& grad) {
    const std::size_t h = hidden_width;
    if (h == 0) {
        for (std::size_t i = 0; i < f; ++i) grad[i] += l2 * params[i];
        return;
    }
    for (std::size_t i = 0; i < h * f; ++i) grad[i] += l2 * params[i];
    for (std::size_t j = 0; j < h; ++j)
        grad[h * f + h + j] += l2 * params[h * f + h + j];
}

} // namespace

std::vector<double> BinTrainer::gradient(std::span<const double> params) const {
    std::vector<double> grad(param_count(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const double p = model_probability(config_.hidden_width, features_, params, rows_[i]);
        const double cw = labels_[i] ? pos_weight_ : 1.0;
        const double residual = cw * (p - static_cast<double>(labels_[i])) * inv_n;
        accumulate_example_gradient(config_.hidden_width, features_, params, rows_[i],
                                    residual, grad);
    }
    add_l2_gradient(config_.hidden_width, features_, config_.l2, params, grad);
    return grad;
}

BinTrainer::Fit BinTrainer::fit() {
    SplitMix64 rng(stream_seed_);
    std::vector<double> params = initial_params();

    std::vector<std::size_t> order(rows_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const std::size_t batch = std::max<std::size_t>(1, config_.batch_size);
    double lr = config_.learning_rate;
    double prev_loss = loss(params);
    std::uint32_t kept = 0;

    std::vector<double> grad(param_count());
    std::vector<double> snapshot;
    std::vector<double> epoch_losses;
    epoch_losses.reserve(config_.epochs);
    for (std::uint32_t epoch = 0; epoch < config_.epochs; ++epoch) {
        snapshot = params;
        fisher_yates(order, rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            std::fill(grad.begin(), grad.end(), 0.0);
            const double inv_b = 1.0 / static_cast<double>(end - start);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                const double p =
                    model_probability(config_.hidden_width, features_, params, rows_[i]);
                const double cw = labels_[i] ? pos_weight_ : 1.0;
                accumulate_example_gradient(config_.hidden_width, features_, params, rows_[i],
                                            cw * (p - static_cast<double>(labels_[i])) * inv_b,
                                            grad);
            }
            add_l2_gradient(config_.hidden_width, features_, config_.l2, params, grad);
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
        }
        const double cur = loss(params);
        if (cur > prev_loss) {
            params = snapshot; // roll back the raising epoch and retry smaller
            lr *= 0.5;
        } else {
            prev_loss = cur;
            ++kept;
        }
        epoch_losses.push_back(prev_loss);
    }
    return {std::move(params), kept, std::move(epoch_losses)};
}

const BinModel* ModelSet::find(std::string_view bin_id) const {
    auto it = std::find_if(models.begin(), models.end(),
                           [&](const BinModel& m) { return m.bin_id == bin_id; });
    return it == models.end() ? nullptr : &*it;
}

namespace {

struct HeldoutMetrics {
    double accuracy = 0.0;
    std::optional<double> auc;
};

HeldoutMetrics heldout_metrics(std::span<const double> probs,
                               std::span<const std::uint8_t> labels) {
    HeldoutMetrics m;
    if (probs.empty()) return m;

    std::size_t correct = 0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool predicted = probs[i] >= 0.5;
        if (predicted == (labels[i] != 0)) ++correct;
        pos += labels[i];
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(probs.size());

    const std::size_t neg = probs.size() - pos;
    if (pos == 0 || neg == 0) return m; // AUC undefined on single-class splits

    // Mann-Whitney rank statistic with tie credit 0.5.
    std::vector<std::size_t> idx(probs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (probs[a] != probs[b]) return probs[a] < probs[b];
        return a < b;
    });
    double rank_sum = 0.0;
    std::size_t i = 0;
    double rank = 1.0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && probs[idx[j + 1]] == probs[idx[i]]) ++j;
        const double avg_rank = (rank + (rank + static_cast<double>(j - i))) / 2.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[idx[k]]) rank_sum += avg_rank;
        rank += static_cast<double>(j - i + 1);
        i = j + 1;
    }
    const double u = rank_sum - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
    m.auc = u / (static_cast<double>(pos) * static_cast<double>(neg));
    return m;
}

// Stratified deterministic split: shuffle each class with the bin stream and
// send ceil(0.8 n) of each to the training side.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> heldout;
};

Split stratified_split(std::span<const std::uint8_t> labels, double heldout_fraction,
                       SplitMix64& rng) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] ? pos : neg).push_back(i);

    Split split;
    const double train_fraction = 1.0 - heldout_fraction;
    for (std::vector<std::size_t>* cls : {&pos, &neg}) {
        fisher_yates(*cls, rng);
        const std::size_t n = cls->size();
        const std::size_t take = static_cast<std::size_t>(
            std::ceil(train_fraction * static_cast<double>(n)));
        for (std::size_t i = 0; i < n; ++i)
            (i < take ? split.train : split.heldout).push_back((*cls)[i]);
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.heldout.begin(), split.heldout.end());
    return split;
}

} // namespace

ModelSet train(const Regression& regression, const TrainConfig& config) {
    if (regression.runs.size() < 10)
        throw TrainingError("training requires at least 10 runs, got " +
                            std::to_string(regression.runs.size()));
    if (config.epochs == 0) throw TrainingError("epochs must be positive");
    if (!(config.learning_rate > 0.0)) throw TrainingError("learning rate must be positive");
    if (!(config.heldout_fraction > 0.0 && config.heldout_fraction < 1.0))
        throw TrainingError("heldout fraction must be in (0,1)");

    EncodedDataset ds = encode(regression);
    if (ds.encoding.feature_count() == 0) throw TrainingError("encoding produced no features");

    const auto& bins = regression.space.bins();
    ModelSet out;
    out.space = regression.space;
    out.encoding = ds.encoding;
    out.config = config;
    out.models.resize(bins.size());

    parallel_for(bins.size(), [&](std::size_t b) {
        BinModel model;
        model.bin_id = bins[b].id;
        model.total_rows = ds.rows.size();
        std::uint64_t pos = 0;
        for (std::uint8_t y : ds.labels[b]) pos += y;
        model.positive_rows = pos;

        const double fraction =
            static_cast<double>(pos) / static_cast<double>(ds.rows.size());
        if (pos == 0) {
            model.kind = BinModelKind::unreachable;
        } else if (fraction >= config.unconditional_threshold) {
            model.kind = BinModelKind::unconditional;
        } else {
            model.kind = BinModelKind::learned;
            model.hidden_width = config.hidden_width;

            SplitMix64 stream(config.seed ^ stable_hash(bins[b].id));
            const Split split = stratified_split(ds.labels[b], config.heldout_fraction, stream);

            std::vector<std::vector<double>> train_rows;
            std::vector<std::uint8_t> train_labels;
            train_rows.reserve(split.train.size());
            for (std::size_t i : split.train) {
                train_rows.push_back(ds.rows[i]);
                train_labels.push_back(ds.labels[b][i]);
            }
            BinTrainer trainer(std::move(train_rows), std::move(train_labels), config,
                               stream.next());
            BinTrainer::Fit fitted = trainer.fit();
            model.params = std::move(fitted.params);
            model.epochs_kept = fitted.epochs_kept;

            std::vector<double> probs;
            std::vector<std::uint8_t> held_labels;
            probs.reserve(split.heldout.size());
            for (std::size_t i : split.heldout) {
                probs.push_back(model_probability(config.hidden_width,
                                                  ds.encoding.feature_count(), model.params,
                                                  ds.rows[i]));
                held_labels.push_back(ds.labels[b][i]);
            }
            const HeldoutMetrics hm = heldout_metrics(probs, held_labels);
            model.heldout_accuracy = hm.accuracy;
            model.heldout_auc = hm.auc;
        }
        out.models[b] = std::move(model);
    });
    return out;
}

Prediction predict(const ModelSet& models, std::string_view test,
                   const std::map<std::string, ControlValue>& controls) {
    Prediction out;
    const std::vector<double> f = models.encoding.encode(test, controls, &out.unknown_test);
    for (const BinModel& m : models.models) {
        double p = 0.0;
        switch (m.kind) {
        case BinModelKind::unconditional: p = 1.0; break;
        case BinModelKind::unreachable: p = 0.0; break;
        case BinModelKind::learned:
            p = model_probability(m.hidden_width, models.encoding.feature_count(), m.params, f);
            break;
        }
        out.probability.emplace(m.bin_id, p);
    }
    return out;
}

InfluenceReport analyze(const ModelSet& models) {
    InfluenceReport report;
    const auto blocks = models.encoding.blocks();
    const std::size_t f = models.encoding.feature_count();

    for (const BinModel& m : models.models) {
        if (m.kind != BinModelKind::learned) continue;

        std::vector<InfluenceEntry> entries;
        double total = 0.0;
        for (const auto& block : blocks) {
            if (block.width == 0) continue;
            double sum = 0.0;
            std::size_t count = 0;
            if (m.hidden_width == 0) {
                for (std::size_t i = 0; i < block.width; ++i)
                    sum += std::abs(m.params[block.offset + i]);
                count = block.width;
            } else {
                for (std::size_t j = 0; j < m.hidden_width; ++j)
                    for (std::size_t i = 0; i < block.width; ++i)
                        sum += std::abs(m.params[j * f + block.offset + i]);
                count = block.width * m.hidden_width;
            }
            const double mean = sum / static_cast<double>(count);
            entries.push_back({block.name, mean});
            total += mean;
        }
        if (total > 0.0) {
            for (InfluenceEntry& e : entries) e.score /= total;
        } else if (!entries.empty()) {
            const double u = 1.0 / static_cast<double>(entries.size());
            for (InfluenceEntry& e : entries) e.score = u;
        }
        std::stable_sort(entries.begin(), entries.end(),
                         [](const InfluenceEntry& a, const InfluenceEntry& b) {
                             return a.score > b.score;
                         });
        report.bins.emplace_back(m.bin_id, std::move(entries));
    }
    return report;
}

void write_influence_csv(const InfluenceReport& report, std::ostream& out) {
    out << "bin,feature,influence\n";
    for (const auto& [bin, entries] : report.bins)
        for (const InfluenceEntry& e : entries)
            out << bin << ',' << e.feature << ',' << format_double(e.score) << '\n';
}

} // namespace regopt
