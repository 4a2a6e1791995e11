#include "cpg/controller.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <string>

#include "cpg/error.hpp"

namespace cpg {

namespace {

// splitmix64 finaliser; derives independent streams from the run seed.
std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { head = 1, reinit = 2, epoch = 3, growth = 4 };

std::uint64_t derive(std::uint64_t seed, TaskId task, Stream s, std::uint64_t n = 0) {
    return mix(mix(mix(seed) ^ (std::uint64_t{task} << 32) ^ static_cast<std::uint64_t>(s)) ^ n);
}

void log(const EngineHyper& h, const std::string& msg) {
    if (h.verbose) std::clog << "[cpg] " << msg << '\n';
}

// Re-draws every free weight from the initialisation scheme; free biases go to zero.
void reinit_free(CpgState& st, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto& params = st.net.params();
    const auto& layers = st.net.layers();
    const auto& tables = st.net.index_tables();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (!layers[l].has_params()) continue;
        const float a = std::sqrt(6.0f / static_cast<float>(layers[l].in_width + layers[l].out_width));
        std::uniform_real_distribution<float> dist(-a, a);
        for (auto i : tables[l].weights) {
            const float v = dist(rng);
            if (st.ledger.owner(i) == kFree) params[i] = v;
        }
        for (auto i : tables[l].biases)
            if (st.ledger.owner(i) == kFree) params[i] = 0.0f;
    }
}

// The model of the task being learned: backbone view through a pick mask
// with every free weight included, plus the task's head.
class TaskSession final : public PruneTarget {
public:
    TaskSession(CpgState& st, const data::Task& task, TaskId id, Head head, const EngineHyper& hyper)
        : st_(st), task_(task), id_(id), head_(std::move(head)), hyper_(hyper), layers_(st.net.layer_of_params()) {}

    Head& head() { return head_; }
    const Head& head() const { return head_; }
    TaskOptimizer& optimizer() { return opt_; }
    void set_mask(std::vector<std::uint8_t> mask) { mask_ = std::move(mask); }
    void refresh_layers() { layers_ = st_.net.layer_of_params(); }

    std::vector<data::Batch> next_epoch() {
        return data::batch_iter(task_.train, hyper_.batch_size, derive(st_.seed, id_, Stream::epoch, epoch_++));
    }

    double evaluate_with(std::span<const std::uint8_t> mask) const {
        const auto view = compose_view(st_.ledger, st_.net.params(), id_, mask, true);
        return accuracy(st_.net, view, head_, task_.eval);
    }

    std::span<float> params() override { return st_.net.params(); }
    std::span<const std::uint32_t> param_layers() const override { return layers_; }
    double evaluate() override { return evaluate_with(mask_); }

    void retrain_epoch(std::span<const std::uint8_t> trainable) override {
        const auto batches = next_epoch();
        train_masked_round(st_.net, st_.ledger, id_, mask_, trainable, head_, batches, hyper_.train, opt_);
    }

    Snapshot snapshot() const override { return {st_.net.params(), head_.params}; }

    void restore(const Snapshot& s) override {
        st_.net.params() = s.params;
        head_.params = s.extra;
    }

private:
    CpgState& st_;
    const data::Task& task_;
    TaskId id_;
    Head head_;
    const EngineHyper& hyper_;
    std::vector<std::uint32_t> layers_;
    std::vector<std::uint8_t> mask_;
    TaskOptimizer opt_;
    std::uint64_t epoch_ = 0;
};

void check_task_data(const CpgState& st, const data::Task& task) {
    data::validate(task.train);
    data::validate(task.eval);
    if (task.train.feature_width() != st.net.input_width() || task.eval.feature_width() != st.net.input_width())
        throw DataError("task feature width does not match the network input width " +
                        std::to_string(st.net.input_width()));
    if (task.train.n_classes != task.eval.n_classes) throw DataError("train and eval class counts differ");
}

// Trains every free weight and the head for `epochs` epochs with no prior weights in view.
double train_plain(TaskSession& s, CpgState& st, TaskId id, std::size_t epochs, const EngineHyper& hyper) {
    const std::vector<std::uint8_t> trainable(st.net.param_count(), 1);
    for (std::size_t e = 0; e < epochs; ++e) {
        const auto batches = s.next_epoch();
        train_masked_round(st.net, st.ledger, id, {}, trainable, s.head(), batches, hyper.train, s.optimizer());
    }
    return s.evaluate();
}

const TaskRecord& commit(CpgState& st, TaskRecord rec, const PruneResult& pruned) {
    st.ledger.commit_task(rec.id, pruned.survivors);
    rec.owned_count = pruned.survivors.size();
    st.records.push_back(std::move(rec));
    return st.records.back();
}

}  // namespace

void GrowthPolicy::validate() const {
    if (!(max_expansion >= 1.0)) throw ConfigError("max_expansion must be at least 1");
    if (!(increment_fraction > 0.0)) throw ConfigError("growth increment fraction must be positive");
    if (!(noise >= 0.0f)) throw ConfigError("growth noise must be non-negative");
}

void EngineHyper::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (max_epochs == 0) throw ConfigError("epochs must be at least 1");
    if (!std::isfinite(train.lr) || !std::isfinite(train.mask_lr) || !std::isfinite(train.momentum))
        throw ConfigError("learning rates must be finite");
    if (!std::isfinite(mask_threshold) || !std::isfinite(mask_init)) throw ConfigError("mask constants must be finite");
}

CpgState CpgState::create(std::span<const nn::LayerSpec> backbone, std::uint64_t seed, GrowthPolicy policy) {
    policy.validate();
    for (const auto& l : backbone)
        if (l.kind == nn::LayerKind::head) throw DimensionError("backbone must not contain a head layer");
    auto net = nn::build_network(backbone, seed);
    const auto n = net.param_count();
    return CpgState{std::move(net), Ledger(n), {}, policy, n, seed};
}

const TaskRecord& CpgState::record(TaskId id) const {
    if (id == 0 || id > records.size()) throw DimensionError("unknown task " + std::to_string(id));
    return records[id - 1];
}

double CpgState::expansion() const { return static_cast<double>(net.param_count()) / static_cast<double>(n0); }

double CpgState::redundancy() const { return static_cast<double>(ledger.free_count()) / static_cast<double>(n0); }

std::size_t CpgState::growth_events() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.growth_events;
    return n;
}

std::vector<std::size_t> plan_growth(const CpgState& st) {
    const auto& layers = st.net.layers();
    std::vector<std::size_t> inc(layers.size(), 0);
    for (std::size_t l = 0; l < layers.size(); ++l)
        if (layers[l].kind == nn::LayerKind::dense)
            inc[l] = static_cast<std::size_t>(
                std::ceil(st.policy.increment_fraction * static_cast<double>(layers[l].out_width)));

    const auto bound = static_cast<std::size_t>(std::floor(st.policy.max_expansion * static_cast<double>(st.n0)));
    while (nn::param_count_after_growth(st.net, inc) > bound) {
        auto largest = std::max_element(inc.rbegin(), inc.rend());
        if (*largest == 0) break;
        --*largest;
    }
    return inc;
}

const TaskRecord& learn_first_task(CpgState& st, const data::Task& task, const AccuracyGoal& goal,
                                   const PruneSchedule& schedule, const EngineHyper& hyper) {
    hyper.validate();
    schedule.validate();
    if (st.committed_tasks() != 0) throw OwnershipError("first task already learned");
    check_task_data(st, task);
    const TaskId id = 1;

    TaskSession s(st, task, id,
                  Head::init(st.net.output_width(), task.train.n_classes, derive(st.seed, id, Stream::head)), hyper);
    const double trained = train_plain(s, st, id, hyper.max_epochs, hyper);
    log(hyper, "task 1 trained to " + std::to_string(trained) + " (goal " + std::to_string(goal.value) + ")");
    if (trained < goal.value)
        throw GoalUnreachable("task 1 reached " + std::to_string(trained) + " after " +
                                  std::to_string(hyper.max_epochs) + " epochs, goal is " + std::to_string(goal.value),
                              trained);

    s.optimizer().reset();
    const auto pruned = gradual_prune(s, st.ledger.free_indices(), goal, schedule);
    log(hyper, "task 1 kept " + std::to_string(pruned.survivors.size()) + " of " +
                   std::to_string(pruned.survivors.size() + pruned.pruned.size()) + " weights at " +
                   std::to_string(pruned.accuracy));

    TaskRecord rec;
    rec.id = id;
    rec.head = s.head();
    rec.goal = goal;
    rec.achieved = pruned.accuracy;
    rec.classes = task.classes;
    return commit(st, std::move(rec), pruned);
}

const TaskRecord& learn_next_task(CpgState& st, const data::Task& task, const AccuracyGoal& goal,
                                  const PruneSchedule& schedule, const EngineHyper& hyper) {
    hyper.validate();
    schedule.validate();
    if (st.committed_tasks() == 0) throw OwnershipError("learn_next_task needs a committed first task");
    check_task_data(st, task);
    const auto id = static_cast<TaskId>(st.committed_tasks() + 1);

    if (hyper.reinit_free) reinit_free(st, derive(st.seed, id, Stream::reinit));
    TaskSession s(st, task, id,
                  Head::init(st.net.output_width(), task.train.n_classes, derive(st.seed, id, Stream::head)), hyper);

    const std::size_t n_prior = st.ledger.prior_indices(id).size();
    ShadowMask shadow = ShadowMask::uniform(n_prior, hyper.mask_init, hyper.mask_threshold);
    EngineHyper pick = hyper;
    if (hyper.force_all_picks) {
        shadow = ShadowMask::uniform(n_prior, 1.0f, 0.0f);
        pick.train.mask_lr = 0.0f;
    }

    std::mt19937_64 growth_rng(derive(st.seed, id, Stream::growth));
    std::size_t growth_events = 0;
    double acc = 0.0;
    for (std::size_t attempt = 0;; ++attempt) {
        for (std::size_t e = 0; e < hyper.pick_epochs; ++e) {
            const auto batches = s.next_epoch();
            train_pick_round(st.net, st.ledger, id, shadow, s.head(), batches, pick.train, s.optimizer());
        }
        acc = s.evaluate_with(binarize(shadow.shadow, shadow.threshold));
        log(hyper, "task " + std::to_string(id) + " attempt " + std::to_string(attempt) + ": " + std::to_string(acc) +
                       " (goal " + std::to_string(goal.value) + ")");
        if (acc >= goal.value || attempt >= st.policy.max_retries) break;

        const auto inc = plan_growth(st);
        if (std::all_of(inc.begin(), inc.end(), [](std::size_t d) { return d == 0; })) break;
        const std::size_t before = st.net.param_count();
        grow(st.ledger, st.net, inc);
        ++growth_events;
        if (st.policy.reset_on_grow) {
            reinit_free(st, derive(st.seed, id, Stream::reinit, growth_events));
        } else if (st.policy.noise > 0.0f) {
            std::uniform_real_distribution<float> dist(-st.policy.noise, st.policy.noise);
            for (std::size_t i = before; i < st.net.param_count(); ++i) st.net.params()[i] = dist(growth_rng);
        }
        s.head().widen(st.net.output_width(), st.policy.noise, growth_rng);
        // Growth only adds free weights, so the prior-owned set and the shadow's length are unchanged.
        if (hyper.reset_mask_on_grow && !hyper.force_all_picks)
            shadow = ShadowMask::uniform(n_prior, hyper.mask_init, hyper.mask_threshold);
        s.refresh_layers();
        s.optimizer().fit(st.net.param_count(), s.head().param_count());
        log(hyper, "grew to " + std::to_string(st.net.param_count()) + " params (x" + std::to_string(st.expansion()) +
                       ")");
    }

    const bool best_effort = acc < goal.value;
    s.set_mask(freeze_mask(shadow));
    s.optimizer().reset();
    // A missed goal is compacted against what was actually reached.
    AccuracyGoal prune_goal = goal;
    if (best_effort) prune_goal.value = s.evaluate();
    const auto pruned = gradual_prune(s, st.ledger.free_indices(), prune_goal, schedule);
    log(hyper, "task " + std::to_string(id) + " kept " + std::to_string(pruned.survivors.size()) + " weights at " +
                   std::to_string(pruned.accuracy) + (best_effort ? " (best effort)" : ""));

    TaskRecord rec;
    rec.id = id;
    rec.mask = freeze_mask(shadow);
    rec.head = s.head();
    rec.goal = goal;
    rec.achieved = pruned.accuracy;
    rec.best_effort = pruned.accuracy < goal.value;
    rec.growth_events = growth_events;
    rec.classes = task.classes;
    return commit(st, std::move(rec), pruned);
}

const TaskRecord& learn_task(CpgState& state, const data::Task& task, const AccuracyGoal& goal,
                             const PruneSchedule& schedule, const EngineHyper& hyper) {
    return state.committed_tasks() == 0 ? learn_first_task(state, task, goal, schedule, hyper)
                                        : learn_next_task(state, task, goal, schedule, hyper);
}

std::vector<float> task_view(const CpgState& st, TaskId id) {
    const auto& rec = st.record(id);
    if (id > st.committed_tasks()) throw DimensionError("task " + std::to_string(id) + " is not committed");
    return compose_view(st.ledger, st.net.params(), id, rec.mask, false);
}

nn::Tensor task_logits(const CpgState& st, TaskId id, const nn::Tensor& batch) {
    return task_logits(st.net, task_view(st, id), st.record(id).head, batch);
}

double evaluate(const CpgState& st, TaskId id, const data::Dataset& eval) {
    data::validate(eval);
    const auto& rec = st.record(id);
    if (eval.n_classes != rec.head.classes)
        throw DataError("evaluation data has " + std::to_string(eval.n_classes) + " classes, task " +
                        std::to_string(id) + " has " + std::to_string(rec.head.classes));
    return accuracy(st.net, task_view(st, id), rec.head, eval);
}

AccuracyGoal set_accuracy_goal(GoalSource mode, std::span<const double> baselines, double explicit_value,
                               double top_delta) {
    if (mode == GoalSource::explicit_value) {
        if (!(explicit_value >= 0.0 && explicit_value <= 1.0)) throw ConfigError("explicit goal must lie in [0, 1]");
        return {explicit_value, mode};
    }
    if (baselines.empty()) throw ConfigError(std::string("goal mode `") + to_string(mode) + "` needs baselines");
    const double mean = std::accumulate(baselines.begin(), baselines.end(), 0.0) / static_cast<double>(baselines.size());
    const double best = *std::max_element(baselines.begin(), baselines.end());
    double v = 0.0;
    switch (mode) {
        case GoalSource::avg: v = mean; break;
        case GoalSource::max: v = best; break;
        case GoalSource::top: v = std::max(mean, best) + top_delta; break;
        case GoalSource::explicit_value: break;
    }
    return {std::clamp(v, 0.0, 1.0), mode};
}

double train_scratch(std::span<const nn::LayerSpec> backbone, const data::Task& task, const EngineHyper& hyper,
                     std::uint64_t seed) {
    hyper.validate();
    auto st = CpgState::create(backbone, seed);
    check_task_data(st, task);
    TaskSession s(st, task, 1, Head::init(st.net.output_width(), task.train.n_classes, derive(seed, 1, Stream::head)),
                  hyper);
    return train_plain(s, st, 1, hyper.max_epochs, hyper);
}

}  // namespace cpg
