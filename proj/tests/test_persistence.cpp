#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <unistd.h>

#include "cpg/checkpoint.hpp"
#include "cpg/config.hpp"
#include "cpg/error.hpp"
#include "cpg/experiment.hpp"
#include "cpg/report.hpp"
#include "support.hpp"

using namespace cpg;
namespace fs = std::filesystem;

namespace {

CpgState trained_state(std::size_t n_tasks, std::uint64_t seed = 3) {
    const auto seq = data::gen_synthetic_tasks(n_tasks, 3, 8, 40, 5.0, seed);
    const std::vector<nn::LayerSpec> spec = {nn::dense(8, 12), nn::relu(12), nn::dense(12, 6), nn::relu(6)};
    auto st = CpgState::create(spec, seed);
    EngineHyper h;
    h.max_epochs = 10;
    h.pick_epochs = 5;
    PruneSchedule s;
    s.step_fraction = 0.2;
    s.retrain_epochs = 2;
    for (const auto& t : seq.tasks) learn_task(st, t, AccuracyGoal{0.8}, s, h);
    return st;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("cpg-" + tag + "-" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

TaskRecord record_with_goal(TaskId id, double goal, bool flag = false) {
    TaskRecord r;
    r.id = id;
    r.goal.value = goal;
    r.best_effort = flag;
    return r;
}

}  // namespace

TEST_CASE("pack_bits is LSB first") {
    const std::vector<std::uint8_t> bits = {1, 0, 0, 0, 0, 0, 0, 1, 1};
    const auto packed = pack_bits(bits);
    CHECK(packed == std::vector<std::uint8_t>{0x81, 0x01});
    CHECK(unpack_bits(packed, 9) == bits);
    CHECK(pack_bits(std::vector<std::uint8_t>{}).empty());
    CHECK_THROWS(unpack_bits(packed, 17));
}

TEST_CASE("checkpoint round trip is byte identical and bit exact") {
    const auto st = trained_state(3);
    const auto bytes = serialize_checkpoint(st);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CPG1");
    const auto back = deserialize_checkpoint(bytes);
    CHECK(serialize_checkpoint(back) == bytes);
    CHECK(testing::bit_equal(back.net.params(), st.net.params()));
    CHECK(back.ledger.owners() == st.ledger.owners());
    CHECK(back.records == st.records);
    CHECK(back.n0 == st.n0);

    std::mt19937_64 rng(4);
    const auto probe = testing::random_batch(16, 8, rng);
    for (TaskId j = 1; j <= 3; ++j)
        CHECK(testing::bit_equal(task_logits(back, j, probe).data, task_logits(st, j, probe).data));

    TempDir dir("ckpt");
    const auto path = dir.path / "state.ckpt";
    save_checkpoint(st, path);
    const auto loaded = load_checkpoint(path);
    CHECK(serialize_checkpoint(loaded) == bytes);
    CHECK(fs::file_size(path) == bytes.size());
}

TEST_CASE("checkpoint corruption is detected") {
    const auto st = trained_state(2);
    auto bytes = serialize_checkpoint(st);

    SUBCASE("flipped payload byte") {
        bytes[bytes.size() / 2] ^= 0x40;
        CHECK_THROWS_AS(deserialize_checkpoint(bytes), CheckpointError);
    }
    SUBCASE("bad magic") {
        bytes[0] = 'X';
        CHECK_THROWS_AS(deserialize_checkpoint(bytes), CheckpointError);
    }
    SUBCASE("truncated") {
        bytes.resize(bytes.size() - 9);
        CHECK_THROWS_AS(deserialize_checkpoint(bytes), CheckpointError);
    }
    SUBCASE("too short for a header") {
        bytes.resize(6);
        CHECK_THROWS_AS(deserialize_checkpoint(bytes), CheckpointError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint("/nonexistent/state.ckpt"), CheckpointError); }
}

TEST_CASE("report averages a twenty-task accuracy row") {
    const std::vector<double> acc = {65.2, 76.6, 79.8, 81.4, 86.6, 84.8, 83.4, 85.0, 87.2, 89.2,
                                     90.8, 82.4, 85.6, 85.2, 53.2, 74.4, 70.0, 73.4, 88.8, 94.8};
    std::vector<TaskRecord> recs;
    std::vector<double> frac;
    for (std::size_t i = 0; i < acc.size(); ++i) {
        recs.push_back(record_with_goal(static_cast<TaskId>(i + 1), 0.5));
        frac.push_back(acc[i] / 100.0);
    }
    const auto r = make_report(recs, frac, 150, 100, 41);
    const auto text = format_report(r);
    const auto last = text.substr(text.rfind("avg,exp,red\n") + 12);
    CHECK(last == "80.9,1.50,0.41\n");
    // Mean consistency within one output decimal.
    CHECK(std::abs(std::accumulate(acc.begin(), acc.end(), 0.0) / 20.0 - 80.9) <= 0.05);
}

TEST_CASE("report layout") {
    std::vector<TaskRecord> recs = {record_with_goal(1, 0.95), record_with_goal(2, 0.9, true)};
    recs[0].achieved = 1.0;
    recs[1].achieved = 0.875;
    CHECK(format_report(recs, 110, 100, 25) ==
          "task,accuracy,goal,best_effort\n1,100.0,95.0,0\n2,87.5,90.0,1\navg,exp,red\n93.8,1.10,0.25\n");

    const std::vector<TaskRecord> one = {record_with_goal(1, 1.0)};
    const std::vector<double> full = {1.0};
    CHECK(make_report(one, full, 10, 10, 0).average == 1.0);
    CHECK(format_report(make_report(one, full, 10, 10, 0)).find("\n100.0,1.00,0.00\n") != std::string::npos);
    CHECK_THROWS_AS(format_report(std::vector<TaskRecord>{}, 10, 10, 0), Error);
    CHECK(make_report(recs, std::vector<double>{0.5, 0.7}, 110, 100, 25).any_best_effort());

    TempDir dir("report");
    emit_report(recs, 110, 100, 25, dir.path / "r.csv");
    CHECK(read_text(dir.path / "r.csv") == format_report(recs, 110, 100, 25));
}

TEST_CASE("size_report accounting") {
    const std::vector<nn::LayerSpec> spec = {nn::dense(4, 8), nn::relu(8), nn::dense(8, 3)};
    auto st = CpgState::create(spec, 1);
    auto s = size_report(st);
    CHECK(s.backbone == 268);
    CHECK(s.ledger == 134);
    CHECK(s.heads == 0);
    CHECK(s.masks == 0);
    CHECK(s.normalization == 0);

    TaskRecord r;
    r.id = 2;
    r.mask.assign(50, 1);
    r.head = Head::init(3, 2, 1);
    st.records.push_back(r);
    s = size_report(st);
    CHECK(s.masks == 7);
    CHECK(s.heads == 4 * 8);

    const auto grown = trained_state(3);
    std::size_t last = 0;
    for (std::size_t k = 1; k <= 3; ++k) {
        CpgState partial = grown;
        partial.records.resize(k);
        const auto total = size_report(partial).total();
        CHECK(total > last);
        last = total;
    }
}

TEST_CASE("config parsing") {
    const auto c = parse_config(R"(
# comment line
seed = 42
source = idx
train_images = a.idx   # trailing comment
train_labels = b.idx
test_images = /abs/c.idx
test_labels = d.idx
hidden = 32, 16, 8
goal_mode = top
top_delta = 0.01
max_expansion = 1.25
force_all_picks = true
)",
                                "/base");
    CHECK(c.seed == 42);
    CHECK(c.source == TaskSource::idx);
    CHECK(c.train_images == fs::path("/base/a.idx"));
    CHECK(c.test_images == fs::path("/abs/c.idx"));
    CHECK(c.hidden == std::vector<std::size_t>{32, 16, 8});
    CHECK(c.goal_mode == GoalSource::top);
    CHECK(c.top_delta == 0.01);
    CHECK(c.growth.max_expansion == 1.25);
    CHECK(c.hyper.force_all_picks);

    CHECK_THROWS_AS(parse_config("colour = blue\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("seed\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("seed = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("seed =\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("goal = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("prune_step = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("source = idx\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("max_expansion = 0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("hidden = 8,0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("verbose = maybe\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("CPG_SEED overrides the configured seed") {
    auto c = parse_config("seed = 5\n");
    ::setenv("CPG_SEED", "99", 1);
    apply_env_overrides(c);
    CHECK(c.seed == 99);
    ::setenv("CPG_SEED", "x", 1);
    CHECK_THROWS_AS(apply_env_overrides(c), ConfigError);
    ::unsetenv("CPG_SEED");
    apply_env_overrides(c);
    CHECK(c.seed == 99);
}

TEST_CASE("experiment runs are reproducible") {
    auto c = parse_config(R"(
seed = 8
tasks = 3
classes_per_task = 3
dim = 8
per_class = 40
sep = 5
hidden = 12, 6
goal = 0.8
epochs = 10
pick_epochs = 5
retrain_epochs = 2
prune_step = 0.2
)");
    const auto tasks = load_tasks(c);
    REQUIRE(tasks.tasks.size() == 3);
    std::vector<TaskId> seen;
    const auto a = run_experiment(c, tasks, [&](const CpgState&, TaskId id) { seen.push_back(id); });
    const auto b = run_experiment(c, tasks);
    CHECK(seen == std::vector<TaskId>{1, 2, 3});
    CHECK(format_report(a.report) == format_report(b.report));
    CHECK(serialize_checkpoint(a.state) == serialize_checkpoint(b.state));
    CHECK(a.report.accuracy.size() == 3);
    CHECK(backbone_spec(8, std::vector<std::size_t>{12, 6}).size() == 4);
    CHECK(baseline_seed(1, 0, 0) != baseline_seed(1, 0, 1));
    CHECK(baseline_seed(1, 0, 0) != baseline_seed(1, 1, 0));
}
