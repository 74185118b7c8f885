#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "foar/eval/harness.hpp"
#include "foar/sim/expert.hpp"

using namespace foar;
using namespace foar::eval;

namespace fs = std::filesystem;

namespace {

void set_coverage(sim::SimWorld& world, double target) {
    auto& b = world.state().board;
    std::fill(b.marks.begin(), b.marks.end(), std::uint8_t(1));
    b.union_marked = b.marks;
    std::size_t total = b.marks.size();
    std::size_t to_erase = static_cast<std::size_t>(target * total + 0.5);
    for (std::size_t i = 0; i < to_erase; ++i) b.marks[i] = 0;
}

void run_expert(sim::SimWorld& world, std::uint64_t seed, sim::Task task) {
    world.reset(seed, task);
    sim::ScriptedExpert expert(world.config(), task, seed);
    std::vector<sim::FtSample> last;
    for (int t = 0; t < 500; ++t) {
        Action a = expert.next_action(world.state(), last);
        if (expert.done() || expert.failed()) break;
        last = world.step(a, world.config().control_period);
    }
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST(WipingScore, DiscretizationBoundaries) {
    sim::SimWorld world{sim::SimConfig{}};
    world.reset(1, sim::Task::SurfaceWipe);
    set_coverage(world, 1.0);
    EXPECT_DOUBLE_EQ(wiping_score(world).score, 1.0);
    set_coverage(world, 0.5);
    EXPECT_DOUBLE_EQ(wiping_score(world).score, 0.5);
    set_coverage(world, 0.0);
    EXPECT_DOUBLE_EQ(wiping_score(world).score, 0.0);
    // boundaries exactly as specified (96-cell grid: pick representable
    // coverages on each side of 0.95 and 0.2)
    auto erase_exactly = [&](std::size_t n) {
        auto& b = world.state().board;
        std::fill(b.marks.begin(), b.marks.end(), std::uint8_t(1));
        b.union_marked = b.marks;
        for (std::size_t i = 0; i < n; ++i) b.marks[i] = 0;
    };
    erase_exactly(92);  // 0.9583 >= 0.95
    EXPECT_DOUBLE_EQ(wiping_score(world).score, 1.0);
    erase_exactly(91);  // 0.9479 < 0.95
    EXPECT_DOUBLE_EQ(wiping_score(world).score, 0.5);
    erase_exactly(20);  // 0.2083 >= 0.2
    EXPECT_DOUBLE_EQ(wiping_score(world).score, 0.5);
    erase_exactly(19);  // 0.1979 < 0.2
    EXPECT_DOUBLE_EQ(wiping_score(world).score, 0.0);
}

TEST(WipingScore, MonotoneInCoverage) {
    sim::SimWorld world{sim::SimConfig{}};
    world.reset(2, sim::Task::SurfaceWipe);
    double prev = -1;
    for (double c = 0.0; c <= 1.0; c += 0.05) {
        set_coverage(world, c);
        auto s = wiping_score(world);
        EXPECT_GE(s.score, prev);
        prev = s.score;
    }
}

TEST(AsrEvents, ExpertTraceAllTrue) {
    sim::SimWorld world{sim::SimConfig{}};
    run_expert(world, 5, sim::Task::SurfaceWipe);
    auto e = asr_events(world.state());
    EXPECT_TRUE(e.grasp);
    EXPECT_TRUE(e.operate);
    EXPECT_TRUE(e.place);
}

TEST(AsrEvents, NeverClosedGripperMeansNoGraspAndNoOperate) {
    sim::SimWorld world{sim::SimConfig{}};
    world.reset(6, sim::Task::SurfaceWipe);
    Action wander;
    wander.width = 0.08;  // stays open
    core::Rng rng(3);
    for (int t = 0; t < 80; ++t) {
        wander.pose.pos = {rng.uniform(-0.2, 0.2), rng.uniform(-0.28, 0.28),
                           rng.uniform(0.0, 0.35)};
        world.step(wander, 0.1);
    }
    auto e = asr_events(world.state());
    EXPECT_FALSE(e.grasp);
    EXPECT_FALSE(e.operate);  // cannot contact without the tool
}

TEST(SegmentStats, EvenCutOracleAndNoCuts) {
    sim::SimWorld world{sim::SimConfig{}};
    world.reset(7, sim::Task::NotchCut);
    auto& cells = world.state().cut_obj.cut;
    ASSERT_EQ(cells.size(), 50u);
    auto none = segment_stats(world);
    EXPECT_EQ(none.count, 1);
    EXPECT_DOUBLE_EQ(none.mean, 1.0);
    EXPECT_DOUBLE_EQ(none.stddev, 0.0);

    cells[10] = cells[20] = cells[30] = cells[40] = 1;
    auto even = segment_stats(world);
    EXPECT_EQ(even.count, 5);
    EXPECT_DOUBLE_EQ(even.mean, 0.2);
    EXPECT_DOUBLE_EQ(even.stddev, 0.0);
}

TEST(RunTrials, OracleWipesAndPairedSeedsAreDeterministic) {
    sim::SimConfig sim_cfg;
    runtime::RuntimeConfig rt;
    rt.n_max = 400;
    runtime::ReactiveThresholds thr;
    MethodSpec oracle{"oracle", "", "", true};
    auto r1 = run_trials(sim_cfg, oracle, sim::Task::SurfaceWipe, 5, 100,
                         sim::DisturbanceKind::None, rt, thr);
    auto r2 = run_trials(sim_cfg, oracle, sim::Task::SurfaceWipe, 5, 100,
                         sim::DisturbanceKind::None, rt, thr);
    ASSERT_EQ(r1.size(), 5u);
    for (std::size_t i = 0; i < r1.size(); ++i) {
        EXPECT_EQ(r1[i].seed, 100 + i);
        EXPECT_EQ(r1[i].coverage, r2[i].coverage);
        EXPECT_EQ(r1[i].corrections, r2[i].corrections);
        EXPECT_GE(r1[i].coverage, 0.7) << "seed " << r1[i].seed;
        EXPECT_TRUE(r1[i].grasp);
        EXPECT_TRUE(r1[i].operate);
    }
    auto row = aggregate("oracle", "none", r1);
    EXPECT_EQ(row.trials, 5);
    EXPECT_GT(row.mean_coverage, 0.7);
    EXPECT_DOUBLE_EQ(row.grasp_pct, 100.0);
}

TEST(RunTrials, RewriteTriggersExactlyOnceAfterCompletedPass) {
    sim::SimConfig sim_cfg;
    runtime::RuntimeConfig rt;
    rt.n_max = 400;
    runtime::ReactiveThresholds thr;
    MethodSpec oracle{"oracle", "", "", true};
    auto results = run_trials(sim_cfg, oracle, sim::Task::SurfaceWipe, 5, 300,
                              sim::DisturbanceKind::Rewrite, rt, thr);
    for (const auto& r : results) {
        EXPECT_GE(r.disturb_tick, 0) << "seed " << r.seed;
        EXPECT_EQ(r.disturbance, "rewrite");
    }
}

TEST(RunTrials, MissingCheckpointRaises) {
    sim::SimConfig sim_cfg;
    runtime::RuntimeConfig rt;
    runtime::ReactiveThresholds thr;
    MethodSpec broken{"broken", "/nonexistent/ckpt.foar", "/nonexistent/cfg.json", true};
    EXPECT_THROW(run_trials(sim_cfg, broken, sim::Task::SurfaceWipe, 1, 0,
                            sim::DisturbanceKind::None, rt, thr),
                 std::exception);
}

TEST(AblationMatrix, ReportIsByteIdenticalAcrossReruns) {
    sim::SimConfig sim_cfg;
    runtime::RuntimeConfig rt;
    rt.n_max = 300;
    runtime::ReactiveThresholds thr;
    AblationSpec spec;
    spec.methods = {MethodSpec{"oracle", "", "", true}};
    spec.trials = 3;
    spec.seed_base = 500;
    fs::path dir_a = fs::temp_directory_path() / "foar_ablation_a";
    fs::path dir_b = fs::temp_directory_path() / "foar_ablation_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    auto rows_a = ablation_matrix(sim_cfg, sim::Task::SurfaceWipe, spec, rt, thr,
                                  dir_a.string());
    auto rows_b = ablation_matrix(sim_cfg, sim::Task::SurfaceWipe, spec, rt, thr,
                                  dir_b.string());
    EXPECT_EQ(read_file(dir_a / "comparison.csv"), read_file(dir_b / "comparison.csv"));
    EXPECT_EQ(read_file(dir_a / "comparison.txt"), read_file(dir_b / "comparison.txt"));
    ASSERT_EQ(rows_a.size(), 1u);
    EXPECT_EQ(rows_a[0].trials, 3);
    // per-trial rollout logs retained
    EXPECT_TRUE(fs::exists(dir_a / "oracle" / "trial_00" / "rollout.csv"));
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST(AblationMatrix, ParallelJobsMatchSerial) {
    sim::SimConfig sim_cfg;
    runtime::RuntimeConfig rt;
    rt.n_max = 200;
    runtime::ReactiveThresholds thr;
    MethodSpec oracle{"oracle", "", "", true};
    auto serial = run_trials(sim_cfg, oracle, sim::Task::SurfaceWipe, 4, 700,
                             sim::DisturbanceKind::None, rt, thr, "", 1);
    auto parallel = run_trials(sim_cfg, oracle, sim::Task::SurfaceWipe, 4, 700,
                               sim::DisturbanceKind::None, rt, thr, "", 2);
    ASSERT_EQ(serial.size(), parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        EXPECT_EQ(serial[i].coverage, parallel[i].coverage);
        EXPECT_EQ(serial[i].score, parallel[i].score);
    }
}
