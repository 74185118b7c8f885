#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "foar/sim/expert.hpp"
#include "foar/sim/world.hpp"

using namespace foar;
using namespace foar::sim;

namespace {

struct EpisodeRun {
    bool done = false;
    bool failed = false;
    int ticks = 0;
    int sweep_ticks = 0;
    int sweep_in_band = 0;
};

EpisodeRun run_expert_episode(SimWorld& world, std::uint64_t seed, Task task,
                              int max_ticks = 500) {
    world.reset(seed, task);
    ScriptedExpert expert(world.config(), task, seed);
    std::vector<FtSample> last;
    EpisodeRun run;
    for (int t = 0; t < max_ticks; ++t) {
        Action a = expert.next_action(world.state(), last);
        if (expert.done() || expert.failed()) break;
        bool sweeping = expert.phase_name() == "sweep";
        last = world.step(a, world.config().control_period);
        ++run.ticks;
        if (sweeping) {
            ++run.sweep_ticks;
            double fz = 0;
            for (const auto& s : last) fz += s.f.z;
            fz /= last.size();
            if (fz >= 2.0 && fz <= 6.0) ++run.sweep_in_band;
        }
    }
    run.done = expert.done();
    run.failed = expert.failed();
    return run;
}

/// Attached tool, tip at the given penetration below the board top, centered.
void craft_contact_state(SimWorld& world, double penetration) {
    world.reset(3, Task::SurfaceWipe);
    auto& s = world.state();
    s.tool.attached = true;
    s.tool.grasp_offset = 0.0;
    s.gripper_width = 0.03;
    s.stats.ever_attached = true;
    double tip_offset = s.tool.length / 2.0;
    s.ee.pos = {s.board.pose.pos.x, s.board.pose.pos.y,
                s.board.top_z - penetration + tip_offset};
    s.ee.orn = Quat::identity();
    s.tool.pose.orn = s.ee.orn;
    s.tool.pose.pos = s.ee.pos - s.tool.axis() * s.tool.grasp_offset;
}

int count_marks(const SimState& s) {
    return static_cast<int>(
        std::count(s.board.marks.begin(), s.board.marks.end(), std::uint8_t(1)));
}

}  // namespace

TEST(SimStep, NoContactMeansNoiseOnlyForce) {
    SimWorld world{SimConfig{}};
    world.reset(11, Task::SurfaceWipe);
    auto& s = world.state();
    s.tool.attached = true;
    s.gripper_width = 0.03;
    double tip_offset = s.tool.length / 2.0;
    s.ee.pos = {s.board.pose.pos.x, s.board.pose.pos.y, s.board.top_z + 0.05 + tip_offset};
    s.tool.pose.pos = s.ee.pos;

    std::vector<double> fz;
    for (int i = 0; i < 100; ++i) {
        Action a;
        a.pose.pos = {s.ee.pos.x + 0.03, s.ee.pos.y, s.ee.pos.z};
        a.pose.orn = Quat::identity();
        a.width = 0.03;
        for (const auto& smp : world.step(a, 0.1)) fz.push_back(smp.f.z);
        a.pose.pos.x -= 0.03;
        for (const auto& smp : world.step(a, 0.1)) fz.push_back(smp.f.z);
    }
    double mean = std::accumulate(fz.begin(), fz.end(), 0.0) / fz.size();
    double bound = 4.0 * world.config().contact.sensor_sigma_f / std::sqrt(fz.size());
    EXPECT_LT(std::abs(mean), bound * 2) << "mean " << mean;
}

TEST(SimStep, PenetrationProducesSpringForce) {
    SimWorld world{SimConfig{}};
    craft_contact_state(world, 0.002);
    Action hold;
    hold.pose.pos = world.state().ee.pos;
    hold.pose.orn = Quat::identity();
    hold.width = 0.03;
    std::vector<double> fz;
    for (int i = 0; i < 30; ++i)
        for (const auto& smp : world.step(hold, 0.1)) fz.push_back(smp.f.z);
    double mean = std::accumulate(fz.begin(), fz.end(), 0.0) / fz.size();
    EXPECT_NEAR(mean, 2.0, 3.0 * 0.3 / std::sqrt(fz.size()) + 0.05);
}

TEST(SimStep, EmitsExactlyTenStrictlyIncreasingSamples) {
    SimWorld world{SimConfig{}};
    world.reset(4, Task::SurfaceWipe);
    Action hold;
    hold.pose.pos = world.state().ee.pos;
    hold.width = 0.08;
    double prev_t = -1;
    for (int i = 0; i < 5; ++i) {
        auto samples = world.step(hold, 0.1);
        ASSERT_EQ(samples.size(), 10u);
        for (const auto& s : samples) {
            EXPECT_GT(s.t, prev_t);
            prev_t = s.t;
        }
    }
}

TEST(SimStep, NonFiniteActionRejectedStateUnchanged) {
    SimWorld world{SimConfig{}};
    world.reset(5, Task::SurfaceWipe);
    auto before = world.state().ee.pos;
    Action bad;
    bad.pose.pos = {0, 0, std::numeric_limits<double>::quiet_NaN()};
    EXPECT_THROW(world.step(bad, 0.1), SimError);
    EXPECT_EQ(world.state().ee.pos.x, before.x);
    EXPECT_EQ(world.state().ee.pos.z, before.z);
}

TEST(SimStep, DeterministicGivenSeedAndActions) {
    auto run = [](std::uint64_t seed) {
        SimWorld world{SimConfig{}};
        world.reset(seed, Task::SurfaceWipe);
        std::vector<double> stream;
        Action a;
        a.pose.orn = Quat::identity();
        a.width = 0.05;
        for (int i = 0; i < 40; ++i) {
            a.pose.pos = {0.05 * std::sin(i * 0.3), -0.1 + 0.002 * i, 0.15 - 0.002 * i};
            for (const auto& s : world.step(a, 0.1)) {
                stream.push_back(s.f.x);
                stream.push_back(s.f.y);
                stream.push_back(s.f.z);
                stream.push_back(s.tau.x);
            }
        }
        stream.push_back(world.state().ee.pos.x);
        stream.push_back(world.state().clock);
        return stream;
    };
    EXPECT_EQ(run(42), run(42));
    EXPECT_NE(run(42), run(43));
}

TEST(SimStep, NoiseStatsNearZeroMean) {
    SimWorld world{SimConfig{}};
    world.reset(9, Task::SurfaceWipe);
    Action hold;
    hold.pose.pos = world.state().ee.pos;
    hold.width = 0.08;
    std::vector<Vec3> fs;
    while (fs.size() < 10000) {
        for (const auto& s : world.step(hold, 0.1)) fs.push_back(s.f);
    }
    double n = static_cast<double>(fs.size());
    auto mean_of = [&](auto getter) {
        double mean = 0;
        for (const auto& v : fs) mean += getter(v);
        return mean / n;
    };
    EXPECT_LT(std::abs(mean_of([](const Vec3& v) { return v.x; })), 4.0 * 0.3 / 100.0);
    EXPECT_LT(std::abs(mean_of([](const Vec3& v) { return v.y; })), 4.0 * 0.3 / 100.0);
    EXPECT_LT(std::abs(mean_of([](const Vec3& v) { return v.z; })), 4.0 * 0.3 / 100.0);
}

TEST(SimStep, NoErasureWithoutContactForce) {
    SimWorld world{SimConfig{}};
    world.reset(21, Task::SurfaceWipe);
    auto& s = world.state();
    s.tool.attached = true;
    s.gripper_width = 0.03;
    double tip_offset = s.tool.length / 2.0;
    int before = count_marks(s);
    Action a;
    a.width = 0.03;
    for (int i = 0; i <= 30; ++i) {
        double x = s.board.pose.pos.x - 0.15 + 0.01 * i;
        a.pose.pos = {x, s.board.pose.pos.y, s.board.top_z + 0.001 + tip_offset};
        world.step(a, 0.1);
    }
    EXPECT_EQ(count_marks(world.state()), before);
    EXPECT_EQ(world.state().stats.erase_events, 0);
}

TEST(SimStep, AttachmentAndRigidFollow) {
    SimWorld world{SimConfig{}};
    world.reset(31, Task::SurfaceWipe);
    auto& s = world.state();
    Vec3 grasp = s.tool.pose.pos + s.tool.axis() * 0.02;
    Action a;
    a.pose.pos = grasp;
    a.width = 0.08;
    for (int i = 0; i < 20; ++i) world.step(a, 0.1);
    EXPECT_FALSE(world.state().tool.attached);
    a.width = 0.03;
    for (int i = 0; i < 5; ++i) world.step(a, 0.1);
    ASSERT_TRUE(world.state().tool.attached);
    EXPECT_NEAR(world.state().tool.grasp_offset, 0.02, 0.005);
    a.pose.pos = {grasp.x + 0.05, grasp.y - 0.04, 0.2};
    for (int i = 0; i < 10; ++i) world.step(a, 0.1);
    const auto& st = world.state();
    Vec3 expected = st.ee.pos - st.tool.axis() * st.tool.grasp_offset;
    EXPECT_NEAR(st.tool.pose.pos.x, expected.x, 1e-12);
    EXPECT_NEAR(st.tool.pose.pos.z, expected.z, 1e-12);
}

TEST(Expert, WipeCoverageAcrossFiftySeeds) {
    SimConfig cfg;
    int done_count = 0;
    double band_occupancy_total = 0;
    int band_runs = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        SimWorld world{cfg};
        auto run = run_expert_episode(world, seed, Task::SurfaceWipe);
        EXPECT_FALSE(run.failed) << "seed " << seed;
        if (run.done) ++done_count;
        EXPECT_GE(world.task_metrics().coverage, 0.95) << "seed " << seed;
        if (run.sweep_ticks > 0) {
            band_occupancy_total +=
                static_cast<double>(run.sweep_in_band) / run.sweep_ticks;
            ++band_runs;
        }
        EXPECT_TRUE(world.state().stats.ever_attached) << "seed " << seed;
        EXPECT_GT(world.state().stats.erase_events, 0) << "seed " << seed;
        EXPECT_TRUE(world.state().stats.released_in_zone) << "seed " << seed;
    }
    EXPECT_EQ(done_count, 50);
    EXPECT_GE(band_occupancy_total / band_runs, 0.90);
}

TEST(Expert, SeedSevenEpisodeShape) {
    SimWorld world{SimConfig{}};
    auto run = run_expert_episode(world, 7, Task::SurfaceWipe);
    EXPECT_TRUE(run.done);
    EXPECT_GE(run.ticks, 100);
    EXPECT_GE(world.task_metrics().coverage, 0.95);
}

TEST(Expert, FirstActionsApproachToolWithOpenGripper) {
    SimWorld world{SimConfig{}};
    world.reset(13, Task::SurfaceWipe);
    ScriptedExpert expert(world.config(), Task::SurfaceWipe, 13);
    Action a = expert.next_action(world.state(), {});
    EXPECT_GT(a.width, world.config().grip_close_width);
    double dx = a.pose.pos.x - world.state().tool.pose.pos.x;
    double dy = a.pose.pos.y - world.state().tool.pose.pos.y;
    EXPECT_LT(std::sqrt(dx * dx + dy * dy), 0.02);
}

TEST(Expert, NotchCutMakesFiveEvenSegments) {
    SimConfig cfg;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SimWorld world{cfg};
        auto run = run_expert_episode(world, seed, Task::NotchCut);
        EXPECT_TRUE(run.done) << "seed " << seed;
        auto m = world.task_metrics();
        EXPECT_EQ(m.segment_count, 5) << "seed " << seed;
        EXPECT_NEAR(m.segment_mean, 0.2, 1e-9);
        EXPECT_LE(m.segment_std, 0.06) << "seed " << seed;
        EXPECT_TRUE(world.state().stats.released_in_zone);
    }
}

TEST(Render, TableOnlySceneIsFlat) {
    SimWorld world{SimConfig{}};
    world.reset(2, Task::SurfaceWipe);
    auto& s = world.state();
    s.board.cols = s.board.rows = 0;
    s.board.marks.clear();
    s.board.union_marked.clear();
    s.board.w = s.board.h = 0;
    s.tool.pose.pos = {10, 10, 10};  // cropped away
    s.ee.pos = {10, 10, 10};         // cropped away
    auto pc = world.render_pointcloud();
    ASSERT_GE(pc.size(), 1u);
    for (std::size_t i = 0; i < pc.size(); ++i) EXPECT_EQ(pc.point(i)[2], 0.0f);
}

TEST(Render, MarkedAndErasedCellsDiffer) {
    SimWorld world{SimConfig{}};
    world.reset(17, Task::SurfaceWipe);
    auto& b = world.state().board;
    std::fill(b.marks.begin(), b.marks.end(), std::uint8_t(1));
    b.marks[b.idx(3, 3)] = 0;
    auto pc = world.render_pointcloud();
    bool saw_dark = false, saw_light = false;
    for (std::size_t i = 0; i < pc.size(); ++i) {
        const float* p = pc.point(i);
        if (std::abs(p[2] - b.top_z) > 1e-6) continue;
        if (p[3] < 0.5f) saw_dark = true;
        if (p[3] > 0.5f) saw_light = true;
    }
    EXPECT_TRUE(saw_dark);
    EXPECT_TRUE(saw_light);
}

TEST(Render, CloudDeterministicForSameState) {
    SimWorld world{SimConfig{}};
    world.reset(19, Task::SurfaceWipe);
    auto a = world.render_pointcloud();
    auto b = world.render_pointcloud();
    EXPECT_EQ(a.data, b.data);
}

TEST(Render, ImageResolutionAndMarkSensitivity) {
    SimWorld world{SimConfig{}};
    world.reset(23, Task::SurfaceWipe);
    auto& s = world.state();
    s.ee.pos = {0.2, -0.28, 0.3};  // keep markers away from the board
    s.tool.pose.pos = {-0.2, -0.28, 0.06};
    auto img1 = world.render_image();
    EXPECT_EQ(img1.h, 32);
    EXPECT_EQ(img1.w, 32);
    EXPECT_EQ(img1.c, 3);

    auto& b = s.board;
    int cell = b.idx(5, 4);
    b.marks[cell] = b.marks[cell] ? 0 : 1;
    auto img2 = world.render_image();
    EXPECT_NE(img1.data, img2.data);

    std::fill(b.marks.begin(), b.marks.end(), std::uint8_t(0));
    auto img3 = world.render_image();
    float light = -1;
    bool uniform = true;
    for (int y = 0; y < img3.h; ++y)
        for (int x = 0; x < img3.w; ++x) {
            double wx = world.config().ws_x_min +
                        (x + 0.5) / img3.w * (world.config().ws_x_max - world.config().ws_x_min);
            double wy = world.config().ws_y_min +
                        (y + 0.5) / img3.h * (world.config().ws_y_max - world.config().ws_y_min);
            Quat inv = b.pose.orn;
            inv.x = -inv.x;
            inv.y = -inv.y;
            inv.z = -inv.z;
            Vec3 l = inv.rotate({wx - b.pose.pos.x, wy - b.pose.pos.y, 0});
            if (std::abs(l.x) > b.w / 2 - 0.02 || std::abs(l.y) > b.h / 2 - 0.02) continue;
            if (light < 0) light = img3.at(y, x, 0);
            if (img3.at(y, x, 0) != light) uniform = false;
        }
    EXPECT_TRUE(uniform);
    EXPECT_GT(light, 0.8f);
}

TEST(Disturbance, RewriteOnFullyMarkedBoardIsNoop) {
    SimWorld world{SimConfig{}};
    world.reset(29, Task::SurfaceWipe);
    auto& b = world.state().board;
    std::fill(b.marks.begin(), b.marks.end(), std::uint8_t(1));
    b.union_marked = b.marks;
    auto before = b.marks;
    core::Rng rng(1);
    world.apply_disturbance(DisturbanceKind::Rewrite, rng);
    EXPECT_EQ(world.state().board.marks, before);
}

TEST(Disturbance, RewriteRestoresSubsetOfErasedCells) {
    SimWorld world{SimConfig{}};
    world.reset(29, Task::SurfaceWipe);
    auto& b = world.state().board;
    int initial = count_marks(world.state());
    ASSERT_GT(initial, 10);
    std::fill(b.marks.begin(), b.marks.end(), std::uint8_t(0));
    core::Rng rng(5);
    world.apply_disturbance(DisturbanceKind::Rewrite, rng);
    int rewritten = count_marks(world.state());
    EXPECT_GE(rewritten, static_cast<int>(0.3 * initial) - 1);
    EXPECT_LE(rewritten, static_cast<int>(0.6 * initial) + 1);
    for (std::size_t i = 0; i < b.marks.size(); ++i)
        if (b.marks[i]) EXPECT_TRUE(b.union_marked[i]);
}

TEST(Disturbance, MovePreservesMarksAndShiftsPoseByDelta) {
    SimWorld world{SimConfig{}};
    world.reset(37, Task::SurfaceWipe);
    auto marks_before = world.state().board.marks;
    Pose pose_before = world.state().board.pose;
    core::Rng rng(8);
    core::Rng probe = rng;  // same stream: predict the sampled delta
    double dx = probe.uniform(-world.config().move_max_shift, world.config().move_max_shift);
    double dy = probe.uniform(-world.config().move_max_shift, world.config().move_max_shift);
    double dyaw = probe.uniform(-world.config().move_max_yaw, world.config().move_max_yaw);
    world.apply_disturbance(DisturbanceKind::Move, rng);
    const auto& b = world.state().board;
    EXPECT_EQ(b.marks, marks_before);
    EXPECT_NEAR(b.pose.pos.x, pose_before.pos.x + dx, 1e-12);
    EXPECT_NEAR(b.pose.pos.y, pose_before.pos.y + dy, 1e-12);
    Quat expected = Quat::from_yaw(dyaw) * pose_before.orn;
    EXPECT_NEAR(std::abs(b.pose.orn.dot(expected)), 1.0, 1e-9);
}

TEST(Disturbance, CombinedEqualsSequentialComposition) {
    SimConfig cfg;
    auto make = [&]() {
        SimWorld w{cfg};
        w.reset(41, Task::SurfaceWipe);
        auto& b = w.state().board;
        for (std::size_t i = 0; i < b.marks.size(); i += 2) b.marks[i] = 0;
        return w;
    };
    SimWorld combined = make();
    SimWorld sequential = make();
    core::Rng rng_a(77), rng_b(77);
    combined.apply_disturbance(DisturbanceKind::RewriteMove, rng_a);
    sequential.apply_disturbance(DisturbanceKind::Rewrite, rng_b);
    sequential.apply_disturbance(DisturbanceKind::Move, rng_b);
    EXPECT_EQ(combined.state().board.marks, sequential.state().board.marks);
    EXPECT_EQ(combined.state().board.pose.pos.x, sequential.state().board.pose.pos.x);
    EXPECT_EQ(combined.state().board.pose.orn.z, sequential.state().board.pose.orn.z);
}

TEST(Metrics, CoverageFullyErased) {
    SimWorld world{SimConfig{}};
    world.reset(43, Task::SurfaceWipe);
    auto& b = world.state().board;
    std::fill(b.marks.begin(), b.marks.end(), std::uint8_t(0));
    EXPECT_DOUBLE_EQ(world.task_metrics().coverage, 1.0);
}

TEST(Metrics, SegmentsOnCraftedPatterns) {
    SimWorld cut{SimConfig{}};
    cut.reset(44, Task::NotchCut);
    auto& cells = cut.state().cut_obj.cut;
    ASSERT_EQ(cells.size(), 50u);
    auto m0 = cut.task_metrics();
    EXPECT_EQ(m0.segment_count, 1);
    EXPECT_DOUBLE_EQ(m0.segment_mean, 1.0);
    EXPECT_DOUBLE_EQ(m0.segment_std, 0.0);

    cells[10] = cells[21] = cells[32] = cells[43] = 1;
    auto m1 = cut.task_metrics();
    EXPECT_EQ(m1.segment_count, 5);
}

TEST(Metrics, RandomPatternsMatchBruteForce) {
    SimWorld world{SimConfig{}};
    world.reset(47, Task::NotchCut);
    core::Rng rng(123);
    for (int trial = 0; trial < 300; ++trial) {
        auto& cells = world.state().cut_obj.cut;
        for (auto& c : cells) c = rng.uniform() < 0.15 ? 1 : 0;
        auto m = world.task_metrics();
        // brute-force split: a cut cell opens a new segment at its left edge
        std::vector<int> runs;
        int start = 0;
        for (int i = 1; i < static_cast<int>(cells.size()); ++i) {
            if (cells[i]) {
                runs.push_back(i - start);
                start = i;
            }
        }
        runs.push_back(static_cast<int>(cells.size()) - start);
        EXPECT_EQ(m.segment_count, static_cast<int>(runs.size()));
        if (!runs.empty()) {
            double mean = 0;
            for (int r : runs) mean += r / 50.0;
            mean /= runs.size();
            double var = 0;
            for (int r : runs) var += (r / 50.0 - mean) * (r / 50.0 - mean);
            EXPECT_NEAR(m.segment_mean, mean, 1e-12);
            EXPECT_NEAR(m.segment_std, std::sqrt(var / runs.size()), 1e-12);
        }
    }
}
