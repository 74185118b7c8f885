#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "foar/sim/types.hpp"

namespace foar::sim {

enum class DisturbanceKind { None, Rewrite, Move, RewriteMove };

inline std::string disturbance_name(DisturbanceKind k) {
    switch (k) {
        case DisturbanceKind::Rewrite: return "rewrite";
        case DisturbanceKind::Move: return "move";
        case DisturbanceKind::RewriteMove: return "rewrite+move";
        default: return "none";
    }
}

inline DisturbanceKind disturbance_from_name(const std::string& s) {
    if (s == "none" || s.empty()) return DisturbanceKind::None;
    if (s == "rewrite") return DisturbanceKind::Rewrite;
    if (s == "move") return DisturbanceKind::Move;
    if (s == "rewrite+move" || s == "rewrite_move") return DisturbanceKind::RewriteMove;
    throw SimError("unknown disturbance kind: " + s);
}

struct TaskMetrics {
    double coverage = 0.0;       // erased / ever-marked (wipe)
    int segment_count = 0;       // maximal uncut runs (cut)
    double segment_mean = 0.0;   // of normalized lengths
    double segment_std = 0.0;    // population std
};

/// Deterministic seeded contact world. One instance per episode; the state is
/// a plain value and may be copied to branch rollouts.
class SimWorld {
public:
    SimWorld() = default;
    explicit SimWorld(SimConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    const SimConfig& config() const { return cfg_; }
    SimState& state() { return state_; }
    const SimState& state() const { return state_; }

    void reset(std::uint64_t seed, Task task) {
        state_ = SimState{};
        state_.task = task;
        state_.rng = core::Rng(core::Rng::splitmix(seed ^ 0x5117ab1eULL));
        core::Rng layout = state_.rng.derive(1);

        state_.ee.pos = {cfg_.ee_start_x, cfg_.ee_start_y, cfg_.ee_start_z};
        state_.ee.orn = Quat::identity();
        state_.gripper_width = cfg_.gripper_max_width;

        auto& tool = state_.tool;
        tool.kind = task == Task::SurfaceWipe ? ToolKind::Eraser : ToolKind::Knife;
        tool.length = cfg_.tool_length;
        tool.attached = false;
        tool.grasp_offset = 0.0;
        tool.pose.orn = Quat::identity();
        tool.pose.pos = {cfg_.tool_home_x + layout.uniform(-cfg_.tool_home_jitter, cfg_.tool_home_jitter),
                         cfg_.tool_home_y + layout.uniform(-cfg_.tool_home_jitter, cfg_.tool_home_jitter),
                         cfg_.tool_length / 2.0};

        if (task == Task::SurfaceWipe) {
            auto& b = state_.board;
            b.w = cfg_.board_w;
            b.h = cfg_.board_h;
            b.top_z = cfg_.board_top_z;
            b.cols = cfg_.mark_cols;
            b.rows = cfg_.mark_rows;
            b.pose.pos = {cfg_.board_cx + layout.uniform(-cfg_.board_pos_jitter, cfg_.board_pos_jitter),
                          cfg_.board_cy + layout.uniform(-cfg_.board_pos_jitter, cfg_.board_pos_jitter),
                          cfg_.board_top_z};
            b.pose.orn = Quat::from_yaw(layout.uniform(-cfg_.board_yaw_jitter, cfg_.board_yaw_jitter));
            paint_marks(layout);
        } else {
            auto& o = state_.cut_obj;
            o.length = cfg_.cut_len;
            o.height = cfg_.cut_height;
            o.width = cfg_.cut_width;
            o.cut.assign(static_cast<std::size_t>(cfg_.cut_cells), 0);
            o.pose.pos = {cfg_.cut_obj_x + layout.uniform(-cfg_.cut_obj_jitter, cfg_.cut_obj_jitter),
                          cfg_.cut_obj_y + layout.uniform(-cfg_.cut_obj_jitter, cfg_.cut_obj_jitter),
                          0.0};
            o.pose.orn = Quat::from_yaw(layout.uniform(-0.05, 0.05));
        }
    }

    /// Advances one control tick toward the commanded target; emits
    /// round(dt * ft_rate) noisy F/T samples at the sensor rate.
    std::vector<FtSample> step(const Action& action, double dt) {
        if (!std::isfinite(action.pose.pos.x) || !std::isfinite(action.pose.pos.y) ||
            !std::isfinite(action.pose.pos.z) || !std::isfinite(action.width) ||
            !std::isfinite(action.pose.orn.w) || !std::isfinite(action.pose.orn.x) ||
            !std::isfinite(action.pose.orn.y) || !std::isfinite(action.pose.orn.z))
            throw SimError("step: non-finite action rejected");

        Action target = action;
        clamp_to_workspace(target.pose.pos);
        target.width = std::clamp(target.width, 0.0, cfg_.gripper_max_width);
        Quat orn_target = target.pose.orn.normalized();

        int n = cfg_.ft_per_tick();
        double sub_dt = dt / n;
        double step_cap = cfg_.max_speed * sub_dt;
        double width_cap = cfg_.max_width_rate * sub_dt;

        std::vector<FtSample> samples;
        samples.reserve(n);
        for (int k = 0; k < n; ++k) {
            Vec3 prev_tip = state_.tool.attached ? state_.tool.tip() : Vec3{};

            // position control with a speed cap
            Vec3 delta = target.pose.pos - state_.ee.pos;
            double dist = delta.norm();
            state_.ee.pos = dist <= step_cap ? target.pose.pos
                                             : state_.ee.pos + delta * (step_cap / dist);
            state_.ee.orn = step_orientation(state_.ee.orn, orn_target, 1.2 * sub_dt);

            double dw = target.width - state_.gripper_width;
            state_.gripper_width += std::clamp(dw, -width_cap, width_cap);

            update_attachment();
            if (state_.tool.attached) follow_gripper();

            Vec3 f{0, 0, 0}, tau{0, 0, 0};
            if (state_.tool.attached) {
                Vec3 tip = state_.tool.tip();
                Vec3 tip_vel = (tip - prev_tip) * (1.0 / sub_dt);
                contact_wrench(tip, tip_vel, f, tau);
            }
            FtSample s;
            s.t = state_.clock + (k + 1) * sub_dt;
            s.f = {f.x + state_.rng.normal(0, cfg_.contact.sensor_sigma_f),
                   f.y + state_.rng.normal(0, cfg_.contact.sensor_sigma_f),
                   f.z + state_.rng.normal(0, cfg_.contact.sensor_sigma_f)};
            s.tau = {tau.x + state_.rng.normal(0, cfg_.contact.sensor_sigma_tau),
                     tau.y + state_.rng.normal(0, cfg_.contact.sensor_sigma_tau),
                     tau.z + state_.rng.normal(0, cfg_.contact.sensor_sigma_tau)};
            samples.push_back(s);
        }
        state_.clock += dt;
        return samples;
    }

    PointCloud render_pointcloud() const {
        PointCloud pc;
        auto push = [&](double x, double y, double z, float r, float g, float b) {
            if (x < cfg_.ws_x_min || x > cfg_.ws_x_max || y < cfg_.ws_y_min ||
                y > cfg_.ws_y_max || z < cfg_.ws_z_min || z > cfg_.ws_z_max)
                return;
            pc.data.insert(pc.data.end(), {static_cast<float>(x), static_cast<float>(y),
                                           static_cast<float>(z), r, g, b});
        };

        // table grid, skipping the footprint of the board / object
        for (int iy = 0; iy < cfg_.table_grid_y; ++iy)
            for (int ix = 0; ix < cfg_.table_grid_x; ++ix) {
                double x = cfg_.ws_x_min +
                           (ix + 0.5) * (cfg_.ws_x_max - cfg_.ws_x_min) / cfg_.table_grid_x;
                double y = cfg_.ws_y_min +
                           (iy + 0.5) * (cfg_.ws_y_max - cfg_.ws_y_min) / cfg_.table_grid_y;
                if (state_.task == Task::SurfaceWipe && board_contains(x, y)) continue;
                if (state_.task == Task::NotchCut && object_contains(x, y)) continue;
                push(x, y, 0.0, 0.74f, 0.74f, 0.78f);
            }

        if (state_.task == Task::SurfaceWipe) {
            const auto& b = state_.board;
            for (int cy = 0; cy < b.rows; ++cy)
                for (int cx = 0; cx < b.cols; ++cx) {
                    double bx, by;
                    b.cell_center(cx, cy, bx, by);
                    Vec3 world = b.pose.orn.rotate({bx, by, 0});
                    bool marked = b.marks[b.idx(cx, cy)] != 0;
                    push(b.pose.pos.x + world.x, b.pose.pos.y + world.y, b.top_z,
                         marked ? 0.13f : 0.93f, marked ? 0.13f : 0.93f,
                         marked ? 0.16f : 0.95f);
                }
        } else {
            const auto& o = state_.cut_obj;
            for (std::size_t i = 0; i < o.cut.size(); i += 2) {
                double lx = (static_cast<double>(i) + 0.5) / o.cut.size() * o.length -
                            o.length / 2.0;
                Vec3 world = o.pose.orn.rotate({lx, 0, 0});
                bool cut = o.cut[i] != 0;
                push(o.pose.pos.x + world.x, o.pose.pos.y + world.y, o.height,
                     cut ? 0.35f : 0.20f, cut ? 0.22f : 0.66f, cut ? 0.12f : 0.24f);
            }
        }

        // tool: only the upper (grip-side) segment is visible to the camera
        {
            const auto& t = state_.tool;
            Vec3 axis = t.axis();
            Vec3 top = t.top();
            for (int i = 0; i < 8; ++i) {
                Vec3 p = top - axis * (0.05 * i / 7.0);
                bool knife = t.kind == ToolKind::Knife;
                push(p.x, p.y, p.z, knife ? 0.60f : 0.86f, knife ? 0.62f : 0.30f,
                     knife ? 0.66f : 0.22f);
            }
        }

        // end-effector marker cluster
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    if ((dx + dy + dz + 3) % 2 != 0) continue;
                    push(state_.ee.pos.x + 0.012 * dx, state_.ee.pos.y + 0.012 * dy,
                         state_.ee.pos.z + 0.012 * dz, 0.20f, 0.33f, 0.92f);
                }
        // gripper fingers: their separation exposes the jaw opening
        for (int side = -1; side <= 1; side += 2) {
            Vec3 offset = state_.ee.orn.rotate(
                {side * (state_.gripper_width / 2 + 0.004), 0, -0.012});
            for (int k = 0; k < 2; ++k)
                push(state_.ee.pos.x + offset.x, state_.ee.pos.y + offset.y,
                     state_.ee.pos.z + offset.z - 0.008 * k, 0.93f, 0.82f, 0.25f);
        }

        if (pc.size() == 0) throw SimError("render_pointcloud: empty cloud after crop");
        return pc;
    }

    ImageGrid render_image() const {
        ImageGrid img;
        img.h = cfg_.image_h;
        img.w = cfg_.image_w;
        img.c = cfg_.image_c;
        img.data.assign(static_cast<std::size_t>(img.h) * img.w * img.c, 0.0f);
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                for (int ch = 0; ch < img.c; ++ch) img.at(y, x, ch) = 0.72f;

        auto to_px = [&](double wx, double wy, int& px, int& py) {
            px = static_cast<int>((wx - cfg_.ws_x_min) / (cfg_.ws_x_max - cfg_.ws_x_min) * img.w);
            py = static_cast<int>((wy - cfg_.ws_y_min) / (cfg_.ws_y_max - cfg_.ws_y_min) * img.h);
            px = std::clamp(px, 0, img.w - 1);
            py = std::clamp(py, 0, img.h - 1);
        };

        if (state_.task == Task::SurfaceWipe) {
            const auto& b = state_.board;
            // board background
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x) {
                    double wx = cfg_.ws_x_min + (x + 0.5) / img.w * (cfg_.ws_x_max - cfg_.ws_x_min);
                    double wy = cfg_.ws_y_min + (y + 0.5) / img.h * (cfg_.ws_y_max - cfg_.ws_y_min);
                    if (board_contains(wx, wy))
                        for (int ch = 0; ch < img.c; ++ch) img.at(y, x, ch) = 0.92f;
                }
            // each marked cell darkens its pixel multiplicatively, so any
            // single-cell change is visible even when cells share a pixel
            for (int cy = 0; cy < b.rows; ++cy)
                for (int cx = 0; cx < b.cols; ++cx) {
                    if (!b.marks[b.idx(cx, cy)]) continue;
                    double bx, by;
                    b.cell_center(cx, cy, bx, by);
                    Vec3 world = b.pose.orn.rotate({bx, by, 0});
                    int px, py;
                    to_px(b.pose.pos.x + world.x, b.pose.pos.y + world.y, px, py);
                    for (int ch = 0; ch < img.c; ++ch) img.at(py, px, ch) *= 0.45f;
                }
        } else {
            const auto& o = state_.cut_obj;
            for (std::size_t i = 0; i < o.cut.size(); ++i) {
                double lx = (static_cast<double>(i) + 0.5) / o.cut.size() * o.length -
                            o.length / 2.0;
                Vec3 world = o.pose.orn.rotate({lx, 0, 0});
                int px, py;
                to_px(o.pose.pos.x + world.x, o.pose.pos.y + world.y, px, py);
                bool cut = o.cut[i] != 0;
                img.at(py, px, 0) = cut ? 0.40f : 0.20f;
                img.at(py, px, 1) = cut ? 0.26f : 0.62f;
                img.at(py, px, 2) = cut ? 0.14f : 0.25f;
            }
        }

        {
            int px, py;
            Vec3 tip = state_.tool.tip();
            to_px(tip.x, tip.y, px, py);
            img.at(py, px, 0) = 0.88f;
            img.at(py, px, 1) = 0.30f;
            img.at(py, px, 2) = 0.20f;
            to_px(state_.ee.pos.x, state_.ee.pos.y, px, py);
            img.at(py, px, 0) = 0.18f;
            img.at(py, px, 1) = 0.32f;
            img.at(py, px, 2) = 0.95f;
            // encode height in the EE pixel's green channel
            double zf = std::clamp(state_.ee.pos.z / cfg_.ws_z_max, 0.0, 1.0);
            img.at(py, px, 1) = static_cast<float>(0.25 + 0.5 * zf);
        }
        return img;
    }

    /// Robustness disturbances; rng is caller-owned so the trigger policy
    /// stays outside the deterministic physics stream.
    void apply_disturbance(DisturbanceKind kind, core::Rng& rng) {
        if (kind == DisturbanceKind::None) return;
        if (state_.task != Task::SurfaceWipe)
            throw SimError("disturbances are defined for the wipe task");
        if (kind == DisturbanceKind::Rewrite || kind == DisturbanceKind::RewriteMove)
            rewrite_marks(rng);
        if (kind == DisturbanceKind::Move || kind == DisturbanceKind::RewriteMove)
            move_board(rng);
    }

    TaskMetrics task_metrics() const {
        TaskMetrics m;
        if (state_.task == Task::SurfaceWipe) {
            const auto& b = state_.board;
            long total = 0, erased = 0;
            for (std::size_t i = 0; i < b.marks.size(); ++i) {
                if (!b.union_marked[i]) continue;
                ++total;
                if (!b.marks[i]) ++erased;
            }
            m.coverage = total == 0 ? 1.0 : static_cast<double>(erased) / total;
        } else {
            // A cut cell is a notch: it splits the strip at its left edge but
            // keeps its length, so segment lengths always sum to 1.
            const auto& cells = state_.cut_obj.cut;
            std::vector<double> lengths;
            std::size_t start = 0;
            for (std::size_t i = 1; i < cells.size(); ++i) {
                if (cells[i]) {
                    lengths.push_back(static_cast<double>(i - start) / cells.size());
                    start = i;
                }
            }
            if (!cells.empty())
                lengths.push_back(static_cast<double>(cells.size() - start) / cells.size());
            m.segment_count = static_cast<int>(lengths.size());
            if (!lengths.empty()) {
                double sum = 0;
                for (double v : lengths) sum += v;
                m.segment_mean = sum / lengths.size();
                double var = 0;
                for (double v : lengths) var += (v - m.segment_mean) * (v - m.segment_mean);
                m.segment_std = std::sqrt(var / lengths.size());
            }
        }
        return m;
    }

    bool board_contains(double wx, double wy) const {
        const auto& b = state_.board;
        Quat inv = b.pose.orn;
        inv.x = -inv.x;
        inv.y = -inv.y;
        inv.z = -inv.z;
        Vec3 local = inv.rotate({wx - b.pose.pos.x, wy - b.pose.pos.y, 0});
        return std::abs(local.x) <= b.w / 2 && std::abs(local.y) <= b.h / 2;
    }

    bool object_contains(double wx, double wy) const {
        const auto& o = state_.cut_obj;
        Quat inv = o.pose.orn;
        inv.x = -inv.x;
        inv.y = -inv.y;
        inv.z = -inv.z;
        Vec3 local = inv.rotate({wx - o.pose.pos.x, wy - o.pose.pos.y, 0});
        return std::abs(local.x) <= o.length / 2 && std::abs(local.y) <= o.width / 2;
    }

    bool in_place_zone(const Vec3& p) const {
        double dx = p.x - cfg_.place_x, dy = p.y - cfg_.place_y;
        return std::sqrt(dx * dx + dy * dy) <= cfg_.place_radius;
    }

private:
    void clamp_to_workspace(Vec3& p) {
        Vec3 before = p;
        p.x = std::clamp(p.x, cfg_.ws_x_min, cfg_.ws_x_max);
        p.y = std::clamp(p.y, cfg_.ws_y_min, cfg_.ws_y_max);
        p.z = std::clamp(p.z, cfg_.ws_z_min, cfg_.ws_z_max);
        if (before.x != p.x || before.y != p.y || before.z != p.z)
            ++state_.stats.clamped_actions;
    }

    static Quat step_orientation(const Quat& cur, const Quat& target, double max_angle) {
        double ang = cur.angle_to(target);
        if (ang < 1e-9) return target;
        double t = std::min(1.0, max_angle / ang);
        // normalized lerp with sign alignment is adequate for small steps
        double sign = cur.dot(target) < 0 ? -1.0 : 1.0;
        Quat q{cur.w + (sign * target.w - cur.w) * t, cur.x + (sign * target.x - cur.x) * t,
               cur.y + (sign * target.y - cur.y) * t, cur.z + (sign * target.z - cur.z) * t};
        return q.normalized();
    }

    void update_attachment() {
        auto& tool = state_.tool;
        if (!tool.attached && state_.gripper_width <= cfg_.grip_close_width) {
            // attach anywhere along the tool body within the radial tolerance
            Vec3 axis = tool.axis();
            Vec3 rel = state_.ee.pos - tool.pose.pos;
            double along = rel.dot(axis);
            double half = tool.length / 2.0 + 0.01;
            if (along >= -half && along <= half) {
                Vec3 radial = rel - axis * along;
                if (radial.norm() <= cfg_.grasp_radius) {
                    tool.attached = true;
                    tool.grasp_offset =
                        std::clamp(along, -0.45 * tool.length, 0.45 * tool.length);
                    state_.stats.ever_attached = true;
                }
            }
        } else if (tool.attached && state_.gripper_width >= cfg_.grip_open_width) {
            tool.attached = false;
            ++state_.stats.releases;
            state_.stats.released_in_zone = in_place_zone(tool.pose.pos);
        }
    }

    void follow_gripper() {
        auto& tool = state_.tool;
        tool.pose.orn = state_.ee.orn;
        tool.pose.pos = state_.ee.pos - tool.axis() * tool.grasp_offset;
    }

    void contact_wrench(const Vec3& tip, const Vec3& tip_vel, Vec3& f, Vec3& tau) {
        double fn = 0.0;
        bool on_surface = false;

        if (state_.task == Task::SurfaceWipe && board_contains(tip.x, tip.y)) {
            double depth = state_.board.top_z - tip.z;
            if (depth > 0) {
                fn = cfg_.contact.k_n * depth;
                on_surface = true;
                if (fn >= cfg_.wipe_min_force) erase_under(tip);
            }
        } else if (state_.task == Task::NotchCut && object_contains(tip.x, tip.y)) {
            double depth = state_.cut_obj.height - tip.z;
            if (depth > 0) {
                fn = cfg_.contact.k_n * depth;
                on_surface = true;
                if (fn >= cfg_.contact.cut_impulse_threshold) cut_under(tip);
            }
        }
        if (!on_surface && tip.z < 0) {
            fn = cfg_.contact.k_n * (-tip.z);
            on_surface = true;
        }
        if (!on_surface) return;

        f = {0, 0, fn};
        Vec3 lat{tip_vel.x, tip_vel.y, 0};
        double ln = lat.norm();
        if (ln > 1e-6) {
            Vec3 fric = lat * (-cfg_.contact.mu * fn / ln);
            f.x += fric.x;
            f.y += fric.y;
        }
        Vec3 lever = tip - state_.ee.pos;
        tau = lever.cross(f);
    }

    void erase_under(const Vec3& tip) {
        auto& b = state_.board;
        Quat inv = b.pose.orn;
        inv.x = -inv.x;
        inv.y = -inv.y;
        inv.z = -inv.z;
        Vec3 local = inv.rotate({tip.x - b.pose.pos.x, tip.y - b.pose.pos.y, 0});
        for (int cy = 0; cy < b.rows; ++cy)
            for (int cx = 0; cx < b.cols; ++cx) {
                if (!b.marks[b.idx(cx, cy)]) continue;
                double bx, by;
                b.cell_center(cx, cy, bx, by);
                double dx = bx - local.x, dy = by - local.y;
                if (dx * dx + dy * dy <= cfg_.erase_radius * cfg_.erase_radius) {
                    b.marks[b.idx(cx, cy)] = 0;
                    ++state_.stats.erase_events;
                }
            }
    }

    void cut_under(const Vec3& tip) {
        auto& o = state_.cut_obj;
        Quat inv = o.pose.orn;
        inv.x = -inv.x;
        inv.y = -inv.y;
        inv.z = -inv.z;
        Vec3 local = inv.rotate({tip.x - o.pose.pos.x, tip.y - o.pose.pos.y, 0});
        double fx = (local.x + o.length / 2.0) / o.length;
        int cell = static_cast<int>(fx * static_cast<double>(o.cut.size()));
        cell = std::clamp(cell, 0, static_cast<int>(o.cut.size()) - 1);
        if (!o.cut[cell]) {
            o.cut[cell] = 1;
            ++state_.stats.cut_events;
        }
    }

    void paint_marks(core::Rng& rng) {
        auto& b = state_.board;
        b.marks.assign(static_cast<std::size_t>(b.cols) * b.rows, 0);
        // random strokes: start cell + direction + length, thickness 1-2
        int strokes = 2 + static_cast<int>(rng.uniform_int(3));
        for (int s = 0; s < strokes; ++s) {
            double cx = rng.uniform(1.0, b.cols - 1.0);
            double cy = rng.uniform(1.0, b.rows - 1.0);
            double ang = rng.uniform(0, 2 * 3.14159265358979);
            double len = rng.uniform(4.0, 10.0);
            bool thick = rng.uniform() < 0.5;
            for (double t = 0; t <= len; t += 0.5) {
                int ix = static_cast<int>(cx + t * std::cos(ang));
                int iy = static_cast<int>(cy + t * std::sin(ang));
                for (int oy = 0; oy <= (thick ? 1 : 0); ++oy) {
                    int jx = std::clamp(ix, 0, b.cols - 1);
                    int jy = std::clamp(iy + oy, 0, b.rows - 1);
                    b.marks[b.idx(jx, jy)] = 1;
                }
            }
        }
        // guarantee a sensible amount of ink
        long marked = std::count(b.marks.begin(), b.marks.end(), 1);
        if (marked < b.cols * b.rows / 4) {
            for (int cy = 2; cy < b.rows - 2; ++cy)
                for (int cx = 2; cx < b.cols - 2; ++cx)
                    if (rng.uniform() < 0.5) b.marks[b.idx(cx, cy)] = 1;
        }
        b.union_marked = b.marks;
    }

    void rewrite_marks(core::Rng& rng) {
        auto& b = state_.board;
        std::vector<std::size_t> erased;
        for (std::size_t i = 0; i < b.marks.size(); ++i)
            if (b.union_marked[i] && !b.marks[i]) erased.push_back(i);
        if (erased.empty()) return;
        double frac = rng.uniform(cfg_.rewrite_frac_lo, cfg_.rewrite_frac_hi);
        std::size_t count = static_cast<std::size_t>(frac * erased.size() + 0.5);
        count = std::max<std::size_t>(1, std::min(count, erased.size()));
        for (std::size_t i = 0; i + 1 < erased.size(); ++i) {
            std::size_t j = i + rng.uniform_int(erased.size() - i);
            std::swap(erased[i], erased[j]);
        }
        for (std::size_t i = 0; i < count; ++i) {
            b.marks[erased[i]] = 1;
            b.union_marked[erased[i]] = 1;
        }
    }

    void move_board(core::Rng& rng) {
        auto& b = state_.board;
        for (int attempt = 0; attempt < 64; ++attempt) {
            double dx = rng.uniform(-cfg_.move_max_shift, cfg_.move_max_shift);
            double dy = rng.uniform(-cfg_.move_max_shift, cfg_.move_max_shift);
            double dyaw = rng.uniform(-cfg_.move_max_yaw, cfg_.move_max_yaw);
            Pose candidate;
            candidate.pos = {b.pose.pos.x + dx, b.pose.pos.y + dy, b.pose.pos.z};
            candidate.orn = Quat::from_yaw(dyaw) * b.pose.orn;
            bool ok = true;
            for (int cx = -1; cx <= 1 && ok; cx += 2)
                for (int cy = -1; cy <= 1 && ok; cy += 2) {
                    Vec3 corner =
                        candidate.orn.rotate({cx * b.w / 2, cy * b.h / 2, 0});
                    double wx = candidate.pos.x + corner.x;
                    double wy = candidate.pos.y + corner.y;
                    ok = wx >= cfg_.ws_x_min && wx <= cfg_.ws_x_max && wy >= cfg_.ws_y_min &&
                         wy <= cfg_.ws_y_max;
                }
            if (ok) {
                b.pose = candidate;
                return;
            }
        }
        // keep the current pose if no in-bounds move was found
    }

    SimConfig cfg_;
    SimState state_;
};

}  // namespace foar::sim
