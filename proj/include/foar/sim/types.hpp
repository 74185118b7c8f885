#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "foar/core/random.hpp"
#include "foar/geometry.hpp"

namespace foar::sim {

struct SimError : std::runtime_error {
    explicit SimError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Task { SurfaceWipe, NotchCut };

inline std::string task_name(Task t) {
    return t == Task::SurfaceWipe ? "wipe" : "cut";
}

inline Task task_from_name(const std::string& s) {
    if (s == "wipe" || s == "surface-wipe") return Task::SurfaceWipe;
    if (s == "cut" || s == "notch-cut") return Task::NotchCut;
    throw SimError("unknown task: " + s);
}

/// One timestamped 6-axis force/torque reading.
struct FtSample {
    double t = 0.0;
    Vec3 f;
    Vec3 tau;

    double force_norm() const { return f.norm(); }
    double torque_norm() const { return tau.norm(); }
};

/// N x 6 points: xyz in workspace meters, rgb in [0,1].
struct PointCloud {
    std::vector<float> data;  // row-major N x 6

    std::size_t size() const { return data.size() / 6; }
    const float* point(std::size_t i) const { return data.data() + 6 * i; }
    float* point(std::size_t i) { return data.data() + 6 * i; }
};

/// H x W x C scalars in [0,1]; coarse top-down render.
struct ImageGrid {
    int h = 0, w = 0, c = 0;
    std::vector<float> data;  // row-major H x W x C

    float& at(int y, int x, int ch) { return data[(y * w + x) * c + ch]; }
    float at(int y, int x, int ch) const { return data[(y * w + x) * c + ch]; }
};

/// Linear penalty-spring contact with Coulomb-style friction and a white
/// Gaussian sensor noise model.
struct ContactModel {
    double k_n = 1000.0;                // N/m
    double mu = 0.5;                    // friction coefficient
    double cut_impulse_threshold = 10.0;  // N
    double sensor_sigma_f = 0.3;        // N per axis
    double sensor_sigma_tau = 0.02;     // N*m per axis

    void validate() const {
        if (k_n <= 0) throw SimError("ContactModel: k_n must be > 0");
        if (mu < 0) throw SimError("ContactModel: mu must be >= 0");
        if (sensor_sigma_f < 0 || sensor_sigma_tau < 0)
            throw SimError("ContactModel: noise sigmas must be >= 0");
    }
};

/// Every physics/task constant, JSON-loadable. Defaults give the desk-scale
/// 0.45 x 0.60 x 0.40 m workspace.
struct SimConfig {
    ContactModel contact;

    // workspace bounds (m)
    double ws_x_min = -0.225, ws_x_max = 0.225;
    double ws_y_min = -0.300, ws_y_max = 0.300;
    double ws_z_min = 0.0, ws_z_max = 0.400;

    // control
    double control_period = 0.1;  // s (10 Hz actions)
    int ft_rate = 100;            // Hz
    double max_speed = 0.6;       // m/s end-effector speed cap
    double max_width_rate = 0.3;  // m/s gripper width rate
    double wipe_min_force = 2.0;  // N normal force needed to erase

    // board (wipe task)
    double board_cx = 0.0, board_cy = 0.06;
    double board_w = 0.24, board_h = 0.16;
    double board_top_z = 0.012;
    int mark_cols = 12, mark_rows = 8;
    double board_pos_jitter = 0.03;
    double board_yaw_jitter = 0.21;  // rad
    double erase_radius = 0.02;

    // tool
    double tool_length = 0.12;
    double tool_home_x = -0.15, tool_home_y = -0.20;
    double tool_home_jitter = 0.01;
    double grasp_radius = 0.02;        // radial attach tolerance to tool axis
    double grasp_offset_frac = 0.3;    // expert offset range: +/- frac * length
    double grip_close_width = 0.04;
    double grip_open_width = 0.06;
    double gripper_max_width = 0.08;

    // cut object (notch-cut task)
    double cut_len = 0.20;
    int cut_cells = 50;
    double cut_obj_x = 0.0, cut_obj_y = 0.05;
    double cut_obj_jitter = 0.01;
    double cut_height = 0.02;
    double cut_width = 0.03;

    // place zone
    double place_x = 0.15, place_y = -0.20, place_radius = 0.06;

    // end-effector start
    double ee_start_x = 0.0, ee_start_y = -0.25, ee_start_z = 0.20;

    // disturbances
    double rewrite_frac_lo = 0.3, rewrite_frac_hi = 0.6;
    double move_max_shift = 0.05;   // m
    double move_max_yaw = 0.26;     // rad

    // renders
    int image_h = 32, image_w = 32, image_c = 3;
    int table_grid_x = 5, table_grid_y = 7;

    int ft_per_tick() const {
        return static_cast<int>(control_period * static_cast<double>(ft_rate) + 0.5);
    }

    void validate() const {
        contact.validate();
        if (control_period <= 0 || ft_rate <= 0) throw SimError("SimConfig: bad rates");
        if (mark_cols <= 0 || mark_rows <= 0) throw SimError("SimConfig: bad mark grid");
        if (cut_cells <= 1) throw SimError("SimConfig: need at least 2 cut cells");
    }
};

enum class ToolKind { Eraser, Knife };

struct ToolState {
    ToolKind kind = ToolKind::Eraser;
    Pose pose;              // tool center
    double length = 0.12;
    bool attached = false;
    double grasp_offset = 0.0;  // m along tool axis, from center to grip point

    Vec3 axis() const { return pose.orn.rotate({0, 0, 1}); }
    Vec3 tip() const { return pose.pos - axis() * (length / 2.0); }
    Vec3 top() const { return pose.pos + axis() * (length / 2.0); }
};

struct BoardState {
    Pose pose;  // center of the top face; yaw about z
    double w = 0, h = 0, top_z = 0;
    int cols = 0, rows = 0;
    std::vector<std::uint8_t> marks;         // current ink
    std::vector<std::uint8_t> union_marked;  // ever marked this episode

    int idx(int cx, int cy) const { return cy * cols + cx; }
    /// Cell center in board frame.
    void cell_center(int cx, int cy, double& bx, double& by) const {
        bx = (static_cast<double>(cx) + 0.5) / cols * w - w / 2.0;
        by = (static_cast<double>(cy) + 0.5) / rows * h - h / 2.0;
    }
};

struct CutObjectState {
    Pose pose;  // center of the strip, axis along local x
    double length = 0, height = 0, width = 0;
    std::vector<std::uint8_t> cut;
};

/// Episode counters used by metrics / ASR, updated inside step().
struct SimStats {
    bool ever_attached = false;
    long erase_events = 0;
    long cut_events = 0;
    long releases = 0;
    bool released_in_zone = false;
    long clamped_actions = 0;
};

struct SimState {
    Task task = Task::SurfaceWipe;
    Pose ee;
    double gripper_width = 0.08;
    ToolState tool;
    BoardState board;
    CutObjectState cut_obj;
    core::Rng rng{0};
    double clock = 0.0;
    SimStats stats;
};

}  // namespace foar::sim
