#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "foar/core/optim.hpp"
#include "foar/sim/types.hpp"

namespace foar::sim {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ContactModel, k_n, mu,
                                                cut_impulse_threshold, sensor_sigma_f,
                                                sensor_sigma_tau)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    SimConfig, contact, ws_x_min, ws_x_max, ws_y_min, ws_y_max, ws_z_min, ws_z_max,
    control_period, ft_rate, max_speed, max_width_rate, wipe_min_force, board_cx,
    board_cy, board_w, board_h, board_top_z, mark_cols, mark_rows, board_pos_jitter,
    board_yaw_jitter, erase_radius, tool_length, tool_home_x, tool_home_y,
    tool_home_jitter, grasp_radius, grasp_offset_frac, grip_close_width,
    grip_open_width, gripper_max_width, cut_len, cut_cells, cut_obj_x, cut_obj_y,
    cut_obj_jitter, cut_height, cut_width, place_x, place_y, place_radius, ee_start_x,
    ee_start_y, ee_start_z, rewrite_frac_lo, rewrite_frac_hi, move_max_shift,
    move_max_yaw, image_h, image_w, image_c, table_grid_x, table_grid_y)

}  // namespace foar::sim

namespace foar::core {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, base_lr, warmup_steps,
                                                total_steps, batch_size, alpha,
                                                precision, seed, augment)

}  // namespace foar::core

namespace foar::io {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw ConfigError("bad JSON in " + path + ": " + e.what());
    }
    return j;
}

template <class T>
T load_config(const std::string& path) {
    return load_json(path).get<T>();
}

inline void save_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write config file: " + path);
    os << j.dump(2) << "\n";
}

/// FNV-1a over the canonical (key-sorted) dump; identifies a config snapshot.
inline std::string config_hash(const nlohmann::json& j) {
    std::string dump = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace foar::io
