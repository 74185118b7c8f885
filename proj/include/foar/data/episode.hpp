#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "foar/io/json_config.hpp"
#include "foar/sim/expert.hpp"
#include "foar/sim/world.hpp"

namespace foar::data {

struct DatasetError : std::runtime_error {
    explicit DatasetError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EpisodeTick {
    double t = 0;
    double proprio[8] = {0};  // x y z qw qx qy qz width
    double action[8] = {0};
};

struct Episode {
    std::string task;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<EpisodeTick> ticks;
    std::vector<sim::FtSample> ft;
    std::vector<sim::PointCloud> clouds;  // one per tick
    std::vector<sim::ImageGrid> images;   // one per tick
};

namespace detail {

inline void write_f32(std::ostream& os, const std::vector<float>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(float)));
}

inline std::vector<float> read_f32(const std::string& path) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw DatasetError("missing file: " + path);
    auto bytes = static_cast<std::size_t>(is.tellg());
    if (bytes % sizeof(float) != 0) throw DatasetError("bad f32 file size: " + path);
    std::vector<float> v(bytes / sizeof(float));
    is.seekg(0);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
    return v;
}

inline std::string tick_tag(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", i);
    return std::string(buf);
}

}  // namespace detail

inline std::string episode_dir(const std::string& dataset_dir, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "ep_%06zu", index);
    return dataset_dir + "/episodes/" + buf;
}

/// On-disk layout per episode: lowdim.bin (ticks x 17 f32), ft.bin (rows of 7
/// f32), cloud_TTTT.bin (N x 6 f32), image_TTTT.bin (H*W*C f32), index.json.
inline void write_episode(const Episode& ep, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::vector<float> lowdim;
    lowdim.reserve(ep.ticks.size() * 17);
    for (const auto& tk : ep.ticks) {
        lowdim.push_back(static_cast<float>(tk.t));
        for (double v : tk.proprio) lowdim.push_back(static_cast<float>(v));
        for (double v : tk.action) lowdim.push_back(static_cast<float>(v));
    }
    {
        std::ofstream os(dir + "/lowdim.bin", std::ios::binary);
        detail::write_f32(os, lowdim);
    }
    std::vector<float> ft;
    ft.reserve(ep.ft.size() * 7);
    for (const auto& s : ep.ft) {
        ft.push_back(static_cast<float>(s.t));
        ft.push_back(static_cast<float>(s.f.x));
        ft.push_back(static_cast<float>(s.f.y));
        ft.push_back(static_cast<float>(s.f.z));
        ft.push_back(static_cast<float>(s.tau.x));
        ft.push_back(static_cast<float>(s.tau.y));
        ft.push_back(static_cast<float>(s.tau.z));
    }
    {
        std::ofstream os(dir + "/ft.bin", std::ios::binary);
        detail::write_f32(os, ft);
    }

    nlohmann::json index;
    index["task"] = ep.task;
    index["seed"] = ep.seed;
    index["config_hash"] = ep.config_hash;
    index["tick_count"] = ep.ticks.size();
    index["ft_rows"] = ep.ft.size();
    std::vector<double> times;
    // round through f32 so the index agrees with lowdim.bin on re-write
    for (const auto& tk : ep.ticks)
        times.push_back(static_cast<double>(static_cast<float>(tk.t)));
    index["tick_times"] = times;
    std::vector<std::size_t> cloud_sizes;
    for (std::size_t i = 0; i < ep.clouds.size(); ++i) {
        const auto& pc = ep.clouds[i];
        cloud_sizes.push_back(pc.size());
        std::ofstream os(dir + "/cloud_" + detail::tick_tag(i) + ".bin", std::ios::binary);
        detail::write_f32(os, pc.data);
    }
    index["cloud_sizes"] = cloud_sizes;
    if (!ep.images.empty())
        index["image_shape"] = {ep.images[0].h, ep.images[0].w, ep.images[0].c};
    for (std::size_t i = 0; i < ep.images.size(); ++i) {
        std::ofstream os(dir + "/image_" + detail::tick_tag(i) + ".bin", std::ios::binary);
        detail::write_f32(os, ep.images[i].data);
    }
    io::save_json(index, dir + "/index.json");
}

inline Episode read_episode(const std::string& dir) {
    Episode ep;
    nlohmann::json index = io::load_json(dir + "/index.json");
    ep.task = index.at("task").get<std::string>();
    ep.seed = index.at("seed").get<std::uint64_t>();
    ep.config_hash = index.value("config_hash", "");
    std::size_t ticks = index.at("tick_count").get<std::size_t>();

    auto lowdim = detail::read_f32(dir + "/lowdim.bin");
    if (lowdim.size() != ticks * 17) throw DatasetError("lowdim.bin size mismatch in " + dir);
    ep.ticks.resize(ticks);
    for (std::size_t i = 0; i < ticks; ++i) {
        const float* row = lowdim.data() + i * 17;
        ep.ticks[i].t = row[0];
        for (int k = 0; k < 8; ++k) ep.ticks[i].proprio[k] = row[1 + k];
        for (int k = 0; k < 8; ++k) ep.ticks[i].action[k] = row[9 + k];
    }
    auto ft = detail::read_f32(dir + "/ft.bin");
    if (ft.size() % 7 != 0) throw DatasetError("ft.bin size mismatch in " + dir);
    ep.ft.resize(ft.size() / 7);
    for (std::size_t i = 0; i < ep.ft.size(); ++i) {
        const float* row = ft.data() + i * 7;
        ep.ft[i] = {row[0], {row[1], row[2], row[3]}, {row[4], row[5], row[6]}};
    }
    auto cloud_sizes = index.at("cloud_sizes").get<std::vector<std::size_t>>();
    for (std::size_t i = 0; i < cloud_sizes.size(); ++i) {
        sim::PointCloud pc;
        pc.data = detail::read_f32(dir + "/cloud_" + detail::tick_tag(i) + ".bin");
        if (pc.size() != cloud_sizes[i]) throw DatasetError("cloud size mismatch in " + dir);
        ep.clouds.push_back(std::move(pc));
    }
    if (index.contains("image_shape")) {
        auto shape = index.at("image_shape").get<std::vector<int>>();
        for (std::size_t i = 0; i < ticks; ++i) {
            sim::ImageGrid img;
            img.h = shape[0];
            img.w = shape[1];
            img.c = shape[2];
            img.data = detail::read_f32(dir + "/image_" + detail::tick_tag(i) + ".bin");
            if (img.data.size() != static_cast<std::size_t>(img.h * img.w * img.c))
                throw DatasetError("image size mismatch in " + dir);
            ep.images.push_back(std::move(img));
        }
    }
    return ep;
}

/// Runs the scripted expert on a fresh world; the first 2 s are a settle
/// period that fills the F/T history before the first recorded tick.
inline std::optional<Episode> record_episode(const sim::SimConfig& cfg, std::uint64_t seed,
                                             sim::Task task, int settle_ticks = 20,
                                             int max_ticks = 500) {
    sim::SimWorld world{cfg};
    world.reset(seed, task);
    sim::ScriptedExpert expert(cfg, task, seed);

    Episode ep;
    ep.task = sim::task_name(task);
    ep.seed = seed;
    ep.config_hash = io::config_hash(nlohmann::json(cfg));

    Action hold;
    hold.pose = world.state().ee;
    hold.width = world.state().gripper_width;
    std::vector<sim::FtSample> last;
    for (int i = 0; i < settle_ticks; ++i) {
        last = world.step(hold, cfg.control_period);
        ep.ft.insert(ep.ft.end(), last.begin(), last.end());
    }

    for (int t = 0; t < max_ticks; ++t) {
        Action a = expert.next_action(world.state(), last);
        if (expert.done()) break;
        if (expert.failed()) return std::nullopt;

        EpisodeTick tick;
        tick.t = world.state().clock;
        const auto& s = world.state();
        tick.proprio[0] = s.ee.pos.x;
        tick.proprio[1] = s.ee.pos.y;
        tick.proprio[2] = s.ee.pos.z;
        tick.proprio[3] = s.ee.orn.w;
        tick.proprio[4] = s.ee.orn.x;
        tick.proprio[5] = s.ee.orn.y;
        tick.proprio[6] = s.ee.orn.z;
        tick.proprio[7] = s.gripper_width;
        tick.action[0] = a.pose.pos.x;
        tick.action[1] = a.pose.pos.y;
        tick.action[2] = a.pose.pos.z;
        tick.action[3] = a.pose.orn.w;
        tick.action[4] = a.pose.orn.x;
        tick.action[5] = a.pose.orn.y;
        tick.action[6] = a.pose.orn.z;
        tick.action[7] = a.width;
        ep.ticks.push_back(tick);
        ep.clouds.push_back(world.render_pointcloud());
        ep.images.push_back(world.render_image());

        last = world.step(a, cfg.control_period);
        ep.ft.insert(ep.ft.end(), last.begin(), last.end());
    }
    if (!expert.done() || ep.ticks.empty()) return std::nullopt;
    return ep;
}

struct DatasetMeta {
    std::string task;
    std::string config_hash;
    std::size_t episodes = 0;
    std::uint64_t seed = 0;
    sim::SimConfig sim;  // embedded so datasets are self-describing
};

inline void write_dataset_meta(const DatasetMeta& meta, const std::string& dir) {
    nlohmann::json j;
    j["task"] = meta.task;
    j["config_hash"] = meta.config_hash;
    j["episodes"] = meta.episodes;
    j["seed"] = meta.seed;
    j["sim_config"] = meta.sim;
    io::save_json(j, dir + "/meta.json");
}

inline DatasetMeta read_dataset_meta(const std::string& dir) {
    nlohmann::json j = io::load_json(dir + "/meta.json");
    DatasetMeta meta;
    meta.task = j.at("task").get<std::string>();
    meta.config_hash = j.value("config_hash", "");
    meta.episodes = j.at("episodes").get<std::size_t>();
    meta.seed = j.value("seed", std::uint64_t(0));
    if (j.contains("sim_config")) meta.sim = j.at("sim_config").get<sim::SimConfig>();
    return meta;
}

}  // namespace foar::data
