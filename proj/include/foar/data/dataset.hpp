#pragma once

#include <map>
#include <vector>

#include "foar/data/episode.hpp"
#include "foar/data/labels.hpp"

namespace foar::data {

struct NormalizationError : std::runtime_error {
    explicit NormalizationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Affine per-axis map between workspace meters and [-1,1]; gripper width
/// maps over its own range. Out-of-range inputs are clamped and counted.
class Normalizer {
public:
    Normalizer() = default;
    explicit Normalizer(const sim::SimConfig& cfg)
        : x0_(cfg.ws_x_min), x1_(cfg.ws_x_max), y0_(cfg.ws_y_min), y1_(cfg.ws_y_max),
          z0_(cfg.ws_z_min), z1_(cfg.ws_z_max), w0_(0.0), w1_(cfg.gripper_max_width) {}

    double nx(double v) const { return map(v, x0_, x1_); }
    double ny(double v) const { return map(v, y0_, y1_); }
    double nz(double v) const { return map(v, z0_, z1_); }
    double nwidth(double v) const { return map(v, w0_, w1_); }
    double dx(double v) const { return unmap(v, x0_, x1_); }
    double dy(double v) const { return unmap(v, y0_, y1_); }
    double dz(double v) const { return unmap(v, z0_, z1_); }
    double dwidth(double v) const { return unmap(v, w0_, w1_); }

    Vec3 normalize_pos(const Vec3& p) const { return {nx(p.x), ny(p.y), nz(p.z)}; }
    Vec3 denormalize_pos(const Vec3& p) const { return {dx(p.x), dy(p.y), dz(p.z)}; }

    long clamp_warnings() const { return clamp_warnings_; }

private:
    double map(double v, double lo, double hi) const {
        if (v < lo || v > hi) {
            ++clamp_warnings_;
            v = std::clamp(v, lo, hi);
        }
        return 2.0 * (v - lo) / (hi - lo) - 1.0;
    }
    static double unmap(double v, double lo, double hi) {
        return lo + (v + 1.0) * 0.5 * (hi - lo);
    }

    double x0_ = -1, x1_ = 1, y0_ = -1, y1_ = 1, z0_ = 0, z1_ = 1, w0_ = 0, w1_ = 0.08;
    mutable long clamp_warnings_ = 0;
};

/// One training example; all coordinates in [-1,1] once normalized.
struct TrainingSample {
    std::vector<float> cloud;         // N x 6 rows, xyz normalized
    sim::ImageGrid image;
    std::vector<float> ft_window;     // T_o x 6, raw sensor units
    float proprio[8] = {0};
    std::vector<float> action_chunk;  // T_a x 8 (pos3, quat4, width)
    double label = 0.0;
    bool normalized = false;
    std::size_t t_o = 0, t_a = 0;
};

/// Applies the workspace map to every coordinate of a raw sample. Raw samples
/// must not already be normalized (guarded, never silently double-applied).
inline TrainingSample normalize_sample(TrainingSample raw, const Normalizer& norm) {
    if (raw.normalized)
        throw NormalizationError("normalize_sample: sample is already normalized");
    for (std::size_t i = 0; i + 5 < raw.cloud.size(); i += 6) {
        raw.cloud[i] = static_cast<float>(norm.nx(raw.cloud[i]));
        raw.cloud[i + 1] = static_cast<float>(norm.ny(raw.cloud[i + 1]));
        raw.cloud[i + 2] = static_cast<float>(norm.nz(raw.cloud[i + 2]));
    }
    raw.proprio[0] = static_cast<float>(norm.nx(raw.proprio[0]));
    raw.proprio[1] = static_cast<float>(norm.ny(raw.proprio[1]));
    raw.proprio[2] = static_cast<float>(norm.nz(raw.proprio[2]));
    raw.proprio[7] = static_cast<float>(norm.nwidth(raw.proprio[7]));
    for (std::size_t i = 0; i + 7 < raw.action_chunk.size(); i += 8) {
        raw.action_chunk[i] = static_cast<float>(norm.nx(raw.action_chunk[i]));
        raw.action_chunk[i + 1] = static_cast<float>(norm.ny(raw.action_chunk[i + 1]));
        raw.action_chunk[i + 2] = static_cast<float>(norm.nz(raw.action_chunk[i + 2]));
        raw.action_chunk[i + 7] = static_cast<float>(norm.nwidth(raw.action_chunk[i + 7]));
    }
    raw.normalized = true;
    return raw;
}

/// Rigid scene perturbation applied jointly to cloud and targets, plus a
/// photometric jitter applied to colors/image only. Exact zero parameters
/// leave the sample bit-identical.
inline void augment_with(TrainingSample& s, double yaw, double tx, double ty, double tz,
                         double brightness, double contrast) {
    if (!s.normalized)
        throw NormalizationError("augment: sample must be normalized first");
    bool do_rigid = yaw != 0.0 || tx != 0.0 || ty != 0.0 || tz != 0.0;
    bool do_color = brightness != 0.0 || contrast != 1.0;
    double c = std::cos(yaw), sn = std::sin(yaw);
    auto rot_xy = [&](float& x, float& y) {
        double nx = c * x - sn * y;
        double ny = sn * x + c * y;
        x = static_cast<float>(nx + tx);
        y = static_cast<float>(ny + ty);
    };
    Quat rz = Quat::from_yaw(yaw);
    auto rot_quat = [&](float* q) {
        Quat v{q[0], q[1], q[2], q[3]};
        Quat r = rz * v;
        q[0] = static_cast<float>(r.w);
        q[1] = static_cast<float>(r.x);
        q[2] = static_cast<float>(r.y);
        q[3] = static_cast<float>(r.z);
    };
    if (do_rigid) {
        for (std::size_t i = 0; i + 5 < s.cloud.size(); i += 6) {
            rot_xy(s.cloud[i], s.cloud[i + 1]);
            s.cloud[i + 2] = static_cast<float>(s.cloud[i + 2] + tz);
        }
        rot_xy(s.proprio[0], s.proprio[1]);
        s.proprio[2] = static_cast<float>(s.proprio[2] + tz);
        rot_quat(s.proprio + 3);
        for (std::size_t i = 0; i + 7 < s.action_chunk.size(); i += 8) {
            rot_xy(s.action_chunk[i], s.action_chunk[i + 1]);
            s.action_chunk[i + 2] = static_cast<float>(s.action_chunk[i + 2] + tz);
            rot_quat(s.action_chunk.data() + i + 3);
        }
    }
    if (do_color) {
        auto jitter = [&](float& v) {
            double out = (static_cast<double>(v) - 0.5) * contrast + 0.5 + brightness;
            v = static_cast<float>(std::clamp(out, 0.0, 1.0));
        };
        for (std::size_t i = 0; i + 5 < s.cloud.size(); i += 6) {
            jitter(s.cloud[i + 3]);
            jitter(s.cloud[i + 4]);
            jitter(s.cloud[i + 5]);
        }
        for (auto& v : s.image.data) jitter(v);
    }
}

inline void augment(TrainingSample& s, core::Rng& rng) {
    double yaw = rng.uniform(-10.0, 10.0) * 3.14159265358979 / 180.0;
    double tx = rng.uniform(-0.1, 0.1);
    double ty = rng.uniform(-0.1, 0.1);
    double tz = rng.uniform(-0.1, 0.1);
    double brightness = rng.uniform(-0.2, 0.2);
    double contrast = rng.uniform(0.8, 1.2);
    augment_with(s, yaw, tx, ty, tz, brightness, contrast);
}

/// Episode-backed sample source; FtWindow slicing takes the T_o samples
/// ending at the tick's timestamp, front-padded with the earliest sample.
class Dataset {
public:
    Dataset(std::string dir, const sim::SimConfig& sim_cfg, LabelConfig label_cfg,
            std::size_t t_o = 200, std::size_t t_a = 20)
        : dir_(std::move(dir)), norm_(sim_cfg), label_cfg_(label_cfg), t_o_(t_o), t_a_(t_a) {
        meta_ = read_dataset_meta(dir_);
        offsets_.push_back(0);
        for (std::size_t e = 0; e < meta_.episodes; ++e) {
            nlohmann::json index = io::load_json(episode_dir(dir_, e) + "/index.json");
            std::size_t ticks = index.at("tick_count").get<std::size_t>();
            offsets_.push_back(offsets_.back() + ticks);
        }
    }

    /// Opens a dataset using the sim config embedded in its meta.json.
    static Dataset open(const std::string& dir, LabelConfig label_cfg,
                        std::size_t t_o = 200, std::size_t t_a = 20) {
        DatasetMeta meta = read_dataset_meta(dir);
        return Dataset(dir, meta.sim, label_cfg, t_o, t_a);
    }

    const DatasetMeta& meta() const { return meta_; }
    std::size_t size() const { return offsets_.back(); }
    std::size_t episodes() const { return meta_.episodes; }
    const Normalizer& normalizer() const { return norm_; }
    std::size_t t_o() const { return t_o_; }
    std::size_t t_a() const { return t_a_; }

    std::pair<std::size_t, std::size_t> locate(std::size_t global) const {
        if (global >= size()) throw DatasetError("sample index out of range");
        auto it = std::upper_bound(offsets_.begin(), offsets_.end(), global);
        std::size_t ep = static_cast<std::size_t>(it - offsets_.begin()) - 1;
        return {ep, global - offsets_[ep]};
    }

    const Episode& episode(std::size_t e) const {
        auto it = cache_.find(e);
        if (it == cache_.end()) {
            std::string dir = episode_dir(dir_, e);
            try {
                it = cache_.emplace(e, read_episode(dir)).first;
                label_cache_.emplace(e, compute_labels(it->second));
            } catch (const std::exception& ex) {
                throw DatasetError("failed to load episode " + dir + ": " + ex.what());
            }
        }
        return it->second;
    }

    TrainingSample sample(std::size_t global) const {
        auto [e, tick] = locate(global);
        const Episode& ep = episode(e);
        const auto& labels = label_cache_.at(e);

        TrainingSample s;
        s.t_o = t_o_;
        s.t_a = t_a_;
        s.cloud = ep.clouds[tick].data;
        s.image = ep.images[tick];
        s.label = labels[tick];
        for (int k = 0; k < 8; ++k)
            s.proprio[k] = static_cast<float>(ep.ticks[tick].proprio[k]);

        s.ft_window.resize(t_o_ * 6);
        double t_now = ep.ticks[tick].t;
        auto hi = std::upper_bound(ep.ft.begin(), ep.ft.end(), t_now,
                                   [](double v, const sim::FtSample& smp) { return v < smp.t; });
        std::size_t end = static_cast<std::size_t>(hi - ep.ft.begin());
        for (std::size_t k = 0; k < t_o_; ++k) {
            std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(end) -
                                 static_cast<std::ptrdiff_t>(t_o_) +
                                 static_cast<std::ptrdiff_t>(k);
            const sim::FtSample& smp = ep.ft[idx < 0 ? 0 : static_cast<std::size_t>(idx)];
            float* row = s.ft_window.data() + k * 6;
            row[0] = static_cast<float>(smp.f.x);
            row[1] = static_cast<float>(smp.f.y);
            row[2] = static_cast<float>(smp.f.z);
            row[3] = static_cast<float>(smp.tau.x);
            row[4] = static_cast<float>(smp.tau.y);
            row[5] = static_cast<float>(smp.tau.z);
        }

        s.action_chunk.resize(t_a_ * 8);
        for (std::size_t k = 0; k < t_a_; ++k) {
            std::size_t src = std::min(tick + k, ep.ticks.size() - 1);
            for (int j = 0; j < 8; ++j)
                s.action_chunk[k * 8 + j] = static_cast<float>(ep.ticks[src].action[j]);
        }
        return normalize_sample(std::move(s), norm_);
    }

    std::vector<TrainingSample> load_batch(const std::vector<std::size_t>& indices) const {
        std::vector<TrainingSample> batch;
        batch.reserve(indices.size());
        for (std::size_t i : indices) batch.push_back(sample(i));
        return batch;
    }

private:
    std::vector<std::uint8_t> compute_labels(const Episode& ep) const {
        std::vector<double> times;
        times.reserve(ep.ticks.size());
        for (const auto& tk : ep.ticks) times.push_back(tk.t);
        return extract_contact_labels(ep.ft, label_cfg_, times);
    }

    std::string dir_;
    Normalizer norm_;
    LabelConfig label_cfg_;
    std::size_t t_o_, t_a_;
    DatasetMeta meta_;
    std::vector<std::size_t> offsets_;
    mutable std::map<std::size_t, Episode> cache_;
    mutable std::map<std::size_t, std::vector<std::uint8_t>> label_cache_;
};

}  // namespace foar::data
