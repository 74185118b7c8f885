#pragma once

#include <string>
#include <vector>

#include "foar/sim/world.hpp"

namespace foar::sim {

/// Phase-machine demonstrator: approach tool, grasp (offset randomized per
/// episode), transit, descend until the sensed normal force enters the press
/// band, then sweep marked bands (wipe) or press-lift at K positions (cut),
/// and finally place the tool. Emits one 10 Hz end-effector target per tick.
class ScriptedExpert {
public:
    ScriptedExpert(const SimConfig& cfg, Task task, std::uint64_t seed)
        : cfg_(cfg), task_(task), rng_(core::Rng::splitmix(seed ^ 0xe87e11ULL)) {
        offset_target_ = rng_.uniform(-cfg.grasp_offset_frac, cfg.grasp_offset_frac) *
                         cfg.tool_length;
        carry_z_ = 0.18 + rng_.uniform(-0.01, 0.01);
        int cuts = 4;
        for (int k = 0; k < cuts; ++k) {
            double frac = static_cast<double>(k + 1) / (cuts + 1);
            cut_positions_.push_back(frac * cfg.cut_len - cfg.cut_len / 2.0 +
                                     rng_.uniform(-0.004, 0.004));
        }
    }

    bool done() const { return phase_ == Phase::Done; }
    bool failed() const { return phase_ == Phase::Failed; }

    /// True in phases where contact exists or is imminent; drives the oracle
    /// policy's contact probability in tests.
    bool in_contact_phase() const {
        return phase_ == Phase::DescendContact || phase_ == Phase::Sweep ||
               phase_ == Phase::CutPress || phase_ == Phase::CutLift;
    }

    std::string phase_name() const {
        switch (phase_) {
            case Phase::ApproachTool: return "approach_tool";
            case Phase::DescendGrasp: return "descend_grasp";
            case Phase::CloseGrip: return "close_grip";
            case Phase::Lift: return "lift";
            case Phase::Transit: return "transit";
            case Phase::DescendContact: return "descend_contact";
            case Phase::Sweep: return "sweep";
            case Phase::CutPosition: return "cut_position";
            case Phase::CutPress: return "cut_press";
            case Phase::CutLift: return "cut_lift";
            case Phase::LiftOff: return "lift_off";
            case Phase::TransitPlace: return "transit_place";
            case Phase::DescendPlace: return "descend_place";
            case Phase::OpenGrip: return "open_grip";
            case Phase::Retreat: return "retreat";
            case Phase::Done: return "done";
            case Phase::Failed: return "failed";
        }
        return "?";
    }

    Action next_action(const SimState& s, const std::vector<FtSample>& last_tick) {
        double fz = 0.0, fz_max = 0.0;
        if (!last_tick.empty()) {
            for (const auto& smp : last_tick) {
                fz += smp.f.z;
                fz_max = std::max(fz_max, smp.f.z);
            }
            fz /= static_cast<double>(last_tick.size());
        }
        ++phase_ticks_;
        if (phase_ticks_ > 150 && phase_ != Phase::Done) phase_ = Phase::Failed;

        switch (phase_) {
            case Phase::ApproachTool: {
                Vec3 grasp = grasp_point(s);
                set_cmd({grasp.x, grasp.y, grasp.z + 0.06}, cfg_.gripper_max_width - 0.01);
                if (near_xy(s, 0.008) && std::abs(s.ee.pos.z - cmd_.pose.pos.z) < 0.01)
                    advance(Phase::DescendGrasp);
                break;
            }
            case Phase::DescendGrasp: {
                Vec3 grasp = grasp_point(s);
                set_cmd(grasp, cfg_.gripper_max_width - 0.01);
                if ((s.ee.pos - grasp).norm() < 0.005) advance(Phase::CloseGrip);
                break;
            }
            case Phase::CloseGrip:
                cmd_.width = 0.03;
                if (s.tool.attached) advance(Phase::Lift);
                break;
            case Phase::Lift:
                cmd_.pose.pos.z = carry_z_;
                cmd_.width = 0.03;
                if (std::abs(s.ee.pos.z - carry_z_) < 0.01)
                    advance(task_ == Task::SurfaceWipe ? Phase::Transit : Phase::CutPosition);
                break;

            case Phase::Transit: {
                if (bands_.empty()) plan_bands(s);
                if (bands_.empty()) {
                    advance(Phase::TransitPlace);
                    break;
                }
                Vec3 start = band_point(s, bands_[band_idx_], sweep_dir_ > 0 ? -reach() : reach());
                set_cmd({start.x, start.y, ee_z_for_tip(s, s.board.top_z + 0.03)}, 0.03);
                if (near_xy(s, 0.01)) advance(Phase::DescendContact);
                break;
            }
            case Phase::DescendContact:
                cmd_.pose.pos.z -= 0.003;
                if (fz_max >= 2.6) {
                    depth_ = std::clamp(s.board.top_z - (cmd_.pose.pos.z - tip_offset(s)),
                                        0.0025, 0.0055);
                    advance(Phase::Sweep);
                }
                break;
            case Phase::Sweep: {
                // force-feedback depth regulation
                if (fz < 3.0)
                    depth_ = std::min(0.0075, depth_ + 0.0005);
                else if (fz > 4.5)
                    depth_ = std::max(0.002, depth_ - 0.0005);
                sweep_x_ += sweep_dir_ * 0.016;
                bool row_done = sweep_dir_ > 0 ? sweep_x_ > reach() : sweep_x_ < -reach();
                if (row_done) {
                    phase_ticks_ = 0;
                    ++band_idx_;
                    sweep_dir_ = -sweep_dir_;
                    if (band_idx_ >= static_cast<int>(bands_.size())) {
                        bands_.clear();
                        plan_bands(s);
                        ++passes_;
                        if (bands_.empty() || passes_ >= 4) {
                            advance(Phase::LiftOff);
                            break;
                        }
                        band_idx_ = 0;
                    }
                    sweep_x_ = sweep_dir_ > 0 ? -reach() : reach();
                }
                Vec3 p = band_point(s, bands_[std::min<std::size_t>(band_idx_, bands_.size() - 1)],
                                    sweep_x_);
                set_cmd({p.x, p.y, ee_z_for_tip(s, s.board.top_z - depth_)}, 0.03);
                break;
            }

            case Phase::CutPosition: {
                if (cut_idx_ >= static_cast<int>(cut_positions_.size())) {
                    advance(Phase::TransitPlace);
                    break;
                }
                Vec3 p = object_point(s, cut_positions_[cut_idx_]);
                set_cmd({p.x, p.y, ee_z_for_tip(s, s.cut_obj.height + 0.03)}, 0.03);
                if (near_xy(s, 0.006)) advance(Phase::CutPress);
                break;
            }
            case Phase::CutPress:
                cmd_.pose.pos.z -= 0.02;
                if (fz_max >= 10.5) advance(Phase::CutLift);
                break;
            case Phase::CutLift:
                cmd_.pose.pos.z = ee_z_for_tip(s, s.cut_obj.height + 0.05);
                if (s.ee.pos.z >= cmd_.pose.pos.z - 0.01) {
                    ++cut_idx_;
                    advance(Phase::CutPosition);
                }
                break;

            case Phase::LiftOff:
                cmd_.pose.pos.z = carry_z_;
                if (std::abs(s.ee.pos.z - carry_z_) < 0.01) advance(Phase::TransitPlace);
                break;
            case Phase::TransitPlace:
                set_cmd({cfg_.place_x, cfg_.place_y, carry_z_}, 0.03);
                if (near_xy(s, 0.01)) advance(Phase::DescendPlace);
                break;
            case Phase::DescendPlace:
                cmd_.pose.pos.z = tip_offset(s) + 0.003;
                if (std::abs(s.ee.pos.z - cmd_.pose.pos.z) < 0.004) advance(Phase::OpenGrip);
                break;
            case Phase::OpenGrip:
                cmd_.width = cfg_.grip_open_width + 0.01;
                if (!s.tool.attached) advance(Phase::Retreat);
                break;
            case Phase::Retreat:
                cmd_.pose.pos.z = 0.20;
                cmd_.width = cfg_.grip_open_width + 0.01;
                if (s.ee.pos.z > 0.19) advance(Phase::Done);
                break;
            case Phase::Done:
            case Phase::Failed:
                break;
        }
        cmd_.pose.orn = Quat::identity();
        return cmd_;
    }

private:
    enum class Phase {
        ApproachTool,
        DescendGrasp,
        CloseGrip,
        Lift,
        Transit,
        DescendContact,
        Sweep,
        CutPosition,
        CutPress,
        CutLift,
        LiftOff,
        TransitPlace,
        DescendPlace,
        OpenGrip,
        Retreat,
        Done,
        Failed
    };

    void advance(Phase next) {
        phase_ = next;
        phase_ticks_ = 0;
        if (next == Phase::Sweep) {
            sweep_x_ = sweep_dir_ > 0 ? -reach() : reach();
        }
    }

    void set_cmd(Vec3 pos, double width) {
        cmd_.pose.pos = pos;
        cmd_.width = width;
    }

    bool near_xy(const SimState& s, double tol) const {
        double dx = s.ee.pos.x - cmd_.pose.pos.x;
        double dy = s.ee.pos.y - cmd_.pose.pos.y;
        return std::sqrt(dx * dx + dy * dy) < tol;
    }

    double reach() const { return cfg_.board_w / 2.0 - 0.005; }

    /// Grip point on the tool for this episode's sampled offset.
    Vec3 grasp_point(const SimState& s) const {
        return s.tool.pose.pos + s.tool.axis() * offset_target_;
    }

    /// Distance from the EE origin down to the tool tip once attached.
    double tip_offset(const SimState& s) const {
        return s.tool.grasp_offset + s.tool.length / 2.0;
    }

    double ee_z_for_tip(const SimState& s, double tip_z) const {
        return tip_z + tip_offset(s);
    }

    /// Sweep bands cover two mark rows each; only bands that still contain
    /// ink are queued, so demos show mark-seeking (and re-wiping) behavior.
    void plan_bands(const SimState& s) {
        bands_.clear();
        const auto& b = s.board;
        int rows_per_band = 2;
        for (int r0 = 0; r0 < b.rows; r0 += rows_per_band) {
            bool has_marks = false;
            for (int r = r0; r < std::min(b.rows, r0 + rows_per_band) && !has_marks; ++r)
                for (int c = 0; c < b.cols && !has_marks; ++c)
                    has_marks = b.marks[b.idx(c, r)] != 0;
            if (!has_marks) continue;
            double y0, y1, dummy;
            b.cell_center(0, r0, dummy, y0);
            b.cell_center(0, std::min(b.rows - 1, r0 + rows_per_band - 1), dummy, y1);
            bands_.push_back((y0 + y1) / 2.0);
        }
        band_idx_ = 0;
    }

    /// Board-frame (x, band_y) to world.
    Vec3 band_point(const SimState& s, double band_y, double x) const {
        Vec3 w = s.board.pose.orn.rotate({x, band_y, 0});
        return {s.board.pose.pos.x + w.x, s.board.pose.pos.y + w.y, 0};
    }

    Vec3 object_point(const SimState& s, double local_x) const {
        Vec3 w = s.cut_obj.pose.orn.rotate({local_x, 0, 0});
        return {s.cut_obj.pose.pos.x + w.x, s.cut_obj.pose.pos.y + w.y, 0};
    }

    SimConfig cfg_;
    Task task_;
    core::Rng rng_;
    Phase phase_ = Phase::ApproachTool;
    int phase_ticks_ = 0;
    Action cmd_{};
    double offset_target_ = 0.0;
    double carry_z_ = 0.18;
    double depth_ = 0.003;
    double sweep_x_ = 0.0;
    int sweep_dir_ = 1;
    std::vector<double> bands_;
    int band_idx_ = 0;
    int passes_ = 0;
    std::vector<double> cut_positions_;
    int cut_idx_ = 0;
};

}  // namespace foar::sim
