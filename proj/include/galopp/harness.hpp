#pragma once

#include "galopp/config.hpp"
#include "galopp/eval.hpp"
#include "galopp/trainer.hpp"

#include <opencv2/core.hpp>

#include <optional>
#include <string>
#include <vector>

namespace galopp
{

enum class SweepParameter
{
    comm_range,
    sensing_range,
    n_agents,
    n_anchors,
    obstacle_fraction,
    map_mode
};

SweepParameter sweep_parameter_from_string(std::string_view s);
std::string_view to_string(SweepParameter p);

/// Preconfigured grids: rho 10..30 step 5, l in {5, 6, 7}, 2..5 agents,
/// 1..n_agents anchors, 5..30 % obstruction, both map modes.
std::vector<std::string> default_sweep_values(SweepParameter p, const RunConfig& base);

RunConfig apply_sweep_value(RunConfig config, SweepParameter p, const std::string& value);

enum class SweepMode
{
    train, // train a fresh GALOPP policy per value, then evaluate it
    eval   // evaluate a fixed policy (baseline or checkpoint) per value
};

struct SweepOptions
{
    SweepMode mode = SweepMode::eval;
    PolicyKind policy = PolicyKind::rs;
    std::string checkpoint; // GALOPP weights for eval mode
    std::string out_dir;    // sweep.csv and sweep.png when set
};

struct SweepRow
{
    std::string value;
    EvalReport report;
};

std::vector<SweepRow> sweep(SweepParameter p, const std::vector<std::string>& values, const RunConfig& base,
                            const SweepOptions& options);

void write_sweep_csv(const std::string& path, SweepParameter p, const std::vector<SweepRow>& rows);
cv::Mat plot_sweep(SweepParameter p, const std::vector<SweepRow>& rows);

/// Evaluate one policy kind under a run config.
EvalReport evaluate_policy(PolicyKind kind, const RunConfig& config, Network* net, int episodes, std::uint64_t seed);

inline constexpr int trail_length = 30;

/// First step of the fading trail drawn at step t.
inline std::size_t trail_begin(std::size_t t)
{
    return t + 1 >= trail_length ? t + 1 - trail_length : 0;
}

struct RenderOptions
{
    std::string out_dir;
    int cell_pixels = 16;
    bool frames = true;
    bool animation = true;
    double fps = 10.0;
};

/// Heatmap of step t with agents, communication edges and trails.
cv::Mat render_frame(const EpisodeLog& log, std::size_t t, int cell_pixels);

/// Writes frame_XXXX.png files and episode.avi; returns the frame count.
std::size_t render(const EpisodeLog& log, const RenderOptions& options);

} // namespace galopp
