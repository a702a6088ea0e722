#include "galopp/harness.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace galopp
{

SweepParameter sweep_parameter_from_string(std::string_view s)
{
    if (s == "comm_range")
        return SweepParameter::comm_range;
    if (s == "sensing_range")
        return SweepParameter::sensing_range;
    if (s == "n_agents")
        return SweepParameter::n_agents;
    if (s == "n_anchors")
        return SweepParameter::n_anchors;
    if (s == "obstacle_fraction")
        return SweepParameter::obstacle_fraction;
    if (s == "map_mode")
        return SweepParameter::map_mode;
    throw std::invalid_argument("unknown sweep parameter: " + std::string(s));
}

std::string_view to_string(SweepParameter p)
{
    switch (p)
    {
    case SweepParameter::comm_range: return "comm_range";
    case SweepParameter::sensing_range: return "sensing_range";
    case SweepParameter::n_agents: return "n_agents";
    case SweepParameter::n_anchors: return "n_anchors";
    case SweepParameter::obstacle_fraction: return "obstacle_fraction";
    case SweepParameter::map_mode: return "map_mode";
    }
    return "?";
}

std::vector<std::string> default_sweep_values(SweepParameter p, const RunConfig& base)
{
    switch (p)
    {
    case SweepParameter::comm_range: return {"10", "15", "20", "25", "30"};
    case SweepParameter::sensing_range: return {"5", "6", "7"};
    case SweepParameter::n_agents: return {"2", "3", "4", "5"};
    case SweepParameter::n_anchors:
    {
        std::vector<std::string> v;
        for (int k = 1; k <= base.n_agents; ++k)
            v.push_back(std::to_string(k));
        return v;
    }
    case SweepParameter::obstacle_fraction: return {"0.05", "0.10", "0.15", "0.20", "0.25", "0.30"};
    case SweepParameter::map_mode: return {"centralized", "decentralized"};
    }
    return {};
}

RunConfig apply_sweep_value(RunConfig c, SweepParameter p, const std::string& value)
{
    switch (p)
    {
    case SweepParameter::comm_range: c.comm_range = std::stod(value); break;
    case SweepParameter::sensing_range: c.sensing_range = std::stoi(value); break;
    case SweepParameter::n_agents:
        c.n_agents = std::stoi(value);
        c.n_anchors = std::min(c.n_anchors, c.n_agents);
        break;
    case SweepParameter::n_anchors:
        c.n_anchors = std::stoi(value);
        if (c.n_anchors < 1 || c.n_anchors > c.n_agents)
            throw std::invalid_argument("n_anchors sweep value out of range");
        break;
    case SweepParameter::obstacle_fraction:
        c.obstacle_fraction = std::stod(value);
        c.map = "generated";
        break;
    case SweepParameter::map_mode: c.map_mode = map_mode_from_string(value); break;
    }
    return c;
}

EvalReport evaluate_policy(PolicyKind kind, const RunConfig& config, Network* net, int episodes, std::uint64_t seed)
{
    const EpisodeSpec spec = config.episode_spec();
    const EnvFactory make_env = config.env_factory();
    switch (kind)
    {
    case PolicyKind::galopp:
    {
        if (!net)
            throw std::invalid_argument("GALOPP evaluation needs a network");
        GaloppController c(*net, !config.eval_stochastic);
        return run_eval(c, make_env, spec, episodes, seed);
    }
    case PolicyKind::rs:
    {
        RandomSearch c;
        return run_eval(c, make_env, spec, episodes, seed);
    }
    case PolicyKind::rsec:
    {
        RandomSearchEnsuredComm c;
        return run_eval(c, make_env, spec, episodes, seed);
    }
    case PolicyKind::gs:
    {
        GreedySearch c;
        return run_eval(c, make_env, spec, episodes, seed);
    }
    }
    throw std::logic_error("unreachable");
}

std::vector<SweepRow> sweep(SweepParameter p, const std::vector<std::string>& values, const RunConfig& base,
                            const SweepOptions& options)
{
    if (values.empty())
        throw std::invalid_argument("sweep needs at least one value");
    std::optional<Network> fixed;
    if (options.mode == SweepMode::eval && options.policy == PolicyKind::galopp)
    {
        if (options.checkpoint.empty())
            throw std::invalid_argument("GALOPP sweep evaluation needs --checkpoint");
        fixed.emplace(Network::from_checkpoint(nd::load_checkpoint(options.checkpoint)));
    }

    namespace fs = std::filesystem;
    std::vector<SweepRow> rows;
    for (const auto& v : values)
    {
        const RunConfig cfg = apply_sweep_value(base, p, v);
        SweepRow row{v, {}};
        if (options.mode == SweepMode::train)
        {
            TrainOptions topt;
            if (!options.out_dir.empty())
                topt.out_dir = options.out_dir + "/" + std::string(to_string(p)) + "_" + v;
            TrainResult trained = train(cfg, topt);
            row.report = evaluate_policy(PolicyKind::galopp, cfg, &trained.network, cfg.eval_episodes,
                                         derive_seed(cfg.seed, 0x737765));
        }
        else
        {
            row.report = evaluate_policy(options.policy, cfg, fixed ? &*fixed : nullptr, cfg.eval_episodes,
                                         derive_seed(cfg.seed, 0x737765));
        }
        rows.push_back(std::move(row));
    }
    if (!options.out_dir.empty())
    {
        fs::create_directories(options.out_dir);
        write_sweep_csv(options.out_dir + "/sweep.csv", p, rows);
        cv::imwrite(options.out_dir + "/sweep.png", plot_sweep(p, rows));
        std::ofstream(options.out_dir + "/config.json") << base.to_json().dump(2) << '\n';
    }
    return rows;
}

void write_sweep_csv(const std::string& path, SweepParameter p, const std::vector<SweepRow>& rows)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << to_string(p) << ",policy,episodes,mean_reward,ci95,mean_disconnection_percent\n";
    out << std::setprecision(17);
    for (const auto& r : rows)
    {
        out << r.value << ',' << r.report.policy << ',' << r.report.episode_rewards.size() << ',' << r.report.mean
            << ',';
        if (r.report.ci95)
            out << *r.report.ci95;
        out << ',' << r.report.mean_disconnection << '\n';
    }
}

cv::Mat plot_sweep(SweepParameter p, const std::vector<SweepRow>& rows)
{
    const int w = 640, h = 420, left = 90, right = 20, top = 40, bottom = 60;
    cv::Mat img(h, w, CV_8UC3, cv::Scalar(255, 255, 255));
    double lo = 0.0;
    for (const auto& r : rows)
        lo = std::min(lo, r.report.lower());
    if (lo == 0.0)
        lo = -1.0;
    const int plot_h = h - top - bottom;
    auto y_of = [&](double v) { return top + static_cast<int>(std::lround((v / lo) * plot_h)); };

    cv::line(img, {left, top}, {left, h - bottom}, cv::Scalar(0, 0, 0));
    cv::line(img, {left, top}, {w - right, top}, cv::Scalar(0, 0, 0));
    const int slot = (w - left - right) / static_cast<int>(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k)
    {
        const auto& r = rows[k];
        const int x0 = left + static_cast<int>(k) * slot + slot / 5;
        const int x1 = left + static_cast<int>(k + 1) * slot - slot / 5;
        cv::rectangle(img, {x0, top}, {x1, y_of(r.report.mean)}, cv::Scalar(180, 120, 60), cv::FILLED);
        if (r.report.ci95)
        {
            const int xm = (x0 + x1) / 2;
            cv::line(img, {xm, y_of(r.report.lower())}, {xm, y_of(r.report.upper())}, cv::Scalar(0, 0, 0), 2);
        }
        cv::putText(img, r.value, {x0, h - bottom + 20}, cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0));
    }
    char label[64];
    std::snprintf(label, sizeof label, "%.3g", lo);
    cv::putText(img, label, {5, h - bottom}, cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
    cv::putText(img, "0", {left - 20, top + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
    cv::putText(img, "mean episode reward vs " + std::string(to_string(p)), {left, 25}, cv::FONT_HERSHEY_SIMPLEX, 0.55,
                cv::Scalar(0, 0, 0));
    return img;
}

namespace
{

cv::Point pixel_center(const Cell& c, int height, int px)
{
    return {c.x * px + px / 2, (height - 1 - c.y) * px + px / 2};
}

} // namespace

cv::Mat render_frame(const EpisodeLog& log, std::size_t t, int px)
{
    const GridSpec& g = log.grid;
    cv::Mat img(g.height * px, g.width * px, CV_8UC3);
    const bool have_step = t < log.steps.size();
    for (int x = 0; x < g.width; ++x)
        for (int y = 0; y < g.height; ++y)
        {
            cv::Scalar color;
            if (g.obstacles(x, y))
                color = cv::Scalar(0, 0, 0);
            else
            {
                const double v = have_step ? -log.steps[t].field(x, y) / g.max_penalty : 0.0;
                color = cv::Scalar(255 * (1.0 - v), 255 * (1.0 - 0.8 * v), 255); // white -> red (BGR)
            }
            const int row = (g.height - 1 - y) * px;
            cv::rectangle(img, {x * px, row}, {x * px + px - 1, row + px - 1}, color, cv::FILLED);
        }
    if (!have_step)
        return img;

    const StepRecord& s = log.steps[t];
    for (std::size_t i = 0; i < s.positions.size(); ++i)
    {
        const std::size_t begin = trail_begin(t);
        for (std::size_t k = begin; k < t; ++k)
        {
            const double fade = static_cast<double>(k - begin + 1) / static_cast<double>(t - begin + 1);
            const cv::Scalar c(255 * fade + 120 * (1 - fade), 255 * fade + 120 * (1 - fade),
                               255 * fade + 120 * (1 - fade));
            cv::line(img, pixel_center(log.steps[k].positions[i], g.height, px),
                     pixel_center(log.steps[k + 1].positions[i], g.height, px), c, std::max(1, px / 6));
        }
    }
    for (std::size_t i = 0; i < s.positions.size(); ++i)
        for (std::size_t j = i + 1; j < s.positions.size(); ++j)
            if (distance(s.positions[i], s.positions[j]) <= log.comm_range)
                cv::line(img, pixel_center(s.positions[i], g.height, px), pixel_center(s.positions[j], g.height, px),
                         cv::Scalar(0, 0, 230), 1);
    for (std::size_t i = 0; i < s.positions.size(); ++i)
    {
        const bool anchor = log.roles[i] == Role::anchor;
        const cv::Scalar color = anchor ? cv::Scalar(0, 0, 220) : (s.localized[i] ? cv::Scalar(120, 20, 20)
                                                                                    : cv::Scalar(200, 160, 160));
        cv::drawMarker(img, pixel_center(s.positions[i], g.height, px), color,
                       anchor ? cv::MARKER_STAR : cv::MARKER_TRIANGLE_UP, std::max(6, px), 2);
    }
    return img;
}

std::size_t render(const EpisodeLog& log, const RenderOptions& options)
{
    namespace fs = std::filesystem;
    fs::create_directories(options.out_dir);
    const std::size_t frames = std::max<std::size_t>(1, log.steps.size());
    std::optional<cv::VideoWriter> video;
    for (std::size_t t = 0; t < frames; ++t)
    {
        const cv::Mat img = render_frame(log, t, options.cell_pixels);
        if (options.frames)
        {
            std::ostringstream name;
            name << options.out_dir << "/frame_" << std::setw(4) << std::setfill('0') << t << ".png";
            cv::imwrite(name.str(), img);
        }
        if (options.animation)
        {
            if (!video)
                video.emplace(options.out_dir + "/episode.avi", cv::VideoWriter::fourcc('M', 'J', 'P', 'G'),
                              options.fps, img.size());
            if (video->isOpened())
                video->write(img);
        }
    }
    return frames;
}

} // namespace galopp
