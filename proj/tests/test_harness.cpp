#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "galopp/harness.hpp"

#include <filesystem>
#include <fstream>

using namespace galopp;
namespace fs = std::filesystem;

namespace
{

RunConfig quick_config()
{
    RunConfig rc;
    rc.width = rc.height = 12;
    rc.episode_length = 20;
    rc.eval_episodes = 4;
    return rc;
}

int count_lines(const std::string& path)
{
    std::ifstream in(path);
    int n = 0;
    for (std::string line; std::getline(in, line);)
        ++n;
    return n;
}

EpisodeLog two_agent_log(Cell a, Cell b, double rho)
{
    EpisodeLog log;
    log.grid = GridSpec::open(20, 20);
    log.comm_range = rho;
    log.roles = {Role::anchor, Role::auxiliary};
    StepRecord s;
    s.positions = {a, b};
    s.localized = {1, 1};
    s.field = CellArray::Zero(20, 20);
    log.steps.push_back(s);
    return log;
}

} // namespace

TEST_CASE("preconfigured sweep grids")
{
    const RunConfig rc;
    CHECK(default_sweep_values(SweepParameter::comm_range, rc) ==
          std::vector<std::string>{"10", "15", "20", "25", "30"});
    CHECK(default_sweep_values(SweepParameter::obstacle_fraction, rc).size() == 6);
    CHECK(default_sweep_values(SweepParameter::map_mode, rc).size() == 2);
    CHECK_THROWS(sweep_parameter_from_string("learning_rate"));
    for (auto p : {SweepParameter::comm_range, SweepParameter::sensing_range, SweepParameter::n_agents,
                   SweepParameter::n_anchors, SweepParameter::obstacle_fraction, SweepParameter::map_mode})
        CHECK(sweep_parameter_from_string(to_string(p)) == p);
}

TEST_CASE("apply_sweep_value")
{
    RunConfig rc;
    rc.n_agents = 4;
    CHECK(apply_sweep_value(rc, SweepParameter::comm_range, "25").comm_range == 25.0);
    CHECK(apply_sweep_value(rc, SweepParameter::sensing_range, "5").sensing_range == 5);
    CHECK(apply_sweep_value(rc, SweepParameter::n_anchors, "2").n_anchors == 2);
    CHECK_THROWS(apply_sweep_value(rc, SweepParameter::n_anchors, "5"));
    const RunConfig ob = apply_sweep_value(rc, SweepParameter::obstacle_fraction, "0.2");
    CHECK(ob.map == "generated");
    CHECK(apply_sweep_value(rc, SweepParameter::map_mode, "centralized").map_mode == MapMode::centralized);
}

TEST_CASE("comm-range sweep writes one row per value")
{
    const RunConfig rc = quick_config();
    SweepOptions opt;
    opt.policy = PolicyKind::rsec;
    opt.out_dir = "test_harness_sweep";
    const auto values = default_sweep_values(SweepParameter::comm_range, rc);
    const auto rows = sweep(SweepParameter::comm_range, values, rc, opt);
    CHECK(rows.size() == 5);
    CHECK(count_lines(opt.out_dir + "/sweep.csv") == 6);
    CHECK(fs::exists(opt.out_dir + "/sweep.png"));
    CHECK(fs::exists(opt.out_dir + "/config.json"));
    fs::remove_all(opt.out_dir);
}

TEST_CASE("single-value sweep equals run_eval")
{
    const RunConfig rc = quick_config();
    SweepOptions opt;
    opt.policy = PolicyKind::rs;
    const auto rows = sweep(SweepParameter::comm_range, {"12"}, rc, opt);
    RunConfig same = rc;
    same.comm_range = 12.0;
    const EvalReport direct = evaluate_policy(PolicyKind::rs, same, nullptr, rc.eval_episodes,
                                              derive_seed(rc.seed, 0x737765));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].report.episode_rewards == direct.episode_rewards);

    CHECK_THROWS(sweep(SweepParameter::comm_range, {}, rc, opt));
    opt.policy = PolicyKind::galopp;
    CHECK_THROWS(sweep(SweepParameter::comm_range, {"12"}, rc, opt));
}

TEST_CASE("map-mode sweep runs both modes")
{
    RunConfig rc = quick_config();
    rc.n_agents = 4;
    rc.n_anchors = 2;
    rc.comm_range = 20;
    SweepOptions opt;
    opt.policy = PolicyKind::rs;
    const auto rows = sweep(SweepParameter::map_mode, default_sweep_values(SweepParameter::map_mode, rc), rc, opt);
    CHECK(rows.size() == 2);
    // The field does not depend on how agents share maps, only on where they go.
    CHECK(rows[0].report.episode_rewards == rows[1].report.episode_rewards);
}

TEST_CASE("train-mode sweep")
{
    RunConfig rc = quick_config();
    rc.network.input_size = 5;
    rc.network.conv = {{2, 4, 3, 2, 1}};
    rc.network.actor_hidden = {8};
    rc.network.critic_hidden = {8};
    rc.ppo.episodes = 2;
    rc.ppo.eval_interval = 0;
    rc.eval_episodes = 2;
    SweepOptions opt;
    opt.mode = SweepMode::train;
    opt.out_dir = "test_harness_train";
    const auto rows = sweep(SweepParameter::sensing_range, {"2", "3"}, rc, opt);
    CHECK(rows.size() == 2);
    CHECK(rows[0].report.policy == "galopp");
    CHECK(fs::exists(opt.out_dir + "/sensing_range_2/checkpoint.bin"));
    fs::remove_all(opt.out_dir);
}

TEST_CASE("render frames")
{
    EpisodeLog empty;
    empty.grid = GridSpec::open(5, 4);
    RenderOptions opt;
    opt.out_dir = "test_harness_render";
    CHECK(render(empty, opt) == 1);
    CHECK(fs::exists(opt.out_dir + "/frame_0000.png"));
    const cv::Mat still = render_frame(empty, 0, 10);
    CHECK(still.cols == 50);
    CHECK(still.rows == 40);
    fs::remove_all(opt.out_dir);

    for (std::size_t t : {0ul, 5ul, 29ul, 30ul, 500ul})
    {
        CHECK(t + 1 - trail_begin(t) <= 30);
        CHECK(trail_begin(t) <= t);
    }
    CHECK(trail_begin(500) == 471);
}

TEST_CASE("edges are drawn iff within range")
{
    // Midpoint between agents at (2, 10) and (12, 10) is cell (7, 10).
    const int px = 10;
    auto midpoint = [&](double rho) {
        const cv::Mat img = render_frame(two_agent_log({2, 10}, {12, 10}, rho), 0, px);
        return img.at<cv::Vec3b>((20 - 1 - 10) * px + px / 2, 7 * px + px / 2);
    };
    const cv::Vec3b linked = midpoint(10.0);
    const cv::Vec3b apart = midpoint(9.9);
    CHECK(linked[2] > 200);
    CHECK(linked[0] < 50);
    CHECK(apart == cv::Vec3b(255, 255, 255));
}

TEST_CASE("render writes an animation")
{
    RunConfig rc = quick_config();
    RandomSearch rs;
    const EpisodeResult r = run_episode(rs, rc.make_env(1), rc.episode_spec(), 1, true);
    RenderOptions opt;
    opt.out_dir = "test_harness_anim";
    opt.frames = false;
    CHECK(render(*r.log, opt) == 21);
    CHECK(fs::exists(opt.out_dir + "/episode.avi"));
    CHECK(fs::file_size(opt.out_dir + "/episode.avi") > 0);
    fs::remove_all(opt.out_dir);
}
