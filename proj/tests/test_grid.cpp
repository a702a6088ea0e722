#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "galopp/grid.hpp"

#include <random>

using namespace galopp;

TEST_CASE("load_map parses free and obstacle cells")
{
    const GridSpec open = load_map("..\n..");
    CHECK(open.width == 2);
    CHECK(open.height == 2);
    CHECK(open.obstacle_count() == 0);

    // Row 0 of the text is the top (y = 1): "#." puts an obstacle at (0, 1).
    const GridSpec g = load_map("#.\n.#");
    CHECK(g.obstacle_count() == 2);
    CHECK(g.obstacles(0, 1));
    CHECK(g.obstacles(1, 0));
    CHECK_FALSE(g.obstacles(0, 0));
    CHECK(to_map_text(g) == "#.\n.#\n");
}

TEST_CASE("load_map rejects malformed text")
{
    CHECK_THROWS(load_map(""));
    CHECK_THROWS(load_map("...\n.."));
    CHECK_THROWS(load_map(".x\n.."));
}

TEST_CASE("shipped maps load")
{
    for (const char* name : {"open_room.txt", "two_room.txt", "four_room.txt"})
    {
        const GridSpec g = load_map_file(std::string(GALOPP_SOURCE_DIR) + "/maps/" + name);
        CHECK(g.width == 30);
        CHECK(g.height == 30);
        CHECK(g.obstacle_count() > 0);
        CHECK(free_space_connected(g));
    }
}

TEST_CASE("generate_obstacles hits the target count and keeps free space connected")
{
    CHECK(generate_obstacles(30, 30, 0.0, 1).obstacle_count() == 0);

    const GridSpec a = generate_obstacles(30, 30, 0.05, 7);
    CHECK(std::abs(a.obstacle_count() - 45) <= 1);
    CHECK(free_space_connected(a));

    const GridSpec b = generate_obstacles(30, 30, 0.30, 7);
    CHECK(std::abs(b.obstacle_count() - 270) <= 1);
    CHECK(free_space_connected(b));

    const GridSpec c = generate_obstacles(30, 30, 0.05, 7);
    CHECK((a.obstacles == c.obstacles).all());

    CHECK_THROWS(generate_obstacles(30, 30, 0.31, 7));
    CHECK_THROWS(generate_obstacles(30, 30, -0.1, 7));
}

TEST_CASE("sense_footprint clips at borders and drops obstacles")
{
    const GridSpec g = GridSpec::open(10, 10);
    CHECK(sense_footprint({5, 5}, SensorConfig{1}, g).size() == 9);
    CHECK(sense_footprint({5, 5}, SensorConfig{2}, g).size() == 25);
    CHECK(sense_footprint({0, 0}, SensorConfig{1}, g).size() == 4);
    CHECK(SensorConfig{3}.footprint() == 7);

    GridSpec h = g;
    h.obstacles(5, 6) = true;
    CHECK(sense_footprint({5, 5}, SensorConfig{1}, h).size() == 8);
}

TEST_CASE("step_field decays, clamps and resets")
{
    const GridSpec g = GridSpec::open(3, 1);
    PenaltyField f = PenaltyField::zeros(g);
    CellMask none = CellMask::Constant(3, 1, false);
    for (int k = 0; k < 3; ++k)
        f = step_field(f, none, g);
    CHECK(f.values(0, 0) == -3.0);
    CHECK(f.time == 3);

    f.values(1, 0) = -399.0;
    f = step_field(f, none, g);
    CHECK(f.values(1, 0) == -400.0);
    f = step_field(f, none, g);
    CHECK(f.values(1, 0) == -400.0);

    f.values(2, 0) = -250.0;
    CellMask m = none;
    m(2, 0) = true;
    f = step_field(f, m, g);
    CHECK(f.values(2, 0) == 0.0);
    f = step_field(f, m, g);
    CHECK(f.values(2, 0) == 0.0);
}

TEST_CASE("obstacle cells stay at zero")
{
    GridSpec g = GridSpec::open(3, 3);
    g.obstacles(1, 1) = true;
    PenaltyField f = PenaltyField::zeros(g);
    const CellMask none = CellMask::Constant(3, 3, false);
    for (int k = 0; k < 10; ++k)
        f = step_field(f, none, g);
    CHECK(f.values(1, 1) == 0.0);
    CHECK(team_reward(f) == -80.0);
}

TEST_CASE("team_reward sums the field")
{
    const GridSpec g = GridSpec::open(30, 30);
    PenaltyField f = PenaltyField::zeros(g);
    CHECK(team_reward(f) == 0.0);
    f.values(3, 4) = -3.0;
    f.values(7, 1) = -5.0;
    CHECK(team_reward(f) == -8.0);
    f.values.setConstant(-400.0);
    CHECK(team_reward(f) == -360000.0);
}

TEST_CASE("all-stay with nothing monitored loses one per unclamped free cell")
{
    std::mt19937_64 rng(3);
    const GridSpec g = generate_obstacles(12, 12, 0.1, 3);
    PenaltyField f = PenaltyField::zeros(g);
    int unclamped = 0;
    for (int x = 0; x < g.width; ++x)
        for (int y = 0; y < g.height; ++y)
            if (!g.obstacles(x, y))
            {
                // Integer values, so every cell above -400 loses exactly one.
                f.values(x, y) = (rng() % 4 == 0) ? -400.0 : -static_cast<double>(rng() % 400);
                unclamped += f.values(x, y) > -400.0 ? 1 : 0;
            }
    const CellMask none = CellMask::Constant(12, 12, false);
    CHECK(team_reward(f) - team_reward(step_field(f, none, g)) == unclamped);
}

TEST_CASE("monitoring an extra cell never lowers the next reward")
{
    std::mt19937_64 rng(11);
    const GridSpec g = GridSpec::open(8, 8);
    for (int trial = 0; trial < 200; ++trial)
    {
        PenaltyField f = PenaltyField::zeros(g);
        for (int x = 0; x < 8; ++x)
            for (int y = 0; y < 8; ++y)
                f.values(x, y) = -static_cast<double>(rng() % 401);
        CellMask m = CellMask::Constant(8, 8, false);
        for (int k = 0; k < 10; ++k)
            m(rng() % 8, rng() % 8) = true;
        CellMask more = m;
        more(rng() % 8, rng() % 8) = true;
        CHECK(team_reward(step_field(f, more, g)) >= team_reward(step_field(f, m, g)));
    }
}

TEST_CASE("apply_action moves one cell unless blocked")
{
    GridSpec g = GridSpec::open(10, 10);
    CHECK(apply_action({5, 5}, Action::up, g) == Cell{5, 6});
    CHECK(apply_action({5, 5}, Action::down, g) == Cell{5, 4});
    CHECK(apply_action({5, 5}, Action::left, g) == Cell{4, 5});
    CHECK(apply_action({5, 5}, Action::right, g) == Cell{6, 5});
    CHECK(apply_action({5, 5}, Action::stay, g) == Cell{5, 5});
    CHECK(apply_action({0, 0}, Action::left, g) == Cell{0, 0});
    CHECK(apply_action({9, 9}, Action::up, g) == Cell{9, 9});
    g.obstacles(6, 5) = true;
    CHECK(apply_action({5, 5}, Action::right, g) == Cell{5, 5});
}
