#pragma once

#include <array>
#include <string>
#include <vector>

#include "coagent/finite_mdp.hpp"
#include "coagent/rng.hpp"

namespace coagent {

/// Movement directions, fixed order used everywhere (sampling, kernels).
enum Direction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
constexpr int kNumDirections = 4;

/**
 * Nonstationary Four Rooms gridworld.
 *
 * 13x13 grid with four 5x5 rooms joined by four hallway cells; 104 open
 * cells in total. Every episode draws a fresh uniform (agent, goal) pair
 * (the goal is resampled while it collides with the agent). Moves succeed
 * with probability 2/3 and otherwise slip uniformly to one of the other
 * three directions; moves into a wall leave the agent in place. Reaching
 * the goal pays reward 1 and ends the episode.
 *
 * The learner observes only the agent cell. The goal stays internal, which
 * is what makes the task nonstationary from the learner's point of view.
 */
class FourRooms final : public Environment {
public:
    static constexpr int kOpenCells = 104;
    static constexpr double kMoveSuccess = 2.0 / 3.0;

    struct State {
        int agent = 0;  // open-cell index in [0, 104)
        int goal = 0;
    };

    struct StepOutcome {
        int next = 0;
        double reward = 0.0;
        bool done = false;
    };

    FourRooms();

    // -- pure transition core ------------------------------------------------

    State reset_state(Rng& rng) const;
    StepOutcome step_state(const State& state, int action, Rng& rng) const;

    /// Exact one-step distribution over next cells for (cell, action):
    /// 2/3 on the intended neighbor, 1/9 on each other direction, wall moves
    /// collapsed onto the source cell.
    std::vector<double> transition_kernel(int cell, int action) const;

    /// Neighbor cell in a direction; the cell itself when the move hits a wall.
    int neighbor(int cell, int direction) const;

    // -- geometry ------------------------------------------------------------

    static const std::string& layout();  // ASCII map, X = wall, space = open
    int rows() const { return 13; }
    int cols() const { return 13; }
    bool is_open(int row, int col) const;
    int cell_at(int row, int col) const;          // -1 on walls
    std::pair<int, int> cell_coords(int cell) const;

    // -- Environment interface (hides the goal from the learner) --------------

    int n_states() const override { return kOpenCells; }
    int n_actions() const override { return kNumDirections; }
    int reset(Rng& rng) override;
    StepResult step(int state, int action, Rng& rng) override;

    const State& current() const { return state_; }

private:
    std::array<int, 13 * 13> cell_index_;             // -1 for walls
    std::array<std::pair<int, int>, kOpenCells> coords_;
    std::array<std::array<int, kNumDirections>, kOpenCells> neighbor_;
    State state_;
};

}  // namespace coagent
