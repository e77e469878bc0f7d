#include "coagent/four_rooms.hpp"

#include <stdexcept>

namespace coagent {

namespace {

// Four 5x5 rooms, one opening in each wall between adjacent rooms.
const char* const kRows[13] = {
    "XXXXXXXXXXXXX",
    "X     X     X",
    "X     X     X",
    "X           X",
    "X     X     X",
    "X     X     X",
    "XX XXXX     X",
    "X     XXX XXX",
    "X     X     X",
    "X     X     X",
    "X           X",
    "X     X     X",
    "XXXXXXXXXXXXX",
};

constexpr int kRowDelta[kNumDirections] = {-1, 1, 0, 0};
constexpr int kColDelta[kNumDirections] = {0, 0, -1, 1};

}  // namespace

const std::string& FourRooms::layout() {
    static const std::string map = [] {
        std::string s;
        for (const char* row : kRows) {
            s += row;
            s += '\n';
        }
        return s;
    }();
    return map;
}

FourRooms::FourRooms() {
    cell_index_.fill(-1);
    int next = 0;
    for (int r = 0; r < rows(); ++r) {
        for (int c = 0; c < cols(); ++c) {
            if (kRows[r][c] == ' ') {
                cell_index_[r * cols() + c] = next;
                coords_[next] = {r, c};
                ++next;
            }
        }
    }
    if (next != kOpenCells)
        throw std::logic_error("layout does not have 104 open cells");
    for (int cell = 0; cell < kOpenCells; ++cell) {
        auto [r, c] = coords_[cell];
        for (int d = 0; d < kNumDirections; ++d) {
            const int r2 = r + kRowDelta[d];
            const int c2 = c + kColDelta[d];
            const int target = cell_index_[r2 * cols() + c2];
            neighbor_[cell][d] = target >= 0 ? target : cell;
        }
    }
}

bool FourRooms::is_open(int row, int col) const {
    return cell_index_[row * cols() + col] >= 0;
}

int FourRooms::cell_at(int row, int col) const {
    return cell_index_[row * cols() + col];
}

std::pair<int, int> FourRooms::cell_coords(int cell) const {
    return coords_[cell];
}

int FourRooms::neighbor(int cell, int direction) const {
    return neighbor_[cell][direction];
}

FourRooms::State FourRooms::reset_state(Rng& rng) const {
    State s;
    s.agent = rng.uniform_int(kOpenCells);
    s.goal = rng.uniform_int(kOpenCells);
    while (s.goal == s.agent) s.goal = rng.uniform_int(kOpenCells);
    return s;
}

FourRooms::StepOutcome FourRooms::step_state(const State& state, int action,
                                             Rng& rng) const {
    int dir = action;
    if (!rng.bernoulli(kMoveSuccess)) {
        // slip: uniform over the other three directions, in fixed order
        int k = rng.uniform_int(kNumDirections - 1);
        dir = k < action ? k : k + 1;
    }
    StepOutcome out;
    out.next = neighbor_[state.agent][dir];
    out.done = out.next == state.goal;
    out.reward = out.done ? 1.0 : 0.0;
    return out;
}

std::vector<double> FourRooms::transition_kernel(int cell, int action) const {
    std::vector<double> dist(kOpenCells, 0.0);
    for (int d = 0; d < kNumDirections; ++d) {
        const double p = d == action ? kMoveSuccess : (1.0 - kMoveSuccess) / 3.0;
        dist[neighbor_[cell][d]] += p;
    }
    return dist;
}

int FourRooms::reset(Rng& rng) {
    state_ = reset_state(rng);
    return state_.agent;
}

StepResult FourRooms::step(int state, int action, Rng& rng) {
    State s = state_;
    s.agent = state;
    const StepOutcome out = step_state(s, action, rng);
    state_.agent = out.next;
    return {out.next, out.reward, out.done};
}

}  // namespace coagent
