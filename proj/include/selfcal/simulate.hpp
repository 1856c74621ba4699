#pragma once

#include <cstdint>

#include "selfcal/likelihood.hpp"
#include "selfcal/model.hpp"

namespace selfcal {

// A simulated experiment: mock-true point, scenario, seed.
struct SimSpec {
    JointPoint mock_true;
    ScenarioConfig config;
    std::uint64_t seed = 0;
    int repetitions = 1;

    double nu() const;      // known nu from the config, or mock_true.nu
    void validate() const;  // mock-true physical, positive nu
};

// Draws the 24 recorded counts as independent Poisson(nu p_k) variates (the
// factorized form of Poisson-distributed pair emission followed by outcome
// multinomials).  Deterministic per (seed, repetition).
CountRecord simulate_counts(const SimSpec& spec, int repetition = 0);

}  // namespace selfcal
