#pragma once

#include "gbpl/global_loc.hpp"
#include "gbpl/sim.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gbpl {

// Entropy-sweep protocol: generated maps across an entropy ladder, a batch of
// query sequences per map, candidate counts per sequence length in both match
// modes. Queries are features-plus-noise (gen_query_direct), not sensor runs.
struct SweepConfig {
    double entropy_min = 0.60;
    double entropy_max = 0.99;
    int n_targets = 40;
    int samples_per_map = 20;
    int n_max = 20;
    double sigma_theta = deg2rad(5.0);
    double sigma_g = 5.0;
    // Matching level. Far below the verification alpha on purpose: the true
    // candidate faces ~2*alpha*n_max drop chances per run, and a drop turns
    // the whole trajectory into a restart; 1e-5 keeps the expected number of
    // true-candidate drops across a full sweep near zero while the acceptance
    // region is still narrow enough to converge in a few segments.
    double alpha = 1e-5;
    // Heading-only matching on a low-entropy grid is a genuinely exponential
    // hypothesis class: every prefix of a collinear street run carries the
    // same heading, so the candidate set multiplies each step. Trajectories
    // whose set exceeds this budget stop expanding and carry their last
    // solution count forward; they never count as converged.
    int candidate_budget = 1500;
    std::uint64_t seed = 1;
    bool parallel = true;
    RouteSpec route;  // route shape for the sampled query sequences
};

struct SweepCell {
    int n = 0;
    double mean_solutions = 0.0;
    double std_solutions = 0.0;
    double frac_unique = 0.0;  // samples with exactly one surviving solution
};

// One (map, mode) curve.
struct SweepRow {
    double target = 0.0;
    double entropy = 0.0;  // measured joint entropy
    double heading_entropy = 0.0;
    std::uint64_t map_seed = 0;
    MatchMode mode = MatchMode::HeadingLength;
    std::vector<SweepCell> cells;  // index k holds n = k+1
    std::vector<int> n_to_unique;  // per sample; -1 when never unique
    // Correctness is judged at n_max, not at the first unique step: two
    // streets can agree in heading and length to within a fraction of the
    // noise, and such a near-tie can flip the early winner even though the
    // continuation disambiguates a step or two later.
    int final_unique = 0;   // samples whose count at n_max is exactly 1
    int final_correct = 0;  // of those, winner matched the planted route
};

struct SweepResult {
    std::vector<SweepRow> rows;  // two rows per reachable target, heading_length first
    std::vector<std::string> warnings;
};

SweepResult run_sweep(const SweepConfig& cfg);

// CSV with header `entropy,n,mode,mean_solutions,std`, rows in sweep order.
std::string sweep_to_csv(const SweepResult& res);

}  // namespace gbpl
