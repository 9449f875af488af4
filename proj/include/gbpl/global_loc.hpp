#pragma once

#include "gbpl/hlg.hpp"
#include "gbpl/qsg.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbpl {

enum class MatchMode { HeadingOnly, HeadingLength };

struct MatchConfig {
    double alpha = 0.05;  // per-test significance, fixed for a whole run
    MatchMode mode = MatchMode::HeadingLength;
    double straight_tol_deg = 10.0;  // heading agreement along a straight chain
    double turn_thresh_deg = 10.0;   // heading change that counts as a turn
    bool parallel = false;           // evaluate candidates with OpenMP
};

struct PairStats {
    double t = 0.0;   // heading discrepancy, studentized
    double nu = 0.0;  // effective degrees of freedom for t
    double z = 0.0;   // length discrepancy, standardized
};

PairStats pair_statistics(const QuerySegment& q, const StraightPath& m);

// Accept iff both two-tailed tests pass at level 1-alpha (the z test is
// skipped in heading-only mode).
bool pair_test(const PairStats& s, double alpha, MatchMode mode = MatchMode::HeadingLength);

// log f_T(t; nu) (+ log f_N(z) when lengths are used).
double pair_log_likelihood(const PairStats& s, MatchMode mode = MatchMode::HeadingLength);

// Bookkeeping for one matched query segment on one candidate; feeds the
// scale-factor estimate and the alignment stage after a fix.
struct MatchedSegment {
    std::vector<int> chain;  // straight-path vertex ids, travel order
    double theta_map = 0.0;
    double d_map = 0.0;
    double d_map_var = 0.0;
    double d_q = 0.0;
    double d_q_var = 0.0;
};

struct Candidate {
    int start = -1;                         // first matched vertex
    std::vector<std::vector<int>> path;     // one chain per matched segment
    double log_prob = 0.0;                  // <= 0 after per-step normalization
    std::vector<MatchedSegment> steps;

    int last_vertex() const { return path.empty() ? start : path.back().back(); }
};

struct CandidateSet {
    int k = 0;  // number of query segments matched so far
    std::vector<Candidate> candidates;
};

// Thrown when a step is attempted on an empty candidate set; the caller is
// expected to restart from the initial set.
class LocalizationLost : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// All long vertices, equally likely.
CandidateSet initial_candidates(const Hlg& g);

// One round of the sequential matcher: extend every candidate by one straight
// path (from the candidate's own vertex at k = 1, from its turn neighbors
// afterwards), keep extensions passing both hypothesis tests, accumulate
// log-likelihoods and renormalize by the step maximum.
CandidateSet match_step(const Hlg& g, const CandidateSet& prev, const QuerySegment& q,
                        const MatchConfig& cfg);
// Serial reference and OpenMP variant; match_step dispatches on cfg.parallel.
CandidateSet match_step_serial(const Hlg& g, const CandidateSet& prev, const QuerySegment& q,
                               const MatchConfig& cfg);
CandidateSet match_step_parallel(const Hlg& g, const CandidateSet& prev, const QuerySegment& q,
                                 const MatchConfig& cfg);

struct OtsuSplit {
    std::vector<int> high;  // indices into the input, original order
    std::vector<int> low;
    double threshold = 0.0;  // values >= threshold are high (when low nonempty)
};

// Two-class split maximizing between-class variance over the values.
// If no interior threshold improves on zero variance, everything is high.
OtsuSplit otsu_split(const std::vector<double>& values);

struct Fix {
    int k = 0;  // query index that produced the fix
    Candidate candidate;
    int vertex = -1;       // end vertex of the last matched chain
    Vector2d position;     // along the chain, d_q from its start
    double heading = 0.0;  // map heading of the matched chain
};

// Streaming wrapper: feed query segments in order, get a fix once exactly one
// candidate sits in Otsu's high-probability group. An empty surviving set
// triggers a restart from the initial candidates (counted, not fatal).
class GlobalLocalizer {
public:
    GlobalLocalizer(const Hlg& g, MatchConfig cfg = {});

    std::optional<Fix> push(const QuerySegment& q);

    const CandidateSet& pending() const { return set_; }
    // Size of the current high-probability group (the remaining "solutions").
    int n_solutions() const;
    int restarts() const { return restarts_; }
    bool localized() const { return localized_; }

private:
    const Hlg* g_;
    MatchConfig cfg_;
    CandidateSet set_;
    int restarts_ = 0;
    bool localized_ = false;
};

// Closed-form probability that the true path is recovered after n segments,
// under the random-graph model: n_v start vertices, n_b expected neighbors,
// k_d x k_l equiprobable labels.
struct AnalysisParams {
    int n_v = 1000;
    int n_b = 3;
    int k_d = 8;
    int k_l = 4;
    double alpha = 0.05;
    int n = 1;
};

struct PredictedProb {
    double raw = 0.0;    // formula value; can exceed 1 outside its regime
    double value = 0.0;  // clamped to [0, 1]
    bool clamped = false;
};

PredictedProb predicted_match_probability(const AnalysisParams& p,
                                          MatchMode mode = MatchMode::HeadingLength);

struct McProb {
    double p = 0.0;
    double stderr_ = 0.0;
    long long trials = 0;
};

// Monte-Carlo counterpart on the same generative model: the rate at which the
// true path survives all tests, divided by the rate of label-coincident
// candidate paths. Deterministic for a given seed.
McProb monte_carlo_match_probability(const AnalysisParams& p, long long trials, std::uint64_t seed,
                                     MatchMode mode = MatchMode::HeadingLength);

// Debug dump: {k, candidates:[{start, path, log_prob}]}.
std::string candidate_set_to_json(const CandidateSet& cs);

}  // namespace gbpl
