#include "gbpl/global_loc.hpp"

#include "gbpl/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gbpl {

PairStats pair_statistics(const QuerySegment& q, const StraightPath& m) {
    if (q.theta_var <= 0.0 || m.theta_var <= 0.0 || q.d_var <= 0.0 || m.d_var <= 0.0)
        throw std::invalid_argument("pair_statistics: nonpositive variance");
    PairStats s;
    s.t = angle_diff(q.theta_mean, m.theta_mean) / std::sqrt(m.theta_var + q.theta_var);
    s.nu = welch_satterthwaite(q.theta_var, q.n_obs, m.theta_var, m.n_pts);
    s.z = (q.d_mean - m.d_mean) / std::sqrt(m.d_var + q.d_var);
    return s;
}

bool pair_test(const PairStats& s, double alpha, MatchMode mode) {
    if (alpha <= 0.0 || alpha >= 0.5) throw std::invalid_argument("pair_test: alpha out of range");
    if (std::abs(s.t) > student_t_quantile(1.0 - alpha / 2.0, s.nu)) return false;
    if (mode == MatchMode::HeadingOnly) return true;
    return std::abs(s.z) <= normal_quantile(1.0 - alpha / 2.0);
}

double pair_log_likelihood(const PairStats& s, MatchMode mode) {
    double ll = log_student_t_pdf(s.t, s.nu);
    if (mode == MatchMode::HeadingLength) ll += log_normal_pdf(s.z);
    return ll;
}

CandidateSet initial_candidates(const Hlg& g) {
    CandidateSet cs;
    cs.k = 0;
    const double prior = -std::log(std::max(g.n_long(), 1));
    for (int v : g.long_ids) {
        Candidate c;
        c.start = v;
        c.log_prob = prior;
        cs.candidates.push_back(std::move(c));
    }
    return cs;
}

namespace {

// All admissible one-segment extensions of a single candidate.
std::vector<Candidate> expand_candidate(const Hlg& g, const Candidate& cand,
                                        const QuerySegment& q, const MatchConfig& cfg) {
    std::vector<int> roots;
    if (cand.path.empty())
        roots.push_back(cand.start);
    else
        roots = turn_neighbors(g, cand.last_vertex(), deg2rad(cfg.turn_thresh_deg));

    std::vector<Candidate> out;
    for (int r : roots) {
        for (const auto& sp : straight_paths(g, r, deg2rad(cfg.straight_tol_deg))) {
            const PairStats s = pair_statistics(q, sp);
            if (!pair_test(s, cfg.alpha, cfg.mode)) continue;
            Candidate child = cand;
            child.path.push_back(sp.ids);
            child.log_prob += pair_log_likelihood(s, cfg.mode);
            MatchedSegment ms;
            ms.chain = sp.ids;
            ms.theta_map = sp.theta_mean;
            ms.d_map = sp.d_mean;
            ms.d_map_var = sp.d_var;
            ms.d_q = q.d_mean;
            ms.d_q_var = q.d_var;
            child.steps.push_back(std::move(ms));
            out.push_back(std::move(child));
        }
    }
    return out;
}

void normalize_step(CandidateSet& cs) {
    if (cs.candidates.empty()) return;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : cs.candidates) best = std::max(best, c.log_prob);
    for (auto& c : cs.candidates) c.log_prob -= best;
}

}  // namespace

CandidateSet match_step_serial(const Hlg& g, const CandidateSet& prev, const QuerySegment& q,
                               const MatchConfig& cfg) {
    if (prev.candidates.empty())
        throw LocalizationLost("match_step: empty candidate set");
    CandidateSet out;
    out.k = prev.k + 1;
    for (const auto& cand : prev.candidates)
        for (auto& child : expand_candidate(g, cand, q, cfg))
            out.candidates.push_back(std::move(child));
    normalize_step(out);
    return out;
}

CandidateSet match_step_parallel(const Hlg& g, const CandidateSet& prev, const QuerySegment& q,
                                 const MatchConfig& cfg) {
    if (prev.candidates.empty())
        throw LocalizationLost("match_step: empty candidate set");
    const int n = static_cast<int>(prev.candidates.size());
    std::vector<std::vector<Candidate>> buckets(n);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) buckets[i] = expand_candidate(g, prev.candidates[i], q, cfg);
    CandidateSet out;
    out.k = prev.k + 1;
    // Concatenating in candidate order keeps the result identical to the
    // serial path regardless of thread count.
    for (auto& b : buckets)
        for (auto& child : b) out.candidates.push_back(std::move(child));
    normalize_step(out);
    return out;
}

CandidateSet match_step(const Hlg& g, const CandidateSet& prev, const QuerySegment& q,
                        const MatchConfig& cfg) {
    return cfg.parallel ? match_step_parallel(g, prev, q, cfg)
                        : match_step_serial(g, prev, q, cfg);
}

OtsuSplit otsu_split(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("otsu_split: empty input");
    const int n = static_cast<int>(values.size());
    OtsuSplit out;
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });

    std::vector<double> prefix(n + 1, 0.0);
    for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + values[order[i]];

    double best_var = 0.0;
    int best_split = -1;  // low group = first best_split sorted values
    for (int i = 1; i < n; ++i) {
        // A split inside a run of equal values is not a realizable threshold.
        if (values[order[i - 1]] == values[order[i]]) continue;
        const double w0 = static_cast<double>(i) / n;
        const double w1 = 1.0 - w0;
        const double mu0 = prefix[i] / i;
        const double mu1 = (prefix[n] - prefix[i]) / (n - i);
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best_var) {
            best_var = between;
            best_split = i;
        }
    }
    if (best_split < 0) {
        // No interior threshold separates anything: keep everyone high.
        for (int i = 0; i < n; ++i) out.high.push_back(i);
        out.threshold = -std::numeric_limits<double>::infinity();
        return out;
    }
    out.threshold = values[order[best_split]];
    for (int i = 0; i < n; ++i)
        (values[i] >= out.threshold ? out.high : out.low).push_back(i);
    return out;
}

GlobalLocalizer::GlobalLocalizer(const Hlg& g, MatchConfig cfg)
    : g_(&g), cfg_(cfg), set_(initial_candidates(g)) {}

std::optional<Fix> GlobalLocalizer::push(const QuerySegment& q) {
    CandidateSet next = match_step(*g_, set_, q, cfg_);
    if (next.candidates.empty()) {
        ++restarts_;
        localized_ = false;
        next = match_step(*g_, initial_candidates(*g_), q, cfg_);
        if (next.candidates.empty()) {
            // Not even a fresh start matches this segment; wait for the next one.
            set_ = initial_candidates(*g_);
            return std::nullopt;
        }
    }
    set_ = std::move(next);

    // Threshold in linear probability space: scores are max-normalized, so a
    // decisive winner gives {1, eps, ...} which splits cleanly, while the log
    // domain spreads the tail over many decades and drags the threshold down.
    std::vector<double> lp;
    lp.reserve(set_.candidates.size());
    for (const auto& c : set_.candidates) lp.push_back(std::exp(c.log_prob));
    const OtsuSplit split = otsu_split(lp);
    if (split.high.size() != 1) {
        localized_ = false;
        return std::nullopt;
    }

    const Candidate winner = set_.candidates[split.high.front()];
    Fix f;
    f.k = set_.k;
    f.candidate = winner;
    f.vertex = winner.path.back().back();
    const MatchedSegment& last = winner.steps.back();
    const Vector2d base = g_->vertices[winner.path.back().front()].start_pt();
    f.position = base + last.d_q * heading_dir(last.theta_map);
    f.heading = last.theta_map;
    localized_ = true;
    set_.candidates = {winner};
    return f;
}

int GlobalLocalizer::n_solutions() const {
    if (set_.candidates.empty()) return 0;
    std::vector<double> lp;
    lp.reserve(set_.candidates.size());
    for (const auto& c : set_.candidates) lp.push_back(std::exp(c.log_prob));
    return static_cast<int>(otsu_split(lp).high.size());
}

PredictedProb predicted_match_probability(const AnalysisParams& p, MatchMode mode) {
    const double pass = 1.0 - p.alpha;
    const double a = mode == MatchMode::HeadingLength
                         ? pass * pass * p.k_d * p.k_l
                         : pass * p.k_d;
    PredictedProb out;
    out.raw = (a / p.n_v) * std::pow(a / p.n_b, p.n - 1);
    out.value = std::clamp(out.raw, 0.0, 1.0);
    out.clamped = out.raw != out.value;
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

McProb monte_carlo_match_probability(const AnalysisParams& p, long long trials, std::uint64_t seed,
                                     MatchMode mode) {
    if (trials < 1) throw std::invalid_argument("monte_carlo_match_probability: trials < 1");
    const int tests_per_step = mode == MatchMode::HeadingLength ? 2 : 1;
    const int n_tests = tests_per_step * p.n;
    const int k_levels = mode == MatchMode::HeadingLength ? p.k_d * p.k_l : p.k_d;
    const double p_match = 1.0 / k_levels;

    long long num_sum = 0, den_sum = 0;
    long double num_sq = 0.0L, den_sq = 0.0L;
    for (long long i = 0; i < trials; ++i) {
        std::mt19937_64 rng(splitmix64(seed + static_cast<std::uint64_t>(i)));
        std::uniform_real_distribution<double> u(0.0, 1.0);

        // True path: survives one heading (and one length) test per step.
        bool survives = true;
        for (int j = 0; j < n_tests; ++j)
            if (u(rng) < p.alpha) survives = false;
        num_sum += survives ? 1 : 0;
        num_sq += survives ? 1.0L : 0.0L;

        // Candidate paths whose label sequence coincides with the query's:
        // labels are i.i.d. uniform, so the per-level match counts follow a
        // binomial ladder over n_v starts and n_b successors each.
        std::binomial_distribution<long long> binom;
        long long m = binom(rng, decltype(binom)::param_type(p.n_v, p_match));
        for (int level = 1; level < p.n && m > 0; ++level)
            m = binom(rng, decltype(binom)::param_type(m * p.n_b, p_match));
        den_sum += m;
        den_sq += static_cast<long double>(m) * m;
    }

    McProb out;
    out.trials = trials;
    if (den_sum == 0) {
        out.p = std::numeric_limits<double>::quiet_NaN();
        out.stderr_ = std::numeric_limits<double>::infinity();
        return out;
    }
    const double t = static_cast<double>(trials);
    const double mean_n = static_cast<double>(num_sum) / t;
    const double mean_d = static_cast<double>(den_sum) / t;
    const double var_n =
        std::max(0.0, (static_cast<double>(num_sq) / t - mean_n * mean_n) * t / std::max(t - 1, 1.0));
    const double var_d =
        std::max(0.0, (static_cast<double>(den_sq) / t - mean_d * mean_d) * t / std::max(t - 1, 1.0));
    out.p = mean_n / mean_d;
    // Independent numerator and denominator: delta-method variance of the ratio.
    out.stderr_ = out.p * std::sqrt(var_n / (t * mean_n * mean_n + 1e-300) +
                                    var_d / (t * mean_d * mean_d + 1e-300));
    return out;
}

std::string candidate_set_to_json(const CandidateSet& cs) {
    nlohmann::ordered_json j;
    j["k"] = cs.k;
    j["candidates"] = nlohmann::ordered_json::array();
    for (const auto& c : cs.candidates) {
        nlohmann::ordered_json jc;
        jc["start"] = c.start;
        jc["path"] = c.path;
        jc["log_prob"] = c.log_prob;
        j["candidates"].push_back(std::move(jc));
    }
    return j.dump(2);
}

}  // namespace gbpl
