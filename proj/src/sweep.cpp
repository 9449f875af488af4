#include "gbpl/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace gbpl {

namespace {

// splitmix64-style mixer so nested (seed, index) streams stay decorrelated
std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9e3779b97f4a7c15ull * (b + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

// The reachable entropy ceiling is set by the street count (how many of the
// 72x21 histogram cells can be occupied), so higher targets get denser grids.
int grid_nodes_for(double target) {
    if (target <= 0.85) return 324;
    if (target <= 0.90) return 676;
    return 1296;
}

// Candidate counts after each push of one query sequence, no tracking
// collapse: entry k is exactly what a fresh k+1-segment run would report.
std::vector<int> count_trajectory(const Hlg& g, const Query& query, const MatchConfig& cfg,
                                  const std::vector<std::vector<int>>& truth_chains, int budget,
                                  int* first_unique, bool* final_correct) {
    *first_unique = -1;
    *final_correct = false;
    std::vector<int> counts(query.size(), 0);
    CandidateSet set = initial_candidates(g);
    for (size_t k = 0; k < query.size(); ++k) {
        set = match_step(g, set, query[k], cfg);
        if (set.candidates.empty()) {
            *final_correct = false;
            break;  // later lengths inherit the dead end
        }
        std::vector<double> lp;
        lp.reserve(set.candidates.size());
        for (const auto& c : set.candidates) lp.push_back(std::exp(c.log_prob));
        const OtsuSplit split = otsu_split(lp);
        counts[k] = static_cast<int>(split.high.size());
        if (counts[k] == 1) {
            if (*first_unique < 0) *first_unique = static_cast<int>(k) + 1;
            const Candidate& win = set.candidates[split.high.front()];
            *final_correct = win.path.back() == truth_chains[k];
        } else {
            *final_correct = false;
        }
        if (static_cast<int>(set.candidates.size()) > budget) {
            for (size_t k2 = k + 1; k2 < query.size(); ++k2) counts[k2] = counts[k];
            break;
        }
    }
    return counts;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg) {
    if (cfg.n_targets < 1 || cfg.samples_per_map < 1 || cfg.n_max < 1)
        throw std::invalid_argument("run_sweep: nonpositive dimensions");
    SweepResult out;
    const double step =
        cfg.n_targets > 1 ? (cfg.entropy_max - cfg.entropy_min) / (cfg.n_targets - 1) : 0.0;
    for (int ti = 0; ti < cfg.n_targets; ++ti) {
        const double target = cfg.entropy_min + step * ti;
        SimMapSpec ms;
        ms.target_entropy = target;
        ms.n_intersections = grid_nodes_for(target);
        ms.sigma_g = cfg.sigma_g;
        ms.rng_seed = mix(cfg.seed, 1000 + ti);
        SimMap sm;
        try {
            sm = gen_map(ms);
        } catch (const UnreachableEntropy& e) {
            std::ostringstream w;
            w << "entropy target " << target << " skipped: " << e.what();
            out.warnings.push_back(w.str());
            continue;
        }

        QueryNoise qn;
        qn.sigma_theta = cfg.sigma_theta;
        qn.sigma_g = cfg.sigma_g;
        std::vector<DirectQuery> queries(cfg.samples_per_map);
        for (int si = 0; si < cfg.samples_per_map; ++si)
            queries[si] = gen_query_direct(sm.hlg, cfg.n_max, qn, mix(ms.rng_seed, si), cfg.route);

        for (const MatchMode mode : {MatchMode::HeadingLength, MatchMode::HeadingOnly}) {
            SweepRow row;
            row.target = target;
            row.entropy = sm.entropy;
            row.heading_entropy = sm.heading_entropy;
            row.map_seed = ms.rng_seed;
            row.mode = mode;
            row.n_to_unique.assign(cfg.samples_per_map, -1);
            std::vector<std::vector<int>> counts(cfg.samples_per_map);
            std::vector<char> correct(cfg.samples_per_map, 0);

            MatchConfig mc;
            mc.alpha = cfg.alpha;
            mc.mode = mode;
            mc.parallel = false;  // parallelism lives across samples

#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
            for (int si = 0; si < cfg.samples_per_map; ++si) {
                int first = -1;
                bool ok = false;
                counts[si] = count_trajectory(sm.hlg, queries[si].query, mc,
                                              queries[si].route.chains, cfg.candidate_budget,
                                              &first, &ok);
                row.n_to_unique[si] = first;
                correct[si] = ok ? 1 : 0;
            }

            for (int si = 0; si < cfg.samples_per_map; ++si)
                if (counts[si].back() == 1) {
                    ++row.final_unique;
                    if (correct[si]) ++row.final_correct;
                }
            row.cells.resize(cfg.n_max);
            for (int k = 0; k < cfg.n_max; ++k) {
                double sum = 0.0, sum2 = 0.0;
                int uniq = 0;
                for (int si = 0; si < cfg.samples_per_map; ++si) {
                    const double c = counts[si][k];
                    sum += c;
                    sum2 += c * c;
                    if (counts[si][k] == 1) ++uniq;
                }
                SweepCell& cell = row.cells[k];
                cell.n = k + 1;
                cell.mean_solutions = sum / cfg.samples_per_map;
                cell.std_solutions = std::sqrt(
                    std::max(0.0, sum2 / cfg.samples_per_map -
                                      cell.mean_solutions * cell.mean_solutions));
                cell.frac_unique = static_cast<double>(uniq) / cfg.samples_per_map;
            }
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

std::string sweep_to_csv(const SweepResult& res) {
    std::ostringstream os;
    os << "entropy,n,mode,mean_solutions,std\n";
    char buf[128];
    for (const auto& row : res.rows) {
        const char* mode = row.mode == MatchMode::HeadingLength ? "heading_length" : "heading_only";
        for (const auto& cell : row.cells) {
            std::snprintf(buf, sizeof buf, "%.4f,%d,%s,%.4f,%.4f\n", row.entropy, cell.n, mode,
                          cell.mean_solutions, cell.std_solutions);
            os << buf;
        }
    }
    return os.str();
}

}  // namespace gbpl
